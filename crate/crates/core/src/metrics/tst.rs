use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetoxMode {
    /// 100 · (mean(orig) − mean(detoxed)) / mean(orig), clipped to [0, 100].
    #[default]
    NetReduction,
    /// 100 · fraction of rewrites scored below the threshold.
    StyleAccuracy,
}

impl std::str::FromStr for DetoxMode {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "net_reduction" | "net" => Ok(DetoxMode::NetReduction),
            "style_accuracy" | "sta" => Ok(DetoxMode::StyleAccuracy),
            other => Err(MetricsError::Config(format!("unknown detox mode {other:?}"))),
        }
    }
}

/// Linguistic acceptability of one text, in [0, 1] (or exactly 0/1 for hard verdicts).
pub trait AcceptabilityScorer: Sync {
    fn acceptability(&self, text: &str) -> Result<f64, String>;
}

impl<F: Fn(&str) -> Result<f64, String> + Sync> AcceptabilityScorer for F {
    fn acceptability(&self, text: &str) -> Result<f64, String> {
        self(text)
    }
}

/// Fixed-dimension sentence embedding.
pub trait SentenceEmbedder: Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, String>;
}

/// Hashed bag-of-words vectors. A deterministic lexical stand-in for a
/// paraphrastic embedding model; it does not credit paraphrases.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self { dim: 512 }
    }
}

impl SentenceEmbedder for HashingEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, String> {
        let dim = self.dim.max(1);
        let mut v = vec![0.0; dim];
        for w in crate::filter::words(text) {
            // FNV-1a
            let h = w.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3));
            v[(h % dim as u64) as usize] += 1.0;
        }
        Ok(v)
    }
}

fn check_lengths(left: usize, right: usize) -> Result<(), MetricsError> {
    if left != right {
        return Err(MetricsError::LengthMismatch { left, right });
    }
    if left == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn detox_reduction(orig: &[f64], detoxed: &[f64], mode: DetoxMode, threshold: f64) -> Result<f64, MetricsError> {
    check_lengths(orig.len(), detoxed.len())?;
    match mode {
        DetoxMode::NetReduction => {
            let base = mean(orig);
            if base == 0.0 {
                return Err(MetricsError::ZeroBaseline);
            }
            Ok((100.0 * (base - mean(detoxed)) / base).clamp(0.0, 100.0))
        }
        DetoxMode::StyleAccuracy => {
            let below = detoxed.iter().filter(|&&p| p < threshold).count();
            Ok(100.0 * below as f64 / detoxed.len() as f64)
        }
    }
}

pub fn fluency_scores(outputs: &[String], scorer: &dyn AcceptabilityScorer) -> Result<Vec<f64>, MetricsError> {
    outputs
        .par_iter()
        .enumerate()
        .map(|(index, text)| {
            scorer
                .acceptability(text)
                .map_err(|message| MetricsError::Scorer { index, message })
                .and_then(|a| {
                    if (0.0..=1.0).contains(&a) {
                        Ok(a)
                    } else {
                        Err(MetricsError::Scorer { index, message: format!("acceptability {a} outside [0, 1]") })
                    }
                })
        })
        .collect()
}

pub fn fluency(outputs: &[String], scorer: &dyn AcceptabilityScorer) -> Result<f64, MetricsError> {
    if outputs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(100.0 * mean(&fluency_scores(outputs, scorer)?))
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::DimensionMismatch { left: a.len(), right: b.len() });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(MetricsError::ZeroVector(0));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Raw cosine per pair.
pub fn preservation_scores(pairs: &[(String, String)], embedder: &dyn SentenceEmbedder) -> Result<Vec<f64>, MetricsError> {
    pairs
        .par_iter()
        .enumerate()
        .map(|(index, (a, b))| {
            let scorer_err = |message| MetricsError::Scorer { index, message };
            let va = embedder.embed(a).map_err(scorer_err)?;
            let vb = embedder.embed(b).map_err(scorer_err)?;
            cosine(&va, &vb).map_err(|e| match e {
                MetricsError::ZeroVector(_) => MetricsError::ZeroVector(index),
                other => other,
            })
        })
        .collect()
}

/// 100 · mean cosine, with negative similarities floored at 0.
pub fn preservation(pairs: &[(String, String)], embedder: &dyn SentenceEmbedder) -> Result<f64, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let sims = preservation_scores(pairs, embedder)?;
    Ok(preservation_from_sims(&sims))
}

pub fn preservation_from_sims(sims: &[f64]) -> f64 {
    100.0 * sims.iter().map(|s| s.max(0.0)).sum::<f64>() / sims.len() as f64
}

/// Harmonic mean of three percentages; 0 if any is 0.
pub fn j_score(detox: f64, fl: f64, preserve: f64) -> f64 {
    if detox <= 0.0 || fl <= 0.0 || preserve <= 0.0 {
        return 0.0;
    }
    3.0 / (1.0 / detox + 1.0 / fl + 1.0 / preserve)
}

/// One line of a score file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    #[serde(default)]
    pub orig_text: Option<String>,
    #[serde(default)]
    pub detox_text: Option<String>,
    pub orig_p: f64,
    pub detox_p: f64,
    /// Acceptability in [0, 1]; booleans are read as 0/1.
    #[serde(deserialize_with = "bool_or_prob")]
    pub fluent: f64,
    /// Raw cosine similarity.
    pub sim: f64,
}

fn bool_or_prob<'de, D: serde::Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum V {
        B(bool),
        F(f64),
    }
    Ok(match V::deserialize(d)? {
        V::B(b) => b as u8 as f64,
        V::F(f) => f,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TstReport {
    pub detox: f64,
    pub fluency: f64,
    pub preserve: f64,
    pub j_score: f64,
    pub mode: DetoxMode,
    pub pairs: Vec<ScoreRecord>,
}

pub fn tst_report(records: Vec<ScoreRecord>, mode: DetoxMode, threshold: f64) -> Result<TstReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let orig: Vec<f64> = records.iter().map(|r| r.orig_p).collect();
    let det: Vec<f64> = records.iter().map(|r| r.detox_p).collect();
    let detox = detox_reduction(&orig, &det, mode, threshold)?;
    let fluency = 100.0 * records.iter().map(|r| r.fluent).sum::<f64>() / records.len() as f64;
    let preserve = preservation_from_sims(&records.iter().map(|r| r.sim).collect::<Vec<_>>());
    Ok(TstReport { detox, fluency, preserve, j_score: j_score(detox, fluency, preserve), mode, pairs: records })
}

/// Scores every (id, original, rewrite) triple end to end.
pub fn evaluate_tst(
    items: &[(String, String, String)],
    toxicity: &(dyn Fn(&str) -> Result<f64, String> + Sync),
    scorer: &dyn AcceptabilityScorer,
    embedder: &dyn SentenceEmbedder,
    mode: DetoxMode,
    threshold: f64,
) -> Result<TstReport, MetricsError> {
    if items.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let outputs: Vec<String> = items.iter().map(|(_, _, d)| d.clone()).collect();
    let pairs: Vec<(String, String)> = items.iter().map(|(_, o, d)| (o.clone(), d.clone())).collect();
    let fluent = fluency_scores(&outputs, scorer)?;
    let sims = preservation_scores(&pairs, embedder)?;
    let probs: Vec<(f64, f64)> = items
        .par_iter()
        .enumerate()
        .map(|(index, (_, o, d))| {
            let err = |message| MetricsError::Scorer { index, message };
            Ok((toxicity(o).map_err(err)?, toxicity(d).map_err(err)?))
        })
        .collect::<Result<_, MetricsError>>()?;
    let records = items
        .iter()
        .zip(probs)
        .zip(fluent.into_iter().zip(sims))
        .map(|(((id, o, d), (op, dp)), (fl, sim))| ScoreRecord {
            id: id.clone(),
            orig_text: Some(o.clone()),
            detox_text: Some(d.clone()),
            orig_p: op,
            detox_p: dp,
            fluent: fl,
            sim,
        })
        .collect();
    tst_report(records, mode, threshold)
}
