//! Dataset construction: score binning, seeded stratified sampling, lexicon
//! purification, teacher-generated parallel corpora, and reproducible splits.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::Lexicon;
use crate::llm::{detoxify_with, ChatClient, GenParams, ReframeConfig};
use crate::taxonomy::{BinaryLabel, TextSample, ToxicityScore};

pub const DEFAULT_QUOTA: usize = 2100;

#[derive(Debug, Error)]
pub enum CurationError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid split ratios: {0}")]
    InvalidRatios(String),
    #[error("invalid bin boundaries: {0}")]
    InvalidBins(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Contiguous score intervals. Every interval is lower-closed and upper-open
/// except the last, which is closed at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    bounds: Vec<f64>,
}

impl Default for BinSpec {
    fn default() -> Self {
        Self { bounds: vec![0.10, 0.28, 0.46, 0.64, 0.82, 1.0] }
    }
}

impl BinSpec {
    pub fn new(bounds: Vec<f64>) -> Result<Self, CurationError> {
        if bounds.len() < 2 {
            return Err(CurationError::InvalidBins("need at least two boundaries".into()));
        }
        if bounds.windows(2).any(|w| w[0] >= w[1]) || bounds[0] < 0.0 || bounds[bounds.len() - 1] > 1.0 {
            return Err(CurationError::InvalidBins(format!("{bounds:?} must increase within [0, 1]")));
        }
        Ok(Self { bounds })
    }

    pub fn len(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `[lower, upper]` of 1-based bin `i`.
    pub fn interval(&self, i: usize) -> (f64, f64) {
        (self.bounds[i - 1], self.bounds[i])
    }
}

/// 1-based bin index, or `None` below the first boundary.
pub fn assign_bin(p: ToxicityScore, spec: &BinSpec) -> Option<usize> {
    let p = p.value();
    let n = spec.len();
    (1..=n).find(|&i| {
        let (lo, hi) = spec.interval(i);
        p >= lo && (p < hi || (i == n && p <= hi))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    #[serde(flatten)]
    pub sample: TextSample,
    pub p: ToxicityScore,
    pub bin: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub bin: usize,
    pub available: usize,
    pub quota: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub candidates: Vec<Candidate>,
    pub shortfalls: Vec<Shortfall>,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Up to `quota` samples per bin, shuffled with a per-bin seeded stream, bins in order.
pub fn stratified_sample(
    scored: &[(TextSample, ToxicityScore)],
    quota: usize,
    seed: u64,
    spec: &BinSpec,
) -> SampleOutcome {
    let mut bins: Vec<Vec<&(TextSample, ToxicityScore)>> = vec![Vec::new(); spec.len()];
    for item in scored {
        if let Some(b) = assign_bin(item.1, spec) {
            bins[b - 1].push(item);
        }
    }
    let mut out = SampleOutcome::default();
    if quota == 0 {
        return out;
    }
    for (i, mut members) in bins.into_iter().enumerate() {
        let bin = i + 1;
        if members.len() < quota {
            tracing::warn!(bin, available = members.len(), quota, "bin below quota");
            out.shortfalls.push(Shortfall { bin, available: members.len(), quota });
        }
        members.shuffle(&mut rng_for(seed, bin as u64));
        out.candidates.extend(members.into_iter().take(quota).map(|(s, p)| Candidate {
            sample: s.clone(),
            p: *p,
            bin,
        }));
    }
    out
}

/// Splits samples into (kept, removed) by word-boundary lexicon hits.
pub fn lexicon_filter(samples: Vec<TextSample>, lexicon: &Lexicon) -> (Vec<TextSample>, Vec<TextSample>) {
    samples.into_iter().partition(|s| !lexicon.has_profanity(&s.body))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelPair {
    pub id: String,
    pub toxic_text: String,
    pub detoxified_text: String,
    pub rationale: String,
    pub teacher_model: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairFailure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusOutcome {
    pub pairs: Vec<ParallelPair>,
    pub failures: Vec<PairFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusOptions {
    pub concurrency: usize,
    pub reframe: ReframeConfig,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self { concurrency: 4, reframe: ReframeConfig::default() }
    }
}

/// Runs the Reframer over every sample. Failures are recorded, never dropped;
/// output order follows input order.
pub fn build_parallel_corpus(
    toxic: &[TextSample],
    client: &dyn ChatClient,
    gen: &GenParams,
    opts: &CorpusOptions,
) -> CorpusOutcome {
    let teacher = client.model_name().to_string();
    let run = || -> Vec<_> {
        toxic
            .par_iter()
            .map(|s| detoxify_with(s, client, &opts.reframe, gen).map_err(|e| e.to_string()))
            .collect()
    };
    let results = match rayon::ThreadPoolBuilder::new().num_threads(opts.concurrency.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    };
    let mut out = CorpusOutcome::default();
    for (sample, result) in toxic.iter().zip(results) {
        match result {
            Ok(d) => out.pairs.push(ParallelPair {
                id: sample.id.clone(),
                toxic_text: sample.body.clone(),
                detoxified_text: d.detoxified,
                rationale: d.rationale,
                teacher_model: teacher.clone(),
                created_at: Utc::now(),
            }),
            Err(error) => {
                tracing::warn!(id = %sample.id, %error, "teacher failed");
                out.failures.push(PairFailure { id: sample.id.clone(), error });
            }
        }
    }
    out
}

/// One line of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<BinaryLabel>,
}

impl DatasetRecord {
    pub fn sample(&self) -> TextSample {
        TextSample::new(self.id.clone(), self.body.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StratifyKey {
    BinaryLabel,
    #[default]
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Named parts with percentages summing to 100. The first part receives remainders.
    pub parts: Vec<(String, u32)>,
    pub seed: u64,
    pub stratify: StratifyKey,
}

impl SplitSpec {
    pub fn new(parts: &[(&str, u32)], seed: u64, stratify: StratifyKey) -> Result<Self, CurationError> {
        let spec = Self { parts: parts.iter().map(|(n, r)| (n.to_string(), *r)).collect(), seed, stratify };
        spec.validate()?;
        Ok(spec)
    }

    /// "80/10/10" → train/validation/test; "80/20" → train/test.
    pub fn parse_ratios(text: &str, seed: u64, stratify: StratifyKey) -> Result<Self, CurationError> {
        let ratios: Vec<u32> = text
            .split(['/', ':', ','])
            .map(|r| r.trim().parse().map_err(|_| CurationError::InvalidRatios(text.into())))
            .collect::<Result<_, _>>()?;
        let names: &[&str] = match ratios.len() {
            2 => &["train", "test"],
            3 => &["train", "validation", "test"],
            _ => return Err(CurationError::InvalidRatios(format!("{text}: expected 2 or 3 parts"))),
        };
        let parts: Vec<(&str, u32)> = names.iter().copied().zip(ratios).collect();
        Self::new(&parts, seed, stratify)
    }

    fn validate(&self) -> Result<(), CurationError> {
        let total: u32 = self.parts.iter().map(|(_, r)| r).sum();
        if self.parts.is_empty() || total != 100 {
            return Err(CurationError::InvalidRatios(format!("ratios sum to {total}, expected 100")));
        }
        Ok(())
    }
}

/// Per-group part sizes. Non-first parts get `floor(N·r/100)` items overall and
/// the first part the rest. Each cell starts at `floor(n_g·r/100)`; the
/// missing items are handed out one per cell, columns with the largest
/// shortfall first, each to the groups with the most items still unplaced.
fn allocate(group_sizes: &[usize], ratios: &[u32]) -> Vec<Vec<usize>> {
    let total: usize = group_sizes.iter().sum();
    let parts = ratios.len();
    let mut alloc: Vec<Vec<usize>> =
        group_sizes.iter().map(|&n| ratios.iter().map(|&r| n * r as usize / 100).collect()).collect();
    let mut targets: Vec<usize> = ratios.iter().map(|&r| total * r as usize / 100).collect();
    targets[0] = total - targets[1..].iter().sum::<usize>();
    let mut row_left: Vec<usize> =
        group_sizes.iter().zip(&alloc).map(|(&n, row)| n - row.iter().sum::<usize>()).collect();
    let col_need: Vec<usize> = (0..parts)
        .map(|j| targets[j].saturating_sub(alloc.iter().map(|row| row[j]).sum::<usize>()))
        .collect();
    let mut cols: Vec<usize> = (0..parts).collect();
    cols.sort_by(|&a, &b| col_need[b].cmp(&col_need[a]).then(a.cmp(&b)));
    for j in cols {
        let mut rows: Vec<usize> = (0..group_sizes.len()).filter(|&g| row_left[g] > 0).collect();
        let frac = |g: usize| group_sizes[g] * ratios[j] as usize % 100;
        rows.sort_by(|&a, &b| row_left[b].cmp(&row_left[a]).then(frac(b).cmp(&frac(a))).then(a.cmp(&b)));
        for g in rows.into_iter().take(col_need[j]) {
            alloc[g][j] += 1;
            row_left[g] -= 1;
        }
    }
    for (g, left) in row_left.into_iter().enumerate() {
        alloc[g][0] += left;
    }
    alloc
}

/// Seeded split into named parts. With a stratify key, each group is split
/// independently so per-group proportions hold within one item.
pub fn split_by<T: Clone>(
    items: &[T],
    spec: &SplitSpec,
    key: impl Fn(&T) -> String,
) -> Result<Vec<(String, Vec<T>)>, CurationError> {
    spec.validate()?;
    if items.is_empty() {
        return Err(CurationError::EmptyDataset);
    }
    let mut groups: BTreeMap<String, Vec<&T>> = BTreeMap::new();
    for item in items {
        groups.entry(key(item)).or_default().push(item);
    }
    let sizes: Vec<usize> = groups.values().map(Vec::len).collect();
    let ratios: Vec<u32> = spec.parts.iter().map(|(_, r)| *r).collect();
    let alloc = allocate(&sizes, &ratios);
    let mut parts: Vec<Vec<T>> = vec![Vec::new(); ratios.len()];
    for (g, (_, mut members)) in groups.into_iter().enumerate() {
        members.shuffle(&mut rng_for(spec.seed, g as u64));
        let mut rest = members.as_slice();
        for (j, &count) in alloc[g].iter().enumerate() {
            let (head, tail) = rest.split_at(count);
            parts[j].extend(head.iter().map(|&t| t.clone()));
            rest = tail;
        }
    }
    let stream = u64::MAX - 1;
    Ok(spec
        .parts
        .iter()
        .zip(parts)
        .enumerate()
        .map(|(j, ((name, _), mut items))| {
            items.shuffle(&mut rng_for(spec.seed, stream - j as u64));
            (name.clone(), items)
        })
        .collect())
}

pub fn split(dataset: &[DatasetRecord], spec: &SplitSpec) -> Result<Vec<(String, Vec<DatasetRecord>)>, CurationError> {
    let stratify = spec.stratify;
    split_by(dataset, spec, |r| match stratify {
        StratifyKey::None => String::new(),
        StratifyKey::BinaryLabel => r.label.map(|l| l.as_str().to_string()).unwrap_or_default(),
    })
}

pub fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>, CurationError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| CurationError::Parse { line: i + 1, message: e.to_string() })?,
        );
    }
    Ok(out)
}

pub fn read_jsonl_file<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, CurationError> {
    read_jsonl(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn write_jsonl<T: Serialize>(mut writer: impl Write, items: &[T]) -> Result<(), CurationError> {
    for item in items {
        serde_json::to_writer(&mut writer, item).map_err(|e| CurationError::Parse { line: 0, message: e.to_string() })?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: f64) -> ToxicityScore {
        ToxicityScore::new(v).unwrap()
    }

    #[test]
    fn bins_follow_table_conventions() {
        let spec = BinSpec::default();
        assert_eq!(assign_bin(p(0.05), &spec), None);
        assert_eq!(assign_bin(p(0.10), &spec), Some(1));
        assert_eq!(assign_bin(p(0.2799), &spec), Some(1));
        assert_eq!(assign_bin(p(0.28), &spec), Some(2));
        assert_eq!(assign_bin(p(0.46), &spec), Some(3));
        assert_eq!(assign_bin(p(0.64), &spec), Some(4));
        assert_eq!(assign_bin(p(0.82), &spec), Some(5));
        assert_eq!(assign_bin(p(1.0), &spec), Some(5));
    }

    #[test]
    fn bin_spec_validation() {
        assert!(BinSpec::new(vec![0.5]).is_err());
        assert!(BinSpec::new(vec![0.5, 0.3]).is_err());
        assert_eq!(BinSpec::new(vec![0.0, 0.5, 1.0]).unwrap().len(), 2);
    }

    fn scored(n: usize) -> Vec<(TextSample, ToxicityScore)> {
        (0..n).map(|i| (TextSample::new(format!("s{i}"), "x"), p((i % 100) as f64 / 100.0))).collect()
    }

    #[test]
    fn sampling_quota_and_determinism() {
        let data = scored(1000);
        let spec = BinSpec::default();
        assert!(stratified_sample(&data, 0, 7, &spec).candidates.is_empty());
        let a = stratified_sample(&data, 50, 7, &spec);
        assert_eq!(a.candidates.len(), 250);
        assert!(a.shortfalls.is_empty());
        assert_eq!(a, stratified_sample(&data, 50, 7, &spec));
        assert_ne!(a, stratified_sample(&data, 50, 8, &spec));
        for c in &a.candidates {
            assert_eq!(assign_bin(c.p, &spec), Some(c.bin));
        }
        let short = stratified_sample(&data, 500, 7, &spec);
        assert_eq!(short.shortfalls.len(), 5);
        assert_eq!(short.candidates.len(), data.iter().filter(|(_, p)| p.value() >= 0.10).count());
    }

    #[test]
    fn filter_partitions() {
        let samples = vec![
            TextSample::new("1", "this is damn slow"),
            TextSample::new("2", "use a classical approach"),
            TextSample::new("3", "LGTM"),
        ];
        let (kept, removed) = lexicon_filter(samples.clone(), &Lexicon::empty());
        assert_eq!((kept.len(), removed.len()), (3, 0));
        let lex = Lexicon::new(["damn", "ass"], vec![]);
        let (kept, removed) = lexicon_filter(samples, &lex);
        assert_eq!(removed.iter().map(|s| s.id.as_str()).collect::<Vec<_>>(), ["1"]);
        assert_eq!(kept.iter().map(|s| s.id.as_str()).collect::<Vec<_>>(), ["2", "3"]);
    }

    fn records(n: usize, toxic_every: usize) -> Vec<DatasetRecord> {
        (0..n)
            .map(|i| DatasetRecord {
                id: format!("r{i}"),
                body: "b".into(),
                p: None,
                label: Some(if i % toxic_every == 0 { BinaryLabel::Toxic } else { BinaryLabel::NonToxic }),
            })
            .collect()
    }

    fn sizes(parts: &[(String, Vec<DatasetRecord>)]) -> Vec<usize> {
        parts.iter().map(|(_, v)| v.len()).collect()
    }

    #[test]
    fn split_sizes() {
        let spec = SplitSpec::parse_ratios("80/10/10", 1, StratifyKey::None).unwrap();
        assert_eq!(sizes(&split(&records(10, 3), &spec).unwrap()), [8, 1, 1]);
        let spec = SplitSpec::parse_ratios("80/20", 1, StratifyKey::BinaryLabel).unwrap();
        let parts = split(&records(10_120, 3), &spec).unwrap();
        assert_eq!(sizes(&parts), [8096, 2024]);
        assert!(SplitSpec::parse_ratios("80/30", 1, StratifyKey::None).is_err());
        assert!(matches!(split(&[], &spec), Err(CurationError::EmptyDataset)));
    }

    #[test]
    fn split_is_exhaustive_disjoint_and_stratified() {
        let data = records(1003, 4);
        let spec = SplitSpec::parse_ratios("70/15/15", 9, StratifyKey::BinaryLabel).unwrap();
        let parts = split(&data, &spec).unwrap();
        let mut ids: Vec<_> = parts.iter().flat_map(|(_, v)| v.iter().map(|r| r.id.clone())).collect();
        ids.sort();
        let mut want: Vec<_> = data.iter().map(|r| r.id.clone()).collect();
        want.sort();
        assert_eq!(ids, want);
        let toxic_total = data.iter().filter(|r| r.label == Some(BinaryLabel::Toxic)).count() as f64;
        for ((_, part), ratio) in parts.iter().zip([70.0, 15.0, 15.0]) {
            let toxic = part.iter().filter(|r| r.label == Some(BinaryLabel::Toxic)).count() as f64;
            assert!((toxic - toxic_total * ratio / 100.0).abs() <= 1.0 + 1e-9);
        }
        assert_eq!(parts, split(&data, &spec).unwrap());
    }

    #[test]
    fn allocation_matches_global_targets() {
        assert_eq!(allocate(&[5061, 5059], &[80, 20]), vec![vec![4049, 1012], vec![4047, 1012]]);
        let a = allocate(&[251, 752], &[70, 15, 15]);
        assert_eq!((0..3).map(|j| a[0][j] + a[1][j]).collect::<Vec<_>>(), [703, 150, 150]);
        for (g, n) in [251.0, 752.0].into_iter().enumerate() {
            for (j, r) in [70.0, 15.0, 15.0].into_iter().enumerate() {
                assert!((a[g][j] as f64 - n * r / 100.0).abs() <= 1.0, "{a:?}");
            }
        }
        let a = allocate(&[1, 1, 1], &[80, 10, 10]);
        assert_eq!(a.iter().map(|g| g.iter().sum::<usize>()).collect::<Vec<_>>(), [1, 1, 1]);
        assert_eq!((0..3).map(|j| a.iter().map(|g| g[j]).sum::<usize>()).collect::<Vec<_>>(), [3, 0, 0]);
    }

    #[test]
    fn jsonl_round_trip() {
        let data = records(3, 2);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &data).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().contains(r#""label":"toxic""#));
        let back: Vec<DatasetRecord> = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, data);
        let bad: Result<Vec<DatasetRecord>, _> = read_jsonl("{}\n".as_bytes());
        assert!(matches!(bad, Err(CurationError::Parse { line: 1, .. })));
    }
}
