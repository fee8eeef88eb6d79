use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::taxonomy::{BinaryLabel, CategoryLabel, LabelSet};

/// K×K counts, rows = gold, columns = predicted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Self {
        let k = labels.len();
        Self { labels, counts: vec![vec![0; k]; k] }
    }

    pub fn from_counts(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self, MetricsError> {
        let k = labels.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(MetricsError::LengthMismatch { left: counts.len(), right: k });
        }
        Ok(Self { labels, counts })
    }

    pub fn from_indices(labels: Vec<String>, golds: &[usize], preds: &[usize]) -> Result<Self, MetricsError> {
        check_lengths(golds.len(), preds.len())?;
        let mut cm = Self::new(labels);
        for (&g, &p) in golds.iter().zip(preds) {
            cm.add(g, p);
        }
        Ok(cm)
    }

    pub fn binary(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self {
            labels: vec![BinaryLabel::NonToxic.as_str().into(), BinaryLabel::Toxic.as_str().into()],
            counts: vec![vec![tn, fp], vec![fn_, tp]],
        }
    }

    pub fn add(&mut self, gold: usize, pred: usize) {
        self.counts[gold][pred] += 1;
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, gold: usize, pred: usize) -> u64 {
        self.counts[gold][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, gold: usize) -> u64 {
        self.counts[gold].iter().sum()
    }

    pub fn col_total(&self, pred: usize) -> u64 {
        self.counts.iter().map(|r| r[pred]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    /// One-vs-rest counts for class `c`.
    pub fn one_vs_rest(&self, c: usize) -> BinaryCounts {
        let tp = self.counts[c][c];
        let fp = self.col_total(c) - tp;
        let fn_ = self.row_total(c) - tp;
        BinaryCounts { tp, fp, fn_, tn: self.total() - tp - fp - fn_ }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl std::ops::AddAssign for BinaryCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.tn += o.tn;
    }
}

/// A ratio plus whether its denominator was zero (value then reported as 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: f64,
    pub undefined: bool,
}

impl Ratio {
    fn of(num: f64, den: f64) -> Self {
        if den == 0.0 {
            Ratio { value: 0.0, undefined: true }
        } else {
            Ratio { value: num / den, undefined: false }
        }
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// (TP·TN − FP·FN) / √((TP+FP)(TP+FN)(TN+FP)(TN+FN)); 0 when any factor is 0.
pub fn mcc_binary(c: BinaryCounts) -> Ratio {
    let (tp, fp, fn_, tn) = (c.tp as f64, c.fp as f64, c.fn_ as f64, c.tn as f64);
    let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    Ratio::of(tp * tn - fp * fn_, den.sqrt())
}

/// Binary MCC for K = 2; the K-category generalization (Gorodkin) otherwise,
/// which coincides with the binary formula at K = 2.
pub fn mcc(cm: &ConfusionMatrix) -> f64 {
    if cm.k() == 2 {
        return mcc_binary(cm.one_vs_rest(1)).value;
    }
    let s = cm.total() as f64;
    let c = cm.trace() as f64;
    let (mut pk_tk, mut pk2, mut tk2) = (0.0, 0.0, 0.0);
    for k in 0..cm.k() {
        let p = cm.col_total(k) as f64;
        let t = cm.row_total(k) as f64;
        pk_tk += p * t;
        pk2 += p * p;
        tk2 += t * t;
    }
    let den = ((s * s - pk2) * (s * s - tk2)).sqrt();
    Ratio::of(c * s - pk_tk, den).value
}

/// One-vs-rest MCC for every class.
pub fn per_class_mcc(cm: &ConfusionMatrix) -> Vec<f64> {
    (0..cm.k()).map(|c| mcc_binary(cm.one_vs_rest(c)).value).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    /// Gold positives.
    pub support: u64,
    pub counts: BinaryCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
    pub undefined: UndefinedFlags,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UndefinedFlags {
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
    pub mcc: bool,
}

impl UndefinedFlags {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.f1 || self.mcc
    }
}

impl ClassMetrics {
    pub fn from_counts(label: impl Into<String>, c: BinaryCounts) -> Self {
        let p = Ratio::of(c.tp as f64, (c.tp + c.fp) as f64);
        let r = Ratio::of(c.tp as f64, (c.tp + c.fn_) as f64);
        let f1_undefined = p.value + r.value == 0.0;
        let m = mcc_binary(c);
        Self {
            label: label.into(),
            support: c.tp + c.fn_,
            counts: c,
            precision: p.value,
            recall: r.value,
            f1: f1_score(p.value, r.value),
            mcc: m.value,
            undefined: UndefinedFlags {
                precision: p.undefined,
                recall: r.undefined,
                f1: f1_undefined,
                mcc: m.undefined,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub classes: Vec<ClassMetrics>,
    /// Single-label: fraction correct. Multi-label: fraction of correct
    /// per-class membership decisions.
    pub accuracy: f64,
    /// Fraction of instances whose predicted set equals the gold set.
    pub exact_match: f64,
    /// Micro-pooled P/R/F1 with support-weighted MCC.
    pub avg: Aggregate,
    /// MCC over the pooled one-vs-rest counts.
    pub avg_mcc_pooled: f64,
    #[serde(rename = "macro")]
    pub macro_: Aggregate,
    /// Classes excluded from the macro mean (zero support, `skip_empty`).
    #[serde(default)]
    pub macro_skipped: Vec<String>,
}

impl MetricsReport {
    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.classes.iter().find(|c| c.label == label)
    }

    pub fn any_undefined(&self) -> bool {
        self.classes.iter().any(|c| c.undefined.any())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportOptions {
    /// Drop zero-support classes from the macro mean instead of counting them as 0.
    pub skip_empty: bool,
}

fn check_lengths(left: usize, right: usize) -> Result<(), MetricsError> {
    if left != right {
        Err(MetricsError::LengthMismatch { left, right })
    } else {
        Ok(())
    }
}

fn aggregate(classes: &[ClassMetrics], opts: ReportOptions) -> (Aggregate, f64, Aggregate, Vec<String>) {
    let mut pooled = BinaryCounts::default();
    for c in classes {
        pooled += c.counts;
    }
    let micro = ClassMetrics::from_counts("pooled", pooled);
    let support: u64 = classes.iter().map(|c| c.support).sum();
    let weighted_mcc = if support == 0 {
        0.0
    } else {
        classes.iter().map(|c| c.mcc * c.support as f64).sum::<f64>() / support as f64
    };
    let avg = Aggregate { precision: micro.precision, recall: micro.recall, f1: micro.f1, mcc: weighted_mcc };

    let (kept, skipped): (Vec<&ClassMetrics>, Vec<&ClassMetrics>) =
        classes.iter().partition(|c| !opts.skip_empty || c.support > 0);
    let mean = |f: fn(&ClassMetrics) -> f64| {
        if kept.is_empty() {
            0.0
        } else {
            kept.iter().map(|c| f(c)).sum::<f64>() / kept.len() as f64
        }
    };
    let macro_ = Aggregate {
        precision: mean(|c| c.precision),
        recall: mean(|c| c.recall),
        f1: mean(|c| c.f1),
        mcc: mean(|c| c.mcc),
    };
    (avg, micro.mcc, macro_, skipped.into_iter().map(|c| c.label.clone()).collect())
}

/// Single-label report over an arbitrary class list (indices into `labels`).
pub fn multiclass_report(
    labels: &[String],
    preds: &[usize],
    golds: &[usize],
    opts: ReportOptions,
) -> Result<MetricsReport, MetricsError> {
    check_lengths(preds.len(), golds.len())?;
    if preds.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let cm = ConfusionMatrix::from_indices(labels.to_vec(), golds, preds)?;
    let classes: Vec<_> = (0..cm.k())
        .map(|c| ClassMetrics::from_counts(labels[c].clone(), cm.one_vs_rest(c)))
        .collect();
    let accuracy = cm.trace() as f64 / cm.total() as f64;
    let (avg, avg_mcc_pooled, macro_, macro_skipped) = aggregate(&classes, opts);
    Ok(MetricsReport {
        n: preds.len(),
        classes,
        accuracy,
        exact_match: accuracy,
        avg,
        avg_mcc_pooled,
        macro_,
        macro_skipped,
    })
}

/// Per-class P/R/F1 for non-toxic (index 0) and toxic (index 1), plus accuracy.
pub fn binary_report(preds: &[BinaryLabel], golds: &[BinaryLabel]) -> Result<MetricsReport, MetricsError> {
    let labels = [BinaryLabel::NonToxic.as_str().to_string(), BinaryLabel::Toxic.as_str().to_string()];
    let idx = |l: &BinaryLabel| l.is_toxic() as usize;
    let p: Vec<_> = preds.iter().map(idx).collect();
    let g: Vec<_> = golds.iter().map(idx).collect();
    multiclass_report(&labels, &p, &g, ReportOptions::default())
}

/// Multi-label report over arbitrary classes; each instance is a set of class indices.
pub fn multilabel_report_indexed(
    labels: &[String],
    pred_sets: &[Vec<usize>],
    gold_sets: &[Vec<usize>],
    opts: ReportOptions,
) -> Result<MetricsReport, MetricsError> {
    check_lengths(pred_sets.len(), gold_sets.len())?;
    if pred_sets.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let k = labels.len();
    let member = |set: &[usize]| {
        let mut v = vec![false; k];
        for &i in set {
            v[i] = true;
        }
        v
    };
    let mut counts = vec![BinaryCounts::default(); k];
    let mut exact = 0usize;
    for (p, g) in pred_sets.iter().zip(gold_sets) {
        let (p, g) = (member(p), member(g));
        if p == g {
            exact += 1;
        }
        for c in 0..k {
            let slot = &mut counts[c];
            match (p[c], g[c]) {
                (true, true) => slot.tp += 1,
                (true, false) => slot.fp += 1,
                (false, true) => slot.fn_ += 1,
                (false, false) => slot.tn += 1,
            }
        }
    }
    let classes: Vec<_> =
        counts.into_iter().zip(labels).map(|(c, l)| ClassMetrics::from_counts(l.clone(), c)).collect();
    let n = pred_sets.len();
    let correct: u64 = classes.iter().map(|c| c.counts.tp + c.counts.tn).sum();
    let accuracy = if k == 0 { 0.0 } else { correct as f64 / (n * k) as f64 };
    let (avg, avg_mcc_pooled, macro_, macro_skipped) = aggregate(&classes, opts);
    Ok(MetricsReport {
        n,
        classes,
        accuracy,
        exact_match: exact as f64 / n as f64,
        avg,
        avg_mcc_pooled,
        macro_,
        macro_skipped,
    })
}

/// Multi-label report over the twelve taxonomy classes.
pub fn multilabel_report(
    pred_sets: &[LabelSet],
    gold_sets: &[LabelSet],
    opts: ReportOptions,
) -> Result<MetricsReport, MetricsError> {
    let labels: Vec<String> = CategoryLabel::ALL.iter().map(|c| c.canonical_name().to_string()).collect();
    let idx = |s: &LabelSet| s.iter().map(CategoryLabel::index).collect::<Vec<_>>();
    let p: Vec<_> = pred_sets.iter().map(idx).collect();
    let g: Vec<_> = gold_sets.iter().map(idx).collect();
    multilabel_report_indexed(&labels, &p, &g, opts)
}
