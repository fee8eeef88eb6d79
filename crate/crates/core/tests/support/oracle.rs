//! Brute-force counting oracle for the classification metrics. Every value is
//! derived from per-instance membership cells with integer arithmetic and
//! compared against the library through cross-multiplied or squared forms,
//! so no code path is shared with the implementation.

#![allow(dead_code)]

use toxishield_core::metrics::MetricsReport;

pub const TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub tp: i128,
    pub fp: i128,
    pub fn_: i128,
    pub tn: i128,
}

/// Counts for class `k` by scanning every instance.
pub fn count(pred: &[Vec<bool>], gold: &[Vec<bool>], k: usize) -> Counts {
    let mut c = Counts::default();
    for (p, g) in pred.iter().zip(gold) {
        match (p[k], g[k]) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    c
}

pub fn one_hot(labels: &[usize], k: usize) -> Vec<Vec<bool>> {
    labels.iter().map(|&l| (0..k).map(|c| c == l).collect()).collect()
}

pub fn members(sets: &[Vec<usize>], k: usize) -> Vec<Vec<bool>> {
    sets.iter().map(|s| (0..k).map(|c| s.contains(&c)).collect()).collect()
}

/// `value` equals num/den, with 0 for a zero denominator.
fn ratio_ok(value: f64, num: i128, den: i128) -> bool {
    if den == 0 {
        value == 0.0
    } else {
        (value * den as f64 - num as f64).abs() <= TOL * den as f64
    }
}

/// `value` equals num/sqrt(den) via value² · den = num² and matching sign.
fn sqrt_ratio_ok(value: f64, num: i128, den: i128) -> bool {
    if den == 0 {
        return value == 0.0;
    }
    let sign_ok = (num == 0 && value.abs() <= TOL) || (num > 0) == (value > 0.0);
    sign_ok && (value * value * den as f64 - (num * num) as f64).abs() <= TOL * den as f64
}

fn mcc_parts(c: Counts) -> (i128, i128) {
    (c.tp * c.tn - c.fp * c.fn_, (c.tp + c.fp) * (c.tp + c.fn_) * (c.tn + c.fp) * (c.tn + c.fn_))
}

pub fn oracle_precision(c: Counts) -> f64 {
    frac(c.tp, c.tp + c.fp)
}

pub fn oracle_recall(c: Counts) -> f64 {
    frac(c.tp, c.tp + c.fn_)
}

/// 2TP / (2TP + FP + FN), the count form of the harmonic mean.
pub fn oracle_f1(c: Counts) -> f64 {
    frac(2 * c.tp, 2 * c.tp + c.fp + c.fn_)
}

pub fn oracle_mcc(c: Counts) -> f64 {
    let (num, den) = mcc_parts(c);
    if den == 0 {
        0.0
    } else {
        num as f64 / (den as f64).sqrt()
    }
}

fn frac(num: i128, den: i128) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

/// Checks every field of `report` against counts taken from the cells.
/// `single_label` selects instance accuracy over cell accuracy.
pub fn check_report(
    report: &MetricsReport,
    pred: &[Vec<bool>],
    gold: &[Vec<bool>],
    single_label: bool,
) -> Result<(), String> {
    let n = pred.len();
    let k = pred.first().map_or(0, Vec::len);
    if report.n != n || report.classes.len() != k {
        return Err(format!("shape: n {} vs {n}, k {} vs {k}", report.n, report.classes.len()));
    }
    let mut pooled = Counts::default();
    let mut support_total = 0i128;
    let mut weighted = 0.0;
    let (mut mp, mut mr, mut mf, mut mm) = (0.0, 0.0, 0.0, 0.0);
    for c in 0..k {
        let o = count(pred, gold, c);
        let got = &report.classes[c];
        let name = &got.label;
        if (got.counts.tp as i128, got.counts.fp as i128, got.counts.fn_ as i128, got.counts.tn as i128)
            != (o.tp, o.fp, o.fn_, o.tn)
        {
            return Err(format!("{name}: counts {:?} vs {o:?}", got.counts));
        }
        if got.support as i128 != o.tp + o.fn_ {
            return Err(format!("{name}: support {}", got.support));
        }
        if !ratio_ok(got.precision, o.tp, o.tp + o.fp) {
            return Err(format!("{name}: precision {} vs {}/{}", got.precision, o.tp, o.tp + o.fp));
        }
        if !ratio_ok(got.recall, o.tp, o.tp + o.fn_) {
            return Err(format!("{name}: recall {} vs {}/{}", got.recall, o.tp, o.tp + o.fn_));
        }
        if !ratio_ok(got.f1, 2 * o.tp, 2 * o.tp + o.fp + o.fn_) {
            return Err(format!("{name}: f1 {} vs counts {o:?}", got.f1));
        }
        let (num, den) = mcc_parts(o);
        if !sqrt_ratio_ok(got.mcc, num, den) {
            return Err(format!("{name}: mcc {} vs {num}/sqrt({den})", got.mcc));
        }
        if got.undefined.precision != (o.tp + o.fp == 0) || got.undefined.recall != (o.tp + o.fn_ == 0) {
            return Err(format!("{name}: undefined flags {:?}", got.undefined));
        }
        pooled.tp += o.tp;
        pooled.fp += o.fp;
        pooled.fn_ += o.fn_;
        pooled.tn += o.tn;
        support_total += o.tp + o.fn_;
        weighted += oracle_mcc(o) * (o.tp + o.fn_) as f64;
        mp += oracle_precision(o);
        mr += oracle_recall(o);
        mf += oracle_f1(o);
        mm += oracle_mcc(o);
    }

    let exact = pred.iter().zip(gold).filter(|(p, g)| p == g).count() as i128;
    if !ratio_ok(report.exact_match, exact, n as i128) {
        return Err(format!("exact_match {} vs {exact}/{n}", report.exact_match));
    }
    let (acc_num, acc_den) = if single_label {
        (exact, n as i128)
    } else {
        let cells = pred.iter().zip(gold).map(|(p, g)| p.iter().zip(g).filter(|(a, b)| a == b).count()).sum::<usize>();
        (cells as i128, (n * k) as i128)
    };
    if !ratio_ok(report.accuracy, acc_num, acc_den) {
        return Err(format!("accuracy {} vs {acc_num}/{acc_den}", report.accuracy));
    }

    if !ratio_ok(report.avg.precision, pooled.tp, pooled.tp + pooled.fp)
        || !ratio_ok(report.avg.recall, pooled.tp, pooled.tp + pooled.fn_)
        || !ratio_ok(report.avg.f1, 2 * pooled.tp, 2 * pooled.tp + pooled.fp + pooled.fn_)
    {
        return Err(format!("avg {:?} vs pooled {pooled:?}", report.avg));
    }
    let weighted = if support_total == 0 { 0.0 } else { weighted / support_total as f64 };
    if !close(report.avg.mcc, weighted) {
        return Err(format!("avg mcc {} vs {weighted}", report.avg.mcc));
    }
    let (num, den) = mcc_parts(pooled);
    if !sqrt_ratio_ok(report.avg_mcc_pooled, num, den) {
        return Err(format!("pooled mcc {} vs {num}/sqrt({den})", report.avg_mcc_pooled));
    }
    let kf = k as f64;
    let m = &report.macro_;
    if k > 0 && !(close(m.precision, mp / kf) && close(m.recall, mr / kf) && close(m.f1, mf / kf) && close(m.mcc, mm / kf))
    {
        return Err(format!("macro {m:?} vs ({}, {}, {}, {})", mp / kf, mr / kf, mf / kf, mm / kf));
    }
    Ok(())
}

/// K-category MCC as the correlation of the one-hot gold and prediction
/// matrices: cov(X, Y) / sqrt(cov(X, X) · cov(Y, Y)), summed over columns.
/// Scaled by n so every term stays an integer.
pub fn check_multiclass_mcc(value: f64, preds: &[usize], golds: &[usize], k: usize) -> Result<(), String> {
    let n = preds.len() as i128;
    let x = one_hot(golds, k);
    let y = one_hot(preds, k);
    let cov = |a: &[Vec<bool>], b: &[Vec<bool>]| -> i128 {
        (0..k)
            .map(|c| {
                let ab = a.iter().zip(b).filter(|(u, v)| u[c] && v[c]).count() as i128;
                let sa = a.iter().filter(|u| u[c]).count() as i128;
                let sb = b.iter().filter(|v| v[c]).count() as i128;
                n * ab - sa * sb
            })
            .sum()
    };
    let (cxy, cxx, cyy) = (cov(&x, &y), cov(&x, &x), cov(&y, &y));
    if sqrt_ratio_ok(value, cxy, cxx * cyy) {
        Ok(())
    } else {
        Err(format!("mcc {value} vs {cxy}/sqrt({cxx}*{cyy}) golds {golds:?} preds {preds:?}"))
    }
}

/// Calls `f` with every vector in `0..base` of length `len`.
pub fn for_each_assignment(len: usize, base: usize, mut f: impl FnMut(&[usize])) {
    let mut digits = vec![0usize; len];
    loop {
        f(&digits);
        let mut i = 0;
        loop {
            if i == len {
                return;
            }
            digits[i] += 1;
            if digits[i] < base {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Decodes a subset of `0..k` from a bitmask.
pub fn subset(mask: usize, k: usize) -> Vec<usize> {
    (0..k).filter(|c| mask >> c & 1 == 1).collect()
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toxishield_core::metrics::{
    binary_report, mcc, multiclass_report, multilabel_report, multilabel_report_indexed, ConfusionMatrix,
    ReportOptions,
};
use toxishield_core::{BinaryLabel, CategoryLabel, LabelSet};

#[derive(Debug, Default, Clone, Copy)]
pub struct SuiteCounts {
    pub binary: usize,
    pub multiclass: usize,
    pub multilabel_exhaustive: usize,
    pub multilabel_random: usize,
    pub taxonomy_random: usize,
}

impl SuiteCounts {
    pub fn total(&self) -> usize {
        self.binary + self.multiclass + self.multilabel_exhaustive + self.multilabel_random + self.taxonomy_random
    }
}

fn names(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("c{i}")).collect()
}

/// Binary reports for every pred/gold assignment up to n = 6.
pub fn binary_suite(max_n: usize) -> Result<usize, String> {
    let mut cases = 0;
    let mut err = None;
    for n in 1..=max_n {
        for_each_assignment(2 * n, 2, |d| {
            if err.is_some() {
                return;
            }
            let lab = |v: usize| if v == 1 { BinaryLabel::Toxic } else { BinaryLabel::NonToxic };
            let preds: Vec<_> = d[..n].iter().map(|&v| lab(v)).collect();
            let golds: Vec<_> = d[n..].iter().map(|&v| lab(v)).collect();
            let report = binary_report(&preds, &golds).map_err(|e| e.to_string());
            let res = report.and_then(|r| check_report(&r, &one_hot(&d[..n], 2), &one_hot(&d[n..], 2), true));
            if let Err(e) = res {
                err = Some(format!("binary {preds:?}/{golds:?}: {e}"));
            }
            cases += 1;
        });
    }
    err.map_or(Ok(cases), Err)
}

/// `mcc` and the single-label report for every assignment over K = 2 and 3.
pub fn multiclass_suite(max_n: usize) -> Result<usize, String> {
    let mut cases = 0;
    let mut err = None;
    for k in 2..=3 {
        let labels = names(k);
        for n in 1..=max_n {
            for_each_assignment(2 * n, k, |d| {
                if err.is_some() {
                    return;
                }
                let (preds, golds) = (&d[..n], &d[n..]);
                let cm = ConfusionMatrix::from_indices(labels.clone(), golds, preds).expect("lengths");
                let mut res = check_multiclass_mcc(mcc(&cm), preds, golds, k);
                if res.is_ok() {
                    res = multiclass_report(&labels, preds, golds, ReportOptions::default())
                        .map_err(|e| e.to_string())
                        .and_then(|r| check_report(&r, &one_hot(preds, k), &one_hot(golds, k), true));
                }
                if let Err(e) = res {
                    err = Some(format!("K={k}: {e}"));
                }
                cases += 1;
            });
        }
    }
    err.map_or(Ok(cases), Err)
}

fn check_multilabel(k: usize, p: &[Vec<usize>], g: &[Vec<usize>]) -> Result<(), String> {
    let r = multilabel_report_indexed(&names(k), p, g, ReportOptions::default()).map_err(|e| e.to_string())?;
    check_report(&r, &members(p, k), &members(g, k), false).map_err(|e| format!("K={k} {p:?}/{g:?}: {e}"))
}

/// Every subset assignment for (K, max n) in `plan`, then seeded random
/// assignments of 4 to 6 instances over 3 classes.
pub fn multilabel_suite(plan: &[(usize, usize)], random_cases: usize, seed: u64) -> Result<(usize, usize), String> {
    let mut exhaustive = 0;
    let mut err = None;
    for &(k, max_n) in plan {
        for n in 1..=max_n {
            for_each_assignment(2 * n, 1 << k, |d| {
                if err.is_some() {
                    return;
                }
                let p: Vec<_> = d[..n].iter().map(|&m| subset(m, k)).collect();
                let g: Vec<_> = d[n..].iter().map(|&m| subset(m, k)).collect();
                if let Err(e) = check_multilabel(k, &p, &g) {
                    err = Some(e);
                }
                exhaustive += 1;
            });
        }
    }
    if let Some(e) = err {
        return Err(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random_cases {
        let n = rng.gen_range(4..=6);
        let draw = |rng: &mut ChaCha8Rng| (0..n).map(|_| subset(rng.gen_range(0..8), 3)).collect::<Vec<_>>();
        let p = draw(&mut rng);
        let g = draw(&mut rng);
        check_multilabel(3, &p, &g)?;
    }
    Ok((exhaustive, random_cases))
}

fn random_label_set(rng: &mut ChaCha8Rng) -> LabelSet {
    if rng.gen_bool(0.3) {
        return LabelSet::non_toxic();
    }
    let toxic: Vec<CategoryLabel> = CategoryLabel::toxic().collect();
    let want = rng.gen_range(1..=3);
    let picked: Vec<CategoryLabel> = (0..want).map(|_| toxic[rng.gen_range(0..toxic.len())]).collect();
    LabelSet::new(picked).expect("toxic labels only")
}

/// Random instances over the full taxonomy through `multilabel_report`.
pub fn taxonomy_suite(cases: usize, seed: u64) -> Result<usize, String> {
    let k = CategoryLabel::ALL.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..cases {
        let n = rng.gen_range(1..=6);
        let p: Vec<LabelSet> = (0..n).map(|_| random_label_set(&mut rng)).collect();
        let g: Vec<LabelSet> = (0..n).map(|_| random_label_set(&mut rng)).collect();
        let idx = |s: &LabelSet| s.iter().map(CategoryLabel::index).collect::<Vec<_>>();
        let pi: Vec<_> = p.iter().map(idx).collect();
        let gi: Vec<_> = g.iter().map(idx).collect();
        let r = multilabel_report(&p, &g, ReportOptions::default()).map_err(|e| e.to_string())?;
        check_report(&r, &members(&pi, k), &members(&gi, k), false)?;
        for (c, label) in r.classes.iter().zip(CategoryLabel::ALL.iter()) {
            if c.label != label.canonical_name() {
                return Err(format!("class order: {} vs {}", c.label, label.canonical_name()));
            }
        }
    }
    Ok(cases)
}

pub const MULTILABEL_PLAN: [(usize, usize); 3] = [(1, 6), (2, 4), (3, 3)];

pub fn full_suite() -> Result<SuiteCounts, String> {
    let binary = binary_suite(6)?;
    let multiclass = multiclass_suite(6)?;
    let (multilabel_exhaustive, multilabel_random) = multilabel_suite(&MULTILABEL_PLAN, 20_000, 7)?;
    let taxonomy_random = taxonomy_suite(2_000, 11)?;
    Ok(SuiteCounts { binary, multiclass, multilabel_exhaustive, multilabel_random, taxonomy_random })
}
