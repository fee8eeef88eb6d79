use std::fmt::Write as _;

use super::{MetricsReport, TstReport};

/// Model | P0 R0 F1_0 | P1 R1 F1_1 | Accuracy, two decimals.
pub fn binary_table(rows: &[(&str, &MetricsReport)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>5} {:>5} {:>5}  {:>5} {:>5} {:>5}  {:>8}",
        "Model", "P0", "R0", "F1_0", "P1", "R1", "F1_1", "Accuracy"
    );
    for (name, r) in rows {
        let c = |i: usize| &r.classes[i];
        let _ = writeln!(
            out,
            "{:<width$}  {:>5.2} {:>5.2} {:>5.2}  {:>5.2} {:>5.2} {:>5.2}  {:>8.2}",
            name,
            c(0).precision,
            c(0).recall,
            c(0).f1,
            c(1).precision,
            c(1).recall,
            c(1).f1,
            r.accuracy
        );
    }
    out
}

/// Per-class rows, then Avg and Macro rows and exact match.
pub fn multilabel_table(r: &MetricsReport) -> String {
    let width = r.classes.iter().map(|c| c.label.len()).max().unwrap_or(5).max(8);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>7} {:>6} {:>6} {:>6} {:>6}", "Class", "Support", "P", "R", "F1", "MCC");
    for c in &r.classes {
        let mark = if c.undefined.any() { " *" } else { "" };
        let _ = writeln!(
            out,
            "{:<width$}  {:>7} {:>6.2} {:>6.2} {:>6.2} {:>6.2}{mark}",
            c.label, c.support, c.precision, c.recall, c.f1, c.mcc
        );
    }
    for (name, a) in [("Avg", &r.avg), ("Macro", &r.macro_)] {
        let _ = writeln!(
            out,
            "{:<width$}  {:>7} {:>6.2} {:>6.2} {:>6.2} {:>6.2}",
            name, "", a.precision, a.recall, a.f1, a.mcc
        );
    }
    let _ = writeln!(out, "EM {:.2}  accuracy {:.2}  n {}", r.exact_match, r.accuracy, r.n);
    if r.any_undefined() {
        out.push_str("* zero denominator, reported as 0\n");
    }
    out
}

/// Model | DETOX | FL | PRESERVE | J-Score, percentages.
pub fn tst_table(rows: &[(&str, &TstReport)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>9} {:>7} {:>12} {:>11}", "Model", "DETOX (%)", "FL (%)", "PRESERVE (%)", "J-Score (%)");
    for (name, r) in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>9.2} {:>7.2} {:>12.2} {:>11.2}",
            name, r.detox, r.fluency, r.preserve, r.j_score
        );
    }
    out
}
