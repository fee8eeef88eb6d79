use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    Unweighted,
    #[default]
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub kappa: f64,
    pub weighting: Weighting,
    pub k: usize,
    pub n: usize,
    /// Both raters gave one identical constant rating; kappa is set to 1.
    pub degenerate: bool,
}

fn weight(i: usize, j: usize, k: usize, w: Weighting) -> f64 {
    match w {
        Weighting::Unweighted => (i != j) as u8 as f64,
        Weighting::Quadratic => {
            let d = i as f64 - j as f64;
            d * d / ((k - 1) * (k - 1)) as f64
        }
    }
}

/// Cohen's kappa for ratings on a 1..=K ordinal scale.
pub fn weighted_kappa(a: &[u32], b: &[u32], k: usize, weighting: Weighting) -> Result<AgreementReport, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if k < 2 {
        return Err(MetricsError::Config(format!("scale size must be at least 2, got {k}")));
    }
    let mut observed = vec![vec![0.0; k]; k];
    for (idx, (&x, &y)) in a.iter().zip(b).enumerate() {
        for r in [x, y] {
            if r < 1 || r as usize > k {
                return Err(MetricsError::RatingOutOfRange { index: idx, rating: r, k });
            }
        }
        observed[x as usize - 1][y as usize - 1] += 1.0;
    }
    let n = a.len() as f64;
    let rows: Vec<f64> = observed.iter().map(|r| r.iter().sum::<f64>() / n).collect();
    let cols: Vec<f64> = (0..k).map(|j| observed.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let (mut wo, mut we) = (0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let w = weight(i, j, k, weighting);
            wo += w * observed[i][j] / n;
            we += w * rows[i] * cols[j];
        }
    }
    let report = |kappa, degenerate| AgreementReport { kappa, weighting, k, n: a.len(), degenerate };
    if we == 0.0 {
        return Ok(report(1.0, true));
    }
    Ok(report(1.0 - wo / we, false))
}
