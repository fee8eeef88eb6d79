//! Evaluation arithmetic: binary and multi-label classification metrics,
//! style-transfer metrics with J-Score, and inter-rater agreement.
//!
//! Zero denominators yield 0 and set a flag on the class instead of NaN.

mod agreement;
mod classification;
pub mod report;
mod tst;

use thiserror::Error;

pub use agreement::{weighted_kappa, AgreementReport, Weighting};
pub use classification::{
    binary_report, f1_score, mcc, mcc_binary, multiclass_report, multilabel_report,
    multilabel_report_indexed, per_class_mcc, Aggregate, BinaryCounts, ClassMetrics,
    ConfusionMatrix, MetricsReport, Ratio, ReportOptions, UndefinedFlags,
};
pub use report::{binary_table, multilabel_table, tst_table};
pub use tst::{
    cosine, detox_reduction, evaluate_tst, fluency, fluency_scores, j_score, preservation,
    preservation_from_sims, preservation_scores, tst_report, AcceptabilityScorer, DetoxMode,
    HashingEmbedder, ScoreRecord, SentenceEmbedder, TstReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("original toxicity mean is zero; net reduction undefined")]
    ZeroBaseline,
    #[error("scorer failed on item {index}: {message}")]
    Scorer { index: usize, message: String },
    #[error("zero embedding vector at pair {0}")]
    ZeroVector(usize),
    #[error("embedding dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("rating {rating} at index {index} outside 1..={k}")]
    RatingOutOfRange { index: usize, rating: u32, k: usize },
    #[error("{0}")]
    Config(String),
}
