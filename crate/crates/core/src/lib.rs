//! Toxicity moderation for code-review comments: a local binary filter, a
//! taxonomy-constrained LLM classifier, an LLM rewriter, and the metrics and
//! dataset tooling used to evaluate them.

pub mod curation;
pub mod filter;
pub mod llm;
pub mod metrics;
pub mod taxonomy;
pub mod tokenizer;

pub use taxonomy::{
    normalize_label, BinaryLabel, CategoryLabel, LabelSet, Source, TaxonomyError, TextSample,
    ToxicityScore,
};
