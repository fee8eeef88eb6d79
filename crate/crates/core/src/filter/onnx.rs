//! Serialized sequence-classifier backend (ONNX, full-precision or 8-bit
//! quantized) executed with tract.
//!
//! The loaded plan is immutable; `SimplePlan::run` allocates per-call state, so
//! a single `Arc` is shared by every concurrent caller.

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use tract_onnx::prelude::*;

use super::FilterError;
use crate::tokenizer::{tokenize, TokenSequence, Vocab};

type Plan = Arc<TypedRunnableModel>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InputRole {
    Ids,
    Mask,
    TokenTypes,
}

impl InputRole {
    fn from_name(name: &str) -> Self {
        let lower = name.to_ascii_lowercase();
        if lower.contains("mask") {
            InputRole::Mask
        } else if lower.contains("type") || lower.contains("segment") {
            InputRole::TokenTypes
        } else {
            InputRole::Ids
        }
    }
}

pub struct OnnxClassifier {
    plan: Plan,
    roles: Vec<InputRole>,
    vocab: Vocab,
    max_len: usize,
}

impl std::fmt::Debug for OnnxClassifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OnnxClassifier")
            .field("roles", &self.roles)
            .field("vocab_size", &self.vocab.len())
            .field("max_len", &self.max_len)
            .finish()
    }
}

impl OnnxClassifier {
    pub fn load(path: impl AsRef<Path>, vocab: Vocab, max_len: usize) -> Result<Self, FilterError> {
        let path = path.as_ref();
        let mut file = std::fs::File::open(path)
            .map_err(|e| FilterError::ModelLoad(format!("{}: {e}", path.display())))?;
        Self::from_reader(&mut file, vocab, max_len)
    }

    pub fn from_bytes(bytes: &[u8], vocab: Vocab, max_len: usize) -> Result<Self, FilterError> {
        Self::from_reader(&mut &bytes[..], vocab, max_len)
    }

    fn from_reader(reader: &mut dyn Read, vocab: Vocab, max_len: usize) -> Result<Self, FilterError> {
        let load = |e: TractError| FilterError::ModelLoad(format!("{e:#}"));
        let mut model = tract_onnx::onnx().model_for_read(reader).map_err(load)?;

        let roles: Vec<InputRole> = model
            .input_outlets()
            .map_err(load)?
            .iter()
            .map(|o| InputRole::from_name(&model.node(o.node).name))
            .collect();
        if !roles.contains(&InputRole::Ids) && !roles.contains(&InputRole::Mask) {
            return Err(FilterError::ModelLoad("graph has no token-id or mask input".into()));
        }
        for i in 0..roles.len() {
            model = model
                .with_input_fact(i, i64::fact([1, max_len]).into())
                .map_err(load)?;
        }
        let plan = model
            .into_optimized()
            .and_then(|m| m.into_runnable())
            .map_err(load)?;
        Ok(Self { plan, roles, vocab, max_len })
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Raw `[non_toxic, toxic]` logits for one text.
    pub fn logits(&self, text: &str) -> Result<[f32; 2], FilterError> {
        let seq = tokenize(text, &self.vocab, self.max_len)?;
        self.logits_for(&seq)
    }

    pub fn logits_for(&self, seq: &TokenSequence) -> Result<[f32; 2], FilterError> {
        let inputs: TVec<TValue> = self
            .roles
            .iter()
            .map(|role| {
                let data: Vec<i64> = match role {
                    InputRole::Ids => seq.ids.iter().map(|&v| v as i64).collect(),
                    InputRole::Mask => seq.attention_mask.iter().map(|&v| v as i64).collect(),
                    InputRole::TokenTypes => vec![0; seq.ids.len()],
                };
                tract_ndarray::Array2::from_shape_vec((1, data.len()), data)
                    .map(|a| Tensor::from(a).into())
                    .map_err(|e| FilterError::Inference(e.to_string()))
            })
            .collect::<Result<_, _>>()?;

        let outputs = self
            .plan
            .run(inputs)
            .map_err(|e| FilterError::Inference(format!("{e:#}")))?;
        let first = outputs
            .first()
            .ok_or(FilterError::Shape { expected: 2, got: 0 })?;
        let as_f32 = first
            .cast_to::<f32>()
            .map_err(|e| FilterError::Inference(format!("{e:#}")))?;
        let values: Vec<f32> = as_f32
            .to_plain_array_view::<f32>()
            .map_err(|e| FilterError::Inference(format!("{e:#}")))?
            .iter()
            .copied()
            .collect();
        match values.as_slice() {
            [a, b] => Ok([*a, *b]),
            other => Err(FilterError::Shape { expected: 2, got: other.len() }),
        }
    }
}

/// Two-way softmax, returning `(p_non_toxic, p_toxic)`.
pub fn softmax2(logits: [f32; 2]) -> (f64, f64) {
    let (l0, l1) = (logits[0] as f64, logits[1] as f64);
    let m = l0.max(l1);
    let (e0, e1) = ((l0 - m).exp(), (l1 - m).exp());
    let z = e0 + e1;
    (e0 / z, e1 / z)
}
