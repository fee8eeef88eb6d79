//! Uncased WordPiece tokenization into fixed-length classifier input.
//!
//! Pipeline: NFC -> lowercase -> whitespace/punctuation pre-split ->
//! greedy longest-match-first WordPiece -> `[CLS] ... [SEP]` -> tail
//! truncation -> `[PAD]` to `max_len`.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

pub const DEFAULT_MAX_LEN: usize = 128;
pub const CONTINUATION_PREFIX: &str = "##";
/// Words longer than this (in chars) become a single UNK, as in BERT.
pub const MAX_CHARS_PER_WORD: usize = 100;

pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const UNK: &str = "[UNK]";
pub const PAD: &str = "[PAD]";

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("empty input text")]
    EmptyInput,
    #[error("max_len must be at least 3, got {0}")]
    MaxLenTooSmall(usize),
    #[error("vocabulary is missing special token {0}")]
    MissingSpecial(&'static str),
    #[error("duplicate vocabulary token {token:?} at line {line}")]
    DuplicateToken { token: String, line: usize },
    #[error("UNK and PAD share id {0}")]
    UnkIsPad(u32),
    #[error("reading vocabulary: {0}")]
    Io(#[from] std::io::Error),
}

/// Token -> id map with resolved special ids. Read-only after construction.
#[derive(Debug, Clone)]
pub struct Vocab {
    ids: HashMap<String, u32>,
    tokens: Vec<String>,
    cls: u32,
    sep: u32,
    unk: u32,
    pad: u32,
    prefix: String,
}

impl Vocab {
    /// One token per line; the zero-based line number is the id.
    pub fn from_lines(text: &str) -> Result<Self, TokenizerError> {
        Self::from_tokens(text.lines().map(|l| l.trim_end_matches('\r').to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TokenizerError> {
        Self::from_lines(&std::fs::read_to_string(path)?)
    }

    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, TokenizerError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if ids.insert(tok.clone(), i as u32).is_some() {
                return Err(TokenizerError::DuplicateToken { token: tok.clone(), line: i + 1 });
            }
        }
        let special = |name: &'static str| {
            ids.get(name).copied().ok_or(TokenizerError::MissingSpecial(name))
        };
        let (cls, sep, unk, pad) = (special(CLS)?, special(SEP)?, special(UNK)?, special(PAD)?);
        if unk == pad {
            return Err(TokenizerError::UnkIsPad(unk));
        }
        Ok(Self { ids, tokens, cls, sep, unk, pad, prefix: CONTINUATION_PREFIX.to_string() })
    }

    pub fn with_continuation_prefix(mut self, prefix: impl Into<String>) -> Self {
        self.prefix = prefix.into();
        self
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn cls_id(&self) -> u32 {
        self.cls
    }
    pub fn sep_id(&self) -> u32 {
        self.sep
    }
    pub fn unk_id(&self) -> u32 {
        self.unk
    }
    pub fn pad_id(&self) -> u32 {
        self.pad
    }
    pub fn continuation_prefix(&self) -> &str {
        &self.prefix
    }

    /// Rebuilds words from content ids by gluing continuation pieces back on.
    /// Special and padding ids are skipped.
    pub fn decode_words(&self, ids: &[u32]) -> Vec<String> {
        let mut words: Vec<String> = Vec::new();
        for &id in ids {
            if [self.cls, self.sep, self.pad].contains(&id) {
                continue;
            }
            let Some(tok) = self.token(id) else { continue };
            match tok.strip_prefix(self.prefix.as_str()) {
                Some(rest) if !words.is_empty() => words.last_mut().unwrap().push_str(rest),
                _ => words.push(tok.to_string()),
            }
        }
        words
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
    /// Number of non-padding positions (specials included).
    pub length: usize,
}

impl TokenSequence {
    /// Ids between `[CLS]` and `[SEP]`.
    pub fn content_ids(&self) -> &[u32] {
        &self.ids[1..self.length - 1]
    }
}

/// Greedy longest-prefix-first split of one pre-token. Any unmatched position
/// turns the whole word into `[UNK]`.
pub fn wordpiece_split(word: &str, vocab: &Vocab) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    if chars.len() > MAX_CHARS_PER_WORD {
        return vec![UNK.to_string()];
    }
    let mut pieces = Vec::new();
    let mut start = 0;
    while start < chars.len() {
        let mut end = chars.len();
        let mut found = None;
        while start < end {
            let mut candidate: String = chars[start..end].iter().collect();
            if start > 0 {
                candidate.insert_str(0, &vocab.prefix);
            }
            if vocab.ids.contains_key(&candidate) {
                found = Some(candidate);
                break;
            }
            end -= 1;
        }
        match found {
            Some(piece) => {
                pieces.push(piece);
                start = end;
            }
            None => return vec![UNK.to_string()],
        }
    }
    pieces
}

/// Lowercased pre-tokens: whitespace separates, every other non-alphanumeric
/// codepoint stands alone.
pub fn pre_tokenize(text: &str) -> Vec<String> {
    let normalized: String = text.nfc().collect::<String>().to_lowercase();
    let mut out = Vec::new();
    let mut current = String::new();
    for c in normalized.chars() {
        if c.is_whitespace() || c.is_control() {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
        } else if c.is_alphanumeric() {
            current.push(c);
        } else {
            if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
            out.push(c.to_string());
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

pub fn tokenize(text: &str, vocab: &Vocab, max_len: usize) -> Result<TokenSequence, TokenizerError> {
    if max_len < 3 {
        return Err(TokenizerError::MaxLenTooSmall(max_len));
    }
    if text.trim().is_empty() {
        return Err(TokenizerError::EmptyInput);
    }
    let budget = max_len - 2;
    let mut ids = Vec::with_capacity(max_len);
    ids.push(vocab.cls);
    'words: for word in pre_tokenize(text) {
        for piece in wordpiece_split(&word, vocab) {
            if ids.len() > budget {
                break 'words;
            }
            ids.push(vocab.id(&piece).unwrap_or(vocab.unk));
        }
    }
    ids.push(vocab.sep);
    let length = ids.len();
    ids.resize(max_len, vocab.pad);
    let mut attention_mask = vec![1u8; length];
    attention_mask.resize(max_len, 0);
    Ok(TokenSequence { ids, attention_mask, length })
}
