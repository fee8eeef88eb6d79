use std::collections::BTreeSet;
use std::path::Path;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

use super::FilterError;

pub const DEFAULT_PROFANITY: &str = include_str!("../../data/profanity.txt");
pub const DEFAULT_ANGER: &str = include_str!("../../data/anger.txt");

/// Weight of one distinct profanity hit in the surrogate score.
pub const PROFANITY_WEIGHT: f64 = 0.9;
/// Weight of one distinct anger-marker hit in the surrogate score.
pub const ANGER_WEIGHT: f64 = 0.3;

#[derive(Debug, Clone)]
pub struct AngerMarker {
    pub name: String,
    pattern: Regex,
}

impl AngerMarker {
    pub fn new(name: impl Into<String>, pattern: &str) -> Result<Self, FilterError> {
        let name = name.into();
        let pattern = Regex::new(pattern)
            .map_err(|e| FilterError::Lexicon(format!("anger marker {name}: {e}")))?;
        Ok(Self { name, pattern })
    }

    pub fn pattern(&self) -> &str {
        self.pattern.as_str()
    }
}

/// Distinct matches found in one text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LexiconHits {
    pub profanity: BTreeSet<String>,
    pub anger: BTreeSet<String>,
}

impl LexiconHits {
    pub fn is_empty(&self) -> bool {
        self.profanity.is_empty() && self.anger.is_empty()
    }
}

/// Case-folded profanity terms plus anger-marker patterns.
#[derive(Debug, Clone)]
pub struct Lexicon {
    terms: BTreeSet<String>,
    max_words: usize,
    anger: Vec<AngerMarker>,
}

/// Case-folded word runs. `_` counts as a word character so identifiers stay whole.
pub fn words(text: &str) -> Vec<String> {
    let folded: String = text.nfc().collect::<String>().to_lowercase();
    folded
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

impl Lexicon {
    pub fn empty() -> Self {
        Self { terms: BTreeSet::new(), max_words: 0, anger: Vec::new() }
    }

    pub fn new<I, S>(terms: I, anger: Vec<AngerMarker>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lex = Self { anger, ..Self::empty() };
        for t in terms {
            lex.add_term(t.as_ref());
        }
        lex
    }

    pub fn add_term(&mut self, term: &str) {
        let w = words(term);
        if w.is_empty() {
            return;
        }
        self.max_words = self.max_words.max(w.len());
        self.terms.insert(w.join(" "));
    }

    /// Term list: one per line, `#` starts a comment.
    pub fn parse_terms(text: &str) -> Vec<String> {
        text.lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect()
    }

    /// Anger list: `name = regex` per line, `#` comment lines.
    pub fn parse_anger(text: &str) -> Result<Vec<AngerMarker>, FilterError> {
        text.lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                let (name, pat) = l
                    .split_once('=')
                    .ok_or_else(|| FilterError::Lexicon(format!("anger line without '=': {l}")))?;
                AngerMarker::new(name.trim(), pat.trim())
            })
            .collect()
    }

    pub fn from_texts(profanity: &str, anger: &str) -> Result<Self, FilterError> {
        Ok(Self::new(Self::parse_terms(profanity), Self::parse_anger(anger)?))
    }

    pub fn load(profanity: impl AsRef<Path>, anger: Option<&Path>) -> Result<Self, FilterError> {
        let terms = std::fs::read_to_string(profanity)?;
        let anger = match anger {
            Some(p) => std::fs::read_to_string(p)?,
            None => DEFAULT_ANGER.to_string(),
        };
        Self::from_texts(&terms, &anger)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }

    pub fn anger_markers(&self) -> &[AngerMarker] {
        &self.anger
    }

    pub fn profanity_hits(&self, text: &str) -> BTreeSet<String> {
        let ws = words(text);
        let mut hits = BTreeSet::new();
        for n in 1..=self.max_words.min(ws.len()) {
            for window in ws.windows(n) {
                let joined = window.join(" ");
                if self.terms.contains(&joined) {
                    hits.insert(joined);
                }
            }
        }
        hits
    }

    pub fn has_profanity(&self, text: &str) -> bool {
        !self.profanity_hits(text).is_empty()
    }

    pub fn scan(&self, text: &str) -> LexiconHits {
        let anger = self
            .anger
            .iter()
            .filter(|m| m.pattern.is_match(text))
            .map(|m| m.name.clone())
            .collect();
        LexiconHits { profanity: self.profanity_hits(text), anger }
    }

    /// `1 - 0.1^h * 0.7^a` for `h` distinct profanity and `a` distinct anger hits.
    pub fn score(&self, text: &str) -> f64 {
        let hits = self.scan(text);
        surrogate_probability(hits.profanity.len(), hits.anger.len())
    }
}

impl Default for Lexicon {
    fn default() -> Self {
        Self::from_texts(DEFAULT_PROFANITY, DEFAULT_ANGER).expect("bundled lexicon is valid")
    }
}

pub fn surrogate_probability(profanity_hits: usize, anger_hits: usize) -> f64 {
    let clean = (1.0 - PROFANITY_WEIGHT).powi(profanity_hits as i32)
        * (1.0 - ANGER_WEIGHT).powi(anger_hits as i32);
    (1.0 - clean).clamp(0.0, 1.0)
}
