//! Shared domain vocabulary: comment samples, toxicity scores, and the
//! eleven-plus-one category taxonomy with its label normalization rules.
//!
//! Everything here is an immutable value type and is `Send + Sync`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;
use tracing::warn;
use unicode_normalization::UnicodeNormalization;

/// Alias table shipped with the crate.
pub const DEFAULT_ALIASES: &str = include_str!("../data/aliases.txt");

/// Default soft cap on the number of toxic labels in one [`LabelSet`].
pub const DEFAULT_LABEL_CAP: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaxonomyError {
    #[error("unknown label: {0:?}")]
    UnknownLabel(String),
    #[error("empty label set")]
    EmptyLabelSet,
    #[error("Non-Toxic cannot be combined with toxic labels: {0:?}")]
    ConflictingLabels(Vec<CategoryLabel>),
    #[error("toxicity score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error("empty input text")]
    EmptyInput,
    #[error("alias file line {line}: {message}")]
    AliasFile { line: usize, message: String },
}

/// Where a sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    #[default]
    PullRequestComment,
    Other,
}

/// A code-review comment. The unit that flows through every stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextSample {
    pub id: String,
    pub body: String,
    #[serde(default)]
    pub source: Source,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl TextSample {
    pub fn new(id: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            body: body.into(),
            source: Source::PullRequestComment,
            metadata: BTreeMap::new(),
        }
    }

    /// Entry-point check shared by every pipeline stage.
    pub fn ensure_non_empty(&self) -> Result<(), TaxonomyError> {
        if self.body.trim().is_empty() {
            Err(TaxonomyError::EmptyInput)
        } else {
            Ok(())
        }
    }
}

/// Probability that a text is toxic.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct ToxicityScore(f64);

impl ToxicityScore {
    pub const ZERO: ToxicityScore = ToxicityScore(0.0);

    pub fn new(p: f64) -> Result<Self, TaxonomyError> {
        if (0.0..=1.0).contains(&p) {
            Ok(Self(p))
        } else {
            Err(TaxonomyError::ScoreOutOfRange(p))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn saturating(p: f64) -> Self {
        if p.is_nan() {
            Self(0.0)
        } else {
            Self(p.clamp(0.0, 1.0))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl<'de> Deserialize<'de> for ToxicityScore {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let p = f64::deserialize(d)?;
        ToxicityScore::new(p).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinaryLabel {
    NonToxic,
    Toxic,
}

impl BinaryLabel {
    pub fn is_toxic(self) -> bool {
        matches!(self, BinaryLabel::Toxic)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::NonToxic => "non_toxic",
            BinaryLabel::Toxic => "toxic",
        }
    }
}

impl FromStr for BinaryLabel {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match collapse_key(s).as_str() {
            "toxic" | "1" | "true" => Ok(BinaryLabel::Toxic),
            "nontoxic" | "0" | "false" => Ok(BinaryLabel::NonToxic),
            _ => Err(TaxonomyError::UnknownLabel(s.to_string())),
        }
    }
}

/// The eleven toxicity subcategories plus `NonToxic`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CategoryLabel {
    Profanity,
    Trolling,
    Insult,
    SelfDeprecation,
    Entitlement,
    IdentityAttack,
    Threat,
    Obscenity,
    Arrogance,
    Flirtation,
    ObjectDirectedToxicity,
    NonToxic,
}

impl CategoryLabel {
    pub const ALL: [CategoryLabel; 12] = [
        CategoryLabel::Profanity,
        CategoryLabel::Trolling,
        CategoryLabel::Insult,
        CategoryLabel::SelfDeprecation,
        CategoryLabel::Entitlement,
        CategoryLabel::IdentityAttack,
        CategoryLabel::Threat,
        CategoryLabel::Obscenity,
        CategoryLabel::Arrogance,
        CategoryLabel::Flirtation,
        CategoryLabel::ObjectDirectedToxicity,
        CategoryLabel::NonToxic,
    ];

    /// The eleven toxic categories, in taxonomy order.
    pub fn toxic() -> impl Iterator<Item = CategoryLabel> {
        Self::ALL.into_iter().filter(|c| c.is_toxic())
    }

    pub fn canonical_name(self) -> &'static str {
        match self {
            CategoryLabel::Profanity => "Profanity",
            CategoryLabel::Trolling => "Trolling",
            CategoryLabel::Insult => "Insult",
            CategoryLabel::SelfDeprecation => "Self-Deprecation",
            CategoryLabel::Entitlement => "Entitlement",
            CategoryLabel::IdentityAttack => "Identity Attack",
            CategoryLabel::Threat => "Threat",
            CategoryLabel::Obscenity => "Obscenity",
            CategoryLabel::Arrogance => "Arrogance",
            CategoryLabel::Flirtation => "Flirtation",
            CategoryLabel::ObjectDirectedToxicity => "Object-Directed Toxicity",
            CategoryLabel::NonToxic => "Non-Toxic",
        }
    }

    pub fn is_toxic(self) -> bool {
        self != CategoryLabel::NonToxic
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for CategoryLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

impl FromStr for CategoryLabel {
    type Err = TaxonomyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        normalize_label(s)
    }
}

impl Serialize for CategoryLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.canonical_name())
    }
}

impl<'de> Deserialize<'de> for CategoryLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        normalize_label(&raw).map_err(serde::de::Error::custom)
    }
}

/// Lookup key: NFC, lowercased, stripped of quotes/emphasis, with every space,
/// hyphen and underscore removed.
pub fn collapse_key(raw: &str) -> String {
    let nfc: String = raw.nfc().collect::<String>().to_lowercase();
    nfc.trim_matches(|c: char| c.is_whitespace() || matches!(c, '"' | '\'' | '`' | '*' | '.' | '“' | '”'))
        .chars()
        .filter(|c| !(c.is_whitespace() || *c == '-' || *c == '_'))
        .collect()
}

/// Maps free-form label text onto the taxonomy.
#[derive(Debug, Clone)]
pub struct AliasTable {
    keys: HashMap<String, CategoryLabel>,
}

impl AliasTable {
    /// Parses the `Canonical = alias, alias` file format.
    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut keys = HashMap::new();
        for label in CategoryLabel::ALL {
            keys.insert(collapse_key(label.canonical_name()), label);
        }
        let mut table = Self { keys };

        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| TaxonomyError::AliasFile { line: i + 1, message };
            let (head, aliases) = line.split_once('=').unwrap_or((line, ""));
            let label = CategoryLabel::ALL
                .into_iter()
                .find(|c| collapse_key(c.canonical_name()) == collapse_key(head))
                .ok_or_else(|| err(format!("{:?} is not a canonical category", head.trim())))?;
            for alias in aliases.split(',').map(str::trim).filter(|a| !a.is_empty()) {
                table.insert(alias, label).map_err(err)?;
            }
        }
        Ok(table)
    }

    fn insert(&mut self, alias: &str, label: CategoryLabel) -> Result<(), String> {
        let key = collapse_key(alias);
        match self.keys.get(&key) {
            Some(existing) if *existing != label => Err(format!(
                "alias {alias:?} maps to both {existing} and {label}"
            )),
            _ => {
                self.keys.insert(key, label);
                Ok(())
            }
        }
    }

    pub fn normalize(&self, raw: &str) -> Result<CategoryLabel, TaxonomyError> {
        self.keys
            .get(&collapse_key(raw))
            .copied()
            .ok_or_else(|| TaxonomyError::UnknownLabel(raw.to_string()))
    }

    /// All (alias key, label) pairs, for table inspection.
    pub fn entries(&self) -> impl Iterator<Item = (&str, CategoryLabel)> {
        self.keys.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl Default for AliasTable {
    fn default() -> Self {
        DEFAULT_TABLE.clone()
    }
}

static DEFAULT_TABLE: LazyLock<AliasTable> =
    LazyLock::new(|| AliasTable::parse(DEFAULT_ALIASES).expect("bundled alias table is valid"));

/// Normalizes with the bundled alias table.
pub fn normalize_label(raw: &str) -> Result<CategoryLabel, TaxonomyError> {
    DEFAULT_TABLE.normalize(raw)
}

/// A non-empty set of category labels: either `{NonToxic}` or toxic labels only.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct LabelSet(BTreeSet<CategoryLabel>);

impl LabelSet {
    pub fn new(labels: impl IntoIterator<Item = CategoryLabel>) -> Result<Self, TaxonomyError> {
        Self::with_cap(labels, DEFAULT_LABEL_CAP)
    }

    /// Builds a set, warning (not failing) when more than `cap` toxic labels are present.
    pub fn with_cap(
        labels: impl IntoIterator<Item = CategoryLabel>,
        cap: usize,
    ) -> Result<Self, TaxonomyError> {
        let set: BTreeSet<_> = labels.into_iter().collect();
        if set.is_empty() {
            return Err(TaxonomyError::EmptyLabelSet);
        }
        if set.contains(&CategoryLabel::NonToxic) && set.len() > 1 {
            return Err(TaxonomyError::ConflictingLabels(set.into_iter().collect()));
        }
        if set.len() > cap {
            warn!(count = set.len(), cap, "label set exceeds the configured cap");
        }
        Ok(Self(set))
    }

    pub fn non_toxic() -> Self {
        Self(BTreeSet::from([CategoryLabel::NonToxic]))
    }

    pub fn single(label: CategoryLabel) -> Self {
        Self(BTreeSet::from([label]))
    }

    pub fn exceeds_cap(&self, cap: usize) -> bool {
        self.0.len() > cap
    }

    pub fn contains(&self, label: CategoryLabel) -> bool {
        self.0.contains(&label)
    }

    pub fn is_non_toxic(&self) -> bool {
        self.0.contains(&CategoryLabel::NonToxic)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = CategoryLabel> + '_ {
        self.0.iter().copied()
    }

    pub fn as_set(&self) -> &BTreeSet<CategoryLabel> {
        &self.0
    }
}

impl<'de> Deserialize<'de> for LabelSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let labels = Vec::<CategoryLabel>::deserialize(d)?;
        LabelSet::new(labels).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for LabelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.0.iter().map(|c| c.canonical_name()).collect();
        f.write_str(&names.join(", "))
    }
}
