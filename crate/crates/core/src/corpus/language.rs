use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// An ordered pair of ISO 639-1 codes, `source` translated into `target`.
///
/// Also used as a BLI direction. Renders as `de-fr`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguagePair {
    source: String,
    target: String,
}

fn valid_code(code: &str) -> bool {
    !code.is_empty() && code.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl LanguagePair {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Result<Self, CorpusError> {
        let source = source.into();
        let target = target.into();
        if !valid_code(&source) || !valid_code(&target) || source == target {
            return Err(CorpusError::InvalidPair(format!("{source}-{target}")));
        }
        Ok(Self { source, target })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn reversed(&self) -> Self {
        Self {
            source: self.target.clone(),
            target: self.source.clone(),
        }
    }

    /// True when `other` is this pair or its reverse.
    pub fn same_languages(&self, other: &LanguagePair) -> bool {
        self == other || *self == other.reversed()
    }

    pub fn contains(&self, code: &str) -> bool {
        self.source == code || self.target == code
    }
}

impl fmt::Display for LanguagePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.source, self.target)
    }
}

impl FromStr for LanguagePair {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (source, target) = s
            .split_once('-')
            .ok_or_else(|| CorpusError::InvalidPair(s.to_string()))?;
        Self::new(source, target).map_err(|_| CorpusError::InvalidPair(s.to_string()))
    }
}

impl TryFrom<String> for LanguagePair {
    type Error = CorpusError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<LanguagePair> for String {
    fn from(pair: LanguagePair) -> Self {
        pair.to_string()
    }
}

/// English exonyms keyed by language code. Templates embed names, not codes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LanguageNames(BTreeMap<String, String>);

impl Default for LanguageNames {
    fn default() -> Self {
        Self::builtin()
    }
}

impl LanguageNames {
    /// The benchmark languages: five XLING and three PanLex-BLI languages.
    pub fn builtin() -> Self {
        let names = [
            ("bg", "Bulgarian"),
            ("ca", "Catalan"),
            ("de", "German"),
            ("en", "English"),
            ("fr", "French"),
            ("hu", "Hungarian"),
            ("it", "Italian"),
            ("ru", "Russian"),
        ];
        Self(
            names
                .into_iter()
                .map(|(c, n)| (c.to_string(), n.to_string()))
                .collect(),
        )
    }

    pub fn empty() -> Self {
        Self(BTreeMap::new())
    }

    pub fn name(&self, code: &str) -> Option<&str> {
        self.0.get(code).map(String::as_str)
    }

    /// Reverse lookup; the first code (in code order) wins if names collide.
    pub fn code(&self, name: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(_, n)| n.as_str() == name)
            .map(|(c, _)| c.as_str())
    }

    pub fn insert(&mut self, code: impl Into<String>, name: impl Into<String>) {
        self.0.insert(code.into(), name.into());
    }

    pub fn extend(&mut self, other: &LanguageNames) {
        for (c, n) in &other.0 {
            self.0.insert(c.clone(), n.clone());
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(c, n)| (c.as_str(), n.as_str()))
    }
}
