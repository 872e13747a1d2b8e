//! From ranked continuations to a single in-vocabulary prediction.
//!
//! A word is a maximal run of Unicode letters, digits, hyphens and
//! apostrophes that starts and ends with a letter or digit. Leading
//! whitespace (line breaks included) is skipped, then non-word characters
//! on the first non-blank line; a line break reached before any word means
//! there is no word.

use serde::{Deserialize, Serialize};

use crate::backend::ScoredContinuation;
use crate::corpus::Vocabulary;

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\u{2010}' | '\u{2011}' | '\'' | '\u{2019}')
}

fn is_core(c: char) -> bool {
    c.is_alphanumeric()
}

/// The first word of a generated continuation, if any.
pub fn first_word(text: &str) -> Option<&str> {
    let text = text.trim_start();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if is_core(c) {
            start = Some(i);
            break;
        }
        if c == '\n' || c == '\r' {
            return None;
        }
    }
    let start = start?;
    let rest = &text[start..];
    let end = rest
        .char_indices()
        .find(|&(_, c)| !(is_core(c) || is_joiner(c)))
        .map_or(rest.len(), |(i, _)| i);
    let word = rest[..end].trim_end_matches(is_joiner);
    Some(word)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionStatus {
    Ok,
    NoCandidateInVocab,
    BackendError,
}

impl PredictionStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::NoCandidateInVocab => "no_candidate_in_vocab",
            Self::BackendError => "backend_error",
        }
    }
}

/// A word extracted from one beam.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub word: String,
    pub score: f64,
    pub in_vocab: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub query: String,
    pub predicted: Option<String>,
    pub candidates: Vec<Candidate>,
    pub status: PredictionStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Prediction {
    pub fn ok(query: impl Into<String>, word: impl Into<String>) -> Self {
        Self {
            query: query.into(),
            predicted: Some(word.into()),
            candidates: Vec::new(),
            status: PredictionStatus::Ok,
            error: None,
        }
    }

    pub fn none(query: impl Into<String>) -> Self {
        Self {
            query: query.into(),
            predicted: None,
            candidates: Vec::new(),
            status: PredictionStatus::NoCandidateInVocab,
            error: None,
        }
    }

    pub fn backend_error(query: impl Into<String>, error: impl Into<String>) -> Self {
        Self {
            query: query.into(),
            predicted: None,
            candidates: Vec::new(),
            status: PredictionStatus::BackendError,
            error: Some(error.into()),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == PredictionStatus::Ok
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionOptions {
    /// Retry a candidate lowercased when the exact form is out of
    /// vocabulary.
    #[serde(default)]
    pub lowercase_fallback: bool,
}

/// Extracts the first word of every beam, drops words outside
/// `target_vocab`, and keeps the best-scoring survivor. Equal scores go to
/// the earlier beam.
pub fn select_prediction(
    query: &str,
    continuations: &[ScoredContinuation],
    target_vocab: &Vocabulary,
) -> Prediction {
    select_prediction_with(
        query,
        continuations,
        target_vocab,
        ExtractionOptions::default(),
    )
}

pub fn select_prediction_with(
    query: &str,
    continuations: &[ScoredContinuation],
    target_vocab: &Vocabulary,
    options: ExtractionOptions,
) -> Prediction {
    let mut candidates = Vec::with_capacity(continuations.len());
    let mut best: Option<(usize, f64)> = None;
    for c in continuations {
        let Some(word) = first_word(&c.text) else {
            continue;
        };
        let resolved = if target_vocab.contains(word) {
            Some(word.to_string())
        } else if options.lowercase_fallback {
            let lower = word.to_lowercase();
            target_vocab.contains(&lower).then_some(lower)
        } else {
            None
        };
        let in_vocab = resolved.is_some();
        candidates.push(Candidate {
            word: resolved.unwrap_or_else(|| word.to_string()),
            score: c.score,
            in_vocab,
        });
        let better = match best {
            Some((_, s)) => c.score > s,
            None => true,
        };
        if in_vocab && better {
            best = Some((candidates.len() - 1, c.score));
        }
    }
    match best {
        Some((i, _)) => Prediction {
            query: query.to_string(),
            predicted: Some(candidates[i].word.clone()),
            candidates,
            status: PredictionStatus::Ok,
            error: None,
        },
        None => Prediction {
            candidates,
            ..Prediction::none(query)
        },
    }
}
