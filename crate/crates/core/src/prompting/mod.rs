//! Zero-shot and few-shot word-translation prompts.
//!
//! Templates use four placeholders: `{source_language}`,
//! `{target_language}`, `{source_word}` and `{target_word}`. Language
//! placeholders are filled with English names, never codes.
//!
//! A few-shot prompt is the item pattern rendered once per in-context
//! example, joined by single spaces, followed by a space and the query
//! pattern. Families with `quote_source` wrap source words of few-shot
//! prompts in single quotes.

mod examples;
mod parser;
mod template;

use serde::{Deserialize, Serialize};

pub use examples::select_icl_examples;
pub use parser::{ParsedPrompt, PromptParser};
pub use template::{Template, TemplateRegistry, TemplateSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShotMode {
    Zero,
    Few,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemplateId {
    pub family: String,
    pub shot_mode: ShotMode,
}

/// One in-context demonstration, oriented for the current direction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IclExample {
    pub source_word: String,
    pub target_word: String,
}

impl IclExample {
    pub fn new(source_word: impl Into<String>, target_word: impl Into<String>) -> Self {
        Self {
            source_word: source_word.into(),
            target_word: target_word.into(),
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum PromptError {
    #[error("no English name registered for language code {0:?}")]
    UnknownLanguage(String),
    #[error("no template registered for model family {0:?}")]
    UnknownFamily(String),
    #[error("template for {family}: {reason}")]
    InvalidTemplate { family: String, reason: String },
    #[error("few-shot prompt needs at least one example")]
    NoExamples,
    #[error("in-context example store is empty")]
    EmptyDictionary,
}
