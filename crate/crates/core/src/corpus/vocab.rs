use std::collections::HashMap;

use super::CorpusError;

/// Frequency-ranked word list: `words()[i]` has rank `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    language: String,
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(language: impl Into<String>, words: Vec<String>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(words.len());
        for (rank, word) in words.iter().enumerate() {
            if index.insert(word.clone(), rank).is_some() {
                return Err(CorpusError::DuplicateWord(word.clone()));
            }
        }
        Ok(Self {
            language: language.into(),
            words,
            index,
        })
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn rank(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// The `n` most frequent words, clamped to the vocabulary size.
    pub fn top_n(&self, n: usize) -> &[String] {
        &self.words[..n.min(self.words.len())]
    }
}
