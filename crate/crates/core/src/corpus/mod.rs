//! Vocabularies, static word embeddings and gold test lexicons.

mod embeddings;
mod language;
mod testset;
mod vocab;

use std::io;

pub use embeddings::{
    load_embeddings, read_embeddings, EmbeddingSpace, LoadWarnings, LoadedEmbeddings, Neighbor,
};
pub use language::{LanguageNames, LanguagePair};
pub use testset::{load_test_set, read_test_set, BliTestSet};
pub use vocab::Vocabulary;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{origin}: {source}")]
    Io {
        origin: String,
        #[source]
        source: io::Error,
    },
    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },
    #[error("invalid language pair {0:?}")]
    InvalidPair(String),
    #[error("duplicate word {0:?}")]
    DuplicateWord(String),
    #[error("word {0:?} has no embedding")]
    MissingVector(String),
    #[error("candidate {0:?} has no embedding")]
    UnknownCandidate(String),
    #[error("empty candidate set")]
    EmptyCandidates,
    #[error("vector for {word:?} has {found} components, expected {expected}")]
    Dimension {
        word: String,
        found: usize,
        expected: usize,
    },
    #[error("vector for {0:?} has zero norm")]
    ZeroVector(String),
    #[error("invalid synthetic world: {0}")]
    Synthetic(String),
}
