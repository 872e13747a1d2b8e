//! Unsupervised bilingual lexicon induction with self-augmented in-context
//! learning.
//!
//! The pipeline starts from zero-shot word-translation prompts, keeps the
//! translations that survive a word back-translation round trip, and uses
//! those self-generated pairs as nearest-neighbour in-context examples for
//! the final few-shot inference:
//!
//! 1. [`corpus`] loads frequency-ranked vocabularies, unit-normalised static
//!    embeddings and gold test lexicons.
//! 2. [`prompting`] renders zero-shot and few-shot prompts and retrieves the
//!    in-context examples.
//! 3. [`backend`] talks to the completion engine (beam-search sidecar, chat
//!    completions, or a deterministic mock) behind a persistent cache.
//! 4. [`extraction`] turns ranked continuations into a single in-vocabulary
//!    prediction.
//! 5. [`sail`] orchestrates dictionary harvesting, refinement and inference.
//! 6. [`eval`] scores predictions and tests significance.

pub mod backend;
pub mod corpus;
pub mod eval;
pub mod extraction;
pub mod prompting;
pub mod sail;
pub mod synthetic;

pub use backend::{
    BackendConfig, BackendError, BackendKind, CacheStore, CompletionBackend, CompletionRequest,
    CompletionService, ScoredContinuation,
};
pub use corpus::{
    load_embeddings, load_test_set, BliTestSet, CorpusError, EmbeddingSpace, LanguageNames,
    LanguagePair, Vocabulary,
};
pub use eval::{aggregate, chi_square_2x2, score, ChiSquare, DirectionScore, EvaluationReport};
pub use extraction::{first_word, select_prediction, Prediction, PredictionStatus};
pub use prompting::{IclExample, ShotMode, TemplateId, TemplateRegistry, TemplateSpec};
pub use sail::{
    HighConfidenceDictionary, LanguageAssets, Provenance, RunManifest, SailConfig, SailEngine,
    SailRun,
};
