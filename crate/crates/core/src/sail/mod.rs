//! The self-augmentation loop.
//!
//! Iteration 1 translates the N_f most frequent words of each language
//! zero-shot and keeps the pairs that survive back-translation. Each later
//! iteration redoes the same harvest few-shot, with examples drawn from the
//! previous dictionary. Test words are finally translated few-shot with the
//! last dictionary.

mod dictionary;
mod manifest;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use dictionary::{DictEntry, DictionaryError, HighConfidenceDictionary, Provenance};
pub use manifest::{HarvestStats, IterationSummary, PredictionLog, RunManifest, RunMode, RunStats};

use crate::backend::{CompletionRequest, CompletionService, ServiceStats};
use crate::corpus::{BliTestSet, EmbeddingSpace, LanguageNames, LanguagePair, Vocabulary};
use crate::eval::{aggregate, score_with, EvalError, EvaluationReport, MatchMode};
use crate::extraction::{select_prediction_with, ExtractionOptions, Prediction};
use crate::prompting::{
    select_icl_examples, IclExample, PromptError, ShotMode, TemplateId, TemplateRegistry,
};

#[derive(Debug, thiserror::Error)]
pub enum SailError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("direction {direction} does not belong to pair {pair}")]
    Direction {
        direction: LanguagePair,
        pair: LanguagePair,
    },
    #[error("{side} assets are for language {found:?}, expected {expected:?}")]
    Assets {
        side: &'static str,
        found: String,
        expected: String,
    },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Frequency-ranked vocabulary and embeddings of one language.
#[derive(Clone, Debug)]
pub struct LanguageAssets {
    pub vocab: Vocabulary,
    pub space: EmbeddingSpace,
}

impl LanguageAssets {
    pub fn new(vocab: Vocabulary, space: EmbeddingSpace) -> Self {
        Self { vocab, space }
    }

    pub fn language(&self) -> &str {
        self.vocab.language()
    }
}

fn default_n_iterations() -> usize {
    1
}
fn default_n_frequent() -> usize {
    5000
}
fn default_beam() -> usize {
    5
}
fn default_shots() -> usize {
    5
}
fn default_max_new_tokens() -> usize {
    10
}
fn default_family() -> String {
    "llama2_13b".to_string()
}
fn default_true() -> bool {
    true
}
fn default_concurrency() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SailConfig {
    /// Dictionary builds before final inference; 0 is the zero-shot
    /// baseline.
    #[serde(default = "default_n_iterations")]
    pub n_iterations: usize,
    /// Most frequent words per language fed to each harvest.
    #[serde(default = "default_n_frequent")]
    pub n_frequent: usize,
    #[serde(default = "default_beam")]
    pub beam: usize,
    #[serde(default = "default_shots")]
    pub shots: usize,
    #[serde(default = "default_max_new_tokens")]
    pub max_new_tokens: usize,
    #[serde(default = "default_family")]
    pub template_family: String,
    /// Keep only pairs that translate back to their source word.
    #[serde(default = "default_true")]
    pub back_translation: bool,
    /// Merge each new dictionary into the previous one instead of
    /// replacing it.
    #[serde(default)]
    pub accumulate: bool,
    /// Maximum requests in flight.
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub lowercase_fallback: bool,
    #[serde(default)]
    pub match_mode: MatchMode,
}

impl Default for SailConfig {
    fn default() -> Self {
        Self {
            n_iterations: default_n_iterations(),
            n_frequent: default_n_frequent(),
            beam: default_beam(),
            shots: default_shots(),
            max_new_tokens: default_max_new_tokens(),
            template_family: default_family(),
            back_translation: true,
            accumulate: false,
            concurrency: default_concurrency(),
            lowercase_fallback: false,
            match_mode: MatchMode::Exact,
        }
    }
}

impl SailConfig {
    pub fn validate(&self) -> Result<(), SailError> {
        for (name, v) in [
            ("beam", self.beam),
            ("shots", self.shots),
            ("max_new_tokens", self.max_new_tokens),
            ("concurrency", self.concurrency),
        ] {
            if v == 0 {
                return Err(SailError::Config(format!("sail.{name} must be >= 1")));
            }
        }
        if self.template_family.is_empty() {
            return Err(SailError::Config("sail.template_family is empty".into()));
        }
        Ok(())
    }
}

/// Output of one harvest sweep, oriented like its direction.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Harvest {
    pub pairs: BTreeSet<(String, String)>,
    pub stats: HarvestStats,
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct SailRun {
    /// `None` when no dictionary was built.
    pub dictionary: Option<HighConfidenceDictionary>,
    pub predictions: BTreeMap<LanguagePair, BTreeMap<String, Prediction>>,
    pub report: EvaluationReport,
    pub manifest: RunManifest,
    pub stats: RunStats,
}

pub struct SailEngine<'a> {
    pair: LanguagePair,
    x: &'a LanguageAssets,
    y: &'a LanguageAssets,
    service: &'a CompletionService,
    templates: &'a TemplateRegistry,
    names: &'a LanguageNames,
    cfg: SailConfig,
    pool: rayon::ThreadPool,
}

impl<'a> SailEngine<'a> {
    /// `x` and `y` are the assets of `pair.source()` and `pair.target()`.
    pub fn new(
        pair: LanguagePair,
        x: &'a LanguageAssets,
        y: &'a LanguageAssets,
        service: &'a CompletionService,
        templates: &'a TemplateRegistry,
        names: &'a LanguageNames,
        cfg: SailConfig,
    ) -> Result<Self, SailError> {
        cfg.validate()?;
        templates.get(&cfg.template_family)?;
        for (side, assets, code) in [("x", x, pair.source()), ("y", y, pair.target())] {
            if assets.language() != code {
                return Err(SailError::Assets {
                    side,
                    found: assets.language().to_string(),
                    expected: code.to_string(),
                });
            }
            if names.name(code).is_none() {
                return Err(PromptError::UnknownLanguage(code.to_string()).into());
            }
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.concurrency)
            .thread_name(|i| format!("sail-worker-{i}"))
            .build()
            .map_err(|e| SailError::Config(format!("thread pool: {e}")))?;
        Ok(Self {
            pair,
            x,
            y,
            service,
            templates,
            names,
            cfg,
            pool,
        })
    }

    pub fn config(&self) -> &SailConfig {
        &self.cfg
    }

    pub fn pair(&self) -> &LanguagePair {
        &self.pair
    }

    /// (source, target) assets for `direction`.
    fn sides(
        &self,
        direction: &LanguagePair,
    ) -> Result<(&LanguageAssets, &LanguageAssets), SailError> {
        if *direction == self.pair {
            Ok((self.x, self.y))
        } else if *direction == self.pair.reversed() {
            Ok((self.y, self.x))
        } else {
            Err(SailError::Direction {
                direction: direction.clone(),
                pair: self.pair.clone(),
            })
        }
    }

    /// Translates one word, few-shot when `dict` has usable pairs and
    /// zero-shot otherwise.
    pub fn translate_word(
        &self,
        word: &str,
        direction: &LanguagePair,
        dict: Option<&HighConfidenceDictionary>,
    ) -> Result<Prediction, SailError> {
        let store = dict.map(|d| d.oriented(direction)).unwrap_or_default();
        self.translate_with_store(word, direction, &store)
    }

    /// The prompt [`translate_word`](Self::translate_word) would send.
    pub fn prompt_for(
        &self,
        word: &str,
        direction: &LanguagePair,
        store: &[IclExample],
    ) -> Result<String, SailError> {
        let (source, _) = self.sides(direction)?;
        let examples = if store.is_empty() {
            Vec::new()
        } else {
            select_icl_examples(store, &source.space, word, self.cfg.shots)?
        };
        let shot_mode = if examples.is_empty() {
            ShotMode::Zero
        } else {
            ShotMode::Few
        };
        let id = TemplateId {
            family: self.cfg.template_family.clone(),
            shot_mode,
        };
        Ok(self
            .templates
            .render(&id, self.names, direction, &examples, word)?)
    }

    fn translate_with_store(
        &self,
        word: &str,
        direction: &LanguagePair,
        store: &[IclExample],
    ) -> Result<Prediction, SailError> {
        let (_, target) = self.sides(direction)?;
        let prompt = self.prompt_for(word, direction, store)?;
        let request = CompletionRequest {
            prompt,
            num_beams: self.cfg.beam,
            max_new_tokens: self.cfg.max_new_tokens,
        };
        let options = ExtractionOptions {
            lowercase_fallback: self.cfg.lowercase_fallback,
        };
        Ok(match self.service.complete(&request) {
            Ok(continuations) => {
                select_prediction_with(word, &continuations, &target.vocab, options)
            }
            Err(e) => {
                warn!("{direction} {word:?}: {e}");
                Prediction::backend_error(word, e.to_string())
            }
        })
    }

    /// Translates `words` concurrently; output order follows input order.
    pub fn translate_words(
        &self,
        words: &[String],
        direction: &LanguagePair,
        store: &[IclExample],
    ) -> Result<Vec<Prediction>, SailError> {
        self.sides(direction)?;
        self.pool.install(|| {
            words
                .par_iter()
                .map(|w| self.translate_with_store(w, direction, store))
                .collect()
        })
    }

    /// Translates the N_f most frequent source words of `direction` and,
    /// unless disabled, keeps a pair only if its target word translates
    /// back to exactly the source word. `store` is oriented for
    /// `direction`; back-translation uses its flip.
    pub fn harvest_pairs(
        &self,
        direction: &LanguagePair,
        store: &[IclExample],
    ) -> Result<Harvest, SailError> {
        let (source, _) = self.sides(direction)?;
        let words = source.vocab.top_n(self.cfg.n_frequent).to_vec();
        let forward = self.translate_words(&words, direction, store)?;

        let mut stats = HarvestStats {
            direction: Some(direction.clone()),
            queried: words.len(),
            ..Default::default()
        };
        let mut candidates = Vec::new();
        for p in &forward {
            match &p.predicted {
                Some(t) => candidates.push((p.query.clone(), t.clone())),
                None if p.error.is_some() => stats.backend_errors += 1,
                None => {}
            }
        }
        stats.forward_ok = candidates.len();

        let pairs: BTreeSet<(String, String)> = if self.cfg.back_translation {
            let targets: Vec<String> = candidates
                .iter()
                .map(|(_, t)| t.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            stats.back_translated = targets.len();
            let flipped: Vec<IclExample> = store
                .iter()
                .map(|e| IclExample::new(e.target_word.clone(), e.source_word.clone()))
                .collect();
            let backward = self.translate_words(&targets, &direction.reversed(), &flipped)?;
            stats.backend_errors += backward.iter().filter(|p| p.error.is_some()).count();
            let back: BTreeMap<&str, &str> = backward
                .iter()
                .filter_map(|p| Some((p.query.as_str(), p.predicted.as_deref()?)))
                .collect();
            candidates
                .into_iter()
                .filter(|(w, t)| back.get(t.as_str()) == Some(&w.as_str()))
                .collect()
        } else {
            candidates.into_iter().collect()
        };
        stats.kept = pairs.len();
        Ok(Harvest { pairs, stats })
    }

    /// Harvests both directions and unites them in x-to-y orientation.
    /// `prev` supplies the in-context examples; without it, or when it is
    /// empty, harvesting is zero-shot.
    pub fn build_dictionary(
        &self,
        prev: Option<&HighConfidenceDictionary>,
    ) -> Result<(HighConfidenceDictionary, IterationSummary), SailError> {
        let iteration = prev.map_or(0, |d| d.iteration()) + 1;
        let store_xy = prev.map(|d| d.oriented(&self.pair)).unwrap_or_default();
        let store_yx = prev
            .map(|d| d.oriented(&self.pair.reversed()))
            .unwrap_or_default();
        let hx = self.harvest_pairs(&self.pair, &store_xy)?;
        let hy = self.harvest_pairs(&self.pair.reversed(), &store_yx)?;

        let mut dict = HighConfidenceDictionary::new(self.pair.clone(), iteration);
        for (x, y) in &hx.pairs {
            dict.insert(x.clone(), y.clone(), Provenance::FromXSide);
        }
        for (y, x) in &hy.pairs {
            dict.insert(x.clone(), y.clone(), Provenance::FromYSide);
        }
        if self.cfg.accumulate {
            if let Some(prev) = prev {
                dict.absorb(prev);
            }
        }
        let summary = IterationSummary {
            iteration,
            shot_mode: if store_xy.is_empty() {
                ShotMode::Zero
            } else {
                ShotMode::Few
            },
            x_side: hx.stats,
            y_side: hy.stats,
            from_x_side: dict.x_side_count(),
            from_y_side: dict.y_side_count(),
            from_both: dict.both_count(),
            size: dict.len(),
        };
        info!(
            "iteration {iteration}: {} pairs ({} x side, {} y side)",
            summary.size, summary.from_x_side, summary.from_y_side
        );
        Ok((dict, summary))
    }

    /// Runs N_it dictionary builds and then translates every test set.
    /// Test sets must be in the engine's pair or its reverse.
    pub fn run(&self, test_sets: &[BliTestSet], config_hash: &str) -> Result<SailRun, SailError> {
        self.run_inner(test_sets, config_hash, self.cfg.n_iterations)
    }

    /// Translates every test set zero-shot, building no dictionary.
    pub fn run_zero_shot(
        &self,
        test_sets: &[BliTestSet],
        config_hash: &str,
    ) -> Result<SailRun, SailError> {
        self.run_inner(test_sets, config_hash, 0)
    }

    fn run_inner(
        &self,
        test_sets: &[BliTestSet],
        config_hash: &str,
        n_iterations: usize,
    ) -> Result<SailRun, SailError> {
        for t in test_sets {
            self.sides(&t.pair)?;
        }
        let started = Instant::now();
        let before = self.service.stats();
        let mut warnings = Vec::new();

        let mut dictionary: Option<HighConfidenceDictionary> = None;
        let mut iterations = Vec::new();
        let mut iteration_ms = Vec::new();
        for _ in 0..n_iterations {
            let t0 = Instant::now();
            let (dict, summary) = self.build_dictionary(dictionary.as_ref())?;
            if dict.is_empty() {
                let msg = format!(
                    "iteration {}: empty dictionary, next step runs zero-shot",
                    summary.iteration
                );
                warn!("{msg}");
                warnings.push(msg);
            }
            iterations.push(summary);
            iteration_ms.push(t0.elapsed().as_millis());
            dictionary = Some(dict);
        }

        let t0 = Instant::now();
        let mut predictions = BTreeMap::new();
        let mut scores = Vec::new();
        let mut logs = BTreeMap::new();
        let mut backend_failures: usize = iterations
            .iter()
            .map(|s| s.x_side.backend_errors + s.y_side.backend_errors)
            .sum();
        for test in test_sets {
            let store = dictionary
                .as_ref()
                .map(|d| d.oriented(&test.pair))
                .unwrap_or_default();
            let words: Vec<String> = test.source_words().map(str::to_string).collect();
            let preds = self.translate_words(&words, &test.pair, &store)?;
            backend_failures += preds.iter().filter(|p| p.error.is_some()).count();
            let preds: BTreeMap<String, Prediction> =
                preds.into_iter().map(|p| (p.query.clone(), p)).collect();
            scores.push(score_with(test, &preds, self.cfg.match_mode)?);
            logs.insert(
                test.pair.to_string(),
                preds.values().map(PredictionLog::from).collect(),
            );
            predictions.insert(test.pair.clone(), preds);
        }
        let inference_ms = t0.elapsed().as_millis();
        if backend_failures > 0 {
            warnings.push(format!("{backend_failures} backend failures"));
        }

        let report = aggregate(&scores, config_hash)?;
        let mut config = self.cfg.clone();
        config.n_iterations = n_iterations;
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            mode: if n_iterations == 0 {
                RunMode::ZeroShot
            } else {
                RunMode::Sail
            },
            pair: self.pair.clone(),
            config_hash: config_hash.to_string(),
            config,
            backend: self.service.identity(),
            iterations,
            final_dictionary_size: dictionary.as_ref().map_or(0, |d| d.len()),
            predictions: logs,
            backend_failures,
            warnings,
        };
        let after = self.service.stats();
        let stats = RunStats {
            elapsed_ms: started.elapsed().as_millis(),
            iteration_ms,
            inference_ms,
            service: ServiceStats {
                backend_calls: after.backend_calls - before.backend_calls,
                backend_errors: after.backend_errors - before.backend_errors,
                cache_hits: after.cache_hits - before.cache_hits,
                cache_misses: after.cache_misses - before.cache_misses,
            },
        };
        Ok(SailRun {
            dictionary,
            predictions,
            report,
            manifest,
            stats,
        })
    }
}

/// Per-word predictions of one direction as TSV:
/// `source, predicted, status, correct` after a config-hash comment.
pub fn predictions_tsv(
    test: &BliTestSet,
    predictions: &BTreeMap<String, Prediction>,
    config_hash: &str,
    mode: MatchMode,
) -> String {
    use std::fmt::Write as _;
    let mut out = format!(
        "# config_hash: {config_hash}\n# direction: {}\nsource\tpredicted\tstatus\tcorrect\n",
        test.pair
    );
    for (source, golds) in &test.entries {
        let p = predictions.get(source);
        let predicted = p.and_then(|p| p.predicted.as_deref());
        let status = p.map_or("missing", |p| p.status.as_str());
        let correct = predicted.is_some_and(|w| match mode {
            MatchMode::Exact => golds.contains(w),
            MatchMode::CaseInsensitive => {
                let w = w.to_lowercase();
                golds.iter().any(|g| g.to_lowercase() == w)
            }
        });
        let _ = writeln!(
            out,
            "{source}\t{}\t{status}\t{}",
            predicted.unwrap_or(""),
            u8::from(correct)
        );
    }
    out
}
