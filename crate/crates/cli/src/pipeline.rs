//! Loading assets, running experiments and writing their artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context as _;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use sail_core::backend::ServiceStats;
use sail_core::eval::EvaluationReport;
use sail_core::sail::{predictions_tsv, RunManifest, RunStats};
use sail_core::{
    aggregate, load_embeddings, load_test_set, BliTestSet, CacheStore, CompletionService,
    LanguageAssets, LanguageNames, LanguagePair, SailEngine, SailRun, TemplateRegistry,
};

use crate::config::{ExperimentConfig, SweepConfig, ValidationError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ZeroShot,
    Sail,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ZeroShot => "zero-shot",
            Self::Sail => "sail",
        }
    }
}

/// The manifest written as `manifest.json`: recorded config plus one run
/// manifest per language pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub command: Command,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub runs: Vec<RunManifest>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ExperimentStats {
    pub command: Option<Command>,
    pub config_hash: String,
    pub elapsed_ms: u128,
    pub runs: BTreeMap<String, RunStats>,
    pub total: ServiceStats,
}

pub struct ExperimentOutcome {
    pub config_hash: String,
    pub report: EvaluationReport,
    pub runs: BTreeMap<LanguagePair, SailRun>,
    pub manifest: ExperimentManifest,
    pub stats: ExperimentStats,
    pub out_dir: PathBuf,
}

/// Everything loaded once and shared by the settings of a sweep.
pub struct Context {
    pub templates: TemplateRegistry,
    pub names: LanguageNames,
    pub assets: BTreeMap<String, LanguageAssets>,
    pub tests: BTreeMap<LanguagePair, BliTestSet>,
    pub service: CompletionService,
}

impl Context {
    pub fn load(cfg: &ExperimentConfig) -> anyhow::Result<Self> {
        let templates = cfg.templates()?;
        let names = cfg.names();

        let mut assets = BTreeMap::new();
        for pair in &cfg.pairs {
            for code in [pair.source(), pair.target()] {
                if assets.contains_key(code) {
                    continue;
                }
                let path = &cfg.embeddings[code];
                let loaded = load_embeddings(path, code, cfg.vocab_limit)
                    .with_context(|| format!("loading embeddings.{code}"))?;
                if loaded.warnings.duplicates + loaded.warnings.zero_norm > 0 {
                    warn!(
                        "{}: skipped {} duplicate and {} zero-norm rows",
                        path.display(),
                        loaded.warnings.duplicates,
                        loaded.warnings.zero_norm
                    );
                }
                info!("{code}: {} words", loaded.vocab.len());
                assets.insert(
                    code.to_string(),
                    LanguageAssets::new(loaded.vocab, loaded.space),
                );
            }
        }

        let mut tests = BTreeMap::new();
        for dirs in cfg.directions_by_pair().values() {
            for d in dirs {
                let path = &cfg.test_sets[&d.to_string()];
                let test = load_test_set(path, d.clone())
                    .with_context(|| format!("loading test_sets.{d}"))?;
                if test.is_empty() {
                    return Err(ValidationError(format!(
                        "test_sets.{d}: {} is empty",
                        path.display()
                    ))
                    .into());
                }
                let target = &assets[d.target()];
                let unreachable = test
                    .entries
                    .values()
                    .filter(|golds| !golds.iter().any(|g| target.vocab.contains(g)))
                    .count();
                if unreachable > 0 {
                    warn!(
                        "{d}: {unreachable} test words have no gold translation in the vocabulary"
                    );
                }
                tests.insert(d.clone(), test);
            }
        }

        let backend = cfg
            .backend
            .connect(&templates, &names)
            .map_err(|e| ValidationError(format!("backend: {e}")))?;
        let cache = match &cfg.cache_dir {
            Some(dir) => Some(
                CacheStore::open(dir)
                    .with_context(|| format!("opening cache {}", dir.display()))?,
            ),
            None => None,
        };
        Ok(Self {
            templates,
            names,
            assets,
            tests,
            service: CompletionService::new(backend, cache),
        })
    }
}

/// The config a command actually runs: zero-shot pins N_it to 0.
pub fn effective_config(cfg: &ExperimentConfig, command: Command) -> ExperimentConfig {
    let mut cfg = cfg.clone();
    if command == Command::ZeroShot {
        cfg.sail.n_iterations = 0;
    }
    cfg
}

/// Validates, loads and runs `command`, writing artifacts under the
/// configured output directory.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    command: Command,
) -> anyhow::Result<ExperimentOutcome> {
    cfg.validate(false)?;
    let ctx = Context::load(cfg)?;
    execute(cfg, command, &ctx, &cfg.output_dir())
}

pub fn execute(
    cfg: &ExperimentConfig,
    command: Command,
    ctx: &Context,
    out_dir: &Path,
) -> anyhow::Result<ExperimentOutcome> {
    let cfg = effective_config(cfg, command);
    let hash = cfg.hash();
    let started = Instant::now();
    let before = ctx.service.stats();

    let mut runs = BTreeMap::new();
    let mut scores = Vec::new();
    let mut stats = ExperimentStats {
        command: Some(command),
        config_hash: hash.clone(),
        ..Default::default()
    };
    for (pair, dirs) in cfg.directions_by_pair() {
        let tests: Vec<BliTestSet> = dirs.iter().map(|d| ctx.tests[d].clone()).collect();
        let engine = SailEngine::new(
            pair.clone(),
            &ctx.assets[pair.source()],
            &ctx.assets[pair.target()],
            &ctx.service,
            &ctx.templates,
            &ctx.names,
            cfg.sail.clone(),
        )
        .map_err(|e| ValidationError(e.to_string()))?;
        info!(
            "{}: {pair} (N_it={}, N_f={})",
            command.as_str(),
            cfg.sail.n_iterations,
            cfg.sail.n_frequent
        );
        let run = engine.run(&tests, &hash)?;
        scores.extend(run.report.directions.iter().cloned());
        stats.runs.insert(pair.to_string(), run.stats.clone());
        runs.insert(pair, run);
    }
    let report = aggregate(&scores, hash.clone())?;
    let manifest = ExperimentManifest {
        command,
        config_hash: hash.clone(),
        config: cfg.recorded(),
        runs: runs.values().map(|r| r.manifest.clone()).collect(),
    };
    let after = ctx.service.stats();
    stats.elapsed_ms = started.elapsed().as_millis();
    stats.total = ServiceStats {
        backend_calls: after.backend_calls - before.backend_calls,
        backend_errors: after.backend_errors - before.backend_errors,
        cache_hits: after.cache_hits - before.cache_hits,
        cache_misses: after.cache_misses - before.cache_misses,
    };

    let outcome = ExperimentOutcome {
        config_hash: hash,
        report,
        runs,
        manifest,
        stats,
        out_dir: out_dir.to_path_buf(),
    };
    write_artifacts(&outcome, &cfg, ctx)?;
    Ok(outcome)
}

fn write(path: &Path, contents: &str) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_artifacts(
    o: &ExperimentOutcome,
    cfg: &ExperimentConfig,
    ctx: &Context,
) -> anyhow::Result<()> {
    let dir = &o.out_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (pair, run) in &o.runs {
        for (direction, preds) in &run.predictions {
            let text = predictions_tsv(
                &ctx.tests[direction],
                preds,
                &o.config_hash,
                cfg.sail.match_mode,
            );
            write(&dir.join(format!("predictions.{direction}.tsv")), &text)?;
        }
        if let Some(dict) = &run.dictionary {
            write(
                &dir.join(format!("dictionary.{pair}.tsv")),
                &dict.to_tsv(&o.config_hash),
            )?;
        }
    }
    write(&dir.join("report.tsv"), &o.report.to_tsv())?;
    write(&dir.join("report.txt"), &o.report.to_table())?;
    let mut manifest = serde_json::to_string_pretty(&o.manifest)?;
    manifest.push('\n');
    write(&dir.join("manifest.json"), &manifest)?;
    let mut stats = serde_json::to_string_pretty(&o.stats)?;
    stats.push('\n');
    write(&dir.join("run_stats.json"), &stats)?;
    Ok(())
}

/// One row of a sweep curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub value: usize,
    pub direction: String,
    pub accuracy: f64,
}

pub struct SweepOutcome {
    pub n_it: Vec<CurvePoint>,
    pub n_f: Vec<CurvePoint>,
}

fn curve_points(value: usize, report: &EvaluationReport) -> Vec<CurvePoint> {
    let mut points: Vec<CurvePoint> = report
        .directions
        .iter()
        .map(|d| CurvePoint {
            value,
            direction: d.direction.to_string(),
            accuracy: d.accuracy,
        })
        .collect();
    points.push(CurvePoint {
        value,
        direction: "all".into(),
        accuracy: report.global_mean,
    });
    points
}

pub fn curve_tsv(setting: &str, hash: &str, points: &[CurvePoint]) -> String {
    let mut out = format!("# config_hash: {hash}\nsetting\tvalue\tdirection\taccuracy\n");
    for p in points {
        let _ = writeln!(
            out,
            "{setting}\t{}\t{}\t{:.6}",
            p.value, p.direction, p.accuracy
        );
    }
    out
}

/// Runs the pipeline once per N_it value and once per N_f value. Each
/// setting gets a full artifact set under `n_it_<v>/` or `n_f_<v>/`; the
/// curves go to `curve_n_it.tsv` and `curve_n_f.tsv`.
pub fn run_sweep(cfg: &ExperimentConfig) -> anyhow::Result<SweepOutcome> {
    cfg.validate(true)?;
    let ctx = Context::load(cfg)?;
    let base = cfg.output_dir();
    let hash = cfg.hash();
    let mut outcome = SweepOutcome {
        n_it: Vec::new(),
        n_f: Vec::new(),
    };
    // each setting is recorded as the single run it equals
    let single = ExperimentConfig {
        sweep: SweepConfig::default(),
        ..cfg.clone()
    };
    for &v in &cfg.sweep.n_it {
        let mut c = single.clone();
        c.sail.n_iterations = v;
        let o = execute(&c, Command::Sail, &ctx, &base.join(format!("n_it_{v}")))?;
        outcome.n_it.extend(curve_points(v, &o.report));
    }
    for &v in &cfg.sweep.n_f {
        let mut c = single.clone();
        c.sail.n_frequent = v;
        let o = execute(&c, Command::Sail, &ctx, &base.join(format!("n_f_{v}")))?;
        outcome.n_f.extend(curve_points(v, &o.report));
    }
    std::fs::create_dir_all(&base)?;
    if !outcome.n_it.is_empty() {
        write(
            &base.join("curve_n_it.tsv"),
            &curve_tsv("n_it", &hash, &outcome.n_it),
        )?;
    }
    if !outcome.n_f.is_empty() {
        write(
            &base.join("curve_n_f.tsv"),
            &curve_tsv("n_f", &hash, &outcome.n_f),
        )?;
    }
    Ok(outcome)
}
