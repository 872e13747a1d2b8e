//! Auxiliary commands: dictionary sampling, significance, synthetic data.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sail_core::eval::{chi_square_2x2, compare_pooled, ChiSquare, EvaluationReport};
use sail_core::synthetic::{SyntheticSpec, SyntheticWorld};
use sail_core::{BackendConfig, HighConfidenceDictionary, SailConfig};

use crate::config::{ExperimentConfig, SweepConfig, ValidationError};

/// Seeded uniform sample of `k` pairs without replacement, in draw order.
/// The flag is set when `k` exceeded the dictionary and everything was
/// returned.
pub fn sample_pairs(
    dict: &HighConfidenceDictionary,
    k: usize,
    seed: u64,
) -> (Vec<(String, String)>, bool) {
    let all: Vec<(String, String)> = dict.pairs().into_iter().collect();
    let truncated = k > all.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = sample(&mut rng, all.len(), k.min(all.len()))
        .into_iter()
        .map(|i| all[i].clone())
        .collect();
    (picked, truncated)
}

pub fn read_dictionary(path: &Path) -> anyhow::Result<HighConfidenceDictionary> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let (dict, _) = HighConfidenceDictionary::read_tsv(BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))?;
    Ok(dict)
}

pub fn read_report(path: &Path) -> anyhow::Result<EvaluationReport> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    EvaluationReport::from_tsv(BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))
}

/// Chi-square on the pooled counts of two `report.tsv` files.
pub fn compare_reports(
    a: &Path,
    b: &Path,
) -> anyhow::Result<(EvaluationReport, EvaluationReport, ChiSquare)> {
    let ra = read_report(a)?;
    let rb = read_report(b)?;
    let chi = compare_pooled(&ra, &rb)?;
    Ok((ra, rb, chi))
}

pub fn compare_counts(counts: &[u64]) -> anyhow::Result<ChiSquare> {
    let [ca, ta, cb, tb] = counts else {
        return Err(ValidationError("--counts takes four numbers".into()).into());
    };
    chi_square_2x2(*ca, *ta, *cb, *tb).map_err(|e| ValidationError(e.to_string()).into())
}

/// Writes a synthetic world plus a ready-to-run `config.toml` that uses the
/// mock backend. Returns the config path.
pub fn write_synthetic(
    spec: SyntheticSpec,
    dir: &Path,
    sail: SailConfig,
) -> anyhow::Result<PathBuf> {
    let world =
        SyntheticWorld::generate(spec.clone()).map_err(|e| ValidationError(e.to_string()))?;
    let files = world
        .write_to_dir(dir)
        .with_context(|| format!("writing {}", dir.display()))?;
    let rel = |p: &Path| PathBuf::from(p.file_name().expect("file name"));
    let cfg = ExperimentConfig {
        pairs: vec![spec.pair.clone()],
        directions: Vec::new(),
        embeddings: files
            .embeddings
            .iter()
            .map(|(k, p)| (k.clone(), rel(p)))
            .collect(),
        test_sets: files
            .tests
            .iter()
            .map(|(k, p)| (k.clone(), rel(p)))
            .collect(),
        vocab_limit: None,
        out: Some("out".into()),
        cache_dir: None,
        sail,
        backend: BackendConfig::mock(rel(&files.mock_spec)),
        sweep: SweepConfig::default(),
        languages: BTreeMap::new(),
        templates: Vec::new(),
    };
    let path = dir.join("config.toml");
    std::fs::write(&path, toml::to_string(&cfg)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}
