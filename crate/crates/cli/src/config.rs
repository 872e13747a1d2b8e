//! Experiment configuration: one TOML file plus command-line overrides.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sail_core::{
    BackendConfig, LanguageNames, LanguagePair, SailConfig, TemplateRegistry, TemplateSpec,
};

/// A configuration problem. Reported with exit code 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationError(pub String);

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ValidationError {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    ValidationError(msg.into()).into()
}

fn default_vocab_limit() -> Option<usize> {
    Some(200_000)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub n_it: Vec<usize>,
    #[serde(default)]
    pub n_f: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pairs: Vec<LanguagePair>,
    /// Test directions to evaluate; empty means every direction of every
    /// pair that has a test set.
    #[serde(default)]
    pub directions: Vec<LanguagePair>,
    /// Language code to fastText `.vec` file.
    pub embeddings: BTreeMap<String, PathBuf>,
    /// Direction (`de-fr`) to test-set TSV.
    pub test_sets: BTreeMap<String, PathBuf>,
    /// Most frequent words loaded per language.
    #[serde(default = "default_vocab_limit")]
    pub vocab_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub sail: SailConfig,
    pub backend: BackendConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    /// Extra or replacement English language names.
    #[serde(default)]
    pub languages: BTreeMap<String, String>,
    /// Extra or replacement template families.
    #[serde(default)]
    pub templates: Vec<TemplateSpec>,
}

/// Command-line values that win over the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub pairs: Vec<LanguagePair>,
    pub directions: Vec<LanguagePair>,
    pub n_it: Option<usize>,
    pub n_f: Option<usize>,
    pub beam: Option<usize>,
    pub shots: Option<usize>,
    pub template_family: Option<String>,
    pub backend: Option<sail_core::BackendKind>,
    pub endpoint: Option<String>,
    pub mock_spec: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub no_back_translation: bool,
    pub concurrency: Option<usize>,
    pub out: Option<PathBuf>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ExperimentConfig {
    /// Parses `path`; relative paths inside are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text)
            .map_err(|e| invalid(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in self
            .embeddings
            .values_mut()
            .chain(self.test_sets.values_mut())
        {
            *p = resolve(base, p);
        }
        for p in [
            &mut self.out,
            &mut self.cache_dir,
            &mut self.backend.mock_spec,
        ]
        .into_iter()
        .flatten()
        {
            *p = resolve(base, p);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if !o.pairs.is_empty() {
            self.pairs = o.pairs.clone();
        }
        if !o.directions.is_empty() {
            self.directions = o.directions.clone();
        }
        let s = &mut self.sail;
        s.n_iterations = o.n_it.unwrap_or(s.n_iterations);
        s.n_frequent = o.n_f.unwrap_or(s.n_frequent);
        s.beam = o.beam.unwrap_or(s.beam);
        s.shots = o.shots.unwrap_or(s.shots);
        s.concurrency = o.concurrency.unwrap_or(s.concurrency);
        if let Some(f) = &o.template_family {
            s.template_family = f.clone();
        }
        if o.no_back_translation {
            s.back_translation = false;
        }
        if let Some(kind) = o.backend {
            self.backend.kind = kind;
        }
        if let Some(e) = &o.endpoint {
            self.backend.endpoint = Some(e.clone());
        }
        if let Some(m) = &o.mock_spec {
            self.backend.mock_spec = Some(m.clone());
        }
        if let Some(c) = &o.cache_dir {
            self.cache_dir = Some(c.clone());
        }
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
    }

    pub fn names(&self) -> LanguageNames {
        let mut names = LanguageNames::builtin();
        for (code, name) in &self.languages {
            names.insert(code.clone(), name.clone());
        }
        names
    }

    pub fn templates(&self) -> anyhow::Result<TemplateRegistry> {
        let mut reg = TemplateRegistry::builtin();
        for spec in &self.templates {
            reg.insert(spec.clone())
                .map_err(|e| invalid(format!("templates: {e}")))?;
        }
        Ok(reg)
    }

    /// Test directions this run evaluates, grouped by pair.
    pub fn directions_by_pair(&self) -> BTreeMap<LanguagePair, Vec<LanguagePair>> {
        let mut out: BTreeMap<LanguagePair, Vec<LanguagePair>> = BTreeMap::new();
        for pair in &self.pairs {
            let dirs = [pair.clone(), pair.reversed()]
                .into_iter()
                .filter(|d| {
                    if self.directions.is_empty() {
                        self.test_sets.contains_key(&d.to_string())
                    } else {
                        self.directions.contains(d)
                    }
                })
                .collect();
            out.insert(pair.clone(), dirs);
        }
        out
    }

    pub fn output_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Checks everything that can be checked before any work starts.
    pub fn validate(&self, needs_sweep: bool) -> anyhow::Result<()> {
        if self.pairs.is_empty() {
            return Err(invalid("pairs: at least one language pair is required"));
        }
        self.sail.validate().map_err(|e| invalid(e.to_string()))?;
        self.backend
            .validate()
            .map_err(|e| invalid(format!("backend: {e}")))?;
        if let Some(p) = &self.backend.mock_spec {
            if self.backend.kind == sail_core::BackendKind::Mock && !p.exists() {
                return Err(invalid(format!(
                    "backend.mock_spec: {} does not exist",
                    p.display()
                )));
            }
        }
        let templates = self.templates()?;
        templates
            .get(&self.sail.template_family)
            .map_err(|e| invalid(format!("sail.template_family: {e}")))?;
        let names = self.names();
        for pair in &self.pairs {
            for code in [pair.source(), pair.target()] {
                if names.name(code).is_none() {
                    return Err(invalid(format!(
                        "languages.{code}: no English name for language code {code:?}"
                    )));
                }
                match self.embeddings.get(code) {
                    None => return Err(invalid(format!("embeddings.{code}: missing path"))),
                    Some(p) if !p.is_file() => {
                        return Err(invalid(format!(
                            "embeddings.{code}: {} does not exist",
                            p.display()
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        for d in &self.directions {
            if !self.pairs.iter().any(|p| d == p || *d == p.reversed()) {
                return Err(invalid(format!(
                    "directions: {d} belongs to no configured pair"
                )));
            }
        }
        for (pair, dirs) in self.directions_by_pair() {
            if dirs.is_empty() {
                return Err(invalid(format!(
                    "test_sets: no test set for either direction of {pair}"
                )));
            }
            for d in dirs {
                match self.test_sets.get(&d.to_string()) {
                    None => return Err(invalid(format!("test_sets.{d}: missing path"))),
                    Some(p) if !p.is_file() => {
                        return Err(invalid(format!(
                            "test_sets.{d}: {} does not exist",
                            p.display()
                        )))
                    }
                    Some(_) => {}
                }
            }
        }
        if needs_sweep && self.sweep.n_it.is_empty() && self.sweep.n_f.is_empty() {
            return Err(invalid("sweep: n_it or n_f must list at least one value"));
        }
        Ok(())
    }

    /// The config with machine-local fields (output and cache locations)
    /// removed; this is what gets hashed and recorded.
    pub fn recorded(&self) -> Self {
        Self {
            out: None,
            cache_dir: None,
            ..self.clone()
        }
    }

    /// First 16 hex digits of the SHA-256 of the recorded config as JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(&self.recorded()).expect("config serializes");
        let digest = Sha256::digest(&json);
        hex::encode(digest)[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
pairs = ["de-fr"]

[embeddings]
de = "de.vec"
fr = "fr.vec"

[test_sets]
"de-fr" = "de-fr.tsv"

[backend]
kind = "mock"
mock_spec = "mock.json"
"#;

    #[test]
    fn defaults_follow_the_method() {
        let cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        assert_eq!(cfg.sail.n_iterations, 1);
        assert_eq!(cfg.sail.n_frequent, 5000);
        assert_eq!(cfg.sail.beam, 5);
        assert_eq!(cfg.sail.shots, 5);
        assert!(cfg.sail.back_translation);
        assert_eq!(cfg.vocab_limit, Some(200_000));
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let mut cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        cfg.resolve_paths(Path::new("/data/exp"));
        assert_eq!(cfg.embeddings["de"], PathBuf::from("/data/exp/de.vec"));
        assert_eq!(
            cfg.backend.mock_spec.as_deref(),
            Some(Path::new("/data/exp/mock.json"))
        );
    }

    #[test]
    fn flags_win() {
        let mut cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        cfg.apply(&Overrides {
            n_it: Some(3),
            n_f: Some(100),
            no_back_translation: true,
            template_family: Some("llama7b".into()),
            ..Default::default()
        });
        assert_eq!((cfg.sail.n_iterations, cfg.sail.n_frequent), (3, 100));
        assert!(!cfg.sail.back_translation);
        assert_eq!(cfg.sail.template_family, "llama7b");
    }

    #[test]
    fn hash_ignores_output_locations() {
        let cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        let mut moved = cfg.clone();
        moved.out = Some("/elsewhere".into());
        moved.cache_dir = Some("/cache".into());
        assert_eq!(cfg.hash(), moved.hash());
        let mut changed = cfg.clone();
        changed.sail.n_frequent = 10;
        assert_ne!(cfg.hash(), changed.hash());
        assert_eq!(cfg.hash().len(), 16);
    }

    #[test]
    fn missing_embedding_names_the_field() {
        let mut cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        cfg.embeddings.remove("fr");
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("mock.json"), "{}").unwrap();
        std::fs::write(dir.path().join("de.vec"), "1 1\na 1\n").unwrap();
        cfg.resolve_paths(dir.path());
        let err = cfg.validate(false).unwrap_err();
        let msg = err.downcast_ref::<ValidationError>().unwrap().to_string();
        assert_eq!(msg, "embeddings.fr: missing path");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[sail]\nn_iters = 2\n");
        assert!(toml::from_str::<ExperimentConfig>(&text).is_err());
    }

    #[test]
    fn default_directions_follow_test_sets() {
        let cfg: ExperimentConfig = toml::from_str(MINIMAL).unwrap();
        let dirs = cfg.directions_by_pair();
        assert_eq!(
            dirs[&"de-fr".parse().unwrap()],
            vec!["de-fr".parse().unwrap()]
        );
    }
}
