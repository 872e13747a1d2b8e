//! Seeded toy bilingual worlds for tests, benchmarks and offline demos.
//!
//! Word `i` of language `xx` is spelled `xxw0000`-style and has rank `i`.
//! The clean lexicon is rank-aligned: x word `i` translates to y word `i`.
//! Y vectors are the x vectors plus small perturbations, so nearest
//! neighbours agree across the two spaces.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{make_consistency_mock, ConsistencyWorld, MockSpec};
use crate::corpus::{BliTestSet, CorpusError, EmbeddingSpace, LanguagePair, Vocabulary};
use crate::sail::LanguageAssets;

fn default_dim() -> usize {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub pair: LanguagePair,
    pub n_words: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Share of words per direction the mock mistranslates.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    /// Test words are ranks `test_offset .. test_offset + test_size`.
    pub test_size: usize,
    #[serde(default)]
    pub test_offset: usize,
    /// When set, zero-shot prompts only succeed on this many top words.
    #[serde(default)]
    pub zero_shot_top: Option<usize>,
    #[serde(default = "one")]
    pub min_shots: usize,
}

fn one() -> usize {
    1
}

impl SyntheticSpec {
    pub fn new(pair: LanguagePair, n_words: usize, test_size: usize) -> Self {
        Self {
            pair,
            n_words,
            dim: default_dim(),
            noise: 0.0,
            seed: 0,
            test_size,
            test_offset: 0,
            zero_shot_top: None,
            min_shots: 1,
        }
    }
}

pub fn synthetic_word(code: &str, i: usize) -> String {
    format!("{code}w{i:04}")
}

#[derive(Clone, Debug)]
pub struct SyntheticWorld {
    pub spec: SyntheticSpec,
    pub x: LanguageAssets,
    pub y: LanguageAssets,
    /// Clean x to y lexicon.
    pub lexicon: BTreeMap<String, String>,
    /// Source words mistranslated in x to y and in y to x.
    pub noisy_x: BTreeSet<String>,
    pub noisy_y: BTreeSet<String>,
    pub world: ConsistencyWorld,
    /// x to y, then y to x.
    pub tests: Vec<BliTestSet>,
}

/// Paths written by [`SyntheticWorld::write_to_dir`].
#[derive(Clone, Debug)]
pub struct SyntheticFiles {
    pub embeddings: BTreeMap<String, PathBuf>,
    pub tests: BTreeMap<String, PathBuf>,
    pub mock_spec: PathBuf,
}

impl SyntheticWorld {
    pub fn generate(spec: SyntheticSpec) -> Result<Self, CorpusError> {
        if !(0.0..=1.0).contains(&spec.noise) {
            return Err(CorpusError::Synthetic(format!(
                "noise {} outside [0, 1]",
                spec.noise
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let (xc, yc) = (spec.pair.source(), spec.pair.target());
        let n = spec.n_words;

        let mut x_rows = Vec::with_capacity(n);
        let mut y_rows = Vec::with_capacity(n);
        for i in 0..n {
            let v: Vec<f32> = (0..spec.dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
            let u: Vec<f32> = v
                .iter()
                .map(|a| a + rng.gen_range(-0.05f32..0.05))
                .collect();
            x_rows.push((synthetic_word(xc, i), v));
            y_rows.push((synthetic_word(yc, i), u));
        }
        let x_space = EmbeddingSpace::from_rows(xc, spec.dim, x_rows, "synthetic")?;
        let y_space = EmbeddingSpace::from_rows(yc, spec.dim, y_rows, "synthetic")?;
        let x_vocab = Vocabulary::new(xc, x_space.words().to_vec())?;
        let y_vocab = Vocabulary::new(yc, y_space.words().to_vec())?;

        let lexicon: BTreeMap<String, String> = (0..n)
            .map(|i| (synthetic_word(xc, i), synthetic_word(yc, i)))
            .collect();
        let backward: BTreeMap<String, String> = lexicon
            .iter()
            .map(|(a, b)| (b.clone(), a.clone()))
            .collect();

        let n_noisy = (spec.noise * n as f64).round() as usize;
        let noisy_x: BTreeSet<String> = sample(&mut rng, n, n_noisy)
            .into_iter()
            .map(|i| synthetic_word(xc, i))
            .collect();
        let noisy_y: BTreeSet<String> = sample(&mut rng, n, n_noisy)
            .into_iter()
            .map(|i| synthetic_word(yc, i))
            .collect();

        let reversed = spec.pair.reversed();
        let mut world = make_consistency_mock(
            [
                (spec.pair.clone(), lexicon.clone()),
                (reversed.clone(), backward),
            ]
            .into(),
            [
                (spec.pair.clone(), noisy_x.clone()),
                (reversed.clone(), noisy_y.clone()),
            ]
            .into(),
        );
        world.min_shots = spec.min_shots;
        if let Some(top) = spec.zero_shot_top {
            let known = |code: &str| (0..top.min(n)).map(|i| synthetic_word(code, i)).collect();
            world.zero_shot_known = Some(
                [
                    (spec.pair.to_string(), known(xc)),
                    (reversed.to_string(), known(yc)),
                ]
                .into(),
            );
        }

        let end = (spec.test_offset + spec.test_size).min(n);
        let mut fwd = BliTestSet::new(spec.pair.clone());
        let mut bwd = BliTestSet::new(reversed);
        for i in spec.test_offset.min(end)..end {
            fwd.insert(synthetic_word(xc, i), synthetic_word(yc, i));
            bwd.insert(synthetic_word(yc, i), synthetic_word(xc, i));
        }

        Ok(Self {
            spec,
            x: LanguageAssets::new(x_vocab, x_space),
            y: LanguageAssets::new(y_vocab, y_space),
            lexicon,
            noisy_x,
            noisy_y,
            world,
            tests: vec![fwd, bwd],
        })
    }

    pub fn mock_spec(&self) -> MockSpec {
        MockSpec::Consistency {
            world: self.world.clone(),
        }
    }

    /// Writes `<lang>.vec`, `<src>-<tgt>.test.tsv` and `mock.json`.
    pub fn write_to_dir(&self, dir: &Path) -> std::io::Result<SyntheticFiles> {
        std::fs::create_dir_all(dir)?;
        let mut embeddings = BTreeMap::new();
        for assets in [&self.x, &self.y] {
            let path = dir.join(format!("{}.vec", assets.language()));
            assets
                .space
                .write_text(BufWriter::new(File::create(&path)?))?;
            embeddings.insert(assets.language().to_string(), path);
        }
        let mut tests = BTreeMap::new();
        for t in &self.tests {
            let path = dir.join(format!("{}.test.tsv", t.pair));
            t.write_tsv(BufWriter::new(File::create(&path)?))?;
            tests.insert(t.pair.to_string(), path);
        }
        let mock_spec = dir.join("mock.json");
        self.mock_spec().save(&mock_spec)?;
        Ok(SyntheticFiles {
            embeddings,
            tests,
            mock_spec,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            noise: 0.2,
            seed: 7,
            ..SyntheticSpec::new("de-fr".parse().unwrap(), 50, 10)
        }
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let a = SyntheticWorld::generate(spec()).unwrap();
        let b = SyntheticWorld::generate(spec()).unwrap();
        assert_eq!(a.world, b.world);
        assert_eq!(a.x.space.row(3), b.x.space.row(3));
        assert_eq!(a.noisy_x.len(), 10);
        assert_eq!(a.noisy_y.len(), 10);
        assert_eq!(a.tests[0].len(), 10);
        assert_eq!(a.x.vocab.words()[0], "dew0000");
    }

    #[test]
    fn cross_space_neighbours_agree() {
        let w = SyntheticWorld::generate(spec()).unwrap();
        let x_nn =
            w.x.space
                .nearest_neighbors("dew0000", w.x.vocab.words().iter().map(String::as_str), 2)
                .unwrap();
        let y_nn =
            w.y.space
                .nearest_neighbors("frw0000", w.y.vocab.words().iter().map(String::as_str), 2)
                .unwrap();
        assert_eq!(x_nn[1].word[2..], y_nn[1].word[2..]);
    }

    #[test]
    fn writes_loadable_files() {
        let dir = tempfile::tempdir().unwrap();
        let w = SyntheticWorld::generate(spec()).unwrap();
        let files = w.write_to_dir(dir.path()).unwrap();
        let loaded = crate::corpus::load_embeddings(&files.embeddings["de"], "de", None).unwrap();
        assert_eq!(loaded.vocab.words(), w.x.vocab.words());
        let t =
            crate::corpus::load_test_set(&files.tests["de-fr"], "de-fr".parse().unwrap()).unwrap();
        assert_eq!(t, w.tests[0]);
        assert!(matches!(
            MockSpec::load(&files.mock_spec).unwrap(),
            MockSpec::Consistency { .. }
        ));
    }
}
