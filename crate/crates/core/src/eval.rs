//! Top-1 accuracy, direction aggregates and chi-square significance.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::corpus::{BliTestSet, LanguagePair};
use crate::extraction::Prediction;

#[derive(Debug, Clone, thiserror::Error)]
pub enum EvalError {
    #[error("test set {0} is empty")]
    EmptyTestSet(LanguagePair),
    #[error("invalid counts: {0}")]
    InvalidCounts(String),
    #[error("no directions to aggregate")]
    NoDirections,
    #[error("report line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    #[default]
    Exact,
    /// Compare lowercased prediction and golds.
    CaseInsensitive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionScore {
    pub direction: LanguagePair,
    pub n_queries: usize,
    pub n_correct: usize,
    pub accuracy: f64,
}

/// Top-1 accuracy of `predictions` on `test`. Missing, failed and
/// out-of-vocabulary predictions count as wrong.
pub fn score(
    test: &BliTestSet,
    predictions: &BTreeMap<String, Prediction>,
) -> Result<DirectionScore, EvalError> {
    score_with(test, predictions, MatchMode::Exact)
}

pub fn score_with(
    test: &BliTestSet,
    predictions: &BTreeMap<String, Prediction>,
    mode: MatchMode,
) -> Result<DirectionScore, EvalError> {
    if test.is_empty() {
        return Err(EvalError::EmptyTestSet(test.pair.clone()));
    }
    let n_correct = test
        .entries
        .iter()
        .filter(|(source, golds)| {
            let Some(word) = predictions
                .get(*source)
                .and_then(|p| p.predicted.as_deref())
            else {
                return false;
            };
            match mode {
                MatchMode::Exact => golds.contains(word),
                MatchMode::CaseInsensitive => {
                    let word = word.to_lowercase();
                    golds.iter().any(|g| g.to_lowercase() == word)
                }
            }
        })
        .count();
    let n_queries = test.len();
    Ok(DirectionScore {
        direction: test.pair.clone(),
        n_queries,
        n_correct,
        accuracy: n_correct as f64 / n_queries as f64,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub p_value: f64,
}

impl fmt::Display for ChiSquare {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "chi2 = {:.4}, p = {}",
            self.statistic,
            format_p_value(self.p_value)
        )
    }
}

/// p-values below the representable range print as `< 1e-300`.
pub fn format_p_value(p: f64) -> String {
    if p < 1e-300 {
        "< 1e-300".to_string()
    } else {
        format!("{p:.3e}")
    }
}

/// Pearson chi-square (no continuity correction) on the 2x2 table of
/// correct/incorrect by system A/B, with its chi-square(1) p-value.
pub fn chi_square_2x2(
    correct_a: u64,
    total_a: u64,
    correct_b: u64,
    total_b: u64,
) -> Result<ChiSquare, EvalError> {
    if total_a == 0 || total_b == 0 {
        return Err(EvalError::InvalidCounts("totals must be positive".into()));
    }
    if correct_a > total_a || correct_b > total_b {
        return Err(EvalError::InvalidCounts("correct exceeds total".into()));
    }
    let observed = [
        [correct_a as f64, (total_a - correct_a) as f64],
        [correct_b as f64, (total_b - correct_b) as f64],
    ];
    let rows = [total_a as f64, total_b as f64];
    let cols = [
        observed[0][0] + observed[1][0],
        observed[0][1] + observed[1][1],
    ];
    let n = rows[0] + rows[1];
    if cols[0] == 0.0 || cols[1] == 0.0 {
        return Ok(ChiSquare {
            statistic: 0.0,
            p_value: 1.0,
        });
    }
    let mut statistic = 0.0;
    for (i, row) in observed.iter().enumerate() {
        for (j, &o) in row.iter().enumerate() {
            let expected = rows[i] * cols[j] / n;
            statistic += (o - expected).powi(2) / expected;
        }
    }
    Ok(ChiSquare {
        statistic,
        p_value: chi_square_1_sf(statistic),
    })
}

/// Survival function of chi-square with one degree of freedom.
pub fn chi_square_1_sf(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        erfc((x / 2.0).sqrt())
    }
}

/// Chi-square on counts pooled over all directions of two reports.
pub fn compare_pooled(a: &EvaluationReport, b: &EvaluationReport) -> Result<ChiSquare, EvalError> {
    let (ca, ta) = a.pooled();
    let (cb, tb) = b.pooled();
    chi_square_2x2(ca, ta, cb, tb)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub directions: Vec<DirectionScore>,
    /// Mean accuracy over every direction a language takes part in.
    pub per_language: BTreeMap<String, f64>,
    /// Unweighted mean over directions.
    pub global_mean: f64,
    pub config_hash: String,
}

/// Per-language and global unweighted means of direction accuracies.
pub fn aggregate(
    scores: &[DirectionScore],
    config_hash: impl Into<String>,
) -> Result<EvaluationReport, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::NoDirections);
    }
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for s in scores {
        for lang in [s.direction.source(), s.direction.target()] {
            let e = sums.entry(lang.to_string()).or_default();
            e.0 += s.accuracy;
            e.1 += 1;
        }
    }
    let mut directions = scores.to_vec();
    directions.sort_by(|a, b| a.direction.cmp(&b.direction));
    Ok(EvaluationReport {
        global_mean: scores.iter().map(|s| s.accuracy).sum::<f64>() / scores.len() as f64,
        per_language: sums
            .into_iter()
            .map(|(l, (sum, n))| (l, sum / n as f64))
            .collect(),
        directions,
        config_hash: config_hash.into(),
    })
}

impl EvaluationReport {
    pub fn pooled(&self) -> (u64, u64) {
        self.directions.iter().fold((0, 0), |(c, t), d| {
            (c + d.n_correct as u64, t + d.n_queries as u64)
        })
    }

    /// `direction, n, correct, accuracy` rows after a config-hash comment.
    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "# config_hash: {}\ndirection\tn\tcorrect\taccuracy\n",
            self.config_hash
        );
        for d in &self.directions {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.6}",
                d.direction, d.n_queries, d.n_correct, d.accuracy
            );
        }
        out
    }

    /// Reads the output of [`to_tsv`](Self::to_tsv); aggregates are
    /// recomputed.
    pub fn from_tsv<R: BufRead>(reader: R) -> Result<Self, EvalError> {
        let mut hash = String::new();
        let mut scores = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| EvalError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            if let Some(h) = line.strip_prefix("# config_hash: ") {
                hash = h.to_string();
                continue;
            }
            if line.starts_with("# ") || line.is_empty() || line.starts_with("direction\t") {
                continue;
            }
            let err = |message: String| EvalError::Parse {
                line: i + 1,
                message,
            };
            let f: Vec<&str> = line.split('\t').collect();
            let [dir, n, c, _] = f.as_slice() else {
                return Err(err(format!("expected 4 fields, got {line:?}")));
            };
            let direction: LanguagePair = dir.parse().map_err(|e| err(format!("{e}")))?;
            let n_queries: usize = n.parse().map_err(|_| err(format!("bad n {n:?}")))?;
            let n_correct: usize = c.parse().map_err(|_| err(format!("bad correct {c:?}")))?;
            if n_queries == 0 || n_correct > n_queries {
                return Err(err("inconsistent counts".into()));
            }
            scores.push(DirectionScore {
                direction,
                n_queries,
                n_correct,
                accuracy: n_correct as f64 / n_queries as f64,
            });
        }
        aggregate(&scores, hash)
    }

    /// Plain-text table with accuracies in percent.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "config hash: {}", self.config_hash);
        let _ = writeln!(
            out,
            "{:<10} {:>7} {:>8} {:>9}",
            "direction", "n", "correct", "acc (%)"
        );
        for d in &self.directions {
            let _ = writeln!(
                out,
                "{:<10} {:>7} {:>8} {:>9.2}",
                d.direction.to_string(),
                d.n_queries,
                d.n_correct,
                d.accuracy * 100.0
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<10} {:>9}", "language", "mean (%)");
        for (lang, mean) in &self.per_language {
            let _ = writeln!(out, "{:<10} {:>9.2}", lang, mean * 100.0);
        }
        let _ = writeln!(out, "{:<10} {:>9.2}", "all", self.global_mean * 100.0);
        out
    }
}
