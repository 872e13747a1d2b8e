use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::LanguagePair;
use crate::prompting::IclExample;

/// Which harvest direction produced a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    FromXSide,
    FromYSide,
    Both,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::FromXSide => "from_x_side",
            Self::FromYSide => "from_y_side",
            Self::Both => "both",
        }
    }

    fn merge(self, other: Self) -> Self {
        if self == other {
            self
        } else {
            Self::Both
        }
    }

    fn has_x(self) -> bool {
        matches!(self, Self::FromXSide | Self::Both)
    }

    fn has_y(self) -> bool {
        matches!(self, Self::FromYSide | Self::Both)
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "from_x_side" => Ok(Self::FromXSide),
            "from_y_side" => Ok(Self::FromYSide),
            "both" => Ok(Self::Both),
            other => Err(format!("unknown provenance {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictEntry {
    pub provenance: Provenance,
    pub iteration: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum DictionaryError {
    #[error("dictionary line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dictionary has no `# pair:` line")]
    MissingPair,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Self-harvested word pairs, stored as (x word, y word) for `pair = x-y`.
///
/// A set of pairs rather than a map: an x word may appear with several y
/// words when the two harvest directions disagree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HighConfidenceDictionary {
    pair: LanguagePair,
    entries: BTreeMap<(String, String), DictEntry>,
    iteration: usize,
}

impl HighConfidenceDictionary {
    pub fn new(pair: LanguagePair, iteration: usize) -> Self {
        Self {
            pair,
            entries: BTreeMap::new(),
            iteration,
        }
    }

    pub fn pair(&self) -> &LanguagePair {
        &self.pair
    }

    /// The iteration that built this dictionary; 0 for none.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds `(x, y)` tagged with the current iteration. A pair already
    /// present from the other side becomes [`Provenance::Both`].
    pub fn insert(&mut self, x: impl Into<String>, y: impl Into<String>, provenance: Provenance) {
        let iteration = self.iteration;
        self.entries
            .entry((x.into(), y.into()))
            .and_modify(|e| e.provenance = e.provenance.merge(provenance))
            .or_insert(DictEntry {
                provenance,
                iteration,
            });
    }

    /// Adds every entry of `other` that is not already present, keeping
    /// its provenance and iteration.
    pub fn absorb(&mut self, other: &HighConfidenceDictionary) {
        for (k, e) in &other.entries {
            self.entries.entry(k.clone()).or_insert(*e);
        }
    }

    pub fn contains(&self, x: &str, y: &str) -> bool {
        self.entries.contains_key(&(x.to_string(), y.to_string()))
    }

    pub fn get(&self, x: &str, y: &str) -> Option<&DictEntry> {
        self.entries.get(&(x.to_string(), y.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &DictEntry)> {
        self.entries
            .iter()
            .map(|((x, y), e)| (x.as_str(), y.as_str(), e))
    }

    pub fn pairs(&self) -> BTreeSet<(String, String)> {
        self.entries.keys().cloned().collect()
    }

    /// Entries harvested from the x side, including those found by both.
    pub fn x_side_count(&self) -> usize {
        self.entries
            .values()
            .filter(|e| e.provenance.has_x())
            .count()
    }

    pub fn y_side_count(&self) -> usize {
        self.entries
            .values()
            .filter(|e| e.provenance.has_y())
            .count()
    }

    pub fn both_count(&self) -> usize {
        self.entries
            .values()
            .filter(|e| e.provenance == Provenance::Both)
            .count()
    }

    /// In-context examples for `direction`, which must be the pair or its
    /// reverse.
    pub fn oriented(&self, direction: &LanguagePair) -> Vec<IclExample> {
        let flip = *direction != self.pair;
        debug_assert!(!flip || *direction == self.pair.reversed());
        self.entries
            .keys()
            .map(|(x, y)| {
                if flip {
                    IclExample::new(y.clone(), x.clone())
                } else {
                    IclExample::new(x.clone(), y.clone())
                }
            })
            .collect()
    }

    /// `x<TAB>y<TAB>provenance<TAB>iteration` lines sorted by x then y,
    /// after `# ` comment lines for the pair, iteration and config hash.
    pub fn write_tsv<W: Write>(&self, mut out: W, config_hash: &str) -> std::io::Result<()> {
        writeln!(out, "# pair: {}", self.pair)?;
        writeln!(out, "# iteration: {}", self.iteration)?;
        writeln!(out, "# config_hash: {config_hash}")?;
        for ((x, y), e) in &self.entries {
            writeln!(out, "{x}\t{y}\t{}\t{}", e.provenance, e.iteration)?;
        }
        Ok(())
    }

    pub fn to_tsv(&self, config_hash: &str) -> String {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf, config_hash).expect("write to Vec");
        String::from_utf8(buf).expect("utf-8")
    }

    /// Reads [`write_tsv`](Self::write_tsv) output. Returns the dictionary
    /// and the recorded config hash, if any.
    pub fn read_tsv<R: BufRead>(reader: R) -> Result<(Self, Option<String>), DictionaryError> {
        let mut pair = None;
        let mut iteration = None;
        let mut hash = None;
        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let n = i + 1;
            let err = |message: String| DictionaryError::Parse { line: n, message };
            if let Some(comment) = line.strip_prefix("# ") {
                if let Some(p) = comment.strip_prefix("pair: ") {
                    pair = Some(p.parse::<LanguagePair>().map_err(|e| err(e.to_string()))?);
                } else if let Some(it) = comment.strip_prefix("iteration: ") {
                    iteration = Some(it.parse::<usize>().map_err(|e| err(e.to_string()))?);
                } else if let Some(h) = comment.strip_prefix("config_hash: ") {
                    hash = Some(h.to_string());
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [x, y, prov, it] = fields.as_slice() else {
                return Err(err(format!(
                    "expected 4 tab-separated fields, got {}",
                    fields.len()
                )));
            };
            if x.is_empty() || y.is_empty() {
                return Err(err("empty word".into()));
            }
            let provenance: Provenance = prov.parse().map_err(err)?;
            let it: usize = it
                .parse()
                .map_err(|_| err(format!("bad iteration {it:?}")))?;
            rows.push((x.to_string(), y.to_string(), provenance, it));
        }
        let pair = pair.ok_or(DictionaryError::MissingPair)?;
        let iteration = iteration.unwrap_or_else(|| rows.iter().map(|r| r.3).max().unwrap_or(0));
        let mut dict = Self::new(pair, iteration);
        for (x, y, provenance, it) in rows {
            dict.entries.insert(
                (x, y),
                DictEntry {
                    provenance,
                    iteration: it,
                },
            );
        }
        Ok((dict, hash))
    }
}
