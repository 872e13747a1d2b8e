use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{CorpusError, LanguagePair};

/// Gold lexicon for one BLI direction: source word to its accepted targets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BliTestSet {
    pub pair: LanguagePair,
    pub entries: BTreeMap<String, BTreeSet<String>>,
}

impl BliTestSet {
    pub fn new(pair: LanguagePair) -> Self {
        Self {
            pair,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, source: impl Into<String>, target: impl Into<String>) {
        self.entries
            .entry(source.into())
            .or_default()
            .insert(target.into());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of (source, gold) pairs.
    pub fn gold_count(&self) -> usize {
        self.entries.values().map(BTreeSet::len).sum()
    }

    pub fn source_words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn golds(&self, source: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(source)
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (source, golds) in &self.entries {
            for gold in golds {
                writeln!(out, "{source}\t{gold}")?;
            }
        }
        out.flush()
    }
}

pub fn load_test_set(path: &Path, pair: LanguagePair) -> Result<BliTestSet, CorpusError> {
    let origin = path.display().to_string();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        origin: origin.clone(),
        source,
    })?;
    read_test_set(BufReader::new(file), &origin, pair)
}

/// Reads `source<TAB>target` lines. Repeated sources accumulate golds and
/// identical lines collapse. Blank lines are ignored.
pub fn read_test_set<R: BufRead>(
    reader: R,
    origin: &str,
    pair: LanguagePair,
) -> Result<BliTestSet, CorpusError> {
    let mut set = BliTestSet::new(pair);
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            origin: origin.to_string(),
            source,
        })?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            [s, t] if !s.is_empty() && !t.is_empty() => set.insert(*s, *t),
            _ => {
                return Err(CorpusError::Parse {
                    origin: origin.to_string(),
                    line: i + 1,
                    message: format!("expected 2 tab-separated fields, got {line:?}"),
                })
            }
        }
    }
    Ok(set)
}
