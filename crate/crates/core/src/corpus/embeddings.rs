use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;

use super::{CorpusError, Vocabulary};

/// Candidate sets larger than this are scanned in parallel chunks.
const SCAN_CHUNK: usize = 4096;

/// Unit-normalised static word vectors for one language.
///
/// Rows are kept in vocabulary rank order, so the row index doubles as the
/// frequency rank used to break similarity ties.
#[derive(Clone, Debug)]
pub struct EmbeddingSpace {
    language: String,
    dimension: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f32>,
    source_note: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub word: String,
    pub similarity: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LoadWarnings {
    /// Repeated words; the first occurrence was kept.
    pub duplicates: usize,
    /// Words skipped because their vector could not be normalised.
    pub zero_norm: usize,
}

#[derive(Clone, Debug)]
pub struct LoadedEmbeddings {
    pub vocab: Vocabulary,
    pub space: EmbeddingSpace,
    pub warnings: LoadWarnings,
}

fn normalize(vector: &mut [f32]) -> bool {
    let norm = vector
        .iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    for x in vector.iter_mut() {
        *x = (f64::from(*x) / norm) as f32;
    }
    true
}

#[inline]
fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

/// Ordering for ranked hits: higher similarity first, then lower row.
fn hit_order(a: &(usize, f64), b: &(usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

fn top_k_sorted(mut hits: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    if hits.len() > k {
        hits.select_nth_unstable_by(k - 1, hit_order);
        hits.truncate(k);
    }
    hits.sort_by(hit_order);
    hits
}

impl EmbeddingSpace {
    /// Builds a space from rows in rank order. Vectors are normalised here.
    pub fn from_rows(
        language: impl Into<String>,
        dimension: usize,
        rows: Vec<(String, Vec<f32>)>,
        source_note: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        let mut words = Vec::with_capacity(rows.len());
        let mut index = HashMap::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dimension);
        for (word, mut vector) in rows {
            if vector.len() != dimension {
                return Err(CorpusError::Dimension {
                    word,
                    found: vector.len(),
                    expected: dimension,
                });
            }
            if !normalize(&mut vector) {
                return Err(CorpusError::ZeroVector(word));
            }
            if index.insert(word.clone(), words.len()).is_some() {
                return Err(CorpusError::DuplicateWord(word));
            }
            words.push(word);
            data.extend_from_slice(&vector);
        }
        Ok(Self {
            language: language.into(),
            dimension,
            words,
            index,
            data,
            source_note: source_note.into(),
        })
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn source_note(&self) -> &str {
        &self.source_note
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn row_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word_at(&self, row: usize) -> &str {
        &self.words[row]
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.dimension..(row + 1) * self.dimension]
    }

    pub fn vector(&self, word: &str) -> Option<&[f32]> {
        self.row_of(word).map(|r| self.row(r))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Cosine similarity; vectors are unit length so this is a dot product.
    pub fn similarity(&self, a: &str, b: &str) -> Option<f64> {
        Some(dot(self.vector(a)?, self.vector(b)?))
    }

    /// Exhaustive top-`k` over `rows` by similarity to `query`.
    ///
    /// Returns `(row, similarity)` sorted by descending similarity, ties by
    /// ascending row.
    pub fn rank_rows(&self, query: &[f32], rows: &[usize], k: usize) -> Vec<(usize, f64)> {
        if k == 0 || rows.is_empty() {
            return Vec::new();
        }
        let scan = |chunk: &[usize]| {
            let hits = chunk
                .iter()
                .map(|&r| (r, dot(query, self.row(r))))
                .collect();
            top_k_sorted(hits, k)
        };
        if rows.len() <= SCAN_CHUNK {
            return scan(rows);
        }
        let merged = rows
            .par_chunks(SCAN_CHUNK)
            .map(scan)
            .reduce(Vec::new, |mut a, b| {
                a.extend(b);
                a
            });
        top_k_sorted(merged, k)
    }

    /// The `k` candidates most similar to `query`, best first.
    ///
    /// Ties are broken by ascending vocabulary rank. The query itself is
    /// returned only if it is among the candidates.
    pub fn nearest_neighbors<'a, I>(
        &self,
        query: &str,
        candidates: I,
        k: usize,
    ) -> Result<Vec<Neighbor>, CorpusError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let q = self
            .vector(query)
            .ok_or_else(|| CorpusError::MissingVector(query.to_string()))?;
        let mut rows = candidates
            .into_iter()
            .map(|w| {
                self.row_of(w)
                    .ok_or_else(|| CorpusError::UnknownCandidate(w.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if rows.is_empty() {
            return Err(CorpusError::EmptyCandidates);
        }
        rows.sort_unstable();
        rows.dedup();
        Ok(self
            .rank_rows(q, &rows, k)
            .into_iter()
            .map(|(r, similarity)| Neighbor {
                word: self.words[r].clone(),
                similarity,
            })
            .collect())
    }

    /// Writes the space in fastText text format.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {}", self.len(), self.dimension)?;
        for (r, word) in self.words.iter().enumerate() {
            write!(out, "{word}")?;
            for x in self.row(r) {
                write!(out, " {x}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    }
}

/// Loads a fastText `.vec` text file. `limit` caps the number of words kept.
pub fn load_embeddings(
    path: &Path,
    language: &str,
    limit: Option<usize>,
) -> Result<LoadedEmbeddings, CorpusError> {
    let origin = path.display().to_string();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        origin: origin.clone(),
        source,
    })?;
    read_embeddings(BufReader::new(file), &origin, language, limit)
}

pub fn read_embeddings<R: BufRead>(
    reader: R,
    origin: &str,
    language: &str,
    limit: Option<usize>,
) -> Result<LoadedEmbeddings, CorpusError> {
    let parse_err = |line: usize, message: String| CorpusError::Parse {
        origin: origin.to_string(),
        line,
        message,
    };
    let io_err = |source| CorpusError::Io {
        origin: origin.to_string(),
        source,
    };

    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header".into()))?
        .map_err(io_err)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (count, dimension) = match fields.as_slice() {
        [c, d] => match (c.parse::<usize>(), d.parse::<usize>()) {
            (Ok(c), Ok(d)) if d > 0 => (c, d),
            _ => return Err(parse_err(1, format!("malformed header {header:?}"))),
        },
        _ => return Err(parse_err(1, format!("malformed header {header:?}"))),
    };
    let wanted = limit.map_or(count, |l| l.min(count));

    let mut warnings = LoadWarnings::default();
    let mut seen = HashMap::new();
    let mut rows = Vec::with_capacity(wanted);
    let mut read = 0usize;
    for (i, line) in lines.enumerate() {
        if rows.len() >= wanted || read >= count {
            break;
        }
        let lineno = i + 2;
        let line = line.map_err(io_err)?;
        let line = line.trim_end_matches(['\r', '\n', ' ']);
        read += 1;
        let mut parts = line.split(' ');
        let word = parts.next().unwrap_or_default();
        if word.is_empty() {
            return Err(parse_err(lineno, "empty word".into()));
        }
        let values: Vec<&str> = parts.collect();
        if values.len() != dimension {
            return Err(parse_err(
                lineno,
                format!("expected {dimension} components, found {}", values.len()),
            ));
        }
        let mut vector = Vec::with_capacity(dimension);
        for v in values {
            let x: f32 = v
                .parse()
                .map_err(|_| parse_err(lineno, format!("non-numeric component {v:?}")))?;
            if !x.is_finite() {
                return Err(parse_err(lineno, format!("non-finite component {v:?}")));
            }
            vector.push(x);
        }
        if seen.contains_key(word) {
            warnings.duplicates += 1;
            continue;
        }
        if !normalize(&mut vector) {
            warnings.zero_norm += 1;
            continue;
        }
        seen.insert(word.to_string(), ());
        rows.push((word.to_string(), vector));
    }
    if read < count && rows.len() < wanted {
        return Err(parse_err(
            read + 2,
            format!("header declares {count} words, file has {read}"),
        ));
    }
    if warnings.duplicates > 0 || warnings.zero_norm > 0 {
        log::warn!(
            "{origin}: skipped {} duplicate and {} zero-norm entries",
            warnings.duplicates,
            warnings.zero_norm
        );
    }

    let vocab = Vocabulary::new(language, rows.iter().map(|(w, _)| w.clone()).collect())?;
    let space = EmbeddingSpace::from_rows(language, dimension, rows, origin)?;
    Ok(LoadedEmbeddings {
        vocab,
        space,
        warnings,
    })
}
