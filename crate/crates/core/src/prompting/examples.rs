use std::collections::BTreeMap;

use super::{IclExample, PromptError};
use crate::corpus::EmbeddingSpace;

/// Picks up to `k` in-context examples for `query` from `store`, which must
/// be oriented source to target for the current direction.
///
/// Examples whose source word is nearest to `query` in `space` come first;
/// equal similarities go to the more frequent source word, then to the
/// smaller target word. Entries whose source word is the query are never
/// used, and entries whose source word has no vector are not eligible.
///
/// When the query itself has no vector, the examples with the most frequent
/// source words are returned instead.
pub fn select_icl_examples(
    store: &[IclExample],
    space: &EmbeddingSpace,
    query: &str,
    k: usize,
) -> Result<Vec<IclExample>, PromptError> {
    if store.is_empty() {
        return Err(PromptError::EmptyDictionary);
    }
    if k == 0 {
        return Ok(Vec::new());
    }

    // Eligible entries grouped by source row, targets sorted.
    let mut by_row: BTreeMap<usize, Vec<&IclExample>> = BTreeMap::new();
    let mut unranked: Vec<&IclExample> = Vec::new();
    for example in store.iter().filter(|e| e.source_word != query) {
        match space.row_of(&example.source_word) {
            Some(row) => by_row.entry(row).or_default().push(example),
            None => unranked.push(example),
        }
    }
    for group in by_row.values_mut() {
        group.sort_by(|a, b| a.target_word.cmp(&b.target_word));
        group.dedup();
    }

    let ordered_rows: Vec<usize> = match space.vector(query) {
        Some(q) => {
            let rows: Vec<usize> = by_row.keys().copied().collect();
            space
                .rank_rows(q, &rows, k)
                .into_iter()
                .map(|(r, _)| r)
                .collect()
        }
        None => by_row.keys().copied().collect(),
    };

    let mut picked: Vec<IclExample> = ordered_rows
        .iter()
        .flat_map(|r| by_row[r].iter().map(|e| (*e).clone()))
        .take(k)
        .collect();

    if space.vector(query).is_none() && picked.len() < k {
        unranked.sort();
        unranked.dedup();
        picked.extend(unranked.into_iter().take(k - picked.len()).cloned());
    }
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> EmbeddingSpace {
        // rank order: q, a, b, c, d, e, f
        let rows = vec![
            ("q", vec![1.0, 0.0]),
            ("a", vec![0.9, 0.1]),
            ("b", vec![0.5, 0.5]),
            ("c", vec![0.1, 0.9]),
            ("d", vec![0.8, 0.2]),
            ("e", vec![0.0, 1.0]),
            ("f", vec![0.5, 0.5]),
        ];
        EmbeddingSpace::from_rows(
            "xx",
            2,
            rows.into_iter().map(|(w, v)| (w.to_string(), v)).collect(),
            "test",
        )
        .unwrap()
    }

    fn ex(s: &str, t: &str) -> IclExample {
        IclExample::new(s, t)
    }

    fn sources(v: &[IclExample]) -> Vec<&str> {
        v.iter().map(|e| e.source_word.as_str()).collect()
    }

    #[test]
    fn forced_selection_in_similarity_order() {
        let store = vec![
            ex("c", "C"),
            ex("a", "A"),
            ex("e", "E"),
            ex("b", "B"),
            ex("d", "D"),
        ];
        let picked = select_icl_examples(&store, &space(), "q", 5).unwrap();
        assert_eq!(sources(&picked), ["a", "d", "b", "c", "e"]);
    }

    #[test]
    fn query_entry_excluded() {
        let store = vec![
            ex("q", "Q"),
            ex("a", "A"),
            ex("b", "B"),
            ex("c", "C"),
            ex("d", "D"),
            ex("e", "E"),
        ];
        let picked = select_icl_examples(&store, &space(), "q", 5).unwrap();
        assert!(picked.iter().all(|e| e.source_word != "q"));
        assert_eq!(picked.len(), 5);
    }

    #[test]
    fn tie_goes_to_more_frequent_source() {
        // b and f have identical vectors; b has the lower rank
        let store = vec![ex("f", "F"), ex("b", "B")];
        let picked = select_icl_examples(&store, &space(), "q", 1).unwrap();
        assert_eq!(sources(&picked), ["b"]);
    }

    #[test]
    fn fewer_than_k() {
        let store = vec![ex("a", "A"), ex("c", "C")];
        assert_eq!(
            select_icl_examples(&store, &space(), "q", 5).unwrap().len(),
            2
        );
    }

    #[test]
    fn conflicting_pairs_share_a_slot_group() {
        let store = vec![ex("a", "A2"), ex("a", "A1"), ex("d", "D")];
        let picked = select_icl_examples(&store, &space(), "q", 2).unwrap();
        assert_eq!(picked, [ex("a", "A1"), ex("a", "A2")]);
    }

    #[test]
    fn frequency_fallback_without_vector() {
        let store = vec![ex("e", "E"), ex("zz", "Z"), ex("b", "B"), ex("a", "A")];
        let picked = select_icl_examples(&store, &space(), "unknown", 3).unwrap();
        assert_eq!(sources(&picked), ["a", "b", "e"]);
        let all = select_icl_examples(&store, &space(), "unknown", 10).unwrap();
        assert_eq!(sources(&all), ["a", "b", "e", "zz"]);
    }

    #[test]
    fn empty_store_errors() {
        assert!(matches!(
            select_icl_examples(&[], &space(), "q", 5),
            Err(PromptError::EmptyDictionary)
        ));
    }

    #[test]
    fn deterministic() {
        let store = vec![
            ex("c", "C"),
            ex("a", "A"),
            ex("e", "E"),
            ex("b", "B"),
            ex("f", "F"),
        ];
        let a = select_icl_examples(&store, &space(), "d", 3).unwrap();
        let b = select_icl_examples(&store, &space(), "d", 3).unwrap();
        assert_eq!(a, b);
    }
}
