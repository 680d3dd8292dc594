//! Prefix completion over a ranked phrase list.

use std::collections::BTreeMap;
use std::ops::Bound;

use serde::Serialize;

const BUILTIN: &str = include_str!("../data/phrases.tsv");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Phrase {
    pub phrase: String,
    pub frequency: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuggestionIndex {
    /// Ranked by frequency descending, then phrase.
    phrases: Vec<Phrase>,
    /// Normalized phrase -> position in `phrases`.
    keys: BTreeMap<String, usize>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SuggestError {
    #[error("phrase list line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("phrase list is empty")]
    Empty,
}

/// Lowercases and collapses whitespace. A trailing space survives so that
/// "sort " only completes to longer phrases.
pub fn normalize(text: &str) -> String {
    let mut out = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    if !out.is_empty() && text.ends_with(char::is_whitespace) {
        out.push(' ');
    }
    out
}

impl SuggestionIndex {
    /// Builds an index; phrases equal after normalization are merged and
    /// their frequencies summed.
    pub fn new(entries: impl IntoIterator<Item = (String, u64)>) -> Result<SuggestionIndex, SuggestError> {
        let mut merged: BTreeMap<String, Phrase> = BTreeMap::new();
        for (phrase, frequency) in entries {
            let key = normalize(phrase.trim());
            if key.is_empty() {
                continue;
            }
            merged
                .entry(key.clone())
                .and_modify(|p| p.frequency += frequency)
                .or_insert(Phrase { phrase: key, frequency });
        }
        if merged.is_empty() {
            return Err(SuggestError::Empty);
        }
        let mut phrases: Vec<Phrase> = merged.into_values().collect();
        phrases.sort_by(|a, b| b.frequency.cmp(&a.frequency).then_with(|| a.phrase.cmp(&b.phrase)));
        let keys = phrases.iter().enumerate().map(|(i, p)| (p.phrase.clone(), i)).collect();
        Ok(SuggestionIndex { phrases, keys })
    }

    /// Parses `frequency<TAB>phrase` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<SuggestionIndex, SuggestError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: &str| SuggestError::Line {
                line: i + 1,
                message: message.to_string(),
            };
            let (freq, phrase) = line.split_once('\t').ok_or_else(|| err("expected frequency<TAB>phrase"))?;
            let frequency = freq.trim().parse().map_err(|_| err("frequency is not a count"))?;
            if phrase.trim().is_empty() {
                return Err(err("empty phrase"));
            }
            entries.push((phrase.to_string(), frequency));
        }
        SuggestionIndex::new(entries)
    }

    /// The shipped list of popular phrases.
    pub fn builtin() -> SuggestionIndex {
        SuggestionIndex::parse(BUILTIN).expect("shipped phrase list is valid")
    }

    pub fn phrases(&self) -> &[Phrase] {
        &self.phrases
    }

    /// Up to `k` phrases starting with `prefix`, ignoring case, best first.
    pub fn suggest(&self, prefix: &str, k: usize) -> Vec<&Phrase> {
        let prefix = normalize(prefix);
        let mut hits: Vec<usize> = self
            .keys
            .range::<str, _>((Bound::Included(prefix.as_str()), Bound::Unbounded))
            .take_while(|(key, _)| key.starts_with(&prefix))
            .map(|(_, &i)| i)
            .collect();
        // positions are already in rank order
        hits.sort_unstable();
        hits.into_iter().take(k).map(|i| &self.phrases[i]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(v: Vec<&Phrase>) -> Vec<&str> {
        v.into_iter().map(|p| p.phrase.as_str()).collect()
    }

    fn small() -> SuggestionIndex {
        SuggestionIndex::new([
            ("sort".to_string(), 10),
            ("sort descending".to_string(), 5),
            ("sort ascending".to_string(), 5),
            ("Show Sales".to_string(), 7),
            ("size".to_string(), 1),
        ])
        .unwrap()
    }

    #[test]
    fn ranks_by_frequency_then_text() {
        assert_eq!(
            texts(small().suggest("so", 10)),
            vec!["sort", "sort ascending", "sort descending"]
        );
        assert_eq!(texts(small().suggest("s", 2)), vec!["sort", "show sales"]);
    }

    #[test]
    fn case_and_spacing_are_ignored() {
        assert_eq!(texts(small().suggest("SHOW   s", 5)), vec!["show sales"]);
        assert_eq!(texts(small().suggest("sort ", 5)), vec!["sort ascending", "sort descending"]);
    }

    #[test]
    fn no_match_and_k() {
        assert!(small().suggest("zzz", 5).is_empty());
        assert_eq!(small().suggest("sort", 1).len(), 1);
        assert!(small().suggest("sort", 0).is_empty());
        assert_eq!(small().suggest("", 100).len(), 5);
    }

    #[test]
    fn duplicates_merge() {
        let idx = SuggestionIndex::new([("add".to_string(), 2), ("ADD ".to_string(), 3)]).unwrap();
        assert_eq!(idx.phrases(), &[Phrase { phrase: "add".into(), frequency: 5 }]);
    }

    #[test]
    fn parse_errors() {
        assert_eq!(SuggestionIndex::parse("# only\n"), Err(SuggestError::Empty));
        assert!(matches!(SuggestionIndex::parse("x\tsort"), Err(SuggestError::Line { line: 1, .. })));
        assert!(matches!(SuggestionIndex::parse("\n3 sort"), Err(SuggestError::Line { line: 2, .. })));
    }

    #[test]
    fn shipped_list() {
        let idx = SuggestionIndex::builtin();
        let sort = texts(idx.suggest("sort", 10));
        assert_eq!(&sort[..2], &["sort", "sort descending"]);
        assert!(texts(idx.suggest("add tr", 10)).contains(&"add trend line"));
        assert!(idx.suggest("zzz", 10).is_empty());
        assert_eq!(texts(idx.suggest("sort", 1)), vec!["sort"]);
    }

    #[test]
    fn ranking_matches_brute_force() {
        let idx = SuggestionIndex::builtin();
        for prefix in ["", "a", "m", "make the", "s", "sh", "h", "x"] {
            let mut expected: Vec<&Phrase> =
                idx.phrases().iter().filter(|p| p.phrase.starts_with(prefix)).collect();
            expected.sort_by(|a, b| b.frequency.cmp(&a.frequency).then(a.phrase.cmp(&b.phrase)));
            expected.truncate(7);
            assert_eq!(idx.suggest(prefix, 7), expected, "prefix {prefix:?}");
        }
    }
}
