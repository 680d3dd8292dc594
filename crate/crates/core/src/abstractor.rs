//! Stage 1: replaces dataset entities and literals in an utterance with
//! typed placeholders.
//!
//! N-grams are tried from the longest length down. Within one length,
//! candidates are accepted greedily by similarity, then position, then
//! entity kind (column before table before value); a candidate overlapping
//! an accepted span is discarded.

use std::fmt;

use serde::Serialize;

use crate::action::Span;
use crate::dataset::{EntityIndex, EntityKind};
use crate::text::{is_date, is_punctuation, is_year, normalize_tokens, parse_integer, parse_number, tokenize, Date, Token};

/// Similarity needed for an inexact match.
pub const FUZZY_THRESHOLD: f64 = 0.85;
/// Shortest candidate phrase (in characters) eligible for inexact matching.
pub const FUZZY_MIN_CHARS: usize = 5;
/// Lower bound on the n-gram length scan.
pub const MIN_SCAN_LENGTH: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Placeholder {
    Column,
    Value,
    Integer,
    Float,
    Date,
    Year,
}

impl Placeholder {
    pub const ALL: [Placeholder; 6] = [
        Placeholder::Column,
        Placeholder::Value,
        Placeholder::Integer,
        Placeholder::Float,
        Placeholder::Date,
        Placeholder::Year,
    ];

    pub fn token(&self) -> &'static str {
        match self {
            Placeholder::Column => "<column>",
            Placeholder::Value => "<value>",
            Placeholder::Integer => "<integer>",
            Placeholder::Float => "<float>",
            Placeholder::Date => "<date>",
            Placeholder::Year => "<year>",
        }
    }

    pub fn from_token(token: &str) -> Option<Placeholder> {
        Placeholder::ALL.into_iter().find(|p| p.token() == token)
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Placeholder::Integer | Placeholder::Float | Placeholder::Year)
    }
}

impl fmt::Display for Placeholder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BindingSource {
    Entity(EntityKind),
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Binding {
    /// Span in the original token list.
    pub span: Span,
    pub placeholder: Placeholder,
    /// Column name, cell value, table name or normalized literal text.
    pub canonical: String,
    pub source: BindingSource,
    /// Column of a cell value.
    pub column: Option<String>,
    pub match_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbstractedUtterance {
    pub original: String,
    pub tokens: Vec<Token>,
    pub abstracted_tokens: Vec<String>,
    /// Sorted by span.
    pub bindings: Vec<Binding>,
}

impl AbstractedUtterance {
    /// Utterance with no bindings.
    pub fn plain(text: &str) -> AbstractedUtterance {
        let tokens = tokenize(text);
        AbstractedUtterance {
            original: text.to_string(),
            abstracted_tokens: tokens.iter().map(|t| t.text.clone()).collect(),
            tokens,
            bindings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.abstracted_tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abstracted_tokens.is_empty()
    }

    /// For each abstracted token, its span in the original tokens and the
    /// binding it stands for.
    pub fn alignment(&self) -> Vec<(Span, Option<&Binding>)> {
        let mut out = Vec::with_capacity(self.abstracted_tokens.len());
        let mut b = self.bindings.iter().peekable();
        let mut i = 0;
        while i < self.tokens.len() {
            match b.peek() {
                Some(binding) if binding.span.start == i => {
                    out.push((binding.span, Some(*binding)));
                    i = binding.span.end;
                    b.next();
                }
                _ => {
                    out.push((Span::new(i, i + 1), None));
                    i += 1;
                }
            }
        }
        out
    }

    /// Binding behind the abstracted token at `index`, if it is a placeholder.
    pub fn binding_at(&self, index: usize) -> Option<&Binding> {
        self.alignment().get(index).and_then(|(_, b)| *b)
    }

    /// Byte range in the original text covered by abstracted tokens `span`.
    pub fn byte_range(&self, span: Span) -> (usize, usize) {
        let align = self.alignment();
        if span.is_empty() || span.start >= align.len() {
            return (0, 0);
        }
        let first = align[span.start].0;
        let last = align[span.end.min(align.len()) - 1].0;
        (self.tokens[first.start].start, self.tokens[last.end - 1].end)
    }

    /// Original text covered by abstracted tokens `span`.
    pub fn surface(&self, span: Span) -> &str {
        let (a, b) = self.byte_range(span);
        &self.original[a..b]
    }

    /// Expands placeholders back into the original token list.
    pub fn reconstruct(&self) -> Vec<String> {
        self.alignment()
            .iter()
            .zip(&self.abstracted_tokens)
            .flat_map(|((span, binding), tok)| match binding {
                Some(_) => self.tokens[span.start..span.end].iter().map(|t| t.text.clone()).collect(),
                None => vec![tok.clone()],
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    span: Span,
    score: f64,
    entry: crate::dataset::IndexEntry,
}

fn kind_rank(kind: EntityKind) -> u8 {
    match kind {
        EntityKind::Column => 0,
        EntityKind::Table => 1,
        EntityKind::Value => 2,
    }
}

/// Similarity of a candidate phrase to an index key, or `None` below threshold.
pub fn similarity(candidate: &str, key: &str) -> Option<f64> {
    if candidate == key {
        return Some(1.0);
    }
    let lc = candidate.chars().count();
    let lk = key.chars().count();
    if lc < FUZZY_MIN_CHARS {
        return None;
    }
    // the edit distance is at least the length difference
    let longer = lc.max(lk) as f64;
    if (lc.abs_diff(lk) as f64) > (1.0 - FUZZY_THRESHOLD) * longer {
        return None;
    }
    let s = strsim::normalized_levenshtein(candidate, key);
    (s >= FUZZY_THRESHOLD).then_some(s)
}

fn best_matches(phrase: &str, index: &EntityIndex) -> Vec<(f64, crate::dataset::IndexEntry)> {
    let exact = index.get(phrase);
    if !exact.is_empty() {
        return exact.iter().map(|e| (1.0, e.clone())).collect();
    }
    let mut out = Vec::new();
    if phrase.chars().count() < FUZZY_MIN_CHARS {
        return out;
    }
    for (key, entries) in index.iter() {
        if let Some(s) = similarity(phrase, key) {
            out.extend(entries.iter().map(|e| (s, e.clone())));
        }
    }
    out
}

/// Runs Stage 1 over an utterance.
pub fn abstract_utterance(text: &str, index: &EntityIndex) -> AbstractedUtterance {
    let tokens = tokenize(text);
    let lower: Vec<String> = tokens.iter().map(|t| t.text.to_lowercase()).collect();
    let mut accepted: Vec<Candidate> = Vec::new();

    let max_n = MIN_SCAN_LENGTH.max(index.longest_phrase()).min(tokens.len());
    for n in (1..=max_n).rev() {
        let mut found = Vec::new();
        for start in 0..=tokens.len() - n {
            let span = Span::new(start, start + n);
            if accepted.iter().any(|c| c.span.overlaps(&span)) {
                continue;
            }
            let window = &lower[start..start + n];
            if is_punctuation(&window[0]) || is_punctuation(&window[n - 1]) {
                continue;
            }
            let phrase = normalize_tokens(window);
            for (score, entry) in best_matches(&phrase, index) {
                found.push(Candidate { span, score, entry });
            }
        }
        found.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.span.start.cmp(&b.span.start))
                .then(kind_rank(a.entry.kind).cmp(&kind_rank(b.entry.kind)))
                .then(a.entry.cmp(&b.entry))
        });
        for c in found {
            if !accepted.iter().any(|a| a.span.overlaps(&c.span)) {
                accepted.push(c);
            }
        }
    }

    let mut bindings: Vec<Binding> = accepted
        .into_iter()
        .map(|c| Binding {
            span: c.span,
            placeholder: if c.entry.kind == EntityKind::Column {
                Placeholder::Column
            } else {
                Placeholder::Value
            },
            canonical: c.entry.canonical,
            source: BindingSource::Entity(c.entry.kind),
            column: c.entry.column,
            match_score: c.score,
        })
        .collect();

    for (i, tok) in tokens.iter().enumerate() {
        let span = Span::new(i, i + 1);
        if bindings.iter().any(|b| b.span.overlaps(&span)) {
            continue;
        }
        let t = tok.text.as_str();
        let literal = if let Some(d) = is_date(t).then(|| Date::parse(t)).flatten() {
            Some((Placeholder::Date, d.to_string()))
        } else if is_year(t) {
            Some((Placeholder::Year, t.to_string()))
        } else if let Some(n) = parse_integer(t) {
            Some((Placeholder::Integer, n.to_string()))
        } else {
            parse_number(t).map(|x| (Placeholder::Float, x.to_string()))
        };
        if let Some((placeholder, canonical)) = literal {
            bindings.push(Binding {
                span,
                placeholder,
                canonical,
                source: BindingSource::Literal,
                column: None,
                match_score: 1.0,
            });
        }
    }
    bindings.sort_by_key(|b| b.span);

    let mut abstracted_tokens = Vec::new();
    let mut i = 0;
    let mut bi = 0;
    while i < tokens.len() {
        if bi < bindings.len() && bindings[bi].span.start == i {
            abstracted_tokens.push(bindings[bi].placeholder.token().to_string());
            i = bindings[bi].span.end;
            bi += 1;
        } else {
            abstracted_tokens.push(tokens[i].text.clone());
            i += 1;
        }
    }

    AbstractedUtterance {
        original: text.to_string(),
        tokens,
        abstracted_tokens,
        bindings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Dataset;

    fn car_index() -> EntityIndex {
        let ds = Dataset::from_csv("CarSales", b"Brand,Sales,Year\nFord,120.5,2010\nHonda,98,2011\n").unwrap();
        ds.entity_index(10_000)
    }

    #[test]
    fn sales_by_year() {
        let a = abstract_utterance("sales by year", &car_index());
        assert_eq!(a.abstracted_tokens, vec!["<column>", "by", "<column>"]);
        let names: Vec<_> = a.bindings.iter().map(|b| b.canonical.as_str()).collect();
        assert_eq!(names, vec!["Sales", "Year"]);
        assert!(a.bindings.iter().all(|b| b.match_score == 1.0));
    }

    #[test]
    fn no_entities_pass_through() {
        let a = abstract_utterance("hello world", &car_index());
        assert_eq!(a.abstracted_tokens, vec!["hello", "world"]);
        assert!(a.bindings.is_empty());
    }

    #[test]
    fn longest_match_wins() {
        let mut idx = EntityIndex::new();
        idx.insert(EntityKind::Column, "car sales", None);
        idx.insert(EntityKind::Column, "sales", None);
        let a = abstract_utterance("show car sales", &idx);
        assert_eq!(a.bindings.len(), 1);
        assert_eq!(a.bindings[0].span, Span::new(1, 3));
        assert_eq!(a.bindings[0].canonical, "car sales");
    }

    #[test]
    fn literals() {
        let a = abstract_utterance("in 2012 add 10px and 2.5 on 2012-01-05", &car_index());
        assert_eq!(
            a.abstracted_tokens,
            vec!["in", "<year>", "add", "<integer>", "px", "and", "<float>", "on", "<date>"]
        );
        assert_eq!(a.bindings[0].canonical, "2012");
    }

    #[test]
    fn column_beats_value_on_same_phrase() {
        let mut idx = EntityIndex::new();
        idx.insert(EntityKind::Value, "Ford", Some("Brand"));
        idx.insert(EntityKind::Column, "Ford", None);
        let a = abstract_utterance("the ford bar", &idx);
        assert_eq!(a.bindings[0].placeholder, Placeholder::Column);
    }

    #[test]
    fn fuzzy_matches_long_phrases_only() {
        let mut idx = EntityIndex::new();
        idx.insert(EntityKind::Column, "Revenue", None);
        idx.insert(EntityKind::Column, "Cost", None);
        // one edit in seven characters passes, any edit in four does not
        let a = abstract_utterance("show revenu and cots", &idx);
        assert_eq!(a.abstracted_tokens, vec!["show", "<column>", "and", "cots"]);
        let a = abstract_utterance("show rvnue", &idx);
        assert_eq!(a.abstracted_tokens, vec!["show", "rvnue"]);
        let a = abstract_utterance("show revenuee", &idx);
        assert_eq!(a.abstracted_tokens, vec!["show", "<column>"]);
        assert!(a.bindings[0].match_score < 1.0);
        assert!(a.bindings[0].match_score >= FUZZY_THRESHOLD);
    }

    #[test]
    fn reconstruct_and_surface() {
        let mut idx = EntityIndex::new();
        idx.insert(EntityKind::Column, "car sales", None);
        let a = abstract_utterance("show Car  Sales in 2012", &idx);
        assert_eq!(a.reconstruct(), vec!["show", "Car", "Sales", "in", "2012"]);
        assert_eq!(a.surface(Span::new(1, 2)), "Car  Sales");
        assert_eq!(a.surface(Span::new(0, 4)), "show Car  Sales in 2012");
        assert_eq!(a.binding_at(3).unwrap().placeholder, Placeholder::Year);
    }
}
