//! Deterministic lexicon-and-pattern tagger.
//!
//! Labeling runs in passes; each pass only touches tokens no earlier pass
//! claimed. Intents come from trigger phrases, matched longest first and
//! leftmost first without overlap, some gated on the presence of an entity
//! role.

use std::collections::BTreeSet;

use crate::abstractor::{AbstractedUtterance, Placeholder};
use crate::action::Span;
use crate::catalog::Catalog;
use crate::rules::{RuleTable, TriggerRule};
use crate::text::{is_punctuation, tokenize};

use super::bio::{labels_from_chunks, Chunk};
use super::{Intent, IntentSet, TaggedUtterance, Tagger};

fn words(phrase: &str) -> Vec<String> {
    tokenize(phrase).into_iter().map(|t| t.text.to_lowercase()).collect()
}

fn is_numeric_placeholder(tok: &str) -> bool {
    Placeholder::from_token(tok).is_some_and(|p| p.is_numeric())
}

fn is_rangeable(tok: &str) -> bool {
    is_numeric_placeholder(tok) || tok == Placeholder::Date.token()
}

/// Letters and digits mixed in one token, e.g. `US2020`.
pub(crate) fn is_name_like(tok: &str) -> bool {
    Placeholder::from_token(tok).is_none()
        && !tok.starts_with('#')
        && tok.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-')
        && tok.chars().any(|c| c.is_ascii_digit())
        && tok.chars().any(|c| c.is_alphabetic())
}

pub struct ReferenceTagger<'a> {
    rules: &'a RuleTable,
    /// (phrase, role), longest first
    lexicon: Vec<(Vec<String>, &'static str)>,
    components: Vec<Vec<String>>,
    shapes: Vec<Vec<String>>,
    colors: Vec<Vec<String>>,
    name_cues: Vec<Vec<String>>,
    ignore: Vec<Vec<String>>,
    creation_nouns: Vec<Vec<String>>,
    triggers: Vec<&'a TriggerRule>,
    known_words: BTreeSet<String>,
}

struct Labeler {
    low: Vec<String>,
    claimed: Vec<bool>,
    chunks: Vec<Chunk>,
    /// byte offsets of each abstracted token in the original text
    bytes: Vec<(usize, usize)>,
}

impl Labeler {
    fn len(&self) -> usize {
        self.low.len()
    }

    fn free(&self, start: usize, end: usize) -> bool {
        end <= self.len() && (start..end).all(|i| !self.claimed[i])
    }

    fn at(&self, i: usize, phrase: &[String]) -> bool {
        i + phrase.len() <= self.len() && self.low[i..i + phrase.len()] == *phrase
    }

    fn claim(&mut self, start: usize, end: usize, role: Option<&str>) {
        for c in &mut self.claimed[start..end] {
            *c = true;
        }
        if let Some(role) = role {
            self.chunks.push(Chunk {
                span: Span::new(start, end),
                role: role.to_string(),
            });
        }
    }

    fn tok(&self, i: usize) -> &str {
        self.low.get(i).map(String::as_str).unwrap_or("")
    }
}

fn longest_first(mut v: Vec<Vec<String>>) -> Vec<Vec<String>> {
    v.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
    v.dedup();
    v
}

impl<'a> ReferenceTagger<'a> {
    pub fn new(rules: &'a RuleTable) -> ReferenceTagger<'a> {
        let lx = &rules.lexicon;
        let mut lexicon: Vec<(Vec<String>, &'static str)> = Vec::new();
        let mut add = |phrase: &str, role: &'static str| lexicon.push((words(phrase), role));
        for k in lx.chart_types.keys() {
            add(k, "chartType");
        }
        for k in lx.components.keys() {
            add(k, "component");
        }
        for k in lx.shapes.keys() {
            add(k, "shape");
        }
        for k in rules.colors.keys() {
            add(k, "color");
        }
        for (k, r) in &lx.relations {
            let role: &'static str = if r.role == "color" { "color" } else { "extent" };
            add(k, role);
            for adv in lx.extent_adverbs.keys() {
                add(&format!("{adv} {k}"), role);
            }
        }
        for k in lx.magnitudes.keys() {
            add(k, "extent");
            for adv in lx.extent_adverbs.keys() {
                add(&format!("{adv} {k}"), "extent");
            }
        }
        for k in lx.icons.names.keys() {
            add(k, "icon");
            for s in &lx.icons.icon_suffixes {
                add(&format!("{k} {s}"), "icon");
            }
        }
        for k in lx.aggregates.keys() {
            add(k, "aggregate");
        }
        for k in lx.orders.keys() {
            add(k, "order");
        }
        for k in lx.time_units.keys() {
            add(k, "timeUnit");
        }
        for k in lx.fonts.keys() {
            add(k, "font");
        }
        for k in lx.qualitative.keys() {
            add(k, "range");
        }
        for k in lx.move_directions.keys() {
            add(k, "direction");
        }
        for k in lx.visibility.keys() {
            if !lx.visibility_verbs.contains(k) {
                add(k, "visibility");
            }
        }
        // longest first; among equal lengths the earlier lexicon wins
        lexicon.sort_by(|a, b| b.0.len().cmp(&a.0.len()));

        let mut known_words: BTreeSet<String> = BTreeSet::new();
        for (p, _) in &lexicon {
            known_words.extend(p.iter().cloned());
        }
        for t in &rules.triggers {
            known_words.extend(t.phrase.iter().cloned());
        }
        for set in [
            &lx.determiners,
            &lx.function_words,
            &lx.conjunctions,
            &lx.stroke_nouns,
            &lx.count_nouns,
            &lx.relation_cues,
            &lx.relation_links,
            &lx.visibility_verbs,
            &lx.range_openers,
            &lx.range_links,
        ] {
            known_words.extend(set.iter().cloned());
        }
        for phrase in lx
            .creation_verbs
            .iter()
            .chain(&lx.name_cues)
            .chain(&lx.ignore_phrases)
            .chain(lx.units.keys())
            .chain(lx.positions.keys())
            .chain(lx.annotation_nouns.keys())
            .chain(lx.extent_adverbs.keys())
        {
            known_words.extend(words(phrase));
        }

        let mut triggers: Vec<&TriggerRule> = rules.triggers.iter().collect();
        triggers.sort_by(|a, b| b.phrase.len().cmp(&a.phrase.len()));

        ReferenceTagger {
            rules,
            components: longest_first(lx.components.keys().map(|k| words(k)).collect()),
            shapes: longest_first(lx.shapes.keys().map(|k| words(k)).collect()),
            colors: longest_first(rules.colors.keys().map(|k| words(k)).collect()),
            name_cues: longest_first(lx.name_cues.iter().map(|k| words(k)).collect()),
            ignore: longest_first(lx.ignore_phrases.iter().map(|k| words(k)).collect()),
            creation_nouns: longest_first(lx.annotation_nouns.keys().map(|k| words(k)).collect()),
            lexicon,
            triggers,
            known_words,
        }
    }

    pub fn builtin() -> ReferenceTagger<'static> {
        ReferenceTagger::new(RuleTable::builtin())
    }

    /// A word no lexicon knows; such words can name objects.
    fn is_unknown_word(&self, tok: &str) -> bool {
        !tok.is_empty()
            && Placeholder::from_token(tok).is_none()
            && !is_punctuation(tok)
            && !self.known_words.contains(tok)
            && tok.chars().any(|c| c.is_alphabetic())
    }

    fn longest_at<'p>(&self, lab: &Labeler, i: usize, phrases: &'p [Vec<String>]) -> Option<&'p Vec<String>> {
        phrases.iter().find(|p| lab.at(i, p) && lab.free(i, i + p.len()))
    }

    fn skip_determiners(&self, lab: &Labeler, mut i: usize) -> usize {
        while i < lab.len() && self.rules.lexicon.determiners.contains(lab.tok(i)) {
            i += 1;
        }
        i
    }

    /// End of an object phrase starting at `i`: a component, a name, or
    /// colors / values / unknown words ending in a shape word.
    fn object_phrase_end(&self, lab: &Labeler, i: usize) -> Option<usize> {
        if let Some(p) = self.longest_at(lab, i, &self.components) {
            return Some(i + p.len());
        }
        if i < lab.len() && lab.free(i, i + 1) && is_name_like(lab.tok(i)) {
            return Some(i + 1);
        }
        let mut k = i;
        let mut values = 0;
        loop {
            if let Some(s) = self.longest_at(lab, k, &self.shapes) {
                return Some(k + s.len());
            }
            if let Some(c) = self.longest_at(lab, k, &self.colors) {
                k += c.len();
            } else if k < lab.len() && lab.free(k, k + 1) && lab.tok(k) == Placeholder::Value.token() {
                values += 1;
                k += 1;
            } else if k < lab.len() && lab.free(k, k + 1) && self.is_unknown_word(lab.tok(k)) {
                k += 1;
            } else {
                break;
            }
        }
        (values == 1 && k == i + 1).then_some(k)
    }

    fn label(&self, abstracted: &AbstractedUtterance) -> Vec<Chunk> {
        let lx = &self.rules.lexicon;
        let align = abstracted.alignment();
        let mut lab = Labeler {
            low: abstracted.abstracted_tokens.iter().map(|t| t.to_lowercase()).collect(),
            claimed: vec![false; abstracted.len()],
            chunks: Vec::new(),
            bytes: align
                .iter()
                .map(|(s, _)| (abstracted.tokens[s.start].start, abstracted.tokens[s.end - 1].end))
                .collect(),
        };
        let n = lab.len();

        // binding patterns ("<column> by <column>")
        let mut patterns: Vec<_> = self.rules.patterns.iter().collect();
        patterns.sort_by(|a, b| b.phrase.len().cmp(&a.phrase.len()));
        for p in patterns {
            for i in 0..n {
                if lab.at(i, &p.phrase) && lab.free(i, i + p.phrase.len()) {
                    for (k, role) in p.roles.iter().enumerate() {
                        lab.claim(i + k, i + k + 1, role.as_deref());
                    }
                }
            }
        }

        for p in &self.ignore {
            for i in 0..n {
                if lab.at(i, p) && lab.free(i, i + p.len()) {
                    lab.claim(i, i + p.len(), None);
                }
            }
        }

        // name cues: "call it US2020", "name it 'Sales 2020'"
        for i in 0..n {
            let Some(cue) = self.longest_at(&lab, i, &self.name_cues).cloned() else { continue };
            let j = i + cue.len();
            if j >= n || !lab.free(j, j + 1) {
                continue;
            }
            if let Some(close) = self.closing_quote(&lab, j) {
                if close > j + 1 {
                    lab.claim(i, j + 1, None);
                    lab.claim(j + 1, close, Some("objectName"));
                    lab.claim(close, close + 1, None);
                }
            } else if !is_punctuation(lab.tok(j)) && Placeholder::from_token(lab.tok(j)).is_none() {
                lab.claim(i, j, None);
                lab.claim(j, j + 1, Some("objectName"));
            }
        }

        // quoted free text
        let mut i = 0;
        while i < n {
            if lab.free(i, i + 1) {
                if let Some(close) = self.closing_quote(&lab, i) {
                    if close > i + 1 && lab.free(i, close + 1) {
                        lab.claim(i, i + 1, None);
                        lab.claim(i + 1, close, Some("text"));
                        lab.claim(close, close + 1, None);
                        i = close + 1;
                        continue;
                    }
                }
            }
            i += 1;
        }

        // hex colors
        for i in 0..n {
            if lab.free(i, i + 1) && crate::rules::Rgb::parse_hex(lab.tok(i)).is_some() {
                lab.claim(i, i + 1, Some("color"));
            }
        }

        // numeric ranges: "from 2010 to 2012", "between 5 and 10"
        for i in 0..n.saturating_sub(3) {
            if lab.free(i, i + 4)
                && lx.range_openers.contains(lab.tok(i))
                && is_rangeable(lab.tok(i + 1))
                && lx.range_links.contains(lab.tok(i + 2))
                && is_rangeable(lab.tok(i + 3))
            {
                lab.claim(i, i + 1, None);
                lab.claim(i + 1, i + 4, Some("range"));
            }
        }

        // measures and counts: "10 px", "50 %", "5 bins"
        for i in 0..n.saturating_sub(1) {
            if !lab.free(i, i + 2) || !is_numeric_placeholder(lab.tok(i)) {
                continue;
            }
            if lx.units.contains_key(lab.tok(i + 1)) {
                lab.claim(i, i + 2, Some("measure"));
            } else if lx.count_nouns.contains(lab.tok(i + 1)) {
                lab.claim(i, i + 1, Some("count"));
                lab.claim(i + 1, i + 2, None);
            }
        }

        for i in 0..n {
            if lab.free(i, i + 1) && is_name_like(&abstracted.abstracted_tokens[i]) {
                lab.claim(i, i + 1, Some("objectName"));
            }
        }

        // creation phrases ("add a trend line") are operation words, not entities
        for i in 0..n {
            if !lab.free(i, i + 1) || !lx.creation_verbs.iter().any(|v| v == lab.tok(i)) {
                continue;
            }
            let j = self.skip_determiners(&lab, i + 1).min(i + 2);
            if let Some(noun) = self.longest_at(&lab, j, &self.creation_nouns) {
                let end = j + noun.len();
                if lab.free(i, end) {
                    lab.claim(i, end, None);
                }
            }
        }

        // "show the legend": the verb carries the visibility value
        for i in 0..n {
            if lab.free(i, i + 1) && lx.visibility_verbs.contains(lab.tok(i)) {
                let j = self.skip_determiners(&lab, i + 1);
                if self.object_phrase_end(&lab, j).is_some() {
                    lab.claim(i, i + 1, Some("visibility"));
                }
            }
        }

        self.label_positions(&mut lab);

        for i in 0..n {
            if !lab.free(i, i + 1) {
                continue;
            }
            if let Some((p, role)) = self.lexicon.iter().find(|(p, _)| lab.at(i, p) && lab.free(i, i + p.len())) {
                lab.claim(i, i + p.len(), Some(role));
            }
        }

        self.absorb_into_shapes(&mut lab);

        // a color next to a stroke noun, or after one, is a stroke color
        let first_stroke = (0..n).find(|&i| lx.stroke_nouns.contains(lab.tok(i)));
        if let Some(first) = first_stroke {
            for c in lab.chunks.iter_mut().filter(|c| c.role == "color") {
                let before = c.span.start > 0 && lx.stroke_nouns.contains(&lab.low[c.span.start - 1]);
                let after = c.span.end < n && lx.stroke_nouns.contains(&lab.low[c.span.end]);
                if before || after || c.span.start > first {
                    c.role = "strokeColor".into();
                }
            }
        }

        for i in 0..n {
            if !lab.free(i, i + 1) {
                continue;
            }
            let role = match Placeholder::from_token(&abstracted.abstracted_tokens[i]) {
                Some(Placeholder::Column) => "field",
                Some(Placeholder::Value) => "value",
                Some(_) => "valueLiteral",
                None => continue,
            };
            lab.claim(i, i + 1, Some(role));
        }

        let mut chunks = lab.chunks;
        chunks.sort();
        chunks
    }

    /// Index of the quote closing the one opening at `open`, if `open` is an
    /// opening quote (start of text or preceded by a space).
    fn closing_quote(&self, lab: &Labeler, open: usize) -> Option<usize> {
        let q = lab.tok(open);
        if q != "'" && q != "\"" {
            return None;
        }
        if open > 0 && lab.bytes[open - 1].1 == lab.bytes[open].0 {
            return None;
        }
        (open + 1..lab.len()).find(|&k| {
            lab.tok(k) == q
                && (k + 1 == lab.len() || lab.bytes[k + 1].0 > lab.bytes[k].1 || is_punctuation(lab.tok(k + 1)))
        })
    }

    /// "on the right of the plot area", "on top of the Ford bar", "above the title".
    fn label_positions(&self, lab: &mut Labeler) {
        let lx = &self.rules.lexicon;
        let n = lab.len();
        let mut i = 0;
        while i < n {
            let cued = lx.relation_cues.contains(lab.tok(i)) && lab.free(i, i + 1);
            let start = if cued { self.skip_determiners(lab, i + 1).min(i + 2) } else { i };
            let Some(canon) = lx.positions.get(lab.tok(start)) else {
                i += 1;
                continue;
            };
            // "above", "below" need no cue but do need an anchor
            let standalone = !cued && canon != lab.tok(start);
            if !(cued || standalone) || !lab.free(start, start + 1) {
                i += 1;
                continue;
            }
            let mut end = start + 1;
            let mut j = start + 1;
            if !standalone && j < n && lx.relation_links.contains(lab.tok(j)) {
                j += 1;
            }
            let anchor_at = self.skip_determiners(lab, j);
            let linked = j > start + 1 || standalone;
            if linked {
                if let Some(e) = self.object_phrase_end(lab, anchor_at) {
                    end = e;
                }
            }
            if standalone && end == start + 1 {
                i += 1;
                continue;
            }
            lab.claim(i, start, None);
            lab.claim(start, end, Some("position"));
            i = end;
        }
    }

    fn absorb_into_shapes(&self, lab: &mut Labeler) {
        let lx = &self.rules.lexicon;
        let mut chunks = std::mem::take(&mut lab.chunks);
        chunks.sort();
        let mut out: Vec<Chunk> = Vec::new();
        for c in chunks {
            if c.role != "shape" {
                out.push(c);
                continue;
            }
            let mut start = c.span.start;
            loop {
                if start == 0 {
                    break;
                }
                let prev = start - 1;
                if let Some(last) = out.last() {
                    let is_color_name = last.role == "color"
                        && last.span.end == start
                        && self.colors.iter().any(|p| lab.low[last.span.start..last.span.end] == p[..]);
                    if is_color_name {
                        start = last.span.start;
                        out.pop();
                        continue;
                    }
                }
                if !lab.claimed[prev] && self.is_unknown_word(&lab.low[prev]) && !lx.determiners.contains(&lab.low[prev]) {
                    lab.claimed[prev] = true;
                    start = prev;
                    continue;
                }
                break;
            }
            out.push(Chunk {
                span: Span::new(start, c.span.end),
                role: c.role,
            });
        }
        lab.chunks = out;
    }

    fn intents(&self, abstracted: &AbstractedUtterance, chunks: &[Chunk]) -> IntentSet {
        let low: Vec<String> = abstracted.abstracted_tokens.iter().map(|t| t.to_lowercase()).collect();
        let roles: BTreeSet<&str> = chunks.iter().map(|c| c.role.as_str()).collect();
        let mut used = vec![false; low.len()];
        let mut found: Vec<Intent> = Vec::new();
        for t in &self.triggers {
            if !t.requires.is_empty() && !t.requires.iter().any(|r| roles.contains(r.as_str())) {
                continue;
            }
            let len = t.phrase.len();
            if len == 0 || len > low.len() {
                continue;
            }
            for i in 0..=low.len() - len {
                if low[i..i + len] == t.phrase[..] && !used[i..i + len].iter().any(|u| *u) {
                    for u in &mut used[i..i + len] {
                        *u = true;
                    }
                    for name in &t.intents {
                        found.push(Intent {
                            name: name.clone(),
                            score: 1.0,
                            span: Some(Span::new(i, i + len)),
                        });
                    }
                }
            }
        }
        IntentSet::new(found, self.rules.intent_threshold)
    }
}

impl Tagger for ReferenceTagger<'_> {
    fn name(&self) -> &str {
        "reference"
    }

    fn version(&self) -> &str {
        &self.rules.version
    }

    fn tag(&self, abstracted: &AbstractedUtterance) -> TaggedUtterance {
        let chunks = self.label(abstracted);
        let intents = self.intents(abstracted, &chunks);
        TaggedUtterance {
            abstracted: abstracted.clone(),
            intents,
            labels: labels_from_chunks(abstracted.len(), &chunks),
        }
    }
}

/// Checks that every trigger names a catalog operation and every gate a role.
pub fn check_rules(rules: &RuleTable, catalog: &Catalog) -> Result<(), String> {
    for t in &rules.triggers {
        for i in &t.intents {
            if catalog.operation(i).is_none() {
                return Err(format!("trigger `{}` names unknown operation `{i}`", t.phrase.join(" ")));
            }
        }
        for r in &t.requires {
            if catalog.entity_role(r).is_none() {
                return Err(format!("trigger `{}` requires unknown role `{r}`", t.phrase.join(" ")));
            }
        }
    }
    for p in &rules.patterns {
        for r in p.roles.iter().flatten() {
            if catalog.entity_role(r).is_none() {
                return Err(format!("pattern names unknown role `{r}`"));
            }
        }
    }
    Ok(())
}
