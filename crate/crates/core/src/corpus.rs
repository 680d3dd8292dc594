//! Template-based gold corpus generation and tagger benchmarking.
//!
//! Templates live in a TOML file, one `[[template]]` table each:
//!
//! ```toml
//! [[template]]
//! pattern = "(make|turn) the {obj:component=title|x axis>xAxis} {c:color}"
//! intents = ["setColor"]
//! actions = ["{setColor, $obj, color=$c}"]
//! ```
//!
//! Pattern syntax:
//!
//! * `(a|b|)` picks one alternative; the words are labeled `O`.
//! * `{name:role}` is a slot filled from the domain named like the role.
//! * `{name:role@domain}` fills from a named domain (see [`DOMAINS`]).
//! * `{name:role=a|b>B}` fills from an inline list; `surface>render` gives
//!   the text substituted into actions, which defaults to the surface.
//! * A role of `_` makes the slot decorative: its words are labeled `O`.
//!
//! Actions are canonical action strings in which `$name` is replaced by the
//! slot's rendering. Every labeled slot must be referenced by an action.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstractor::{abstract_utterance, AbstractedUtterance, Placeholder};
use crate::action::parse_action;
use crate::catalog::Catalog;
use crate::dataset::{Dataset, EntityIndex, SemanticType};
use crate::rules::RuleTable;
use crate::synthesizer::Synthesizer;
use crate::tagger::{evaluate, BioLabel, IntentSet, Metrics, MetricsError, TaggedUtterance, Tagger};
use crate::text::{is_bare_word, is_date, is_year, parse_integer, parse_number, tokenize};

const BUILTIN: &str = include_str!("../data/templates.toml");

/// Named fill domains usable as `{slot:role@domain}`.
pub const DOMAINS: [&str; 17] = [
    "column", "measure", "category", "dimension", "value", "year", "integer", "color", "icon", "aggregate", "order", "timeUnit",
    "font", "shape", "chartType", "direction", "position",
];

/// Templates whose combination count is at most this are enumerated and
/// shuffled; larger ones are sampled.
const ENUMERATE_LIMIT: u64 = 20_000;
/// Consecutive repeated draws after which a sampled template counts as spent.
const SAMPLE_PATIENCE: usize = 200;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("template file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("template {template}: {message}")]
    Template { template: usize, message: String },
    #[error("template {template}: slot `{slot}` has no fillers")]
    EmptyDomain { template: usize, slot: String },
    #[error("record {index}: {message}")]
    Record { index: usize, message: String },
    #[error("no records to evaluate")]
    NoRecords,
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
}

/// One possible slot filling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fill {
    pub surface: String,
    /// Text substituted for `$slot` in actions.
    pub render: String,
    /// Set when the abstractor replaces the whole fill with one placeholder.
    pub placeholder: Option<Placeholder>,
}

impl Fill {
    fn plain(surface: &str, render: &str) -> Fill {
        Fill {
            surface: surface.to_string(),
            render: render.to_string(),
            placeholder: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Domain {
    Named(String),
    Inline(Vec<Fill>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub name: String,
    /// `None` for decorative slots.
    pub role: Option<String>,
    pub domain: Domain,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Choice(Vec<String>),
    Slot(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub pattern: String,
    pub intents: Vec<String>,
    pub actions: Vec<String>,
    pub slots: Vec<Slot>,
    pieces: Vec<Piece>,
}

#[derive(Deserialize)]
struct RawFile {
    template: Vec<RawTemplate>,
}

#[derive(Deserialize)]
struct RawTemplate {
    pattern: String,
    #[serde(default)]
    intents: Vec<String>,
    #[serde(default)]
    actions: Vec<String>,
}

fn parse_slot(spec: &str) -> Result<Slot, String> {
    let (name, rest) = spec.split_once(':').ok_or_else(|| format!("slot `{{{spec}}}` needs a role"))?;
    let name = name.trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(format!("bad slot name `{name}`"));
    }
    let (role, domain) = if let Some((role, list)) = rest.split_once('=') {
        let fills = list
            .split('|')
            .map(|alt| match alt.split_once('>') {
                Some((s, r)) => Fill::plain(s.trim(), r.trim()),
                None => Fill::plain(alt.trim(), alt.trim()),
            })
            .collect::<Vec<_>>();
        if fills.iter().any(|f| f.surface.is_empty()) {
            return Err(format!("slot `{name}` has an empty alternative"));
        }
        (role.trim(), Domain::Inline(fills))
    } else if let Some((role, domain)) = rest.split_once('@') {
        (role.trim(), Domain::Named(domain.trim().to_string()))
    } else {
        (rest.trim(), Domain::Named(rest.trim().to_string()))
    };
    if let Domain::Named(d) = &domain {
        if !DOMAINS.contains(&d.as_str()) {
            return Err(format!("unknown domain `{d}`"));
        }
    }
    Ok(Slot {
        name: name.to_string(),
        role: (role != "_").then(|| role.to_string()),
        domain,
    })
}

/// `$name` references in an action skeleton.
fn references(skeleton: &str) -> Vec<(usize, usize, &str)> {
    let mut out = Vec::new();
    let bytes = skeleton.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'$' {
            let end = (i + 1..bytes.len())
                .find(|&k| !(bytes[k].is_ascii_alphanumeric() || bytes[k] == b'_'))
                .unwrap_or(bytes.len());
            out.push((i, end, &skeleton[i + 1..end]));
            i = end;
        } else {
            i += 1;
        }
    }
    out
}

impl Template {
    /// Parses and validates one template against a catalog.
    pub fn new(pattern: &str, intents: Vec<String>, actions: Vec<String>, catalog: &Catalog) -> Result<Template, String> {
        let mut pieces = Vec::new();
        let mut slots: Vec<Slot> = Vec::new();
        let mut text = String::new();
        let mut chars = pattern.chars();
        while let Some(c) = chars.next() {
            let close = match c {
                '(' => ')',
                '{' => '}',
                ')' | '}' => return Err(format!("unbalanced `{c}`")),
                _ => {
                    text.push(c);
                    continue;
                }
            };
            let mut inner = String::new();
            loop {
                match chars.next() {
                    Some(x) if x == close => break,
                    Some('(' | '{') => return Err("groups cannot nest".into()),
                    Some(x) => inner.push(x),
                    None => return Err(format!("missing `{close}`")),
                }
            }
            if !text.is_empty() {
                pieces.push(Piece::Text(std::mem::take(&mut text)));
            }
            if close == ')' {
                pieces.push(Piece::Choice(inner.split('|').map(str::to_string).collect()));
            } else {
                let slot = parse_slot(&inner)?;
                if slots.iter().any(|s| s.name == slot.name) {
                    return Err(format!("slot `{}` appears twice", slot.name));
                }
                pieces.push(Piece::Slot(slots.len()));
                slots.push(slot);
            }
        }
        if !text.is_empty() {
            pieces.push(Piece::Text(text));
        }

        for slot in &slots {
            if let Some(role) = &slot.role {
                if catalog.entity_role(role).is_none() {
                    return Err(format!("unknown entity role `{role}`"));
                }
            }
        }
        for intent in &intents {
            if catalog.operation(intent).is_none() {
                return Err(format!("unknown intent `{intent}`"));
            }
        }
        let mut referenced = BTreeSet::new();
        for a in &actions {
            for (_, _, name) in references(a) {
                if !slots.iter().any(|s| s.name == name) {
                    return Err(format!("action `{a}` references unknown slot `{name}`"));
                }
                referenced.insert(name.to_string());
            }
        }
        if let Some(s) = slots.iter().find(|s| s.role.is_some() && !referenced.contains(&s.name)) {
            return Err(format!("slot `{}` is labeled but no action uses it", s.name));
        }
        Ok(Template {
            pattern: pattern.to_string(),
            intents,
            actions,
            slots,
            pieces,
        })
    }

    /// Parses a template file.
    pub fn parse_file(text: &str, catalog: &Catalog) -> Result<Vec<Template>, CorpusError> {
        let raw: RawFile = toml::from_str(text)?;
        raw.template
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                Template::new(&t.pattern, t.intents, t.actions, catalog)
                    .map_err(|message| CorpusError::Template { template: i, message })
            })
            .collect()
    }

    /// The templates shipped with the crate.
    pub fn builtin() -> Vec<Template> {
        Template::parse_file(BUILTIN, Catalog::builtin()).expect("built-in templates are valid")
    }

    /// Every surface phrase a template can produce with its slots left as
    /// `{name}` markers; used to seed autocompletion.
    pub fn skeleton_phrases(&self) -> Vec<String> {
        let mut out = vec![String::new()];
        for p in &self.pieces {
            let alts: Vec<String> = match p {
                Piece::Text(t) => vec![t.clone()],
                Piece::Choice(c) => c.clone(),
                Piece::Slot(i) => vec![format!("{{{}}}", self.slots[*i].name)],
            };
            out = out.iter().flat_map(|prefix| alts.iter().map(move |a| format!("{prefix}{a}"))).collect();
        }
        out.iter().map(|s| collapse_spaces(s)).collect()
    }
}

fn collapse_spaces(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn keyword(text: &str) -> String {
    text.replace(' ', ".")
}

fn name_text(name: &str) -> String {
    if is_bare_word(name) && !matches!(name, "it" | "self" | "true" | "false") {
        name.to_string()
    } else {
        quote(name)
    }
}

fn quote(text: &str) -> String {
    format!("'{}'", text.replace('\\', "\\\\").replace('\'', "\\'"))
}

fn lexicon_fills<V>(map: &BTreeMap<String, V>, canonical: impl Fn(&V) -> String) -> Vec<Fill> {
    map.iter().map(|(k, v)| Fill::plain(k, &keyword(&canonical(v)))).collect()
}

fn named_domain(name: &str, ds: &Dataset, rules: &RuleTable) -> Vec<Fill> {
    let lx = &rules.lexicon;
    let columns = |pred: &dyn Fn(SemanticType) -> bool| -> Vec<Fill> {
        ds.columns
            .iter()
            .filter(|c| pred(c.semantic_type))
            .map(|c| Fill {
                surface: c.name.clone(),
                render: name_text(&c.name),
                placeholder: Some(Placeholder::Column),
            })
            .collect()
    };
    match name {
        "column" => columns(&|_| true),
        "measure" => columns(&|t| t == SemanticType::Quantitative),
        "category" => columns(&|t| t == SemanticType::Categorical),
        "dimension" => columns(&|t| t != SemanticType::Quantitative),
        "value" => ds
            .columns
            .iter()
            .filter(|c| c.semantic_type == SemanticType::Categorical)
            .flat_map(|c| c.distinct_values.iter().take(rules.value_index_cap))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|v| Fill {
                surface: v.clone(),
                render: quote(v),
                placeholder: Some(Placeholder::Value),
            })
            .collect(),
        "year" => ds
            .columns
            .iter()
            .filter(|c| c.semantic_type == SemanticType::TemporalYear)
            .flat_map(|c| c.distinct_values.iter())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|v| Fill {
                surface: v.clone(),
                render: v.clone(),
                placeholder: Some(Placeholder::Year),
            })
            .collect(),
        "integer" => (2..=12)
            .map(|n| Fill {
                surface: n.to_string(),
                render: n.to_string(),
                placeholder: Some(Placeholder::Integer),
            })
            .collect(),
        "color" => rules.colors.keys().map(|k| Fill::plain(k, &keyword(k))).collect(),
        "icon" => lexicon_fills(&lx.icons.names, String::clone),
        "aggregate" => lexicon_fills(&lx.aggregates, String::clone),
        "order" => lexicon_fills(&lx.orders, String::clone),
        "timeUnit" => lexicon_fills(&lx.time_units, String::clone),
        "font" => lexicon_fills(&lx.fonts, String::clone),
        "shape" => lexicon_fills(&lx.shapes, String::clone),
        "chartType" => lexicon_fills(&lx.chart_types, String::clone),
        "direction" => lexicon_fills(&lx.move_directions, String::clone),
        "position" => lexicon_fills(&lx.positions, String::clone),
        _ => Vec::new(),
    }
}

/// A generated utterance with its gold annotation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub text: String,
    /// Abstracted tokens the abstractor must reproduce.
    pub tokens: Vec<String>,
    pub intents: Vec<String>,
    /// One label per abstracted token.
    pub labels: Vec<BioLabel>,
    /// Canonical action strings in execution order.
    pub actions: Vec<String>,
    /// Index of the template the record came from.
    pub template: usize,
}

impl GoldRecord {
    /// Gold tags over an abstraction of this record's text.
    pub fn tagged(&self, abstracted: AbstractedUtterance) -> TaggedUtterance {
        TaggedUtterance {
            abstracted,
            intents: IntentSet::from_names(&self.intents),
            labels: self.labels.clone(),
        }
    }
}

/// Serializes records as JSON lines.
pub fn write_jsonl(records: &[GoldRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn read_jsonl(text: &str) -> Result<Vec<GoldRecord>, CorpusError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| CorpusError::Json { line: i + 1, source }))
        .collect()
}

/// One dimension of a template's combination space.
enum Dim<'t> {
    Choice(&'t [String]),
    Slot(usize, Vec<Fill>),
}

impl Dim<'_> {
    fn len(&self) -> usize {
        match self {
            Dim::Choice(c) => c.len(),
            Dim::Slot(_, f) => f.len(),
        }
    }
}

struct Cursor<'t> {
    template: usize,
    dims: Vec<Dim<'t>>,
    total: u64,
    /// Remaining combinations when enumerating, in reverse draw order.
    queue: Option<Vec<u64>>,
    drawn: HashSet<u64>,
    rng: ChaCha8Rng,
    spent: bool,
}

impl Cursor<'_> {
    fn next(&mut self) -> Option<Vec<usize>> {
        if self.spent {
            return None;
        }
        let index = match &mut self.queue {
            Some(q) => q.pop(),
            None => {
                let mut found = None;
                for _ in 0..SAMPLE_PATIENCE {
                    let k = self.rng.random_range(0..self.total);
                    if self.drawn.insert(k) {
                        found = Some(k);
                        break;
                    }
                }
                found
            }
        };
        let Some(mut k) = index else {
            self.spent = true;
            return None;
        };
        let mut choice = Vec::with_capacity(self.dims.len());
        for d in &self.dims {
            let n = d.len() as u64;
            choice.push((k % n) as usize);
            k /= n;
        }
        Some(choice)
    }
}

fn literal_placeholder(token: &str) -> Option<Placeholder> {
    if is_date(token) {
        Some(Placeholder::Date)
    } else if is_year(token) {
        Some(Placeholder::Year)
    } else if parse_integer(token).is_some() {
        Some(Placeholder::Integer)
    } else if parse_number(token).is_some() {
        Some(Placeholder::Float)
    } else {
        None
    }
}

fn instantiate(
    t: &Template,
    template: usize,
    dims: &[Dim],
    choice: &[usize],
    catalog: &Catalog,
    rules: &RuleTable,
) -> Result<GoldRecord, CorpusError> {
    let err = |message: String| CorpusError::Template { template, message };
    // fill per slot
    let mut fills: Vec<Option<&Fill>> = vec![None; t.slots.len()];
    let mut choices: Vec<&str> = Vec::new();
    for (d, &c) in dims.iter().zip(choice) {
        match d {
            Dim::Choice(alts) => choices.push(&alts[c]),
            Dim::Slot(s, f) => fills[*s] = Some(&f[c]),
        }
    }

    // text with collapsed whitespace, tracking slot byte ranges
    let mut text = String::new();
    let mut ranges: Vec<(usize, usize, usize)> = Vec::new();
    let mut next_choice = choices.iter();
    for p in &t.pieces {
        let (segment, slot) = match p {
            Piece::Text(s) => (s.as_str(), None),
            Piece::Choice(_) => (*next_choice.next().expect("one choice per group"), None),
            Piece::Slot(i) => (fills[*i].expect("every slot filled").surface.as_str(), Some(*i)),
        };
        let mut start = None;
        for ch in segment.chars() {
            if ch.is_whitespace() {
                if !text.is_empty() && !text.ends_with(' ') {
                    text.push(' ');
                }
            } else {
                start.get_or_insert(text.len());
                text.push(ch);
            }
        }
        if let (Some(s), Some(i)) = (start, slot) {
            let end = text.trim_end().len();
            ranges.push((i, s, end));
        }
    }
    let text = text.trim_end().to_string();

    // gold abstraction and labels
    let slot_at = |byte: usize| ranges.iter().find(|(_, s, e)| (*s..*e).contains(&byte));
    let mut tokens: Vec<String> = Vec::new();
    let mut labels: Vec<BioLabel> = Vec::new();
    let mut last_slot: Option<usize> = None;
    let mut merged: Option<usize> = None;
    for tok in tokenize(&text) {
        let slot = slot_at(tok.start).map(|(i, _, _)| *i);
        if slot.is_some() && slot == merged {
            continue;
        }
        let entity = slot.and_then(|i| fills[i].and_then(|f| f.placeholder)).filter(|p| !p.is_numeric() && *p != Placeholder::Date);
        merged = if entity.is_some() { slot } else { None };
        let token = match entity {
            Some(p) => p.token().to_string(),
            None => literal_placeholder(&tok.text).map(|p| p.token().to_string()).unwrap_or(tok.text.clone()),
        };
        let label = match slot.and_then(|i| t.slots[i].role.as_deref()) {
            Some(role) if last_slot == slot => BioLabel::inside(role),
            Some(role) => BioLabel::begin(role),
            None => BioLabel::outside(),
        };
        last_slot = slot;
        tokens.push(token);
        labels.push(label);
    }

    let mut actions = Vec::new();
    for skeleton in &t.actions {
        let mut s = String::new();
        let mut at = 0;
        for (start, end, name) in references(skeleton) {
            let i = t.slots.iter().position(|x| x.name == name).expect("validated reference");
            s.push_str(&skeleton[at..start]);
            s.push_str(&fills[i].expect("every slot filled").render);
            at = end;
        }
        s.push_str(&skeleton[at..]);
        let action = parse_action(&s, catalog, rules).map_err(|e| err(format!("action `{s}`: {e}")))?;
        actions.push(action.canonical());
    }

    Ok(GoldRecord {
        text,
        tokens,
        intents: t.intents.clone(),
        labels,
        actions,
        template,
    })
}

/// Expands templates into at most `limit` gold records, visiting templates
/// round-robin so that every template is represented. Deterministic for a
/// given seed; records with an already generated text are skipped.
pub fn expand(
    templates: &[Template],
    dataset: &Dataset,
    catalog: &Catalog,
    rules: &RuleTable,
    limit: usize,
    seed: u64,
) -> Result<Vec<GoldRecord>, CorpusError> {
    let mut cursors = Vec::with_capacity(templates.len());
    for (ti, t) in templates.iter().enumerate() {
        let mut dims = Vec::new();
        for p in &t.pieces {
            match p {
                Piece::Text(_) => {}
                Piece::Choice(c) => dims.push(Dim::Choice(c)),
                Piece::Slot(i) => {
                    let slot = &t.slots[*i];
                    let fills = match &slot.domain {
                        Domain::Inline(f) => f.clone(),
                        Domain::Named(d) => named_domain(d, dataset, rules),
                    };
                    if fills.is_empty() {
                        return Err(CorpusError::EmptyDomain {
                            template: ti,
                            slot: slot.name.clone(),
                        });
                    }
                    dims.push(Dim::Slot(*i, fills));
                }
            }
        }
        let total = dims.iter().fold(1u64, |acc, d| acc.saturating_mul(d.len() as u64));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(ti as u64);
        let queue = (total <= ENUMERATE_LIMIT).then(|| {
            let mut q: Vec<u64> = (0..total).collect();
            q.shuffle(&mut rng);
            q.reverse();
            q
        });
        cursors.push(Cursor {
            template: ti,
            dims,
            total,
            queue,
            drawn: HashSet::new(),
            rng,
            spent: false,
        });
    }

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    while out.len() < limit && cursors.iter().any(|c| !c.spent) {
        for cur in cursors.iter_mut() {
            if out.len() >= limit {
                break;
            }
            let Some(choice) = cur.next() else { continue };
            let t = &templates[cur.template];
            let record = instantiate(t, cur.template, &cur.dims, &choice, catalog, rules)?;
            if seen.insert(record.text.clone()) {
                out.push(record);
            }
        }
    }
    Ok(out)
}

/// Checks the two record invariants: the abstractor reproduces the gold
/// tokens, and synthesizing from the gold tags yields the gold actions.
pub fn verify_record(
    record: &GoldRecord,
    index: &EntityIndex,
    synthesizer: &Synthesizer,
) -> Result<(), String> {
    let abstracted = abstract_utterance(&record.text, index);
    if abstracted.abstracted_tokens != record.tokens {
        return Err(format!(
            "`{}` abstracts to {:?}, gold {:?}",
            record.text, abstracted.abstracted_tokens, record.tokens
        ));
    }
    let actions = synthesizer.synthesize(&record.tagged(abstracted)).canonical();
    if actions != record.actions {
        return Err(format!("`{}` synthesizes {:?}, gold {:?}", record.text, actions, record.actions));
    }
    Ok(())
}

/// Intent confusion counts for one operation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IntentCounts {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub records: usize,
    pub metrics: Metrics,
    pub per_operation: BTreeMap<String, IntentCounts>,
    /// Records whose predicted intents or labels differ from gold.
    pub misses: Vec<usize>,
}

impl fmt::Display for BenchmarkReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.metrics;
        writeln!(
            f,
            "{} records: intent accuracy {:.4}, slot accuracy {:.4}, entity F1 {:.4}",
            self.records, m.intent_accuracy, m.slot_accuracy, m.entity_f1
        )?;
        for (op, c) in &self.per_operation {
            writeln!(f, "  {op:<18} tp {:>5} fp {:>4} fn {:>4}", c.true_positive, c.false_positive, c.false_negative)?;
        }
        Ok(())
    }
}

/// Abstracts and tags every record and scores the tagger against gold.
pub fn run_benchmark(tagger: &dyn Tagger, records: &[GoldRecord], index: &EntityIndex) -> Result<BenchmarkReport, CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::NoRecords);
    }
    let mut predictions = Vec::with_capacity(records.len());
    let mut gold = Vec::with_capacity(records.len());
    let mut per_operation: BTreeMap<String, IntentCounts> = BTreeMap::new();
    let mut misses = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let abstracted = abstract_utterance(&r.text, index);
        if abstracted.len() != r.labels.len() {
            return Err(CorpusError::Record {
                index: i,
                message: format!("{} tokens for {} gold labels", abstracted.len(), r.labels.len()),
            });
        }
        let p = tagger.tag(&abstracted);
        let g = r.tagged(abstracted);
        let (pn, gn) = (p.intents.names(), g.intents.names());
        for op in pn.union(&gn) {
            let c = per_operation.entry(op.to_string()).or_default();
            match (pn.contains(op), gn.contains(op)) {
                (true, true) => c.true_positive += 1,
                (true, false) => c.false_positive += 1,
                _ => c.false_negative += 1,
            }
        }
        if pn != gn || p.labels != g.labels {
            misses.push(i);
        }
        predictions.push(p);
        gold.push(g);
    }
    let metrics = evaluate(&predictions, &gold)?;
    Ok(BenchmarkReport {
        records: records.len(),
        metrics,
        per_operation,
        misses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagger::ReferenceTagger;

    fn cars() -> Dataset {
        Dataset::from_csv(
            "CarSales",
            b"Brand,Sales,Year\nFord,120.5,2010\nHonda,98,2011\nToyota,45.2,2012\n",
        )
        .unwrap()
    }

    fn template(pattern: &str, intents: &[&str], actions: &[&str]) -> Template {
        Template::new(
            pattern,
            intents.iter().map(|s| s.to_string()).collect(),
            actions.iter().map(|s| s.to_string()).collect(),
            Catalog::builtin(),
        )
        .unwrap()
    }

    fn run(templates: &[Template], limit: usize, seed: u64) -> Vec<GoldRecord> {
        expand(templates, &cars(), Catalog::builtin(), RuleTable::builtin(), limit, seed).unwrap()
    }

    #[test]
    fn combinatorial_count() {
        let t = template(
            "make the {o:component=title|legend} {c:color=red|blue}",
            &["setColor"],
            &["{setColor, $o, color=$c}"],
        );
        let records = run(&[t.clone()], 10, 1);
        assert_eq!(records.len(), 4);
        let texts: BTreeSet<_> = records.iter().map(|r| r.text.as_str()).collect();
        assert!(texts.contains("make the legend blue"));
        assert!(run(&[t], 0, 1).is_empty());
    }

    #[test]
    fn show_sales_by_year() {
        let t = template(
            "show {y:yField@measure} by {x:xField@dimension}",
            &["bindY", "bindX"],
            &["{bindY, yAxis, field=$y}", "{bindX, xAxis, field=$x}"],
        );
        let records = run(&[t], 100, 3);
        let r = records.iter().find(|r| r.text == "show Sales by Year").unwrap();
        assert_eq!(r.tokens, vec!["show", "<column>", "by", "<column>"]);
        let labels: Vec<String> = r.labels.iter().map(|l| l.to_string()).collect();
        assert_eq!(labels, vec!["O", "B-yField", "O", "B-xField"]);
        assert_eq!(r.actions, vec!["{bindY, yAxis, field=Sales}", "{bindX, xAxis, field=Year}"]);
    }

    #[test]
    fn labels_follow_slot_spans() {
        let t = template(
            "change the color of the {o:component=x axis>xAxis} to {c:color=navy blue>navy.blue}",
            &["setColor"],
            &["{setColor, $o, color=$c}"],
        );
        let r = &run(&[t], 5, 0)[0];
        let labels: Vec<String> = r.labels.iter().map(|l| l.to_string()).collect();
        assert_eq!(
            labels,
            vec!["O", "O", "O", "O", "O", "B-component", "I-component", "O", "B-color", "I-color"]
        );
        assert_eq!(r.actions, vec!["{setColor, xAxis, color=navy.blue}"]);
    }

    #[test]
    fn decorative_slots_and_alternations_are_outside() {
        let t = template("(please |){w:_=kindly|now} sort it {o:order=ascending}", &["sort"], &["{sort, *, order=$o}"]);
        let records = run(&[t], 10, 0);
        assert_eq!(records.len(), 4);
        for r in &records {
            let chunks = crate::tagger::chunks(&r.labels);
            assert_eq!(chunks.len(), 1);
            assert_eq!(chunks[0].role, "order");
        }
        assert!(records.iter().any(|r| r.text == "kindly sort it ascending"));
    }

    #[test]
    fn deterministic_under_seed() {
        let all = Template::builtin();
        let a = expand(&all, &cars(), Catalog::builtin(), RuleTable::builtin(), 300, 11).unwrap();
        let b = expand(&all, &cars(), Catalog::builtin(), RuleTable::builtin(), 300, 11).unwrap();
        assert_eq!(a, b);
        let texts: HashSet<_> = a.iter().map(|r| &r.text).collect();
        assert_eq!(texts.len(), a.len());
    }

    #[test]
    fn empty_domain_is_an_error() {
        let ds = Dataset::from_csv("t", b"Brand,Sales\nFord,1\n").unwrap();
        let t = template("only show {y:valueLiteral@year}", &["filter"], &["{filter, *, value=$y}"]);
        let err = expand(&[t], &ds, Catalog::builtin(), RuleTable::builtin(), 5, 0).unwrap_err();
        assert!(matches!(err, CorpusError::EmptyDomain { ref slot, .. } if slot == "y"));
    }

    #[test]
    fn invalid_templates() {
        let c = Catalog::builtin();
        let bad = |p: &str, i: &[&str], a: &[&str]| {
            Template::new(p, i.iter().map(|s| s.to_string()).collect(), a.iter().map(|s| s.to_string()).collect(), c)
                .unwrap_err()
        };
        assert!(bad("make it {c:color", &[], &[]).contains("missing"));
        assert!(bad("make it {c:colour}", &[], &["{*, *, color=$c}"]).contains("unknown domain"));
        assert!(bad("make it {c:hue@color}", &[], &["{*, *, color=$c}"]).contains("unknown entity role"));
        assert!(bad("make it {c:color}", &[], &[]).contains("no action uses it"));
        assert!(bad("make it {c:color}", &[], &["{*, *, color=$d}"]).contains("unknown slot"));
        assert!(bad("make it red", &["paint"], &[]).contains("unknown intent"));
        assert!(bad("(a|(b))", &[], &[]).contains("nest"));
    }

    #[test]
    fn builtin_templates_cover_every_operation() {
        let covered: BTreeSet<String> = Template::builtin().iter().flat_map(|t| t.intents.clone()).collect();
        for op in Catalog::builtin().operations() {
            assert!(covered.contains(&op.name), "no template for {}", op.name);
        }
    }

    #[test]
    fn records_satisfy_invariants() {
        let ds = cars();
        let index = ds.entity_index(10_000);
        let records = expand(&Template::builtin(), &ds, Catalog::builtin(), RuleTable::builtin(), 400, 5).unwrap();
        let synth = Synthesizer::builtin();
        for r in &records {
            assert_eq!(r.labels.len(), r.tokens.len());
            assert!(crate::tagger::is_well_formed(&r.labels));
            verify_record(r, &index, &synth).unwrap();
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let records = run(&Template::builtin(), 50, 2);
        let text = write_jsonl(&records);
        assert_eq!(text.lines().count(), 50);
        assert_eq!(read_jsonl(&text).unwrap(), records);
        assert!(matches!(read_jsonl("{"), Err(CorpusError::Json { line: 1, .. })));
    }

    #[test]
    fn skeleton_phrases_expand_alternations() {
        let t = template("(add|draw) a trend line in {c:color}", &["addTrendLine"], &["{addTrendLine, *, color=$c}"]);
        assert_eq!(t.skeleton_phrases(), vec!["add a trend line in {c}", "draw a trend line in {c}"]);
    }

    struct Fixed {
        random: bool,
    }

    impl Tagger for Fixed {
        fn name(&self) -> &str {
            "fixed"
        }
        fn version(&self) -> &str {
            "0"
        }
        fn tag(&self, a: &AbstractedUtterance) -> TaggedUtterance {
            let mut rng = ChaCha8Rng::seed_from_u64(a.len() as u64);
            let labels = (0..a.len())
                .map(|_| {
                    if self.random && rng.random_bool(0.5) {
                        BioLabel::begin(["icon", "font", "direction"][rng.random_range(0..3)])
                    } else {
                        BioLabel::outside()
                    }
                })
                .collect();
            TaggedUtterance {
                abstracted: a.clone(),
                intents: IntentSet::default(),
                labels,
            }
        }
    }

    #[test]
    fn benchmark_reference_and_floors() {
        let ds = cars();
        let index = ds.entity_index(10_000);
        let records = expand(&Template::builtin(), &ds, Catalog::builtin(), RuleTable::builtin(), 500, 9).unwrap();
        let report = run_benchmark(&ReferenceTagger::builtin(), &records, &index).unwrap();
        assert!(report.metrics.intent_accuracy >= 0.99, "{report}");
        assert!(report.metrics.entity_f1 >= 0.99, "{report}");
        assert!(report.metrics.slot_accuracy >= 0.99, "{report}");

        let empty = run_benchmark(&Fixed { random: false }, &records, &index).unwrap();
        let no_intents = records.iter().filter(|r| r.intents.is_empty()).count() as f64 / records.len() as f64;
        assert!((empty.metrics.intent_accuracy - no_intents).abs() < 1e-12);

        let random = run_benchmark(&Fixed { random: true }, &records, &index).unwrap();
        assert!(random.metrics.entity_f1 < 0.1, "{random}");

        assert!(matches!(run_benchmark(&Fixed { random: false }, &[], &index), Err(CorpusError::NoRecords)));
    }
}
