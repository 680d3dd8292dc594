//! Editing actions: `{operation, objects, parameters}` triples and their
//! canonical text form.
//!
//! ```text
//! action  := '{' op ',' objects ',' params '}'
//! op      := '*' | name
//! objects := '*' | object ('&' object)*
//! object  := '*' | 'it' | '@' name | component | 'field(' name ')' | selector
//! selector:= '[' prop '=' pvalue (',' prop '=' pvalue)* ']'
//! params  := '*' | role '=' value (',' role '=' value)*
//! value   := exact | vague | anchor '[' relation ']'
//! anchor  := 'self' | object
//! ```
//!
//! Multi-word keywords are written with dots (`very.large`, `navy.blue`),
//! free text is single-quoted with `\'` and `\\` escapes. Parameter values
//! are read according to the kind of their role in the catalog.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::catalog::{Catalog, ValueKind};
use crate::rules::{Rgb, RuleTable};
use crate::text::is_bare_word;

/// Token range `[start, end)` in the originating utterance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Span {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn hull(&self, other: &Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ComponentKind {
    Chart,
    Canvas,
    XAxis,
    YAxis,
    Legend,
    Title,
    Mark,
    Gridlines,
    TrendLine,
    ReferenceLine,
    ReferenceBand,
    AverageLine,
    Label,
    AnnotationText,
    PlotArea,
    DataField(String),
}

impl ComponentKind {
    /// Every payload-free kind.
    pub const FIXED: [ComponentKind; 15] = [
        ComponentKind::Chart,
        ComponentKind::Canvas,
        ComponentKind::XAxis,
        ComponentKind::YAxis,
        ComponentKind::Legend,
        ComponentKind::Title,
        ComponentKind::Mark,
        ComponentKind::Gridlines,
        ComponentKind::TrendLine,
        ComponentKind::ReferenceLine,
        ComponentKind::ReferenceBand,
        ComponentKind::AverageLine,
        ComponentKind::Label,
        ComponentKind::AnnotationText,
        ComponentKind::PlotArea,
    ];

    /// Canonical name; `None` for data fields, which carry a payload.
    pub fn name(&self) -> Option<&'static str> {
        Some(match self {
            ComponentKind::Chart => "chart",
            ComponentKind::Canvas => "canvas",
            ComponentKind::XAxis => "xAxis",
            ComponentKind::YAxis => "yAxis",
            ComponentKind::Legend => "legend",
            ComponentKind::Title => "title",
            ComponentKind::Mark => "mark",
            ComponentKind::Gridlines => "gridlines",
            ComponentKind::TrendLine => "trendLine",
            ComponentKind::ReferenceLine => "referenceLine",
            ComponentKind::ReferenceBand => "referenceBand",
            ComponentKind::AverageLine => "averageLine",
            ComponentKind::Label => "label",
            ComponentKind::AnnotationText => "annotationText",
            ComponentKind::PlotArea => "plot",
            ComponentKind::DataField(_) => return None,
        })
    }

    /// Looks up a payload-free kind; `plotArea` is accepted for `plot`.
    pub fn from_name(name: &str) -> Option<ComponentKind> {
        if name == "plotArea" {
            return Some(ComponentKind::PlotArea);
        }
        ComponentKind::FIXED.into_iter().find(|k| k.name() == Some(name))
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ComponentKind::DataField(name) => write!(f, "field({})", render_name(name)),
            other => f.write_str(other.name().unwrap_or_default()),
        }
    }
}

/// Selector property names in canonical order; anything else becomes `*`.
pub const SELECTOR_PROPERTIES: [&str; 10] = [
    "name", "component", "value", "field", "shape", "color", "stroke", "icon", "text", "*",
];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PredicateValue {
    /// Lexicon word(s), written bare with dots between words.
    Keyword(String),
    /// Verbatim phrase, written single-quoted.
    Literal(String),
}

impl PredicateValue {
    /// A keyword if it can be written bare, otherwise a literal.
    pub fn keyword(text: &str) -> PredicateValue {
        if is_keyword_text(text) {
            PredicateValue::Keyword(text.to_string())
        } else {
            PredicateValue::Literal(text.to_string())
        }
    }

    pub fn text(&self) -> &str {
        match self {
            PredicateValue::Keyword(s) | PredicateValue::Literal(s) => s,
        }
    }
}

impl fmt::Display for PredicateValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredicateValue::Keyword(k) => f.write_str(&k.replace(' ', ".")),
            PredicateValue::Literal(s) => f.write_str(&quote(s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Predicate {
    pub property: String,
    pub value: PredicateValue,
}

impl Predicate {
    /// Unknown property names are stored under the wildcard `*`.
    pub fn new(property: &str, value: PredicateValue) -> Predicate {
        let property = if SELECTOR_PROPERTIES.contains(&property) { property } else { "*" };
        Predicate {
            property: property.to_string(),
            value,
        }
    }

    fn rank(&self) -> usize {
        SELECTOR_PROPERTIES
            .iter()
            .position(|p| *p == self.property)
            .unwrap_or(SELECTOR_PROPERTIES.len())
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.property, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ObjectRef {
    Star,
    Pronoun,
    Named(String),
    Component(ComponentKind),
    Selector(Vec<Predicate>),
}

impl ObjectRef {
    /// Builds a selector with predicates in canonical property order.
    /// Returns `None` for an empty predicate list.
    pub fn selector(mut predicates: Vec<Predicate>) -> Option<ObjectRef> {
        if predicates.is_empty() {
            return None;
        }
        predicates.sort_by_key(Predicate::rank);
        Some(ObjectRef::Selector(predicates))
    }

    pub fn is_star(&self) -> bool {
        matches!(self, ObjectRef::Star)
    }
}

impl fmt::Display for ObjectRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObjectRef::Star => f.write_str("*"),
            ObjectRef::Pronoun => f.write_str("it"),
            ObjectRef::Named(n) => write!(f, "@{}", render_name(n)),
            ObjectRef::Component(k) => write!(f, "{k}"),
            ObjectRef::Selector(preds) => {
                f.write_str("[")?;
                for (i, p) in preds.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{p}")?;
                }
                f.write_str("]")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Px,
    Percent,
    Count,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Number { value: f64, unit: Unit },
    Color(Rgb),
    Keyword(String),
    Bool(bool),
    Text(String),
    Field(String),
    Range(f64, f64),
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Number { value, unit } => {
                let suffix = match unit {
                    Unit::Px => "px",
                    Unit::Percent => "%",
                    Unit::Count | Unit::None => "",
                };
                write!(f, "{value}{suffix}")
            }
            Scalar::Color(c) => f.write_str(&c.hex()),
            Scalar::Keyword(k) => f.write_str(&k.replace(' ', ".")),
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Text(t) => f.write_str(&quote(t)),
            Scalar::Field(name) => f.write_str(&render_name(name)),
            Scalar::Range(lo, hi) => write!(f, "[{lo}..{hi}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Anchor {
    SelfRef,
    Object(ObjectRef),
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Anchor::SelfRef => f.write_str("self"),
            Anchor::Object(o) => write!(f, "{o}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Exact(Scalar),
    Vague(String),
    Relational { anchor: Anchor, relation: String },
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Exact(s) => write!(f, "{s}"),
            ParamValue::Vague(k) => f.write_str(&k.replace(' ', ".")),
            ParamValue::Relational { anchor, relation } => write!(f, "{anchor}[{relation}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub role: String,
    pub value: ParamValue,
}

impl Parameter {
    pub fn new(role: &str, value: ParamValue) -> Parameter {
        Parameter {
            role: role.to_string(),
            value,
        }
    }

    pub fn exact(role: &str, value: Scalar) -> Parameter {
        Parameter::new(role, ParamValue::Exact(value))
    }

    pub fn vague(role: &str, keyword: &str) -> Parameter {
        Parameter::new(role, ParamValue::Vague(keyword.to_string()))
    }

    pub fn relational(role: &str, anchor: Anchor, relation: &str) -> Parameter {
        Parameter::new(
            role,
            ParamValue::Relational {
                anchor,
                relation: relation.to_string(),
            },
        )
    }

    /// Checks the value against the role's kind and the rule-table lexicons.
    pub fn check(&self, catalog: &Catalog, rules: &RuleTable) -> Result<(), String> {
        let role = catalog
            .parameter_role(&self.role)
            .ok_or_else(|| format!("unknown parameter role `{}`", self.role))?;
        match (&self.value, role.kind) {
            (ParamValue::Vague(k), ValueKind::Color) if rules.color(k).is_some() => Ok(()),
            (ParamValue::Vague(k), ValueKind::Measure) if rules.measure_keyword(k).is_some() => Ok(()),
            (ParamValue::Vague(k), ValueKind::Range) if rules.is_range_keyword(k) => Ok(()),
            (ParamValue::Vague(k), ValueKind::Position) if rules.is_relation(k) => Ok(()),
            (ParamValue::Vague(k), _) => Err(format!("`{k}` is not a known {} keyword", self.role)),
            (ParamValue::Relational { relation, .. }, ValueKind::Color | ValueKind::Measure | ValueKind::Position) => {
                if rules.is_relation(relation) {
                    Ok(())
                } else {
                    Err(format!("unknown relation `{relation}`"))
                }
            }
            (ParamValue::Relational { .. }, _) => Err(format!("{} does not take relational values", self.role)),
            (ParamValue::Exact(s), kind) => {
                let ok = match (s, kind) {
                    (Scalar::Color(_), ValueKind::Color) => true,
                    (Scalar::Number { unit, value }, ValueKind::Measure) => {
                        value.is_finite() && matches!(unit, Unit::Px | Unit::Percent | Unit::None)
                    }
                    (Scalar::Number { unit: Unit::Count, value }, ValueKind::Count) => {
                        value.fract() == 0.0 && *value >= 0.0
                    }
                    (Scalar::Number { unit: Unit::None, value }, ValueKind::Literal) => value.is_finite(),
                    (Scalar::Text(_), ValueKind::Literal | ValueKind::Text) => true,
                    (Scalar::Field(n), ValueKind::Field) => !n.is_empty(),
                    (Scalar::Keyword(k), ValueKind::Keyword) => {
                        is_keyword_text(k) && (role.options.is_empty() || role.options.contains(k))
                    }
                    (Scalar::Bool(_), ValueKind::Bool) => true,
                    (Scalar::Range(lo, hi), ValueKind::Range) => lo.is_finite() && hi.is_finite(),
                    _ => false,
                };
                if ok {
                    Ok(())
                } else {
                    Err(format!("value `{s}` does not fit role `{}`", self.role))
                }
            }
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.role, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operation {
    Star,
    Op(String),
}

impl Operation {
    pub fn name(&self) -> Option<&str> {
        match self {
            Operation::Star => None,
            Operation::Op(n) => Some(n),
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operation::Star => f.write_str("*"),
            Operation::Op(n) => f.write_str(n),
        }
    }
}

/// One editing action. Equality ignores `source_span`.
#[derive(Debug, Clone)]
pub struct EditingAction {
    pub operation: Operation,
    /// Never empty; an unspecified object list is `[Star]`.
    pub objects: Vec<ObjectRef>,
    pub parameters: Vec<Parameter>,
    pub source_span: Span,
}

impl PartialEq for EditingAction {
    fn eq(&self, other: &Self) -> bool {
        self.operation == other.operation && self.objects == other.objects && self.parameters == other.parameters
    }
}

impl EditingAction {
    pub fn new(operation: Operation, objects: Vec<ObjectRef>, parameters: Vec<Parameter>) -> EditingAction {
        let objects = if objects.is_empty() { vec![ObjectRef::Star] } else { objects };
        EditingAction {
            operation,
            objects,
            parameters,
            source_span: Span::default(),
        }
    }

    pub fn op(name: &str, objects: Vec<ObjectRef>, parameters: Vec<Parameter>) -> EditingAction {
        EditingAction::new(Operation::Op(name.to_string()), objects, parameters)
    }

    pub fn with_span(mut self, span: Span) -> EditingAction {
        self.source_span = span;
        self
    }

    pub fn is_orphan(&self) -> bool {
        self.operation == Operation::Star
    }

    pub fn objects_unspecified(&self) -> bool {
        self.objects.iter().all(ObjectRef::is_star)
    }

    pub fn parameter(&self, role: &str) -> Option<&Parameter> {
        self.parameters.iter().find(|p| p.role == role)
    }

    /// Canonical text form.
    pub fn canonical(&self) -> String {
        self.to_string()
    }

    pub fn parse(text: &str) -> Result<EditingAction, ParseError> {
        parse_action(text, Catalog::builtin(), RuleTable::builtin())
    }
}

impl fmt::Display for EditingAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}, ", self.operation)?;
        for (i, o) in self.objects.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{o}")?;
        }
        f.write_str(", ")?;
        if self.parameters.is_empty() {
            f.write_str("*")?;
        }
        for (i, p) in self.parameters.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str("}")
    }
}

fn is_keyword_text(text: &str) -> bool {
    !text.is_empty()
        && text.split(' ').all(|w| {
            !w.is_empty() && w.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '#')
        })
}

fn quote(text: &str) -> String {
    format!("'{}'", text.replace('\\', "\\\\").replace('\'', "\\'"))
}

fn render_name(name: &str) -> String {
    if is_bare_word(name) && !is_reserved(name) {
        name.to_string()
    } else {
        quote(name)
    }
}

fn is_reserved(word: &str) -> bool {
    matches!(word, "it" | "self" | "true" | "false")
}

// ---------------------------------------------------------------- parsing

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownOperation(String),
    UnknownParameterRole(String),
    InvalidValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message} at byte {position}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Punct(char),
    Atom(String),
    Quoted(String),
}

const PUNCT: &str = "{}[](),&=@";

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if PUNCT.contains(c) {
            out.push((Tok::Punct(c), pos));
            chars.next();
        } else if c == '\'' {
            chars.next();
            let mut s = String::new();
            let mut closed = false;
            while let Some((_, ch)) = chars.next() {
                match ch {
                    '\\' => match chars.next() {
                        Some((_, e)) => s.push(e),
                        None => break,
                    },
                    '\'' => {
                        closed = true;
                        break;
                    }
                    _ => s.push(ch),
                }
            }
            if !closed {
                return Err(ParseError {
                    kind: ParseErrorKind::Syntax,
                    position: pos,
                    message: "unterminated quoted text".into(),
                });
            }
            out.push((Tok::Quoted(s), pos));
        } else {
            let mut s = String::new();
            while let Some(&(_, ch)) = chars.peek() {
                if ch.is_whitespace() || PUNCT.contains(ch) || ch == '\'' {
                    break;
                }
                s.push(ch);
                chars.next();
            }
            out.push((Tok::Atom(s), pos));
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
    catalog: &'a Catalog,
    rules: &'a RuleTable,
}

impl<'a> Parser<'a> {
    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|t| t.1).unwrap_or(self.end)
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.0)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).map(|t| t.0.clone());
        self.at += 1;
        t
    }

    fn error<T>(&self, kind: ParseErrorKind, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            kind,
            position: self.pos(),
            message: message.into(),
        })
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        self.error(ParseErrorKind::Syntax, message)
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.at += 1;
            Ok(())
        } else {
            self.syntax(format!("expected `{c}`"))
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn peek_atom(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Tok::Atom(a)) if a == word)
    }

    fn name(&mut self) -> Result<String, ParseError> {
        match self.next() {
            Some(Tok::Atom(a)) | Some(Tok::Quoted(a)) if !a.is_empty() => Ok(a),
            _ => {
                self.at -= 1;
                self.syntax("expected a name")
            }
        }
    }

    fn action(&mut self) -> Result<EditingAction, ParseError> {
        self.expect('{')?;
        let operation = match self.next() {
            Some(Tok::Atom(a)) if a == "*" => Operation::Star,
            Some(Tok::Atom(a)) => {
                if self.catalog.operation(&a).is_none() {
                    self.at -= 1;
                    return self.error(ParseErrorKind::UnknownOperation(a.clone()), format!("unknown operation `{a}`"));
                }
                Operation::Op(a)
            }
            _ => {
                self.at -= 1;
                return self.syntax("expected an operation name or `*`");
            }
        };
        self.expect(',')?;
        let mut objects = vec![self.object()?];
        while self.eat('&') {
            objects.push(self.object()?);
        }
        self.expect(',')?;
        let mut parameters = Vec::new();
        if self.peek_atom("*") {
            self.at += 1;
        } else {
            parameters.push(self.parameter()?);
            while self.eat(',') {
                parameters.push(self.parameter()?);
            }
        }
        self.expect('}')?;
        if self.at < self.toks.len() {
            return self.syntax("trailing input after action");
        }
        Ok(EditingAction::new(operation, objects, parameters))
    }

    fn object(&mut self) -> Result<ObjectRef, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Punct('@')) => {
                self.at += 1;
                Ok(ObjectRef::Named(self.name()?))
            }
            Some(Tok::Punct('[')) => self.selector(),
            Some(Tok::Atom(a)) => {
                self.at += 1;
                match a.as_str() {
                    "*" => Ok(ObjectRef::Star),
                    "it" => Ok(ObjectRef::Pronoun),
                    "field" if self.peek() == Some(&Tok::Punct('(')) => {
                        self.at += 1;
                        let name = self.name()?;
                        self.expect(')')?;
                        Ok(ObjectRef::Component(ComponentKind::DataField(name)))
                    }
                    other => match ComponentKind::from_name(other) {
                        Some(k) => Ok(ObjectRef::Component(k)),
                        None => {
                            self.at -= 1;
                            self.syntax(format!("unknown object `{other}`"))
                        }
                    },
                }
            }
            _ => self.syntax("expected an object"),
        }
    }

    fn selector(&mut self) -> Result<ObjectRef, ParseError> {
        self.expect('[')?;
        let mut preds = Vec::new();
        loop {
            let property = match self.next() {
                Some(Tok::Atom(a)) => a,
                _ => {
                    self.at -= 1;
                    return self.syntax("expected a selector property");
                }
            };
            self.expect('=')?;
            let value = match self.next() {
                Some(Tok::Atom(a)) => PredicateValue::Keyword(a.replace('.', " ")),
                Some(Tok::Quoted(q)) => PredicateValue::Literal(q),
                _ => {
                    self.at -= 1;
                    return self.syntax("expected a selector value");
                }
            };
            preds.push(Predicate::new(&property, value));
            if self.eat(']') {
                break;
            }
            self.expect(',')?;
        }
        Ok(ObjectRef::selector(preds).expect("non-empty"))
    }

    fn parameter(&mut self) -> Result<Parameter, ParseError> {
        let start = self.at;
        let role_name = match self.next() {
            Some(Tok::Atom(a)) => a,
            _ => {
                self.at -= 1;
                return self.syntax("expected a parameter role");
            }
        };
        let Some(role) = self.catalog.parameter_role(&role_name) else {
            self.at -= 1;
            return self.error(
                ParseErrorKind::UnknownParameterRole(role_name.clone()),
                format!("unknown parameter role `{role_name}`"),
            );
        };
        let kind = role.kind;
        self.expect('=')?;
        let value_at = self.at;
        let value = self.value(kind)?;
        let param = Parameter::new(&role_name, value);
        if let Err(message) = param.check(self.catalog, self.rules) {
            self.at = value_at.max(start);
            return self.error(ParseErrorKind::InvalidValue, message);
        }
        Ok(param)
    }

    // anchor followed by `[relation]`, if the upcoming tokens have that shape
    fn relational(&mut self) -> Result<Option<ParamValue>, ParseError> {
        let save = self.at;
        let anchor = match self.peek().cloned() {
            Some(Tok::Atom(a)) if a == "self" => {
                self.at += 1;
                Anchor::SelfRef
            }
            Some(Tok::Punct('[')) | Some(Tok::Punct('@')) => Anchor::Object(self.object()?),
            Some(Tok::Atom(a))
                if a == "*" || a == "it" || a == "field" || ComponentKind::from_name(&a).is_some() =>
            {
                Anchor::Object(self.object()?)
            }
            _ => return Ok(None),
        };
        if !self.eat('[') {
            self.at = save;
            return Ok(None);
        }
        let relation = match self.next() {
            Some(Tok::Atom(a)) => a,
            _ => {
                self.at -= 1;
                return self.syntax("expected a relation");
            }
        };
        self.expect(']')?;
        Ok(Some(ParamValue::Relational { anchor, relation }))
    }

    fn value(&mut self, kind: ValueKind) -> Result<ParamValue, ParseError> {
        if matches!(kind, ValueKind::Color | ValueKind::Measure | ValueKind::Position) {
            if let Some(v) = self.relational()? {
                return Ok(v);
            }
        }
        if kind == ValueKind::Range && self.eat('[') {
            let text = match self.next() {
                Some(Tok::Atom(a)) => a,
                _ => {
                    self.at -= 1;
                    return self.syntax("expected `lo..hi`");
                }
            };
            let bounds = text
                .split_once("..")
                .and_then(|(lo, hi)| Some((lo.parse::<f64>().ok()?, hi.parse::<f64>().ok()?)));
            let Some((lo, hi)) = bounds else {
                self.at -= 1;
                return self.syntax("expected `lo..hi`");
            };
            self.expect(']')?;
            return Ok(ParamValue::Exact(Scalar::Range(lo, hi)));
        }
        let tok = self.next();
        let back = |p: &mut Self| p.at -= 1;
        let value = match (tok, kind) {
            (Some(Tok::Quoted(q)), ValueKind::Text | ValueKind::Literal) => ParamValue::Exact(Scalar::Text(q)),
            (Some(Tok::Quoted(q)), ValueKind::Field) => ParamValue::Exact(Scalar::Field(q)),
            (Some(Tok::Atom(a)), ValueKind::Field) => ParamValue::Exact(Scalar::Field(a)),
            (Some(Tok::Atom(a)), ValueKind::Color) => match Rgb::parse_hex(&a) {
                Some(c) => ParamValue::Exact(Scalar::Color(c)),
                None => ParamValue::Vague(a.replace('.', " ")),
            },
            (Some(Tok::Atom(a)), ValueKind::Measure) => match parse_measure(&a) {
                Some(s) => ParamValue::Exact(s),
                None => ParamValue::Vague(a.replace('.', " ")),
            },
            (Some(Tok::Atom(a)), ValueKind::Keyword) => ParamValue::Exact(Scalar::Keyword(a.replace('.', " "))),
            (Some(Tok::Atom(a)), ValueKind::Bool) => match a.as_str() {
                "true" => ParamValue::Exact(Scalar::Bool(true)),
                "false" => ParamValue::Exact(Scalar::Bool(false)),
                _ => {
                    back(self);
                    return self.error(ParseErrorKind::InvalidValue, "expected true or false");
                }
            },
            (Some(Tok::Atom(a)), ValueKind::Count) => match a.parse::<u64>() {
                Ok(n) => ParamValue::Exact(Scalar::Number {
                    value: n as f64,
                    unit: Unit::Count,
                }),
                Err(_) => {
                    back(self);
                    return self.error(ParseErrorKind::InvalidValue, "expected a whole count");
                }
            },
            (Some(Tok::Atom(a)), ValueKind::Literal) => match a.parse::<f64>() {
                Ok(v) if v.is_finite() => ParamValue::Exact(Scalar::Number { value: v, unit: Unit::None }),
                _ => {
                    back(self);
                    return self.error(ParseErrorKind::InvalidValue, "expected a number or quoted text");
                }
            },
            (Some(Tok::Atom(a)), ValueKind::Range | ValueKind::Position) => ParamValue::Vague(a.replace('.', " ")),
            _ => {
                back(self);
                return self.syntax(format!("malformed {kind:?} value"));
            }
        };
        Ok(value)
    }
}

fn parse_measure(atom: &str) -> Option<Scalar> {
    let (num, unit) = if let Some(n) = atom.strip_suffix("px") {
        (n, Unit::Px)
    } else if let Some(n) = atom.strip_suffix('%') {
        (n, Unit::Percent)
    } else {
        (atom, Unit::None)
    };
    if !num.starts_with(|c: char| c.is_ascii_digit() || c == '-') {
        return None;
    }
    let value: f64 = num.parse().ok()?;
    value.is_finite().then_some(Scalar::Number { value, unit })
}

/// Parses the canonical text form of an action.
pub fn parse_action(text: &str, catalog: &Catalog, rules: &RuleTable) -> Result<EditingAction, ParseError> {
    let toks = lex(text)?;
    let mut parser = Parser {
        toks,
        at: 0,
        end: text.len(),
        catalog,
        rules,
    };
    parser.action()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(s: &str) -> EditingAction {
        let a = EditingAction::parse(s).unwrap_or_else(|e| panic!("{s}: {e}"));
        assert_eq!(a.canonical(), s);
        a
    }

    #[test]
    fn selector_action_serializes() {
        let a = EditingAction::op(
            "setColor",
            vec![ObjectRef::selector(vec![
                Predicate::new("color", PredicateValue::keyword("red")),
                Predicate::new("shape", PredicateValue::keyword("line")),
            ])
            .unwrap()],
            vec![Parameter::vague("color", "blue")],
        );
        assert_eq!(a.canonical(), "{setColor, [shape=line, color=red], color=blue}");
        assert_eq!(EditingAction::parse(&a.canonical()).unwrap(), a);
    }

    #[test]
    fn star_action() {
        let a = EditingAction::new(Operation::Star, vec![], vec![]);
        assert_eq!(a.canonical(), "{*, *, *}");
        assert_eq!(roundtrip("{*, *, *}"), a);
    }

    #[test]
    fn unknown_property_becomes_wildcard() {
        let a = roundtrip("{setStroke, [shape=bar, *='abc'], stroke=black}");
        let ObjectRef::Selector(p) = &a.objects[0] else { panic!() };
        assert_eq!(p[1].property, "*");
        assert_eq!(p[1].value, PredicateValue::Literal("abc".into()));
        let b = EditingAction::parse("{setStroke, [weird='abc', shape=bar], stroke=black}").unwrap();
        assert_eq!(b, a);
    }

    #[test]
    fn vague_and_relational_values() {
        let a = roundtrip("{setSize, *, size=very.large}");
        assert_eq!(a.objects, vec![ObjectRef::Star]);
        assert_eq!(a.parameters, vec![Parameter::vague("size", "very large")]);

        let p = roundtrip("{place, legend, position=plot[right]}");
        assert_eq!(
            p.parameters[0],
            Parameter::relational("position", Anchor::Object(ObjectRef::Component(ComponentKind::PlotArea)), "right")
        );
        assert_eq!(EditingAction::parse("{place, legend, position=plotArea[right]}").unwrap(), p);

        roundtrip("{setColor, title, color=self[darker]}");
        roundtrip("{place, annotationText, position=[value='Ford', shape=bar][top]}");
        roundtrip("{setColor, @'US 2020' & it, color=#1F77B4}");
    }

    #[test]
    fn exact_values_roundtrip() {
        roundtrip("{move, legend, direction=up, offset=10px}");
        roundtrip("{setOpacity, mark, opacity=50%}");
        roundtrip("{bin, *, count=5, field=Sales}");
        roundtrip("{filter, field(Year), value=2012}");
        roundtrip("{filter, field('Car Sales'), value='Ford'}");
        roundtrip("{addReferenceBand, *, range=[73.8..120.5], field=Sales}");
        roundtrip("{addReferenceBand, *, range=high}");
        roundtrip("{setVisible, legend, visible=false}");
        roundtrip("{setText, title, text='it\\'s mine'}");
        roundtrip("{setSize, title, size=-2.5px}");
    }

    #[test]
    fn errors_are_reported() {
        let e = EditingAction::parse("{bogusOp, *, *}").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownOperation("bogusOp".into()));
        assert_eq!(e.position, 1);
        let e = EditingAction::parse("{setColor, *, hue=red}").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownParameterRole("hue".into()));
        let e = EditingAction::parse("{setColor, *, color=notacolor}").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::InvalidValue);
        let e = EditingAction::parse("{setColor, *, color=red").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::Syntax);
        assert!(EditingAction::parse("{setChartType, *, chartType=donut}").is_err());
        assert!(EditingAction::parse("{setColor, [], *}").is_err());
        assert!(EditingAction::parse("{setColor, *, *} extra").is_err());
    }

    #[test]
    fn equality_ignores_span() {
        let a = EditingAction::parse("{sort, *, *}").unwrap();
        let b = a.clone().with_span(Span::new(2, 3));
        assert_eq!(a, b);
    }
}
