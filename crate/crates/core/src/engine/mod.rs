//! Operation mapper and session runtime.
//!
//! A [`Session`] owns one dataset and its charts. Each editing action is
//! resolved (objects, then parameters) and applied on its own: a failing
//! action leaves state untouched and does not undo earlier ones.

mod chart;
mod export;
mod object;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chart::{
    combine, Annotation, AnnotationKind, ChartState, ChartType, Channel, Datum, Encoding, Filter, Props, Sort, View,
};
pub use export::{ChartSpec, SPEC_SCHEMA};
pub use object::{
    default_number, effective_color, geometry, Handle, ObjectProps, Rect, Target, CANVAS_HEIGHT, CANVAS_WIDTH,
    DEFAULT_MARK_COLOR, PLOT,
};

use crate::action::{parse_action, Anchor, ComponentKind, EditingAction, ObjectRef, Operation, ParamValue, Scalar, Unit};
use crate::dataset::{Dataset, EntityIndex, SemanticType};
use crate::pipeline::{Interpretation, Interpreter};
use crate::rules::{Rgb, SortOrder};
use crate::text::parse_number;

/// Bins used when a bin action gives no count.
pub const DEFAULT_BIN_COUNT: usize = 10;
/// Columns used when an arrange action gives no count.
pub const DEFAULT_LAYOUT_COLUMNS: usize = 2;
/// Icon used when a pictograph is requested without one.
pub const DEFAULT_ICON: &str = "person";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "camelCase")]
pub enum Status {
    Applied,
    /// Applied, but some values were filled in by default.
    Recommended { defaults: Vec<String> },
    ClarificationNeeded { reason: String },
    Unsupported { message: String },
}

impl Status {
    pub fn is_success(&self) -> bool {
        matches!(self, Status::Applied | Status::Recommended { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    /// One status per action, in order.
    pub statuses: Vec<Status>,
    /// Active chart after execution.
    pub chart: String,
    pub version: u64,
}

/// One replayable history line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub utterance: String,
    /// Canonical action strings.
    pub actions: Vec<String>,
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("empty utterance")]
    EmptyUtterance,
    #[error("unknown chart `{0}`")]
    UnknownChart(String),
    #[error("history line {line}: {message}")]
    History { line: usize, message: String },
}

/// A concrete parameter value after resolution.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolved {
    Color(Rgb),
    Number(f64),
    Point(f64, f64),
    Keyword(String),
    Text(String),
    Bool(bool),
    Field(String),
    Range(f64, f64),
}

#[derive(Debug)]
enum Fail {
    Clarify(String),
    Unsupported(String),
}

type Step = Result<Vec<String>, Fail>;

fn clarify<T>(reason: impl Into<String>) -> Result<T, Fail> {
    Err(Fail::Clarify(reason.into()))
}

/// What a `*` object stands for in a given operation.
#[derive(Debug, Clone, Copy, PartialEq)]
enum StarDefault {
    LastEdited,
    LastEditedOrChart,
    Chart,
    Nothing,
}

#[derive(Debug, Clone)]
pub struct Submission {
    pub interpretation: Interpretation,
    pub outcome: Outcome,
}

#[derive(Debug, Clone)]
pub struct Session {
    interpreter: Arc<Interpreter>,
    dataset: Dataset,
    index: EntityIndex,
    charts: Vec<ChartState>,
    active: usize,
    named: BTreeMap<String, Handle>,
    last_edited: Option<Handle>,
    history: Vec<HistoryEntry>,
}

impl Session {
    pub fn new(interpreter: Arc<Interpreter>, dataset: Dataset) -> Session {
        let index = dataset.entity_index(interpreter.rules.value_index_cap);
        Session {
            interpreter,
            dataset,
            index,
            charts: vec![ChartState::new("chart1")],
            active: 0,
            named: BTreeMap::new(),
            last_edited: None,
            history: Vec::new(),
        }
    }

    pub fn interpreter(&self) -> &Interpreter {
        &self.interpreter
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn entity_index(&self) -> &EntityIndex {
        &self.index
    }

    pub fn charts(&self) -> &[ChartState] {
        &self.charts
    }

    pub fn chart(&self, id: &str) -> Option<&ChartState> {
        self.charts.iter().find(|c| c.id == id)
    }

    pub fn active_chart(&self) -> &ChartState {
        &self.charts[self.active]
    }

    pub fn last_edited(&self) -> Option<&Handle> {
        self.last_edited.as_ref()
    }

    pub fn names(&self) -> &BTreeMap<String, Handle> {
        &self.named
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    /// Current view of a chart.
    pub fn view(&self, chart: &str) -> Option<View> {
        self.chart(chart).map(|c| c.view(&self.dataset))
    }

    /// Interprets and executes one utterance, appending it to the history.
    pub fn submit(&mut self, text: &str) -> Result<Submission, EngineError> {
        if text.trim().is_empty() {
            return Err(EngineError::EmptyUtterance);
        }
        let interpreter = Arc::clone(&self.interpreter);
        let interpretation = interpreter.interpret(text, &self.index);
        let outcome = self.record(text, &interpretation.sequence.actions);
        Ok(Submission {
            interpretation,
            outcome,
        })
    }

    /// Executes actions and logs them under `utterance`.
    pub fn record(&mut self, utterance: &str, actions: &[EditingAction]) -> Outcome {
        let outcome = self.execute(actions);
        self.history.push(HistoryEntry {
            utterance: utterance.to_string(),
            actions: actions.iter().map(EditingAction::canonical).collect(),
        });
        outcome
    }

    /// Applies actions in order; never fails as a whole.
    pub fn execute(&mut self, actions: &[EditingAction]) -> Outcome {
        let statuses = actions.iter().map(|a| self.apply(a)).collect();
        let chart = self.active_chart();
        Outcome {
            statuses,
            chart: chart.id.clone(),
            version: chart.version,
        }
    }

    /// History as JSON lines.
    pub fn history_log(&self) -> String {
        let mut out = String::new();
        for e in &self.history {
            out.push_str(&serde_json::to_string(e).expect("history entries serialize"));
            out.push('\n');
        }
        out
    }

    /// Rebuilds a session by re-executing a history log.
    pub fn replay(interpreter: Arc<Interpreter>, dataset: Dataset, log: &str) -> Result<Session, EngineError> {
        let mut session = Session::new(interpreter, dataset);
        session.replay_log(log)?;
        Ok(session)
    }

    /// Re-executes a history log on this session.
    pub fn replay_log(&mut self, log: &str) -> Result<(), EngineError> {
        let interpreter = Arc::clone(&self.interpreter);
        for (i, line) in log.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| EngineError::History { line: i + 1, message };
            let entry: HistoryEntry = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            let actions = entry
                .actions
                .iter()
                .map(|a| parse_action(a, &interpreter.catalog, &interpreter.rules))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(e.to_string()))?;
            self.record(&entry.utterance, &actions);
        }
        Ok(())
    }

    pub fn export_spec(&self, chart: &str) -> Result<ChartSpec, EngineError> {
        let c = self.chart(chart).ok_or_else(|| EngineError::UnknownChart(chart.to_string()))?;
        Ok(ChartSpec::build(c, &self.dataset))
    }

    fn chart_index(&self, id: &str) -> Option<usize> {
        self.charts.iter().position(|c| c.id == id)
    }

    fn chart_of(&self, h: &Handle) -> &ChartState {
        self.chart(&h.chart).unwrap_or(&self.charts[self.active])
    }

    fn handle(&self, target: Target) -> Handle {
        Handle::new(&self.active_chart().id, target)
    }

    fn names_of(&self, h: &Handle) -> Vec<String> {
        self.named.iter().filter(|(_, v)| *v == h).map(|(k, _)| k.clone()).collect()
    }

    /// Resolves an object reference against the active chart. `*` yields
    /// nothing and a pronoun yields the most recently edited object.
    pub fn resolve_object(&self, r: &ObjectRef) -> Result<Vec<Handle>, String> {
        match r {
            ObjectRef::Star => Ok(Vec::new()),
            ObjectRef::Pronoun => Ok(self.last_edited.iter().cloned().collect()),
            ObjectRef::Named(n) => self
                .named
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(n))
                .map(|(_, h)| vec![h.clone()])
                .ok_or_else(|| format!("no object is named `{n}`")),
            ObjectRef::Component(k) => self.resolve_component(k),
            ObjectRef::Selector(preds) => {
                let chart = self.active_chart();
                let view = chart.view(&self.dataset);
                let rules = &self.interpreter.rules;
                let found: Vec<Handle> = object::enumerate(chart, &view)
                    .into_iter()
                    .map(|t| self.handle(t))
                    .filter(|h| {
                        let props = object::object_props(chart, &h.target, &view, self.names_of(h));
                        preds.iter().all(|p| props.matches(p, rules))
                    })
                    .collect();
                if found.is_empty() {
                    Err(format!("nothing on the chart matches {r}"))
                } else {
                    Ok(found)
                }
            }
        }
    }

    fn resolve_component(&self, k: &ComponentKind) -> Result<Vec<Handle>, String> {
        let chart = self.active_chart();
        match k {
            ComponentKind::Chart => Ok(vec![self.handle(Target::Chart)]),
            ComponentKind::DataField(f) => match self.dataset.column(f) {
                Some(c) => Ok(vec![self.handle(Target::Field(c.name.clone()))]),
                None => Err(format!("the data has no field `{f}`")),
            },
            _ => {
                let name = k.name().unwrap_or_default();
                if let Some(kind) = AnnotationKind::from_component(name) {
                    let found: Vec<Handle> = chart
                        .annotations
                        .iter()
                        .filter(|a| a.kind == kind)
                        .map(|a| self.handle(Target::Annotation(a.id)))
                        .collect();
                    if found.is_empty() {
                        return Err(format!("the chart has no {name}"));
                    }
                    return Ok(found);
                }
                Ok(vec![self.handle(Target::Component(name.to_string()))])
            }
        }
    }

    fn field_stats(&self, field: &str) -> Option<(f64, f64, f64)> {
        let c = self.dataset.column_index(field)?;
        let vs: Vec<f64> = (0..self.dataset.rows.len()).filter_map(|r| self.dataset.numeric(r, c)).collect();
        if vs.is_empty() {
            return None;
        }
        let min = vs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some((min, combine("mean", &vs), max))
    }

    fn current_number(&self, h: &Handle, role: &str) -> f64 {
        let chart = self.chart_of(h);
        let own = object::props(chart, &h.target);
        let set = match role {
            "size" => own.size,
            "strokeWidth" => own.stroke_width,
            "opacity" => own.opacity,
            "width" => own.width,
            "height" => own.height,
            "offset" => return self.interpreter.rules.relational_deltas.on_top_offset_px,
            _ => None,
        };
        set.unwrap_or_else(|| default_number(chart, &h.target, role, &chart.view(&self.dataset)))
    }

    /// Resolves a parameter value for `role` on `target`.
    pub fn resolve_parameter(&self, target: &Handle, role: &str, value: &ParamValue) -> Result<Resolved, String> {
        let rules = &self.interpreter.rules;
        let keyword = || match value {
            ParamValue::Exact(Scalar::Keyword(k) | Scalar::Text(k)) | ParamValue::Vague(k) => Ok(k.clone()),
            other => Err(format!("`{other}` is not a {role}")),
        };
        match role {
            "color" | "stroke" => {
                let current = || effective_color(self.chart_of(target), &target.target, role == "stroke");
                match value {
                    ParamValue::Exact(Scalar::Color(c)) => Ok(Resolved::Color(*c)),
                    ParamValue::Vague(k) | ParamValue::Exact(Scalar::Keyword(k)) => {
                        rules.color(k).map(Resolved::Color).ok_or_else(|| format!("unknown color `{k}`"))
                    }
                    ParamValue::Relational {
                        anchor: Anchor::SelfRef,
                        relation,
                    } => {
                        let d = &rules.relational_deltas;
                        let factor = match relation.as_str() {
                            "darker" => d.darker,
                            "lighter" => d.lighter,
                            other => return Err(format!("cannot make a color `{other}`")),
                        };
                        Ok(Resolved::Color(current().scale_lightness(factor)))
                    }
                    other => Err(format!("`{other}` is not a color")),
                }
            }
            "size" | "strokeWidth" | "opacity" | "width" | "height" | "offset" => {
                let current = self.current_number(target, role);
                let v = match value {
                    ParamValue::Exact(Scalar::Number { value, unit }) => match unit {
                        Unit::Percent if role == "opacity" => value / 100.0,
                        Unit::Percent => current * value / 100.0,
                        _ => *value,
                    },
                    ParamValue::Vague(k) => {
                        current * rules.measure_factor(k).ok_or_else(|| format!("unknown {role} keyword `{k}`"))?
                    }
                    ParamValue::Relational {
                        anchor: Anchor::SelfRef,
                        relation,
                    } => current * rules.relation_factor(relation).ok_or_else(|| format!("cannot make a {role} `{relation}`"))?,
                    other => return Err(format!("`{other}` is not a {role}")),
                };
                let v = if role == "opacity" { v.clamp(0.0, 1.0) } else { v };
                if !v.is_finite() || v < 0.0 {
                    return Err(format!("{role} must be a non-negative number"));
                }
                Ok(Resolved::Number(v))
            }
            "position" => self.resolve_point(target, value).map(|(x, y)| Resolved::Point(x, y)),
            "range" => {
                let field = match &target.target {
                    Target::Field(f) => Some(f.clone()),
                    _ => self.chart_of(target).field(Channel::Y).map(str::to_string),
                };
                self.resolve_range(field.as_deref(), value).map(|(a, b)| Resolved::Range(a, b))
            }
            "field" => {
                let name = match value {
                    ParamValue::Exact(Scalar::Field(f) | Scalar::Text(f) | Scalar::Keyword(f)) => f,
                    other => return Err(format!("`{other}` is not a field")),
                };
                self.dataset
                    .column(name)
                    .map(|c| Resolved::Field(c.name.clone()))
                    .ok_or_else(|| format!("the data has no field `{name}`"))
            }
            "count" => match value {
                ParamValue::Exact(Scalar::Number { value, .. }) if *value >= 1.0 && value.fract() == 0.0 => {
                    Ok(Resolved::Number(*value))
                }
                other => Err(format!("`{other}` is not a positive count")),
            },
            "visible" => match value {
                ParamValue::Exact(Scalar::Bool(b)) => Ok(Resolved::Bool(*b)),
                other => Err(format!("`{other}` is not true or false")),
            },
            "text" | "name" => match value {
                ParamValue::Exact(Scalar::Text(t) | Scalar::Keyword(t)) => Ok(Resolved::Text(t.clone())),
                other => Err(format!("`{other}` is not text")),
            },
            "value" => match value {
                ParamValue::Exact(Scalar::Number { value, .. }) => Ok(Resolved::Number(*value)),
                ParamValue::Exact(Scalar::Text(t) | Scalar::Keyword(t)) => Ok(Resolved::Text(t.clone())),
                other => Err(format!("`{other}` is not a value")),
            },
            _ => {
                let k = keyword()?;
                match self.interpreter.catalog.parameter_role(role) {
                    Some(r) if !r.options.is_empty() && !r.options.contains(&k) => {
                        Err(format!("`{k}` is not a valid {role}"))
                    }
                    Some(_) => Ok(Resolved::Keyword(k)),
                    None => Err(format!("unknown parameter `{role}`")),
                }
            }
        }
    }

    fn resolve_range(&self, field: Option<&str>, value: &ParamValue) -> Result<(f64, f64), String> {
        match value {
            ParamValue::Exact(Scalar::Range(lo, hi)) => Ok((*lo, *hi)),
            ParamValue::Vague(k) => {
                let (lo, hi) = *self
                    .interpreter
                    .rules
                    .qualitative_ranges
                    .get(k)
                    .ok_or_else(|| format!("unknown range keyword `{k}`"))?;
                let field = field.ok_or("no field to compute the range over")?;
                let (min, mean, max) = self
                    .field_stats(field)
                    .ok_or_else(|| format!("`{field}` has no numeric values"))?;
                let pick = |s: crate::rules::Stat| match s {
                    crate::rules::Stat::Min => min,
                    crate::rules::Stat::Mean => mean,
                    crate::rules::Stat::Max => max,
                };
                Ok((pick(lo), pick(hi)))
            }
            other => Err(format!("`{other}` is not a range")),
        }
    }

    fn resolve_point(&self, target: &Handle, value: &ParamValue) -> Result<(f64, f64), String> {
        let (rect, relation) = match value {
            ParamValue::Relational {
                anchor: Anchor::Object(o),
                relation,
            } => {
                let handles = self.resolve_object(o)?;
                let mut rect: Option<Rect> = None;
                for h in &handles {
                    let chart = self.chart_of(h);
                    if let Some(r) = geometry(chart, &h.target, &chart.view(&self.dataset)) {
                        rect = Some(rect.map_or(r, |u| u.union(&r)));
                    }
                }
                (rect.ok_or_else(|| format!("cannot locate {o}"))?, relation.as_str())
            }
            ParamValue::Relational {
                anchor: Anchor::SelfRef,
                relation,
            } => {
                let chart = self.chart_of(target);
                let r = geometry(chart, &target.target, &chart.view(&self.dataset)).ok_or("the object has no position")?;
                (r, relation.as_str())
            }
            ParamValue::Vague(k) | ParamValue::Exact(Scalar::Keyword(k)) => (PLOT, k.as_str()),
            other => return Err(format!("`{other}` is not a position")),
        };
        let off = self.interpreter.rules.relational_deltas.on_top_offset_px;
        let (cx, cy) = rect.center();
        match relation {
            "top" => Ok((cx, rect.y - off)),
            "bottom" => Ok((cx, rect.bottom() + off)),
            "left" => Ok((rect.x - off, cy)),
            "right" => Ok((rect.right() + off, cy)),
            "center" => Ok((cx, cy)),
            other => Err(format!("unknown position `{other}`")),
        }
    }

    /// Chart type suggested by the current encodings, if any rule applies.
    pub fn recommend_chart_type(&self, chart: &ChartState) -> Option<ChartType> {
        let y = chart.encodings.get(&Channel::Y)?.semantic_type;
        let x = chart.encodings.get(&Channel::X).map(|e| e.semantic_type);
        self.interpreter.rules.first_recommendation(y, x)
    }

    fn apply(&mut self, a: &EditingAction) -> Status {
        let snapshot = (self.charts.clone(), self.active, self.named.clone(), self.last_edited.clone());
        match self.apply_inner(a) {
            Ok(defaults) => {
                self.charts[self.active].version += 1;
                if defaults.is_empty() {
                    Status::Applied
                } else {
                    Status::Recommended { defaults }
                }
            }
            Err(fail) => {
                (self.charts, self.active, self.named, self.last_edited) = snapshot;
                match fail {
                    Fail::Clarify(reason) => Status::ClarificationNeeded { reason },
                    Fail::Unsupported(message) => Status::Unsupported { message },
                }
            }
        }
    }

    fn targets(&self, a: &EditingAction, star: StarDefault) -> Result<Vec<Handle>, Fail> {
        let mut out: Vec<Handle> = Vec::new();
        for o in &a.objects {
            let found = match o {
                ObjectRef::Star | ObjectRef::Pronoun => match (&self.last_edited, star) {
                    (_, StarDefault::Nothing) if o.is_star() => vec![],
                    (_, StarDefault::Chart) => vec![self.handle(Target::Chart)],
                    (Some(h), _) => vec![h.clone()],
                    (None, StarDefault::LastEditedOrChart) => vec![self.handle(Target::Chart)],
                    (None, _) => return clarify("which object do you mean?"),
                },
                other => self.resolve_object(other).map_err(Fail::Clarify)?,
            };
            for h in found {
                if !out.contains(&h) {
                    out.push(h);
                }
            }
        }
        Ok(out)
    }

    fn param<'a>(&self, a: &'a EditingAction, role: &str) -> Option<&'a ParamValue> {
        a.parameter(role).map(|p| &p.value)
    }

    fn resolve(&self, h: &Handle, a: &EditingAction, role: &str) -> Result<Option<Resolved>, Fail> {
        match self.param(a, role) {
            None => Ok(None),
            Some(v) => self.resolve_parameter(h, role, v).map(Some).map_err(Fail::Clarify),
        }
    }

    fn active_handle(&self) -> Handle {
        self.handle(Target::Chart)
    }

    fn chart_mut(&mut self, h: &Handle) -> &mut ChartState {
        let i = self.chart_index(&h.chart).unwrap_or(self.active);
        &mut self.charts[i]
    }

    fn props_mut(&mut self, h: &Handle) -> Result<&mut Props, Fail> {
        let target = h.target.clone();
        object::props_mut(self.chart_mut(h), &target)
            .ok_or_else(|| Fail::Unsupported(format!("{h} has no style properties")))
    }

    fn bound_field(&self, channel: Channel, what: &str) -> Result<String, Fail> {
        match self.active_chart().field(channel) {
            Some(f) => Ok(f.to_string()),
            None => clarify(format!("bind a {} field before {what}", channel.as_str())),
        }
    }

    fn apply_inner(&mut self, a: &EditingAction) -> Step {
        let name = match &a.operation {
            Operation::Star => return clarify("no operation: what should be done with this?"),
            Operation::Op(n) => n.clone(),
        };
        let interpreter = Arc::clone(&self.interpreter);
        let op = interpreter
            .catalog
            .operation(&name)
            .ok_or_else(|| Fail::Unsupported(format!("unknown operation `{name}`")))?;
        let accepted = op.expected_parameter_roles();
        for p in &a.parameters {
            if !accepted.contains(p.role.as_str()) {
                return Err(Fail::Unsupported(format!("`{name}` takes no `{}` parameter", p.role)));
            }
            p.check(&interpreter.catalog, &interpreter.rules).map_err(Fail::Clarify)?;
        }
        let mut defaults = Vec::new();
        match name.as_str() {
            "setColor" | "setStroke" | "setSize" | "setStrokeWidth" | "setOpacity" | "setFontStyle" | "setText"
            | "setVisible" => {
                let role = *accepted.iter().next().expect("styling operations take one parameter");
                let Some(value) = self.param(a, role) else {
                    return clarify(format!("what {role} should it be?"));
                };
                let targets = self.targets(a, StarDefault::LastEdited)?;
                for h in &targets {
                    let v = self.resolve_parameter(h, role, value).map_err(Fail::Clarify)?;
                    let p = self.props_mut(h)?;
                    match (role, v) {
                        ("color", Resolved::Color(c)) => p.color = Some(c),
                        ("stroke", Resolved::Color(c)) => p.stroke = Some(c),
                        ("size", Resolved::Number(n)) => p.size = Some(n),
                        ("strokeWidth", Resolved::Number(n)) => p.stroke_width = Some(n),
                        ("opacity", Resolved::Number(n)) => p.opacity = Some(n),
                        ("font", Resolved::Keyword(k)) => p.font = Some(k),
                        ("text", Resolved::Text(t)) => p.text = Some(t),
                        ("visible", Resolved::Bool(b)) => p.visible = Some(b),
                        (role, v) => return Err(Fail::Unsupported(format!("cannot set {role} to {v:?}"))),
                    }
                }
                self.last_edited = targets.last().cloned();
            }
            "place" => {
                let Some(value) = self.param(a, "position") else {
                    return clarify("where should it go?");
                };
                let targets = self.targets(a, StarDefault::LastEdited)?;
                for h in &targets {
                    let Resolved::Point(x, y) = self.resolve_parameter(h, "position", value).map_err(Fail::Clarify)? else {
                        unreachable!()
                    };
                    self.props_mut(h)?.position = Some((x, y));
                }
                self.last_edited = targets.last().cloned();
            }
            "move" => {
                let targets = self.targets(a, StarDefault::LastEdited)?;
                for h in &targets {
                    let point = if let Some(Resolved::Point(x, y)) = self.resolve(h, a, "position")? {
                        (x, y)
                    } else {
                        let Some(Resolved::Keyword(dir)) = self.resolve(h, a, "direction")? else {
                            return clarify("which way should it move?");
                        };
                        let off = match self.resolve(h, a, "offset")? {
                            Some(Resolved::Number(n)) => n,
                            _ => {
                                let n = self.current_number(h, "offset");
                                if !defaults.iter().any(|d: &String| d.starts_with("offset=")) {
                                    defaults.push(format!("offset={n}px"));
                                }
                                n
                            }
                        };
                        let chart = self.chart_of(h);
                        let (x, y) = object::props(chart, &h.target)
                            .position
                            .or_else(|| geometry(chart, &h.target, &chart.view(&self.dataset)).map(|r| r.center()))
                            .ok_or_else(|| Fail::Unsupported(format!("{h} cannot be moved")))?;
                        match dir.as_str() {
                            "up" => (x, y - off),
                            "down" => (x, y + off),
                            "left" => (x - off, y),
                            _ => (x + off, y),
                        }
                    };
                    self.props_mut(h)?.position = Some(point);
                }
                self.last_edited = targets.last().cloned();
            }
            "resize" => {
                let targets = self.targets(a, StarDefault::LastEditedOrChart)?;
                for h in &targets {
                    let (w, hgt) = if let Some(v) = self.param(a, "size") {
                        let w = self.resolve_parameter(h, "width", v).map_err(Fail::Clarify)?;
                        let hh = self.resolve_parameter(h, "height", v).map_err(Fail::Clarify)?;
                        (Some(w), Some(hh))
                    } else if let Some(v) = self.param(a, "width") {
                        (Some(self.resolve_parameter(h, "width", v).map_err(Fail::Clarify)?), None)
                    } else {
                        return clarify("how big should it be?");
                    };
                    let p = self.props_mut(h)?;
                    if let Some(Resolved::Number(w)) = w {
                        p.width = Some(w);
                    }
                    if let Some(Resolved::Number(hh)) = hgt {
                        p.height = Some(hh);
                    }
                }
                self.last_edited = targets.last().cloned();
            }
            "arrange" => {
                let count = match self.param(a, "count") {
                    Some(v) => match self.resolve_parameter(&self.active_handle(), "count", v).map_err(Fail::Clarify)? {
                        Resolved::Number(n) => n as usize,
                        _ => unreachable!(),
                    },
                    None => {
                        defaults.push(format!("count={DEFAULT_LAYOUT_COLUMNS}"));
                        DEFAULT_LAYOUT_COLUMNS
                    }
                };
                let mut targets = self.targets(a, StarDefault::Nothing)?;
                if targets.is_empty() {
                    targets = self.charts.iter().map(|c| Handle::new(&c.id, Target::Chart)).collect();
                }
                for h in &targets {
                    if h.target != Target::Chart {
                        return clarify(format!("only charts can be arranged, not {h}"));
                    }
                    self.chart_mut(h).layout_columns = Some(count);
                }
            }
            "nameObject" => {
                let Some(value) = self.param(a, "name") else {
                    return clarify("what should it be called?");
                };
                let h = self
                    .targets(a, StarDefault::Chart)?
                    .into_iter()
                    .next()
                    .unwrap_or_else(|| self.active_handle());
                let Resolved::Text(n) = self.resolve_parameter(&h, "name", value).map_err(Fail::Clarify)? else {
                    unreachable!()
                };
                self.named.retain(|k, _| !k.eq_ignore_ascii_case(&n));
                if h.target == Target::Chart {
                    self.chart_mut(&h).name = Some(n.clone());
                }
                self.named.insert(n, h);
            }
            "addChart" => {
                let mut k = self.charts.len() + 1;
                while self.chart(&format!("chart{k}")).is_some() {
                    k += 1;
                }
                self.charts.push(ChartState::new(&format!("chart{k}")));
                self.active = self.charts.len() - 1;
                self.last_edited = Some(self.active_handle());
            }
            "setChartType" => {
                let h = self.active_handle();
                let Some(Resolved::Keyword(k)) = self.resolve(&h, a, "chartType")? else {
                    return clarify("which chart type?");
                };
                let t = ChartType::parse(&k).ok_or_else(|| Fail::Unsupported(format!("unknown chart type `{k}`")))?;
                let chart = self.chart_mut(&h);
                chart.chart_type = Some(t);
                chart.chart_type_recommended = false;
                if t == ChartType::Pictograph && chart.icon.is_none() {
                    chart.icon = Some(DEFAULT_ICON.to_string());
                    defaults.push(format!("icon={DEFAULT_ICON}"));
                }
            }
            "setMarkShape" | "setMarkIcon" => {
                let h = self.active_handle();
                let role = if name == "setMarkShape" { "markShape" } else { "icon" };
                let Some(Resolved::Keyword(k)) = self.resolve(&h, a, role)? else {
                    return clarify(format!("which {role}?"));
                };
                let chart = self.chart_mut(&h);
                if name == "setMarkShape" {
                    chart.mark_shape = Some(k);
                } else {
                    chart.icon = Some(k);
                    chart.chart_type = Some(ChartType::Pictograph);
                    chart.chart_type_recommended = false;
                }
                self.last_edited = Some(self.handle(Target::Component("mark".into())));
            }
            "bindX" | "bindY" | "encodeColor" | "encodeSize" | "facetBy" => {
                let h = self.active_handle();
                let Some(Resolved::Field(f)) = self.resolve(&h, a, "field")? else {
                    return clarify("which field?");
                };
                let semantic_type = self.dataset.column(&f).expect("resolved field exists").semantic_type;
                let channel = match name.as_str() {
                    "bindX" => Channel::X,
                    "bindY" => Channel::Y,
                    "encodeColor" => Channel::Color,
                    "encodeSize" => Channel::Size,
                    _ => {
                        self.chart_mut(&h).facet = Some(f);
                        return Ok(defaults);
                    }
                };
                self.chart_mut(&h).encodings.insert(
                    channel,
                    Encoding {
                        field: f,
                        semantic_type,
                        aggregate: None,
                        time_unit: None,
                        bin: None,
                    },
                );
                let chart = self.active_chart();
                if chart.chart_type.is_none() || chart.chart_type_recommended {
                    if let Some(t) = self.recommend_chart_type(chart) {
                        let chart = self.chart_mut(&h);
                        chart.chart_type = Some(t);
                        chart.chart_type_recommended = true;
                        defaults.push(format!("chartType={t}"));
                    }
                }
            }
            "filter" => {
                let fields: Vec<String> = self
                    .targets(a, StarDefault::Nothing)?
                    .into_iter()
                    .filter_map(|h| match h.target {
                        Target::Field(f) => Some(f),
                        _ => None,
                    })
                    .collect();
                let filter = if let Some(v) = self.param(a, "range") {
                    let field = match fields.first() {
                        Some(f) => f.clone(),
                        None => match v {
                            ParamValue::Vague(_) => self.bound_field(Channel::Y, "filtering")?,
                            _ => {
                                let chart = self.active_chart();
                                match chart.encodings.get(&Channel::X) {
                                    Some(e) if e.semantic_type != SemanticType::Categorical => e.field.clone(),
                                    _ => self.bound_field(Channel::Y, "filtering")?,
                                }
                            }
                        },
                    };
                    let (min, max) = self.resolve_range(Some(&field), v).map_err(Fail::Clarify)?;
                    Filter::Range { field, min, max }
                } else if let Some(v) = self.param(a, "value") {
                    let text = match v {
                        ParamValue::Exact(Scalar::Number { value, .. }) => format!("{value}"),
                        ParamValue::Exact(Scalar::Text(t) | Scalar::Keyword(t)) => t.clone(),
                        other => return clarify(format!("cannot filter by `{other}`")),
                    };
                    self.value_filter(fields.first().map(String::as_str), &text)?
                } else {
                    return clarify("filter by what?");
                };
                let h = self.active_handle();
                self.chart_mut(&h).filters.push(filter);
            }
            "sort" => {
                let h = self.active_handle();
                let sd = interpreter.rules.sort_default.clone();
                let field = match self.resolve(&h, a, "field")? {
                    Some(Resolved::Field(f)) => f,
                    _ => {
                        let channel = Channel::parse(&sd.channel).unwrap_or(Channel::Y);
                        let f = self.bound_field(channel, "sorting")?;
                        defaults.push(format!("field={f}"));
                        f
                    }
                };
                let order = match self.resolve(&h, a, "order")? {
                    Some(Resolved::Keyword(k)) => SortOrder::parse(&k).unwrap_or(sd.order),
                    _ => {
                        defaults.push(format!("order={}", sd.order.as_str()));
                        sd.order
                    }
                };
                self.chart_mut(&h).sort = Some(Sort { field, order });
            }
            "aggregate" | "bin" | "setTimeUnit" => {
                let h = self.active_handle();
                let (role, fallback) = match name.as_str() {
                    "aggregate" => ("aggregate", Channel::Y),
                    "bin" => ("count", Channel::X),
                    _ => ("timeUnit", Channel::X),
                };
                let channel = match self.resolve(&h, a, "field")? {
                    Some(Resolved::Field(f)) => self
                        .active_chart()
                        .channel_of(&f)
                        .ok_or_else(|| Fail::Clarify(format!("`{f}` is not on the chart")))?,
                    _ => {
                        let f = self.bound_field(fallback, "that")?;
                        defaults.push(format!("field={f}"));
                        fallback
                    }
                };
                let value = self.resolve(&h, a, role)?;
                let enc = self.chart_mut(&h).encodings.get_mut(&channel).expect("channel is bound");
                match (role, value) {
                    ("aggregate", Some(Resolved::Keyword(k))) => enc.aggregate = Some(k),
                    ("timeUnit", Some(Resolved::Keyword(k))) => {
                        if !matches!(enc.semantic_type, SemanticType::TemporalDate | SemanticType::TemporalYear) {
                            return clarify(format!("`{}` is not a time field", enc.field));
                        }
                        enc.time_unit = Some(k)
                    }
                    ("count", Some(Resolved::Number(n))) => enc.bin = Some(n as usize),
                    ("count", None) => {
                        enc.bin = Some(DEFAULT_BIN_COUNT);
                        defaults.push(format!("count={DEFAULT_BIN_COUNT}"));
                    }
                    (role, _) => return clarify(format!("which {role}?")),
                }
            }
            "addTrendLine" | "addReferenceLine" | "addReferenceBand" | "addAverageLine" => {
                let h = self.active_handle();
                let field = match self.resolve(&h, a, "field")? {
                    Some(Resolved::Field(f)) => f,
                    _ => self.bound_field(Channel::Y, "adding reference marks")?,
                };
                let (min, mean, max) = self
                    .field_stats(&field)
                    .ok_or_else(|| Fail::Clarify(format!("`{field}` has no numeric values")))?;
                let color = match self.param(a, "color") {
                    Some(v) => match self.resolve_parameter(&h, "color", v).map_err(Fail::Clarify)? {
                        Resolved::Color(c) => Some(c),
                        _ => None,
                    },
                    None => None,
                };
                let (kind, range, value) = match name.as_str() {
                    "addTrendLine" | "addReferenceBand" => {
                        let range = match self.param(a, "range") {
                            Some(v) => self.resolve_range(Some(&field), v).map_err(Fail::Clarify)?,
                            None => {
                                defaults.push(format!("range=[{min}..{max}]"));
                                (min, max)
                            }
                        };
                        let kind = if name == "addTrendLine" {
                            AnnotationKind::TrendLine
                        } else {
                            AnnotationKind::ReferenceBand
                        };
                        (kind, Some(range), None)
                    }
                    "addReferenceLine" => {
                        let value = match self.param(a, "value") {
                            Some(ParamValue::Exact(Scalar::Number { value, .. })) => *value,
                            Some(ParamValue::Exact(Scalar::Text(t))) => {
                                parse_number(t).ok_or_else(|| Fail::Clarify(format!("`{t}` is not a number")))?
                            }
                            Some(other) => return clarify(format!("`{other}` is not a number")),
                            None => {
                                defaults.push(format!("value={mean}"));
                                mean
                            }
                        };
                        (AnnotationKind::ReferenceLine, None, Some(value))
                    }
                    _ => (AnnotationKind::AverageLine, None, Some(mean)),
                };
                let id = self.add_annotation(Annotation {
                    id: 0,
                    kind,
                    field: Some(field),
                    range,
                    value,
                    target: None,
                    props: Props {
                        color,
                        ..Props::default()
                    },
                });
                self.last_edited = Some(self.handle(Target::Annotation(id)));
            }
            "addLabel" | "addAnnotation" => {
                let targets = self.targets(a, StarDefault::Nothing)?;
                let mut keys: Vec<Option<String>> = Vec::new();
                for h in &targets {
                    match &h.target {
                        Target::Datum(k) => keys.push(Some(k.clone())),
                        _ => return clarify(format!("{h} is not a data mark")),
                    }
                }
                if keys.is_empty() {
                    keys.push(None);
                }
                let text = match self.param(a, "text") {
                    Some(v) => match self.resolve_parameter(&self.active_handle(), "text", v).map_err(Fail::Clarify)? {
                        Resolved::Text(t) => Some(t),
                        _ => None,
                    },
                    None if name == "addAnnotation" => return clarify("what should the annotation say?"),
                    None => None,
                };
                let kind = if name == "addLabel" {
                    AnnotationKind::Label
                } else {
                    AnnotationKind::AnnotationText
                };
                for key in keys {
                    let id = self.add_annotation(Annotation {
                        id: 0,
                        kind,
                        field: None,
                        range: None,
                        value: None,
                        target: key,
                        props: Props {
                            text: text.clone(),
                            ..Props::default()
                        },
                    });
                    let h = self.handle(Target::Annotation(id));
                    if let Some(Resolved::Point(x, y)) = self.resolve(&h, a, "position")? {
                        self.props_mut(&h)?.position = Some((x, y));
                    }
                    self.last_edited = Some(h);
                }
            }
            "removeObject" => {
                let targets = self.targets(a, StarDefault::LastEdited)?;
                for h in &targets {
                    match &h.target {
                        Target::Annotation(id) => {
                            let id = *id;
                            self.chart_mut(h).annotations.retain(|x| x.id != id);
                            self.named.retain(|_, v| v != h);
                            if self.last_edited.as_ref() == Some(h) {
                                self.last_edited = None;
                            }
                        }
                        Target::Component(_) => self.props_mut(h)?.visible = Some(false),
                        _ => return Err(Fail::Unsupported(format!("{h} cannot be removed; try a filter"))),
                    }
                }
            }
            other => return Err(Fail::Unsupported(format!("`{other}` is not supported"))),
        }
        Ok(defaults)
    }

    fn add_annotation(&mut self, mut a: Annotation) -> usize {
        let chart = &mut self.charts[self.active];
        chart.next_annotation += 1;
        a.id = chart.next_annotation;
        chart.annotations.push(a);
        chart.next_annotation
    }

    /// Builds an equality filter, finding the column that holds `text`
    /// when none is given.
    fn value_filter(&self, field: Option<&str>, text: &str) -> Result<Filter, Fail> {
        let number = parse_number(text);
        let holds = |c: usize| -> Option<String> {
            let col = &self.dataset.columns[c];
            if col.semantic_type == SemanticType::Categorical {
                col.distinct_values.iter().find(|v| v.eq_ignore_ascii_case(text)).cloned()
            } else {
                let n = number?;
                (0..self.dataset.rows.len())
                    .any(|r| self.dataset.numeric(r, c) == Some(n))
                    .then(|| text.to_string())
            }
        };
        let column = match field {
            Some(f) => self.dataset.column_index(f),
            None => (0..self.dataset.columns.len()).find(|&c| holds(c).is_some()),
        }
        .ok_or_else(|| Fail::Clarify(format!("no field contains `{text}`")))?;
        let col = &self.dataset.columns[column];
        match (col.semantic_type, number) {
            (SemanticType::Categorical, _) | (_, None) => Ok(Filter::Equals {
                field: col.name.clone(),
                value: holds(column).unwrap_or_else(|| text.to_string()),
            }),
            (_, Some(n)) => Ok(Filter::Range {
                field: col.name.clone(),
                min: n,
                max: n,
            }),
        }
    }
}
