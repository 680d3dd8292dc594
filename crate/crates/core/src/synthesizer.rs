//! Stage 3: assembles editing actions from intents and labeled entities.
//!
//! Each intent, in utterance order, takes every unconsumed entity whose role
//! its operation accepts. Repeated parameters of one role split the action
//! into one action per parameter; any other parameter goes to the split
//! action whose repeated parameter is nearest. Leftover entities refine the
//! closest object selector or become orphan actions. Actions are finally ranked by operation category
//! and then by position in the utterance.

use serde::Serialize;

use crate::abstractor::{AbstractedUtterance, Placeholder};
use crate::action::{
    Anchor, ComponentKind, EditingAction, ObjectRef, Operation, ParamValue, Parameter, Predicate, PredicateValue,
    Scalar, Span, Unit,
};
use crate::catalog::{Catalog, RoleClass};
use crate::rules::{Rgb, RuleTable};
use crate::tagger::TaggedUtterance;
use crate::text::{normalize_tokens, parse_number, Date};

/// Rank given to orphan actions, after every category.
pub const ORPHAN_RANK: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityCandidate {
    pub role: String,
    /// Text as typed.
    pub text: String,
    pub span: Span,
    pub consumed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum SynthesisRule {
    /// Entities matched to an intent by type.
    Matched,
    /// One of several actions split from one intent.
    Duplicated,
    /// A leftover entity with no home.
    Orphan,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionTrace {
    pub intent: Option<String>,
    pub trigger: Option<Span>,
    pub rule: SynthesisRule,
    /// Candidate indices used as objects.
    pub objects: Vec<usize>,
    /// Candidate indices used as parameters.
    pub parameters: Vec<usize>,
    /// Candidate indices folded into this action's object selectors.
    pub folded: Vec<usize>,
    /// Defaults applied, e.g. `objects=*`.
    pub defaults: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Disposition {
    Consumed { intent: String },
    Folded { action: usize },
    Orphan { action: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateTrace {
    pub candidate: EntityCandidate,
    pub disposition: Disposition,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SynthesisTrace {
    pub actions: Vec<ActionTrace>,
    pub candidates: Vec<CandidateTrace>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ActionSequence {
    pub actions: Vec<EditingAction>,
    pub trace: SynthesisTrace,
}

impl ActionSequence {
    pub fn canonical(&self) -> Vec<String> {
        self.actions.iter().map(EditingAction::canonical).collect()
    }
}

// An object assembled from one or more candidates.
#[derive(Debug, Clone)]
struct ObjectGroup {
    object: ObjectRef,
    span: Span,
    candidates: Vec<usize>,
}

#[derive(Debug, Clone)]
struct Pending {
    action: EditingAction,
    trace: ActionTrace,
    /// object groups by id, parallel to `action.objects` when built from candidates
    groups: Vec<Option<usize>>,
    rank: usize,
}

pub struct Synthesizer<'a> {
    catalog: &'a Catalog,
    rules: &'a RuleTable,
}

impl<'a> Synthesizer<'a> {
    pub fn new(catalog: &'a Catalog, rules: &'a RuleTable) -> Synthesizer<'a> {
        Synthesizer { catalog, rules }
    }

    pub fn builtin() -> Synthesizer<'static> {
        Synthesizer::new(Catalog::builtin(), RuleTable::builtin())
    }

    pub fn synthesize(&self, tagged: &TaggedUtterance) -> ActionSequence {
        let ctx = Ctx::new(&tagged.abstracted, self.rules);
        let mut cands: Vec<EntityCandidate> = tagged
            .chunks()
            .into_iter()
            .map(|c| EntityCandidate {
                text: tagged.abstracted.surface(c.span).to_string(),
                role: c.role,
                span: c.span,
                consumed: false,
            })
            .collect();
        let mut dispositions: Vec<Option<Disposition>> = vec![None; cands.len()];
        let mut groups: Vec<ObjectGroup> = Vec::new();
        let mut pending: Vec<Pending> = Vec::new();

        for intent in tagged.intents.iter() {
            let Some(op) = self.catalog.operation(&intent.name) else { continue };
            let mut objects = Vec::new();
            let mut params: Vec<(usize, String)> = Vec::new();
            for (id, c) in cands.iter_mut().enumerate() {
                if c.consumed {
                    continue;
                }
                if let Some(p) = op.parameter_for(&c.role) {
                    params.push((id, p.to_string()));
                } else if op.accepts_object(&c.role) {
                    objects.push(id);
                } else {
                    continue;
                }
                c.consumed = true;
                dispositions[id] = Some(Disposition::Consumed {
                    intent: intent.name.clone(),
                });
            }
            let first_group = groups.len();
            groups.extend(self.assemble_objects(&ctx, &cands, &objects));
            let group_ids: Vec<usize> = (first_group..groups.len()).collect();
            let rank = op.category.rank();

            // split on repeated parameter roles
            let mut roles: Vec<(String, Vec<usize>)> = Vec::new();
            for (id, role) in &params {
                match roles.iter_mut().find(|(r, _)| r == role) {
                    Some((_, ids)) => ids.push(*id),
                    None => roles.push((role.clone(), vec![*id])),
                }
            }
            let k = roles.iter().map(|(_, ids)| ids.len()).max().unwrap_or(0);
            let assignment: Vec<(Vec<usize>, Vec<usize>)> = if k <= 1 {
                vec![(group_ids.clone(), params.iter().map(|p| p.0).collect())]
            } else {
                let anchors: Vec<usize> = roles.iter().find(|(_, ids)| ids.len() == k).unwrap().1.clone();
                let nearest_anchor = |at: usize| {
                    (0..k)
                        .min_by_key(|&i| (cands[anchors[i]].span.start.abs_diff(at), cands[anchors[i]].span.start))
                        .unwrap()
                };
                let mut per: Vec<(Vec<usize>, Vec<usize>)> = vec![(Vec::new(), Vec::new()); k];
                for (_, ids) in &roles {
                    for (j, &id) in ids.iter().enumerate() {
                        let i = if ids.len() == k { j } else { nearest_anchor(cands[id].span.start) };
                        per[i].1.push(id);
                    }
                }
                if group_ids.len() == k {
                    for (i, g) in group_ids.iter().enumerate() {
                        per[i].0.push(*g);
                    }
                } else {
                    let mut taken = vec![false; group_ids.len()];
                    for (i, &a) in anchors.iter().enumerate() {
                        let at = cands[a].span.start;
                        let preceding = group_ids
                            .iter()
                            .enumerate()
                            .filter(|(_, g)| groups[**g].span.end <= at)
                            .max_by_key(|(_, g)| groups[**g].span.start);
                        if let Some((gi, g)) = preceding {
                            per[i].0.push(*g);
                            taken[gi] = true;
                        }
                    }
                    for (gi, g) in group_ids.iter().enumerate() {
                        if taken[gi] {
                            continue;
                        }
                        let nearest = nearest_anchor(groups[*g].span.start);
                        per[nearest].0.push(*g);
                        per[nearest].0.sort_by_key(|g| groups[*g].span.start);
                    }
                }
                per
            };

            for (objs, ps) in assignment {
                let mut defaults = Vec::new();
                let (objects, object_groups): (Vec<ObjectRef>, Vec<Option<usize>>) = if objs.is_empty() {
                    if op.implied_objects.is_empty() {
                        defaults.push("objects=*".to_string());
                        (vec![ObjectRef::Star], vec![None])
                    } else {
                        defaults.push("objects=implied".to_string());
                        op.implied_objects.iter().map(|k| (ObjectRef::Component(k.clone()), None)).unzip()
                    }
                } else {
                    objs.iter().map(|g| (groups[*g].object.clone(), Some(*g))).unzip()
                };
                let parameters: Vec<Parameter> = ps
                    .iter()
                    .map(|id| {
                        let role = &params.iter().find(|p| p.0 == *id).unwrap().1;
                        Parameter::new(role, ctx.param_value(&cands[*id]))
                    })
                    .collect();
                if parameters.is_empty() {
                    defaults.push("parameters=*".to_string());
                }
                let mut span: Option<Span> = None;
                for s in objs.iter().map(|g| groups[*g].span).chain(ps.iter().map(|id| cands[*id].span)) {
                    span = Some(span.map_or(s, |h| h.hull(&s)));
                }
                let span = span.or(intent.span).unwrap_or_default();
                let object_cands = objs.iter().flat_map(|g| groups[*g].candidates.clone()).collect();
                pending.push(Pending {
                    action: EditingAction::op(&op.name, objects, parameters).with_span(span),
                    trace: ActionTrace {
                        intent: Some(intent.name.clone()),
                        trigger: intent.span,
                        rule: if k <= 1 { SynthesisRule::Matched } else { SynthesisRule::Duplicated },
                        objects: object_cands,
                        parameters: ps,
                        folded: Vec::new(),
                        defaults,
                    },
                    groups: object_groups,
                    rank,
                });
            }
        }

        let intent_actions = pending.len();
        for id in 0..cands.len() {
            if cands[id].consumed {
                continue;
            }
            cands[id].consumed = true;
            let c = &cands[id];
            let start = c.span.start;

            // (a) a selectable property of the closest object
            let property = self.catalog.entity_role(&c.role).and_then(|r| r.selector_property.clone());
            if let (Some(property), Some(value)) = (property, ctx.predicate_value(c)) {
                let target = pending[..intent_actions]
                    .iter()
                    .flat_map(|p| p.groups.iter().flatten())
                    .copied()
                    .filter(|g| foldable(&groups[*g].object))
                    .min_by_key(|g| (groups[*g].span.start.abs_diff(start), groups[*g].span.start));
                if let Some(g) = target {
                    let refined = fold(&groups[g].object, Predicate::new(&property, value));
                    groups[g].object = refined.clone();
                    groups[g].span = groups[g].span.hull(&c.span);
                    let mut first = None;
                    for (pi, p) in pending.iter_mut().enumerate() {
                        for (slot, pg) in p.groups.iter().enumerate() {
                            if *pg == Some(g) {
                                p.action.objects[slot] = refined.clone();
                                first.get_or_insert(pi);
                            }
                        }
                    }
                    let first = first.unwrap();
                    pending[first].trace.folded.push(id);
                    dispositions[id] = Some(Disposition::Folded { action: first });
                    continue;
                }
            }

            // (b) an orphan action; "the Ford bar" stays one selector
            if c.role == "value" {
                let mut run = vec![id];
                for next in id + 1..cands.len() {
                    if cands[next].consumed || !matches!(cands[next].role.as_str(), "value" | "shape") {
                        break;
                    }
                    run.push(next);
                    if cands[next].role == "shape" {
                        break;
                    }
                }
                let grouped = self.assemble_objects(&ctx, &cands, &run);
                if grouped.first().is_some_and(|g| g.candidates.len() > 1) {
                    for g in grouped {
                        let index = pending.len();
                        for &member in &g.candidates {
                            cands[member].consumed = true;
                            dispositions[member] = Some(Disposition::Orphan { action: index });
                        }
                        pending.push(Pending {
                            action: EditingAction::new(Operation::Star, vec![g.object.clone()], vec![]).with_span(g.span),
                            trace: ActionTrace {
                                intent: None,
                                trigger: None,
                                rule: SynthesisRule::Orphan,
                                objects: g.candidates.clone(),
                                parameters: Vec::new(),
                                folded: Vec::new(),
                                defaults: vec!["operation=*".to_string()],
                            },
                            groups: vec![None],
                            rank: ORPHAN_RANK,
                        });
                    }
                    continue;
                }
            }
            let c = &cands[id];
            let index = pending.len();
            let entity = self.catalog.entity_role(&c.role);
            let as_object = entity.map_or(false, |r| r.class == RoleClass::Object);
            let (objects, parameters, trace_objects, trace_params) = if as_object {
                (vec![ctx.object_ref(c)], vec![], vec![id], vec![])
            } else {
                let role = entity.and_then(|r| r.parameter.clone()).unwrap_or_else(|| c.role.clone());
                (vec![], vec![Parameter::new(&role, ctx.param_value(c))], vec![], vec![id])
            };
            pending.push(Pending {
                action: EditingAction::new(Operation::Star, objects, parameters).with_span(c.span),
                trace: ActionTrace {
                    intent: None,
                    trigger: None,
                    rule: SynthesisRule::Orphan,
                    objects: trace_objects,
                    parameters: trace_params,
                    folded: Vec::new(),
                    defaults: vec!["operation=*".to_string()],
                },
                groups: vec![None],
                rank: ORPHAN_RANK,
            });
            dispositions[id] = Some(Disposition::Orphan { action: index });
        }

        // rank by category, then by span start; stable
        let mut order: Vec<usize> = (0..pending.len()).collect();
        order.sort_by_key(|&i| (pending[i].rank, pending[i].action.source_span.start));
        let mut new_index = vec![0; pending.len()];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let candidates = cands
            .into_iter()
            .zip(dispositions)
            .map(|(candidate, d)| CandidateTrace {
                candidate,
                disposition: match d.expect("every candidate has a disposition") {
                    Disposition::Folded { action } => Disposition::Folded {
                        action: new_index[action],
                    },
                    Disposition::Orphan { action } => Disposition::Orphan {
                        action: new_index[action],
                    },
                    d => d,
                },
            })
            .collect();
        let mut actions = Vec::with_capacity(order.len());
        let mut traces = Vec::with_capacity(order.len());
        for i in order {
            actions.push(pending[i].action.clone());
            traces.push(pending[i].trace.clone());
        }
        ActionSequence {
            actions,
            trace: SynthesisTrace {
                actions: traces,
                candidates,
            },
        }
    }

    /// Turns object candidates into object references. A run of values
    /// joined by conjunctions directly before a shape yields one selector
    /// per value, each carrying the shape ("china and US bar").
    fn assemble_objects(&self, ctx: &Ctx, cands: &[EntityCandidate], ids: &[usize]) -> Vec<ObjectGroup> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < ids.len() {
            let c = &cands[ids[i]];
            if c.role == "value" {
                let mut run = vec![ids[i]];
                let mut j = i + 1;
                while j < ids.len()
                    && cands[ids[j]].role == "value"
                    && ctx.only_conjunctions(cands[*run.last().unwrap()].span.end, cands[ids[j]].span.start)
                {
                    run.push(ids[j]);
                    j += 1;
                }
                let shape = (j < ids.len()
                    && cands[ids[j]].role == "shape"
                    && cands[ids[j]].span.start == cands[*run.last().unwrap()].span.end)
                    .then(|| ids[j]);
                if let Some(s) = shape {
                    let shape_preds = ctx.selector_predicates(cands[s].span);
                    for v in &run {
                        let mut preds = vec![Predicate::new("value", PredicateValue::Literal(ctx.value_text(&cands[*v])))];
                        preds.extend(shape_preds.iter().cloned());
                        out.push(ObjectGroup {
                            object: ObjectRef::selector(preds).unwrap(),
                            span: cands[*v].span.hull(&cands[s].span),
                            candidates: vec![*v, s],
                        });
                    }
                    i = j + 1;
                } else {
                    out.push(ObjectGroup {
                        object: ctx.object_ref(c),
                        span: c.span,
                        candidates: vec![ids[i]],
                    });
                    i += 1;
                }
                continue;
            }
            out.push(ObjectGroup {
                object: ctx.object_ref(c),
                span: c.span,
                candidates: vec![ids[i]],
            });
            i += 1;
        }
        out
    }
}

fn foldable(o: &ObjectRef) -> bool {
    matches!(o, ObjectRef::Component(_) | ObjectRef::Named(_) | ObjectRef::Selector(_))
}

fn fold(o: &ObjectRef, p: Predicate) -> ObjectRef {
    let mut preds = match o {
        ObjectRef::Selector(ps) => ps.clone(),
        ObjectRef::Named(n) => vec![Predicate::new("name", PredicateValue::Literal(n.clone()))],
        ObjectRef::Component(ComponentKind::DataField(f)) => {
            vec![Predicate::new("field", PredicateValue::Literal(f.clone()))]
        }
        ObjectRef::Component(k) => vec![Predicate::new("component", PredicateValue::keyword(k.name().unwrap()))],
        ObjectRef::Star | ObjectRef::Pronoun => vec![],
    };
    preds.push(p);
    ObjectRef::selector(preds).unwrap()
}

/// Reads entity chunks back into values using the rule-table lexicons.
struct Ctx<'u> {
    utterance: &'u AbstractedUtterance,
    low: Vec<String>,
    rules: &'u RuleTable,
}

impl<'u> Ctx<'u> {
    fn new(utterance: &'u AbstractedUtterance, rules: &'u RuleTable) -> Ctx<'u> {
        Ctx {
            utterance,
            low: utterance.abstracted_tokens.iter().map(|t| t.to_lowercase()).collect(),
            rules,
        }
    }

    fn words(&self, span: Span) -> &[String] {
        &self.low[span.start.min(self.low.len())..span.end.min(self.low.len())]
    }

    fn phrase(&self, span: Span) -> String {
        normalize_tokens(self.words(span))
    }

    fn only_conjunctions(&self, from: usize, to: usize) -> bool {
        from < to && self.low[from..to].iter().all(|t| self.rules.lexicon.conjunctions.contains(t))
    }

    fn binding(&self, index: usize) -> Option<&crate::abstractor::Binding> {
        self.utterance.binding_at(index)
    }

    /// Cell values keep the typed text unless the match was inexact.
    fn value_text(&self, c: &EntityCandidate) -> String {
        match self.binding(c.span.start) {
            Some(b) if c.span.len() == 1 && b.match_score < 1.0 => b.canonical.clone(),
            _ => c.text.clone(),
        }
    }

    fn field_name(&self, c: &EntityCandidate) -> String {
        match self.binding(c.span.start) {
            Some(b) if c.span.len() == 1 && b.placeholder == Placeholder::Column => b.canonical.clone(),
            _ => c.text.clone(),
        }
    }

    fn number_at(&self, index: usize) -> Option<f64> {
        let b = self.binding(index)?;
        match b.placeholder {
            Placeholder::Date => Date::parse(&b.canonical).map(|d| d.ordinal() as f64),
            _ => parse_number(&b.canonical),
        }
    }

    fn param_value(&self, c: &EntityCandidate) -> ParamValue {
        self.try_param_value(c)
            .unwrap_or_else(|| ParamValue::Exact(Scalar::Text(c.text.clone())))
    }

    fn try_param_value(&self, c: &EntityCandidate) -> Option<ParamValue> {
        let lx = &self.rules.lexicon;
        let phrase = self.phrase(c.span);
        let keyword = |map: &std::collections::BTreeMap<String, String>| {
            map.get(&phrase).map(|k| ParamValue::Exact(Scalar::Keyword(k.clone())))
        };
        match c.role.as_str() {
            "color" | "strokeColor" => self.color_value(c.span),
            "extent" => self.extent_value(c.span),
            "measure" => {
                let value = self.number_at(c.span.start)?;
                let unit = match lx.units.get(self.words(c.span).get(1)?)?.as_str() {
                    "percent" => Unit::Percent,
                    _ => Unit::Px,
                };
                Some(ParamValue::Exact(Scalar::Number { value, unit }))
            }
            "chartType" => keyword(&lx.chart_types),
            "xField" | "yField" | "field" => Some(ParamValue::Exact(Scalar::Field(self.field_name(c)))),
            "icon" => {
                let head = self.words(c.span).first()?;
                lx.icons.names.get(head).map(|k| ParamValue::Exact(Scalar::Keyword(k.clone())))
            }
            "text" | "objectName" => Some(ParamValue::Exact(Scalar::Text(c.text.clone()))),
            "value" => Some(ParamValue::Exact(Scalar::Text(self.value_text(c)))),
            "range" => {
                if let Some(q) = lx.qualitative.get(&phrase) {
                    return Some(ParamValue::Vague(q.clone()));
                }
                let lo = self.number_at(c.span.start)?;
                let hi = self.number_at(c.span.end.checked_sub(1)?)?;
                Some(ParamValue::Exact(Scalar::Range(lo.min(hi), lo.max(hi))))
            }
            "order" => keyword(&lx.orders),
            "aggregate" => keyword(&lx.aggregates),
            "timeUnit" => keyword(&lx.time_units),
            "font" => keyword(&lx.fonts),
            "direction" => keyword(&lx.move_directions),
            "count" => {
                let n = self.number_at(c.span.start)?;
                (n >= 0.0 && n.fract() == 0.0).then_some(ParamValue::Exact(Scalar::Number {
                    value: n,
                    unit: Unit::Count,
                }))
            }
            "visibility" => {
                let v = lx
                    .visibility
                    .get(&phrase)
                    .copied()
                    .or_else(|| lx.visibility_verbs.contains(&phrase).then_some(true))?;
                Some(ParamValue::Exact(Scalar::Bool(v)))
            }
            "position" => self.position_value(c.span),
            "valueLiteral" => {
                let b = self.binding(c.span.start)?;
                match b.placeholder {
                    Placeholder::Date => Some(ParamValue::Exact(Scalar::Text(b.canonical.clone()))),
                    _ => Some(ParamValue::Exact(Scalar::Number {
                        value: parse_number(&b.canonical)?,
                        unit: Unit::None,
                    })),
                }
            }
            "shape" => {
                let preds = self.selector_predicates(c.span);
                preds
                    .iter()
                    .find(|p| p.property == "shape")
                    .map(|p| ParamValue::Exact(Scalar::Keyword(p.value.text().to_string())))
            }
            _ => None,
        }
    }

    fn color_value(&self, span: Span) -> Option<ParamValue> {
        let lx = &self.rules.lexicon;
        let words = self.words(span);
        if let Some(c) = words.first().and_then(|w| Rgb::parse_hex(w)) {
            return Some(ParamValue::Exact(Scalar::Color(c)));
        }
        if let Some(rel) = words.last().and_then(|w| lx.relations.get(w)) {
            return Some(ParamValue::Relational {
                anchor: Anchor::SelfRef,
                relation: rel.relation.clone(),
            });
        }
        let name = self.phrase(span);
        self.rules.color(&name).map(|_| ParamValue::Vague(name))
    }

    fn extent_value(&self, span: Span) -> Option<ParamValue> {
        let lx = &self.rules.lexicon;
        let words = self.words(span);
        let last = words.last()?;
        if let Some(rel) = lx.relations.get(last) {
            return Some(ParamValue::Relational {
                anchor: Anchor::SelfRef,
                relation: rel.relation.clone(),
            });
        }
        let magnitude = &lx.magnitudes.get(last)?.keyword;
        if words.len() == 1 {
            return Some(ParamValue::Vague(magnitude.clone()));
        }
        let adverb = normalize_tokens(&words[..words.len() - 1]);
        let extent = lx.extent_adverbs.get(&adverb)?;
        Some(ParamValue::Vague(format!("{extent} {magnitude}")))
    }

    fn position_value(&self, span: Span) -> Option<ParamValue> {
        let lx = &self.rules.lexicon;
        let words = self.words(span);
        let relation = lx.positions.get(words.first()?)?.clone();
        let mut k = span.start + 1;
        while k < span.end && (lx.relation_links.contains(&self.low[k]) || lx.determiners.contains(&self.low[k])) {
            k += 1;
        }
        let anchor = if k >= span.end {
            ObjectRef::Component(ComponentKind::PlotArea)
        } else {
            self.anchor_object(Span::new(k, span.end))
        };
        Some(ParamValue::Relational {
            anchor: Anchor::Object(anchor),
            relation,
        })
    }

    fn anchor_object(&self, span: Span) -> ObjectRef {
        let phrase = self.phrase(span);
        if let Some(kind) = self.rules.lexicon.components.get(&phrase).and_then(|k| ComponentKind::from_name(k)) {
            return ObjectRef::Component(kind);
        }
        if span.len() == 1 && crate::tagger::reference_is_name_like(&self.utterance.abstracted_tokens[span.start]) {
            return ObjectRef::Named(self.utterance.surface(span).to_string());
        }
        ObjectRef::selector(self.selector_predicates(span)).unwrap()
    }

    fn object_ref(&self, c: &EntityCandidate) -> ObjectRef {
        let phrase = self.phrase(c.span);
        match c.role.as_str() {
            "component" => match self.rules.lexicon.components.get(&phrase).and_then(|k| ComponentKind::from_name(k)) {
                Some(kind) => ObjectRef::Component(kind),
                None => ObjectRef::selector(vec![Predicate::new("component", PredicateValue::keyword(&phrase))]).unwrap(),
            },
            "shape" => ObjectRef::selector(self.selector_predicates(c.span)).unwrap(),
            "value" => {
                ObjectRef::selector(vec![Predicate::new("value", PredicateValue::Literal(self.value_text(c)))]).unwrap()
            }
            "objectName" => ObjectRef::Named(c.text.clone()),
            "field" | "xField" | "yField" => ObjectRef::Component(ComponentKind::DataField(self.field_name(c))),
            _ => ObjectRef::selector(vec![Predicate::new("*", PredicateValue::Literal(c.text.clone()))]).unwrap(),
        }
    }

    /// Predicate value of an entity folded into a selector.
    fn predicate_value(&self, c: &EntityCandidate) -> Option<PredicateValue> {
        match c.role.as_str() {
            "color" | "strokeColor" => match self.color_value(c.span)? {
                ParamValue::Vague(name) => Some(PredicateValue::keyword(&name)),
                ParamValue::Exact(Scalar::Color(rgb)) => Some(PredicateValue::keyword(&rgb.hex())),
                _ => None,
            },
            "value" => Some(PredicateValue::Literal(self.value_text(c))),
            "objectName" => Some(PredicateValue::Literal(c.text.clone())),
            "shape" => match self.try_param_value(c)? {
                ParamValue::Exact(Scalar::Keyword(k)) => Some(PredicateValue::keyword(&k)),
                _ => None,
            },
            "component" => {
                let kind = self.rules.lexicon.components.get(&self.phrase(c.span))?;
                Some(PredicateValue::keyword(kind))
            }
            _ => Some(PredicateValue::Literal(c.text.clone())),
        }
    }

    /// Reads "the red abc bar" into shape, color and wildcard predicates.
    fn selector_predicates(&self, span: Span) -> Vec<Predicate> {
        let lx = &self.rules.lexicon;
        let mut preds = Vec::new();
        let mut unknown: Vec<usize> = Vec::new();
        let flush = |unknown: &mut Vec<usize>, preds: &mut Vec<Predicate>| {
            if let (Some(&a), Some(&b)) = (unknown.first(), unknown.last()) {
                let text = self.utterance.surface(Span::new(a, b + 1)).to_string();
                preds.push(Predicate::new("*", PredicateValue::Literal(text)));
            }
            unknown.clear();
        };
        let longest = |k: usize, map: &dyn Fn(&str) -> Option<String>| -> Option<(usize, String)> {
            (1..=span.end - k).rev().find_map(|len| map(&self.phrase(Span::new(k, k + len))).map(|v| (len, v)))
        };
        let mut k = span.start;
        while k < span.end {
            let tok = &self.low[k];
            if let Some((len, shape)) = longest(k, &|p| lx.shapes.get(p).cloned()) {
                flush(&mut unknown, &mut preds);
                preds.push(Predicate::new("shape", PredicateValue::keyword(&shape)));
                k += len;
            } else if let Some((len, color)) = longest(k, &|p| self.rules.color(p).map(|_| p.to_string())) {
                flush(&mut unknown, &mut preds);
                preds.push(Predicate::new("color", PredicateValue::keyword(&color)));
                k += len;
            } else if let Some((len, comp)) = longest(k, &|p| lx.components.get(p).cloned()) {
                flush(&mut unknown, &mut preds);
                preds.push(Predicate::new("component", PredicateValue::keyword(&comp)));
                k += len;
            } else if tok == Placeholder::Value.token() {
                flush(&mut unknown, &mut preds);
                let c = EntityCandidate {
                    role: "value".into(),
                    text: self.utterance.surface(Span::new(k, k + 1)).to_string(),
                    span: Span::new(k, k + 1),
                    consumed: true,
                };
                preds.push(Predicate::new("value", PredicateValue::Literal(self.value_text(&c))));
                k += 1;
            } else if lx.determiners.contains(tok) || lx.conjunctions.contains(tok) || lx.relation_links.contains(tok) {
                flush(&mut unknown, &mut preds);
                k += 1;
            } else {
                unknown.push(k);
                k += 1;
            }
        }
        flush(&mut unknown, &mut preds);
        if preds.is_empty() {
            preds.push(Predicate::new("*", PredicateValue::Literal(self.utterance.surface(span).to_string())));
        }
        preds
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstractor::abstract_utterance;
    use crate::dataset::{Dataset, EntityIndex};
    use crate::tagger::{IntentSet, ReferenceTagger, Tagger};

    fn run(text: &str) -> Vec<String> {
        let ds = Dataset::from_csv(
            "CarSales",
            b"Brand,Sales,Year,Country\nFord,120.5,2010,China\nHonda,98,2011,US\nToyota,3,2012,US\n",
        )
        .unwrap();
        let a = abstract_utterance(text, &ds.entity_index(10_000));
        let t = ReferenceTagger::builtin().tag(&a);
        Synthesizer::builtin().synthesize(&t).canonical()
    }

    #[test]
    fn golden_parses() {
        assert_eq!(run("turn the red line blue"), vec!["{setColor, [shape=line, color=red], color=blue}"]);
        assert_eq!(run("add black stroke to the abc bar"), vec!["{setStroke, [shape=bar, *='abc'], stroke=black}"]);
        assert_eq!(run("make it really large"), vec!["{setSize, *, size=very.large}"]);
        assert_eq!(run("make the title darker"), vec!["{setColor, title, color=self[darker]}"]);
        assert_eq!(
            run("place the legend on the right of the plot area"),
            vec!["{place, legend, position=plot[right]}"]
        );
        assert_eq!(run("Sales by year"), vec!["{bindY, yAxis, field=Sales}", "{bindX, xAxis, field=Year}"]);
    }

    #[test]
    fn coordinated_values_pair_with_parameters() {
        assert_eq!(
            run("change color of china and US bar to green and blue"),
            vec![
                "{setColor, [value='china', shape=bar], color=green}",
                "{setColor, [value='US', shape=bar], color=blue}"
            ]
        );
    }

    #[test]
    fn orphans_and_empty() {
        assert_eq!(run("red"), vec!["{*, *, color=red}"]);
        assert_eq!(run("bar"), vec!["{*, [shape=bar], *}"]);
        assert!(run("hello world").is_empty());
    }

    #[test]
    fn category_rank_orders_actions() {
        // setColor appears first in the text but bindX is an encoding
        let t = TaggedUtterance {
            abstracted: AbstractedUtterance::plain("red then x"),
            intents: IntentSet::from_names(&["setColor", "bindX"]),
            labels: vec!["B-color".parse().unwrap(), "O".parse().unwrap(), "B-xField".parse().unwrap()],
        };
        let seq = Synthesizer::builtin().synthesize(&t);
        assert_eq!(seq.canonical(), vec!["{bindX, xAxis, field=x}", "{setColor, *, color=red}"]);
    }

    #[test]
    fn split_actions_do_not_share_parameters() {
        let t = TaggedUtterance {
            abstracted: abstract_utterance("title up and legend left by 10 px", &EntityIndex::new()),
            intents: IntentSet::from_names(&["move"]),
            labels: ["B-component", "B-direction", "O", "B-component", "B-direction", "O", "B-measure", "I-measure"]
                .iter()
                .map(|l| l.parse().unwrap())
                .collect(),
        };
        let seq = Synthesizer::builtin().synthesize(&t);
        // the offset goes to the nearer direction only
        assert_eq!(
            seq.canonical(),
            vec!["{move, title, direction=up}", "{move, legend, direction=left, offset=10px}"]
        );
    }

    #[test]
    fn more_parses() {
        assert_eq!(
            run("put it on the top of the Ford bar"),
            vec!["{place, *, position=[value='Ford', shape=bar][top]}"]
        );
        assert_eq!(
            run("annotate the Ford bar with 'best seller'"),
            vec!["{addAnnotation, [value='Ford', shape=bar], text='best seller'}"]
        );
        assert_eq!(run("make the line stroke wider"), vec!["{setStrokeWidth, [shape=line], strokeWidth=self[wider]}"]);
        assert_eq!(run("sort"), vec!["{sort, *, *}"]);
        assert_eq!(
            run("add a reference band for high sales"),
            vec!["{addReferenceBand, *, range=high, field=Sales}"]
        );
        assert_eq!(run("make it bigger"), vec!["{setSize, *, size=self[bigger]}"]);
        assert_eq!(run("in 2012"), vec!["{filter, *, value=2012}"]);
        assert_eq!(
            run("make the title red and the legend blue"),
            vec!["{setColor, title, color=red}", "{setColor, legend, color=blue}"]
        );
        assert_eq!(run("make the title and the legend red"), vec!["{setColor, title & legend, color=red}"]);
        assert_eq!(run("move the title up 10px"), vec!["{move, title, direction=up, offset=10px}"]);
        assert_eq!(run("call it US2020"), vec!["{nameObject, *, name='US2020'}"]);
    }
}
