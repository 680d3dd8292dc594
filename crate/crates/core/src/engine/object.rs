//! Object handles, their selectable properties and their on-canvas geometry.

use std::fmt;

use serde::{Serialize, Serializer};

use super::chart::{AnnotationKind, ChartState, ChartType, Channel, Props, View};
use crate::action::Predicate;
#[cfg(test)]
use crate::action::PredicateValue;
use crate::rules::{Rgb, RuleTable};

pub const CANVAS_WIDTH: f64 = 640.0;
pub const CANVAS_HEIGHT: f64 = 400.0;
/// Plot area as (x, y, width, height).
pub const PLOT: Rect = Rect {
    x: 60.0,
    y: 50.0,
    w: 460.0,
    h: 300.0,
};

/// Components every chart has, in enumeration order.
pub const FIXED_COMPONENTS: [&str; 8] = ["canvas", "plot", "title", "legend", "xAxis", "yAxis", "gridlines", "mark"];

pub const DEFAULT_MARK_COLOR: Rgb = Rgb::new(70, 130, 180);
const DEFAULT_TEXT_COLOR: Rgb = Rgb::new(0, 0, 0);
const DEFAULT_BAND_COLOR: Rgb = Rgb::new(211, 211, 211);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Target {
    Chart,
    Component(String),
    /// A data mark, keyed by its x value.
    Datum(String),
    Annotation(usize),
    Field(String),
}

/// A live object in a session.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Handle {
    pub chart: String,
    pub target: Target,
}

impl Handle {
    pub fn new(chart: &str, target: Target) -> Handle {
        Handle {
            chart: chart.to_string(),
            target,
        }
    }
}

impl fmt::Display for Handle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.target {
            Target::Chart => write!(f, "{}", self.chart),
            Target::Component(c) => write!(f, "{}/{c}", self.chart),
            Target::Datum(k) => write!(f, "{}/datum/{k}", self.chart),
            Target::Annotation(id) => write!(f, "{}/annotation/{id}", self.chart),
            Target::Field(name) => write!(f, "{}/field/{name}", self.chart),
        }
    }
}

impl Serialize for Handle {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn union(&self, o: &Rect) -> Rect {
        let x = self.x.min(o.x);
        let y = self.y.min(o.y);
        Rect {
            x,
            y,
            w: self.right().max(o.right()) - x,
            h: self.bottom().max(o.bottom()) - y,
        }
    }

    fn centered_at(p: (f64, f64), w: f64, h: f64) -> Rect {
        Rect {
            x: p.0 - w / 2.0,
            y: p.1 - h / 2.0,
            w,
            h,
        }
    }
}

/// Properties a selector predicate can test.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObjectProps {
    pub names: Vec<String>,
    pub component: Option<String>,
    pub value: Option<String>,
    pub field: Option<String>,
    pub shape: Option<String>,
    pub color: Option<Rgb>,
    pub stroke: Option<Rgb>,
    pub icon: Option<String>,
    pub text: Option<String>,
    /// Data labels shown on the object.
    pub labels: Vec<String>,
}

fn eq(a: &Option<String>, b: &str) -> bool {
    a.as_deref().is_some_and(|a| a.eq_ignore_ascii_case(b))
}

impl ObjectProps {
    pub fn matches(&self, p: &Predicate, rules: &RuleTable) -> bool {
        let text = p.value.text();
        let color = |c: &Option<Rgb>| {
            let wanted = Rgb::parse_hex(text).or_else(|| rules.color(text));
            wanted.is_some() && *c == wanted
        };
        match p.property.as_str() {
            "name" => self.names.iter().any(|n| n.eq_ignore_ascii_case(text)),
            "component" => eq(&self.component, text),
            "value" => eq(&self.value, text),
            "field" => eq(&self.field, text),
            "shape" => eq(&self.shape, text),
            "color" => color(&self.color),
            "stroke" => color(&self.stroke),
            "icon" => eq(&self.icon, text),
            "text" => eq(&self.text, text),
            _ => {
                // wildcard: any textual property, including data labels
                [&self.component, &self.value, &self.field, &self.shape, &self.icon, &self.text]
                    .iter()
                    .any(|v| eq(v, text))
                    || self.names.iter().chain(&self.labels).any(|n| n.eq_ignore_ascii_case(text))
            }
        }
    }
}

/// Default numeric value of a property before any edit.
pub fn default_number(chart: &ChartState, target: &Target, role: &str, view: &View) -> f64 {
    let is_line = chart.chart_type == Some(ChartType::Line);
    match role {
        "opacity" => 1.0,
        "strokeWidth" => match target {
            Target::Component(c) if c == "mark" && is_line => 2.0,
            Target::Datum(_) if is_line => 2.0,
            _ => 1.0,
        },
        "width" => geometry(chart, target, view).map_or(0.0, |r| r.w),
        "height" => geometry(chart, target, view).map_or(0.0, |r| r.h),
        _ => match target {
            Target::Component(c) => match c.as_str() {
                "title" => 16.0,
                "legend" | "xAxis" | "yAxis" => 12.0,
                "canvas" | "plot" => geometry(chart, target, view).map_or(0.0, |r| r.w),
                _ => 10.0,
            },
            Target::Chart => CANVAS_WIDTH,
            Target::Annotation(id) => match chart.annotation(*id).map(|a| a.kind) {
                Some(AnnotationKind::Label) => 11.0,
                _ => 12.0,
            },
            Target::Datum(_) | Target::Field(_) => 10.0,
        },
    }
}

pub fn props(chart: &ChartState, target: &Target) -> Props {
    match target {
        Target::Chart => chart.components.get("chart").cloned(),
        Target::Component(c) => chart.components.get(c).cloned(),
        Target::Datum(k) => chart.datum_styles.get(k).cloned(),
        Target::Annotation(id) => chart.annotation(*id).map(|a| a.props.clone()),
        Target::Field(_) => None,
    }
    .unwrap_or_default()
}

pub fn props_mut<'c>(chart: &'c mut ChartState, target: &Target) -> Option<&'c mut Props> {
    match target {
        Target::Chart => Some(chart.components.entry("chart".into()).or_default()),
        Target::Component(c) => Some(chart.components.entry(c.clone()).or_default()),
        Target::Datum(k) => Some(chart.datum_styles.entry(k.clone()).or_default()),
        Target::Annotation(id) => chart.annotation_mut(*id).map(|a| &mut a.props),
        Target::Field(_) => None,
    }
}

/// Effective color of an object (`stroke` selects the outline color).
pub fn effective_color(chart: &ChartState, target: &Target, stroke: bool) -> Rgb {
    let own = props(chart, target);
    let own = if stroke { own.stroke } else { own.color };
    if let Some(c) = own {
        return c;
    }
    let mark = chart.components.get("mark");
    let mark_color = mark.and_then(|p| if stroke { p.stroke } else { p.color });
    match target {
        Target::Component(c) if c == "mark" => mark_color.unwrap_or(DEFAULT_MARK_COLOR),
        Target::Datum(_) => mark_color.unwrap_or(if stroke { DEFAULT_TEXT_COLOR } else { DEFAULT_MARK_COLOR }),
        Target::Annotation(id) if chart.annotation(*id).map(|a| a.kind) == Some(AnnotationKind::ReferenceBand) => {
            DEFAULT_BAND_COLOR
        }
        Target::Component(c) if c == "canvas" || c == "plot" || c == "chart" => Rgb::new(255, 255, 255),
        Target::Chart => Rgb::new(255, 255, 255),
        _ => DEFAULT_TEXT_COLOR,
    }
}

/// Every object of a chart other than field references, in a fixed order.
pub fn enumerate(chart: &ChartState, view: &View) -> Vec<Target> {
    let mut out = vec![Target::Chart];
    out.extend(FIXED_COMPONENTS.iter().map(|c| Target::Component(c.to_string())));
    out.extend(chart.annotations.iter().map(|a| Target::Annotation(a.id)));
    out.extend(view.datums.iter().map(|d| Target::Datum(d.key.clone())));
    out
}

pub fn object_props(chart: &ChartState, target: &Target, view: &View, names: Vec<String>) -> ObjectProps {
    let own = props(chart, target);
    let mut p = ObjectProps {
        names,
        text: own.text.clone(),
        ..ObjectProps::default()
    };
    match target {
        Target::Chart => {
            p.component = Some("chart".into());
            if let Some(n) = &chart.name {
                p.names.push(n.clone());
            }
        }
        Target::Component(c) => {
            p.component = Some(c.clone());
            if c == "mark" {
                p.shape = chart.mark_shape.clone().or_else(|| {
                    (chart.chart_type == Some(ChartType::Line)).then(|| "line".to_string())
                });
                p.icon = chart.icon.clone();
                p.color = Some(effective_color(chart, target, false));
                p.stroke = Some(effective_color(chart, target, true));
            } else if c == "xAxis" || c == "yAxis" {
                let ch = if c == "xAxis" { Channel::X } else { Channel::Y };
                p.field = chart.field(ch).map(str::to_string);
            }
        }
        Target::Datum(k) => {
            p.component = Some("mark".into());
            p.value = Some(k.clone());
            p.field = chart.field(Channel::X).map(str::to_string);
            p.shape = Some(
                chart
                    .mark_shape
                    .clone()
                    .unwrap_or_else(|| chart.chart_type.unwrap_or(ChartType::Column).datum_shape().to_string()),
            );
            p.icon = chart.icon.clone();
            p.color = Some(effective_color(chart, target, false));
            p.stroke = Some(effective_color(chart, target, true));
            p.labels.push(k.clone());
            if let Some(d) = view.datums.iter().find(|d| &d.key == k) {
                p.labels.push(super::chart::format_number(d.value));
            }
        }
        Target::Annotation(id) => {
            if let Some(a) = chart.annotation(*id) {
                p.component = Some(a.kind.component_name().into());
                p.shape = a.kind.shape().map(str::to_string);
                p.field = a.field.clone();
                p.value = a.target.clone();
                p.color = Some(effective_color(chart, target, false));
            }
        }
        Target::Field(f) => p.field = Some(f.clone()),
    }
    p
}

/// Maps a data value to a pixel along the value axis.
pub fn value_pixel(chart: &ChartState, view: &View, v: f64) -> f64 {
    let max = view.datums.iter().map(|d| d.value).fold(0.0, f64::max);
    let max = if max > 0.0 { max } else { 1.0 };
    if chart.chart_type.is_some_and(|t| t.is_horizontal()) {
        PLOT.x + v / max * PLOT.w
    } else {
        PLOT.bottom() - v / max * PLOT.h
    }
}

/// Bounding box of an object on the canvas; `None` for objects without one.
pub fn geometry(chart: &ChartState, target: &Target, view: &View) -> Option<Rect> {
    let own = props(chart, target);
    let base = match target {
        Target::Chart => Rect {
            x: 0.0,
            y: 0.0,
            w: own.width.unwrap_or(CANVAS_WIDTH),
            h: own.height.unwrap_or(CANVAS_HEIGHT),
        },
        Target::Component(c) => match c.as_str() {
            "canvas" => Rect {
                x: 0.0,
                y: 0.0,
                w: CANVAS_WIDTH,
                h: CANVAS_HEIGHT,
            },
            "plot" | "gridlines" | "mark" => PLOT,
            "title" => Rect {
                x: 220.0,
                y: 10.0,
                w: 200.0,
                h: 24.0,
            },
            "legend" => Rect {
                x: 530.0,
                y: 50.0,
                w: 100.0,
                h: 60.0,
            },
            "xAxis" => Rect {
                x: PLOT.x,
                y: PLOT.bottom(),
                w: PLOT.w,
                h: 30.0,
            },
            "yAxis" => Rect {
                x: 20.0,
                y: PLOT.y,
                w: 40.0,
                h: PLOT.h,
            },
            _ => return None,
        },
        Target::Datum(k) => datum_rect(chart, view, k)?,
        Target::Annotation(id) => {
            let a = chart.annotation(*id)?;
            let horizontal = chart.chart_type.is_some_and(|t| t.is_horizontal());
            let line_at = |v: f64| {
                let p = value_pixel(chart, view, v);
                if horizontal {
                    Rect {
                        x: p,
                        y: PLOT.y,
                        w: 0.0,
                        h: PLOT.h,
                    }
                } else {
                    Rect {
                        x: PLOT.x,
                        y: p,
                        w: PLOT.w,
                        h: 0.0,
                    }
                }
            };
            match a.kind {
                AnnotationKind::ReferenceLine | AnnotationKind::AverageLine => line_at(a.value.unwrap_or(0.0)),
                AnnotationKind::ReferenceBand => {
                    let (lo, hi) = a.range.unwrap_or((0.0, 0.0));
                    line_at(lo).union(&line_at(hi))
                }
                AnnotationKind::TrendLine => PLOT,
                AnnotationKind::Label | AnnotationKind::AnnotationText => {
                    let anchor = a
                        .target
                        .as_deref()
                        .and_then(|k| datum_rect(chart, view, k))
                        .unwrap_or(PLOT);
                    let (w, h) = if a.kind == AnnotationKind::Label { (40.0, 14.0) } else { (80.0, 16.0) };
                    Rect::centered_at((anchor.center().0, anchor.y - h / 2.0), w, h)
                }
            }
        }
        Target::Field(_) => return None,
    };
    Some(match own.position {
        Some(p) => Rect::centered_at(p, own.width.unwrap_or(base.w), own.height.unwrap_or(base.h)),
        None => Rect {
            w: own.width.unwrap_or(base.w),
            h: own.height.unwrap_or(base.h),
            ..base
        },
    })
}

fn datum_rect(chart: &ChartState, view: &View, key: &str) -> Option<Rect> {
    let n = view.datums.len();
    let i = view.datums.iter().position(|d| d.key == key)?;
    let v = view.datums[i].value;
    if chart.chart_type.is_some_and(|t| t.is_horizontal()) {
        let band = PLOT.h / n as f64;
        let end = value_pixel(chart, view, v);
        Some(Rect {
            x: PLOT.x,
            y: PLOT.y + i as f64 * band + 0.1 * band,
            w: end - PLOT.x,
            h: 0.8 * band,
        })
    } else {
        let band = PLOT.w / n as f64;
        let top = value_pixel(chart, view, v);
        Some(Rect {
            x: PLOT.x + i as f64 * band + 0.1 * band,
            y: top,
            w: 0.8 * band,
            h: PLOT.bottom() - top,
        })
    }
}
