use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::dataset::{Dataset, SemanticType};
use crate::rules::{Rgb, SortOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartType {
    /// Horizontal bars.
    Bar,
    /// Vertical bars.
    Column,
    Line,
    /// Bars drawn with repeated icons.
    Pictograph,
}

impl ChartType {
    pub fn parse(s: &str) -> Option<ChartType> {
        match s {
            "bar" => Some(ChartType::Bar),
            "column" => Some(ChartType::Column),
            "line" => Some(ChartType::Line),
            "pictograph" => Some(ChartType::Pictograph),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ChartType::Bar => "bar",
            ChartType::Column => "column",
            ChartType::Line => "line",
            ChartType::Pictograph => "pictograph",
        }
    }

    pub fn is_horizontal(&self) -> bool {
        *self == ChartType::Bar
    }

    /// Shape of the per-datum marks.
    pub fn datum_shape(&self) -> &'static str {
        match self {
            ChartType::Line => "point",
            _ => "bar",
        }
    }
}

impl fmt::Display for ChartType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    X,
    Y,
    Color,
    Size,
}

impl Channel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::X => "x",
            Channel::Y => "y",
            Channel::Color => "color",
            Channel::Size => "size",
        }
    }

    pub fn parse(s: &str) -> Option<Channel> {
        match s {
            "x" => Some(Channel::X),
            "y" => Some(Channel::Y),
            "color" => Some(Channel::Color),
            "size" => Some(Channel::Size),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Encoding {
    pub field: String,
    #[serde(rename = "type")]
    pub semantic_type: SemanticType,
    pub aggregate: Option<String>,
    pub time_unit: Option<String>,
    pub bin: Option<usize>,
}

/// Style and layout properties of one object. Unset properties fall back
/// to per-kind defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Props {
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "ser_rgb")]
    pub color: Option<Rgb>,
    #[serde(skip_serializing_if = "Option::is_none", serialize_with = "ser_rgb")]
    pub stroke: Option<Rgb>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stroke_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opacity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub font: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visible: Option<bool>,
    /// Center point in canvas pixels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<(f64, f64)>,
}

fn ser_rgb<S: serde::Serializer>(c: &Option<Rgb>, s: S) -> Result<S::Ok, S::Error> {
    match c {
        Some(c) => s.serialize_str(&c.hex()),
        None => s.serialize_none(),
    }
}

impl Props {
    pub fn is_empty(&self) -> bool {
        *self == Props::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum AnnotationKind {
    TrendLine,
    ReferenceLine,
    ReferenceBand,
    AverageLine,
    Label,
    AnnotationText,
}

impl AnnotationKind {
    pub fn component_name(&self) -> &'static str {
        match self {
            AnnotationKind::TrendLine => "trendLine",
            AnnotationKind::ReferenceLine => "referenceLine",
            AnnotationKind::ReferenceBand => "referenceBand",
            AnnotationKind::AverageLine => "averageLine",
            AnnotationKind::Label => "label",
            AnnotationKind::AnnotationText => "annotationText",
        }
    }

    pub fn from_component(name: &str) -> Option<AnnotationKind> {
        [
            AnnotationKind::TrendLine,
            AnnotationKind::ReferenceLine,
            AnnotationKind::ReferenceBand,
            AnnotationKind::AverageLine,
            AnnotationKind::Label,
            AnnotationKind::AnnotationText,
        ]
        .into_iter()
        .find(|k| k.component_name() == name)
    }

    pub fn shape(&self) -> Option<&'static str> {
        match self {
            AnnotationKind::TrendLine | AnnotationKind::ReferenceLine | AnnotationKind::AverageLine => Some("line"),
            AnnotationKind::ReferenceBand => Some("area"),
            AnnotationKind::Label | AnnotationKind::AnnotationText => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Annotation {
    pub id: usize,
    pub kind: AnnotationKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// Datum key the annotation is attached to.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub props: Props,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Filter {
    Equals { field: String, value: String },
    Range { field: String, min: f64, max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sort {
    pub field: String,
    pub order: SortOrder,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChartState {
    pub id: String,
    pub name: Option<String>,
    pub chart_type: Option<ChartType>,
    /// True while the chart type is a recommendation rather than a user choice.
    pub chart_type_recommended: bool,
    pub encodings: BTreeMap<Channel, Encoding>,
    /// Component name -> properties.
    pub components: BTreeMap<String, Props>,
    pub mark_shape: Option<String>,
    pub icon: Option<String>,
    /// Datum key -> style overrides.
    pub datum_styles: BTreeMap<String, Props>,
    pub annotations: Vec<Annotation>,
    pub next_annotation: usize,
    pub sort: Option<Sort>,
    pub filters: Vec<Filter>,
    pub facet: Option<String>,
    pub layout_columns: Option<usize>,
    pub version: u64,
}

/// One mark after filtering, sorting and aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct Datum {
    pub key: String,
    pub value: f64,
}

/// Rows and marks a chart currently shows.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub fields: Vec<String>,
    pub rows: Vec<Vec<Option<String>>>,
    pub datums: Vec<Datum>,
    /// Rows are (x, aggregated y) pairs.
    pub aggregated: bool,
}

impl ChartState {
    pub fn new(id: &str) -> ChartState {
        ChartState {
            id: id.to_string(),
            ..ChartState::default()
        }
    }

    pub fn field(&self, channel: Channel) -> Option<&str> {
        self.encodings.get(&channel).map(|e| e.field.as_str())
    }

    pub fn channel_of(&self, field: &str) -> Option<Channel> {
        self.encodings.iter().find(|(_, e)| e.field.eq_ignore_ascii_case(field)).map(|(c, _)| *c)
    }

    pub fn annotation(&self, id: usize) -> Option<&Annotation> {
        self.annotations.iter().find(|a| a.id == id)
    }

    pub fn annotation_mut(&mut self, id: usize) -> Option<&mut Annotation> {
        self.annotations.iter_mut().find(|a| a.id == id)
    }

    /// Applies filters, sort and aggregation to the dataset.
    pub fn view(&self, ds: &Dataset) -> View {
        let col = |name: &str| ds.column_index(name);
        let mut rows: Vec<usize> = (0..ds.rows.len())
            .filter(|&r| {
                self.filters.iter().all(|f| match f {
                    Filter::Equals { field, value } => col(field)
                        .and_then(|c| ds.cell(r, c))
                        .is_some_and(|v| v.eq_ignore_ascii_case(value)),
                    Filter::Range { field, min, max } => col(field)
                        .and_then(|c| ds.numeric(r, c))
                        .is_some_and(|v| v >= *min && v <= *max),
                })
            })
            .collect();
        if let Some(sort) = &self.sort {
            if let Some(c) = col(&sort.field) {
                let numeric = ds.columns[c].semantic_type != SemanticType::Categorical;
                rows.sort_by(|&a, &b| {
                    let ord = if numeric {
                        let (x, y) = (ds.numeric(a, c), ds.numeric(b, c));
                        x.partial_cmp(&y).unwrap_or(std::cmp::Ordering::Equal)
                    } else {
                        ds.cell(a, c).map(str::to_lowercase).cmp(&ds.cell(b, c).map(str::to_lowercase))
                    };
                    match sort.order {
                        SortOrder::Ascending => ord,
                        SortOrder::Descending => ord.reverse(),
                    }
                });
            }
        }

        let x = self.field(Channel::X).and_then(col);
        let y = self.field(Channel::Y).and_then(col);
        let aggregate = self.encodings.get(&Channel::Y).and_then(|e| e.aggregate.clone());

        // per-datum values: grouped by x, combined with the y aggregate (sum by default)
        let mut keys: Vec<String> = Vec::new();
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for &r in &rows {
            let key = match x {
                Some(c) => ds.cell(r, c).unwrap_or("").to_string(),
                None => (r + 1).to_string(),
            };
            let v = match y {
                Some(c) => ds.numeric(r, c),
                None => Some(1.0),
            };
            if !groups.contains_key(&key) {
                keys.push(key.clone());
            }
            let g = groups.entry(key).or_default();
            if let Some(v) = v {
                g.push(v);
            }
        }
        let combine = |vs: &[f64]| -> f64 { combine(aggregate.as_deref().unwrap_or("sum"), vs) };
        let datums: Vec<Datum> = if y.is_none() && x.is_none() {
            Vec::new()
        } else {
            keys.iter()
                .map(|k| Datum {
                    key: k.clone(),
                    value: combine(&groups[k]),
                })
                .collect()
        };

        match (aggregate, x, y) {
            (Some(_), Some(xc), Some(yc)) => View {
                fields: vec![ds.columns[xc].name.clone(), ds.columns[yc].name.clone()],
                rows: datums.iter().map(|d| vec![Some(d.key.clone()), Some(format_number(d.value))]).collect(),
                datums,
                aggregated: true,
            },
            _ => View {
                fields: ds.columns.iter().map(|c| c.name.clone()).collect(),
                rows: rows.iter().map(|&r| ds.rows[r].clone()).collect(),
                datums,
                aggregated: false,
            },
        }
    }
}

/// Combines a group of values with an aggregate keyword.
pub fn combine(aggregate: &str, vs: &[f64]) -> f64 {
    if vs.is_empty() {
        return 0.0;
    }
    match aggregate {
        "mean" => vs.iter().sum::<f64>() / vs.len() as f64,
        "count" => vs.len() as f64,
        "max" => vs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "min" => vs.iter().copied().fold(f64::INFINITY, f64::min),
        "median" => {
            let mut s = vs.to_vec();
            s.sort_by(|a, b| a.total_cmp(b));
            let n = s.len();
            if n % 2 == 1 {
                s[n / 2]
            } else {
                (s[n / 2 - 1] + s[n / 2]) / 2.0
            }
        }
        _ => vs.iter().sum(),
    }
}

pub(crate) fn format_number(v: f64) -> String {
    format!("{v}")
}
