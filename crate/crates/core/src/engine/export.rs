//! The chart-spec document handed to renderers.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use super::chart::{Annotation, ChartState, ChartType, Encoding, Filter, Props, Sort};
use super::object::{effective_color, Target};
use crate::dataset::{Dataset, SemanticType};
use crate::text::parse_number;

pub const SPEC_SCHEMA: &str = "talkchart.chart-spec/v1";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ChartSpec {
    pub schema: &'static str,
    pub id: String,
    pub version: u64,
    pub name: Option<String>,
    /// Set when no chart type is chosen or can be recommended.
    pub incomplete: bool,
    pub chart_type: Option<ChartType>,
    pub orientation: Option<&'static str>,
    pub data: SpecData,
    pub encodings: BTreeMap<&'static str, Encoding>,
    pub marks: SpecMarks,
    pub annotations: Vec<Annotation>,
    /// Component name -> style; `mark` always carries its effective color.
    pub styles: BTreeMap<String, Props>,
    /// Datum key -> style overrides.
    pub datum_styles: BTreeMap<String, Props>,
    pub title: SpecText,
    pub legend: SpecLegend,
    pub sort: Option<Sort>,
    pub filters: Vec<Filter>,
    pub facet: Option<String>,
    pub layout: Option<SpecLayout>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecData {
    pub fields: Vec<String>,
    pub values: Vec<Vec<Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecMarks {
    pub shape: Option<String>,
    pub icon: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecText {
    pub text: String,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecLegend {
    pub visible: bool,
    pub position: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecLayout {
    pub columns: usize,
}

impl ChartSpec {
    pub fn build(chart: &ChartState, ds: &Dataset) -> ChartSpec {
        let view = chart.view(ds);
        let numeric: Vec<bool> = view
            .fields
            .iter()
            .enumerate()
            .map(|(i, f)| {
                // aggregated views carry the aggregate in their second column
                (view.aggregated && i == 1)
                    || ds
                        .column(f)
                        .is_some_and(|c| matches!(c.semantic_type, SemanticType::Quantitative | SemanticType::TemporalYear))
            })
            .collect();
        let values = view
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&numeric)
                    .map(|(cell, &num)| match cell {
                        None => Value::Null,
                        Some(s) if num => parse_number(s)
                            .and_then(serde_json::Number::from_f64)
                            .map(Value::Number)
                            .unwrap_or_else(|| Value::String(s.clone())),
                        Some(s) => Value::String(s.clone()),
                    })
                    .collect()
            })
            .collect();

        let mut styles: BTreeMap<String, Props> =
            chart.components.iter().filter(|(_, p)| !p.is_empty()).map(|(k, p)| (k.clone(), p.clone())).collect();
        let mark = styles.entry("mark".into()).or_default();
        mark.color = Some(effective_color(chart, &Target::Component("mark".into()), false));

        let title = chart.components.get("title").cloned().unwrap_or_default();
        let legend = chart.components.get("legend").cloned().unwrap_or_default();
        let auto_title = match (chart.field(super::Channel::Y), chart.field(super::Channel::X)) {
            (Some(y), Some(x)) => format!("{y} by {x}"),
            (Some(y), None) => y.to_string(),
            (None, Some(x)) => x.to_string(),
            (None, None) => ds.name.clone(),
        };

        ChartSpec {
            schema: SPEC_SCHEMA,
            id: chart.id.clone(),
            version: chart.version,
            name: chart.name.clone(),
            incomplete: chart.chart_type.is_none(),
            chart_type: chart.chart_type,
            orientation: chart.chart_type.map(|t| if t.is_horizontal() { "horizontal" } else { "vertical" }),
            data: SpecData {
                fields: view.fields,
                values,
            },
            encodings: chart.encodings.iter().map(|(c, e)| (c.as_str(), e.clone())).collect(),
            marks: SpecMarks {
                shape: chart
                    .mark_shape
                    .clone()
                    .or_else(|| chart.chart_type.map(|t| if t == ChartType::Line { "line" } else { "bar" }.to_string())),
                icon: chart.icon.clone(),
            },
            annotations: chart.annotations.clone(),
            styles,
            datum_styles: chart.datum_styles.iter().filter(|(_, p)| !p.is_empty()).map(|(k, p)| (k.clone(), p.clone())).collect(),
            title: SpecText {
                text: title.text.unwrap_or(auto_title),
                visible: title.visible.unwrap_or(true),
            },
            legend: SpecLegend {
                visible: legend.visible.unwrap_or(true),
                position: legend.position,
            },
            sort: chart.sort.clone(),
            filters: chart.filters.clone(),
            facet: chart.facet.clone(),
            layout: chart.layout_columns.map(|columns| SpecLayout { columns }),
        }
    }

    /// Pretty JSON; identical states give identical bytes.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chart specs serialize")
    }
}
