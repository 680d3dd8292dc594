//! Tabular datasets: CSV loading, column type inference and the entity
//! index consulted by the abstractor.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{is_date, is_year, normalize_phrase, parse_number, tokenize, Date};

/// Default cap on indexed distinct values per column.
pub const DEFAULT_VALUE_CAP: usize = 10_000;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("the file is empty")]
    Empty,
    #[error("duplicate column name `{0}`")]
    DuplicateHeader(String),
    #[error("row {row} has {found} fields, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SemanticType {
    Quantitative,
    Categorical,
    TemporalYear,
    TemporalDate,
}

impl SemanticType {
    pub fn parse(s: &str) -> Option<SemanticType> {
        match s {
            "quantitative" => Some(SemanticType::Quantitative),
            "categorical" => Some(SemanticType::Categorical),
            "temporalYear" => Some(SemanticType::TemporalYear),
            "temporalDate" => Some(SemanticType::TemporalDate),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SemanticType::Quantitative => "quantitative",
            SemanticType::Categorical => "categorical",
            SemanticType::TemporalYear => "temporalYear",
            SemanticType::TemporalDate => "temporalDate",
        }
    }
}

impl fmt::Display for SemanticType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub semantic_type: SemanticType,
    pub distinct_values: BTreeSet<String>,
    /// Present iff the column is quantitative.
    pub stats: Option<Stats>,
}

/// Assigns a semantic type to a column from its non-null cells.
pub fn infer_type<'a>(cells: impl IntoIterator<Item = &'a str>) -> SemanticType {
    let cells: Vec<&str> = cells.into_iter().collect();
    if cells.is_empty() {
        return SemanticType::Categorical;
    }
    if cells.iter().all(|c| is_year(c)) {
        SemanticType::TemporalYear
    } else if cells.iter().all(|c| is_date(c)) {
        SemanticType::TemporalDate
    } else if cells.iter().all(|c| parse_number(c).is_some()) {
        SemanticType::Quantitative
    } else {
        SemanticType::Categorical
    }
}

fn stats_of(values: &[f64]) -> Option<Stats> {
    if values.is_empty() {
        return None;
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Some(Stats { min, max, mean })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub columns: Vec<Column>,
    /// Cells in column order; `None` is an empty cell.
    pub rows: Vec<Vec<Option<String>>>,
}

impl Dataset {
    /// Builds a typed dataset from headers and rows.
    pub fn new(name: &str, headers: Vec<String>, rows: Vec<Vec<Option<String>>>) -> Result<Dataset, DatasetError> {
        if headers.is_empty() {
            return Err(DatasetError::Empty);
        }
        let mut seen = BTreeSet::new();
        for h in &headers {
            if !seen.insert(h.to_lowercase()) {
                return Err(DatasetError::DuplicateHeader(h.clone()));
            }
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != headers.len() {
                return Err(DatasetError::Ragged {
                    row: i + 1,
                    found: r.len(),
                    expected: headers.len(),
                });
            }
        }
        let columns = headers
            .into_iter()
            .map(|name| Column {
                name,
                semantic_type: SemanticType::Categorical,
                distinct_values: BTreeSet::new(),
                stats: None,
            })
            .collect();
        let mut ds = Dataset {
            name: name.to_string(),
            columns,
            rows,
        };
        ds.infer_types();
        Ok(ds)
    }

    /// Loads comma-separated text with a header row. Headers and cells are
    /// trimmed; empty cells become nulls.
    pub fn from_csv(name: &str, bytes: &[u8]) -> Result<Dataset, DatasetError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(bytes);
        let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(DatasetError::Empty);
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            rows.push(
                record
                    .iter()
                    .map(|c| (!c.is_empty()).then(|| c.to_string()))
                    .collect(),
            );
        }
        Dataset::new(name, headers, rows)
    }

    /// Car sales by brand and year, shipped for demos and the benchmark.
    pub fn sample() -> Dataset {
        Dataset::from_csv("carsales", include_bytes!("../data/carsales.csv")).expect("sample dataset parses")
    }

    pub fn load_csv(path: &std::path::Path) -> Result<Dataset, DatasetError> {
        let bytes = std::fs::read(path).map_err(|e| DatasetError::Csv(e.into()))?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
        Dataset::from_csv(name, &bytes)
    }

    /// Recomputes semantic types, distinct values and statistics.
    pub fn infer_types(&mut self) {
        for (i, col) in self.columns.iter_mut().enumerate() {
            let cells: Vec<&str> = self.rows.iter().filter_map(|r| r[i].as_deref()).collect();
            col.semantic_type = infer_type(cells.iter().copied());
            col.distinct_values = cells.iter().map(|c| c.to_string()).collect();
            col.stats = if col.semantic_type == SemanticType::Quantitative {
                let nums: Vec<f64> = cells.iter().filter_map(|c| parse_number(c)).collect();
                stats_of(&nums)
            } else {
                None
            };
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .or_else(|| self.columns.iter().position(|c| c.name.eq_ignore_ascii_case(name)))
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.column_index(name).map(|i| &self.columns[i])
    }

    /// Numeric reading of a cell: numbers as-is, years as numbers, dates as
    /// day ordinals.
    pub fn numeric(&self, row: usize, col: usize) -> Option<f64> {
        let cell = self.rows[row][col].as_deref()?;
        match self.columns[col].semantic_type {
            SemanticType::TemporalDate => Date::parse(cell).map(|d| d.ordinal() as f64),
            _ => parse_number(cell),
        }
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&str> {
        self.rows[row][col].as_deref()
    }

    pub fn entity_index(&self, value_cap: usize) -> EntityIndex {
        EntityIndex::from_dataset(self, value_cap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Column,
    Table,
    Value,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct IndexEntry {
    pub kind: EntityKind,
    pub canonical: String,
    /// Column holding a value entry.
    pub column: Option<String>,
}

/// Normalized phrase -> entities. Keys are lower-cased token sequences
/// joined by single spaces.
#[derive(Debug, Clone, Default)]
pub struct EntityIndex {
    entries: BTreeMap<String, Vec<IndexEntry>>,
    longest: usize,
}

impl EntityIndex {
    pub fn new() -> EntityIndex {
        EntityIndex::default()
    }

    /// Indexes the table name, every column name, and the distinct values
    /// of categorical columns (at most `value_cap` per column). Numeric and
    /// temporal cells are left to literal recognition.
    pub fn from_dataset(ds: &Dataset, value_cap: usize) -> EntityIndex {
        let mut index = EntityIndex::new();
        index.insert(EntityKind::Table, &ds.name, None);
        for col in &ds.columns {
            index.insert(EntityKind::Column, &col.name, None);
        }
        for col in &ds.columns {
            if col.semantic_type != SemanticType::Categorical {
                continue;
            }
            for v in col.distinct_values.iter().take(value_cap) {
                index.insert(EntityKind::Value, v, Some(&col.name));
            }
        }
        index
    }

    pub fn insert(&mut self, kind: EntityKind, canonical: &str, column: Option<&str>) {
        let key = normalize_phrase(canonical);
        if key.is_empty() {
            return;
        }
        self.longest = self.longest.max(key.split(' ').count());
        let entry = IndexEntry {
            kind,
            canonical: canonical.to_string(),
            column: column.map(str::to_string),
        };
        let list = self.entries.entry(key).or_default();
        if !list.contains(&entry) {
            list.push(entry);
            list.sort();
        }
    }

    pub fn get(&self, key: &str) -> &[IndexEntry] {
        self.entries.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[IndexEntry])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Token count of the longest key.
    pub fn longest_phrase(&self) -> usize {
        self.longest
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Token count of a phrase under the shared tokenizer.
pub fn phrase_len(phrase: &str) -> usize {
    tokenize(phrase).len()
}
