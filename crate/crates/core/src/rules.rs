//! The rule table: every constant used to resolve vague and relational
//! parameters, the recommendation rules, and the phrase lexicons used by
//! the reference tagger. Loaded from `data/rules.toml`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::SemanticType;
use crate::engine::ChartType;
use crate::text::{normalize_phrase, tokenize};

const BUILTIN: &str = include_str!("../data/rules.toml");

/// The sixteen basic named colors every rule table must define.
pub const BASIC_COLORS: [&str; 16] = [
    "black", "silver", "gray", "white", "maroon", "red", "purple", "fuchsia", "green", "lime",
    "olive", "yellow", "navy", "blue", "teal", "aqua",
];

#[derive(Debug, Error)]
pub enum RulesError {
    #[error("rule table is not valid TOML: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid rule table: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const fn new(r: u8, g: u8, b: u8) -> Rgb {
        Rgb { r, g, b }
    }

    pub fn hex(&self) -> String {
        format!("#{:02X}{:02X}{:02X}", self.r, self.g, self.b)
    }

    pub fn parse_hex(text: &str) -> Option<Rgb> {
        let h = text.strip_prefix('#')?;
        if h.len() != 6 || !h.chars().all(|c| c.is_ascii_hexdigit()) {
            return None;
        }
        let byte = |i: usize| u8::from_str_radix(&h[i..i + 2], 16).ok();
        Some(Rgb::new(byte(0)?, byte(2)?, byte(4)?))
    }

    /// Hue in degrees, saturation and lightness in [0, 1].
    pub fn to_hsl(&self) -> (f64, f64, f64) {
        let r = self.r as f64 / 255.0;
        let g = self.g as f64 / 255.0;
        let b = self.b as f64 / 255.0;
        let max = r.max(g).max(b);
        let min = r.min(g).min(b);
        let l = (max + min) / 2.0;
        if max == min {
            return (0.0, 0.0, l);
        }
        let d = max - min;
        let s = if l > 0.5 { d / (2.0 - max - min) } else { d / (max + min) };
        let h = if max == r {
            (g - b) / d + if g < b { 6.0 } else { 0.0 }
        } else if max == g {
            (b - r) / d + 2.0
        } else {
            (r - g) / d + 4.0
        };
        (h * 60.0, s, l)
    }

    pub fn from_hsl(h: f64, s: f64, l: f64) -> Rgb {
        let l = l.clamp(0.0, 1.0);
        let s = s.clamp(0.0, 1.0);
        let to_byte = |v: f64| (v * 255.0).round().clamp(0.0, 255.0) as u8;
        if s == 0.0 {
            let v = to_byte(l);
            return Rgb::new(v, v, v);
        }
        let q = if l < 0.5 { l * (1.0 + s) } else { l + s - l * s };
        let p = 2.0 * l - q;
        let hk = h / 360.0;
        let channel = |t: f64| {
            let t = t.rem_euclid(1.0);
            if t < 1.0 / 6.0 {
                p + (q - p) * 6.0 * t
            } else if t < 0.5 {
                q
            } else if t < 2.0 / 3.0 {
                p + (q - p) * (2.0 / 3.0 - t) * 6.0
            } else {
                p
            }
        };
        Rgb::new(
            to_byte(channel(hk + 1.0 / 3.0)),
            to_byte(channel(hk)),
            to_byte(channel(hk - 1.0 / 3.0)),
        )
    }

    /// Scales HSL lightness, keeping hue and saturation.
    pub fn scale_lightness(&self, factor: f64) -> Rgb {
        let (h, s, l) = self.to_hsl();
        Rgb::from_hsl(h, s, l * factor)
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.hex())
    }
}

/// Column statistic used to bound qualitative ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stat {
    Min,
    Mean,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationalDeltas {
    pub bigger: f64,
    pub smaller: f64,
    pub stroke_wider: f64,
    pub on_top_offset_px: f64,
    pub darker: f64,
    pub lighter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    Ascending,
    Descending,
}

impl SortOrder {
    pub fn parse(s: &str) -> Option<SortOrder> {
        match s {
            "ascending" => Some(SortOrder::Ascending),
            "descending" => Some(SortOrder::Descending),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SortOrder::Ascending => "ascending",
            SortOrder::Descending => "descending",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SortDefault {
    /// Encoding channel whose field is sorted: "x" or "y".
    pub channel: String,
    pub order: SortOrder,
}

/// x-side type pattern of a recommendation rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XPattern {
    Type(SemanticType),
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecommendationRule {
    pub y: SemanticType,
    pub x: Vec<XPattern>,
    pub chart: ChartType,
}

impl RecommendationRule {
    pub fn matches(&self, y: SemanticType, x: Option<SemanticType>) -> bool {
        self.y == y
            && self.x.iter().any(|p| match (p, x) {
                (XPattern::None, None) => true,
                (XPattern::Type(t), Some(x)) => *t == x,
                _ => false,
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct RelationEntry {
    pub relation: String,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct MagnitudeEntry {
    pub keyword: String,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct AxisConnectors {
    pub before_axis: Vec<String>,
    pub after_axis: Vec<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct IconLexicon {
    #[serde(default)]
    pub icon_suffixes: Vec<String>,
    #[serde(flatten)]
    pub names: BTreeMap<String, String>,
}

/// Phrase tables for the reference tagger and the synthesizer.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct Lexicon {
    pub determiners: BTreeSet<String>,
    pub function_words: BTreeSet<String>,
    pub conjunctions: BTreeSet<String>,
    pub creation_verbs: Vec<String>,
    pub stroke_nouns: BTreeSet<String>,
    pub count_nouns: BTreeSet<String>,
    pub name_cues: Vec<String>,
    pub relation_cues: BTreeSet<String>,
    pub relation_links: BTreeSet<String>,
    pub visibility_verbs: BTreeSet<String>,
    pub range_openers: BTreeSet<String>,
    pub range_links: BTreeSet<String>,
    #[serde(default)]
    pub ignore_phrases: Vec<String>,
    pub components: BTreeMap<String, String>,
    pub shapes: BTreeMap<String, String>,
    pub chart_types: BTreeMap<String, String>,
    pub icons: IconLexicon,
    pub aggregates: BTreeMap<String, String>,
    pub orders: BTreeMap<String, String>,
    pub time_units: BTreeMap<String, String>,
    pub fonts: BTreeMap<String, String>,
    pub visibility: BTreeMap<String, bool>,
    pub positions: BTreeMap<String, String>,
    pub move_directions: BTreeMap<String, String>,
    pub relations: BTreeMap<String, RelationEntry>,
    pub extent_adverbs: BTreeMap<String, String>,
    pub magnitudes: BTreeMap<String, MagnitudeEntry>,
    pub units: BTreeMap<String, String>,
    pub qualitative: BTreeMap<String, String>,
    pub annotation_nouns: BTreeMap<String, String>,
    pub axes: BTreeMap<String, String>,
    pub axis_connectors: AxisConnectors,
}

/// A phrase that signals one or more operation intents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriggerRule {
    pub phrase: Vec<String>,
    pub intents: Vec<String>,
    pub requires: Vec<String>,
}

/// A token pattern assigning roles by position (`None` claims the token as O).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternRule {
    pub phrase: Vec<String>,
    pub roles: Vec<Option<String>>,
}

#[derive(Debug, Clone)]
pub struct RuleTable {
    pub version: String,
    pub intent_threshold: f64,
    pub value_index_cap: usize,
    pub colors: BTreeMap<String, Rgb>,
    pub extent_scale: BTreeMap<String, f64>,
    pub qualitative_ranges: BTreeMap<String, (Stat, Stat)>,
    pub relational_deltas: RelationalDeltas,
    pub sort_default: SortDefault,
    pub recommendations: Vec<RecommendationRule>,
    pub lexicon: Lexicon,
    pub triggers: Vec<TriggerRule>,
    pub patterns: Vec<PatternRule>,
}

#[derive(Deserialize)]
struct RawRules {
    version: String,
    intent_threshold: f64,
    value_index_cap: usize,
    colors: BTreeMap<String, [u8; 3]>,
    extent_scale: BTreeMap<String, f64>,
    qualitative_ranges: BTreeMap<String, [Stat; 2]>,
    relational_deltas: RelationalDeltas,
    sort_default: SortDefault,
    #[serde(default)]
    recommendation: Vec<RawRecommendation>,
    lexicon: Lexicon,
    #[serde(default)]
    pattern: Vec<RawPattern>,
    #[serde(default)]
    trigger: Vec<RawTrigger>,
}

#[derive(Deserialize)]
struct RawRecommendation {
    y: String,
    x: Vec<String>,
    chart: String,
}

#[derive(Deserialize)]
struct RawPattern {
    phrase: String,
    roles: Vec<String>,
}

#[derive(Deserialize)]
struct RawTrigger {
    phrase: String,
    intents: Vec<String>,
    #[serde(default)]
    requires: Vec<String>,
}

fn phrase_tokens(phrase: &str) -> Vec<String> {
    // placeholders such as <column> survive as single tokens
    let mut out = Vec::new();
    for word in phrase.split_whitespace() {
        if word.starts_with('<') && word.ends_with('>') {
            out.push(word.to_string());
        } else {
            out.extend(tokenize(word).into_iter().map(|t| t.text.to_lowercase()));
        }
    }
    out
}

impl RuleTable {
    pub fn builtin() -> &'static RuleTable {
        static RULES: OnceLock<RuleTable> = OnceLock::new();
        RULES.get_or_init(|| RuleTable::from_toml(BUILTIN).expect("built-in rule table is valid"))
    }

    pub fn from_toml(text: &str) -> Result<RuleTable, RulesError> {
        let raw: RawRules = toml::from_str(text)?;
        let invalid = |m: String| RulesError::Invalid(m);

        if !(raw.intent_threshold > 0.0 && raw.intent_threshold < 1.0) {
            return Err(invalid(format!("intent_threshold {} outside (0,1)", raw.intent_threshold)));
        }
        let colors: BTreeMap<String, Rgb> = raw
            .colors
            .into_iter()
            .map(|(k, [r, g, b])| (normalize_phrase(&k), Rgb::new(r, g, b)))
            .collect();
        for basic in BASIC_COLORS {
            if !colors.contains_key(basic) {
                return Err(invalid(format!("color lexicon lacks basic color `{basic}`")));
            }
        }
        let d = &raw.relational_deltas;
        for (name, v) in raw.extent_scale.iter().map(|(k, v)| (k.as_str(), *v)).chain([
            ("bigger", d.bigger),
            ("smaller", d.smaller),
            ("stroke_wider", d.stroke_wider),
            ("darker", d.darker),
            ("lighter", d.lighter),
        ]) {
            if v.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                return Err(invalid(format!("multiplier `{name}` must be positive, got {v}")));
            }
        }
        if raw.sort_default.channel != "x" && raw.sort_default.channel != "y" {
            return Err(invalid("sort_default.channel must be x or y".into()));
        }

        let mut recommendations = Vec::new();
        for r in raw.recommendation {
            let y = SemanticType::parse(&r.y).ok_or_else(|| invalid(format!("unknown type `{}`", r.y)))?;
            let x = r
                .x
                .iter()
                .map(|t| match t.as_str() {
                    "none" => Ok(XPattern::None),
                    other => SemanticType::parse(other)
                        .map(XPattern::Type)
                        .ok_or_else(|| invalid(format!("unknown type `{other}`"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            let chart = ChartType::parse(&r.chart).ok_or_else(|| invalid(format!("unknown chart `{}`", r.chart)))?;
            recommendations.push(RecommendationRule { y, x, chart });
        }

        let lexicon = raw.lexicon;
        let mut patterns = Vec::new();
        for p in raw.pattern {
            let phrase = phrase_tokens(&p.phrase);
            if phrase.len() != p.roles.len() {
                return Err(invalid(format!("pattern `{}` has {} roles", p.phrase, p.roles.len())));
            }
            let roles = p.roles.into_iter().map(|r| (!r.is_empty()).then_some(r)).collect();
            patterns.push(PatternRule { phrase, roles });
        }
        // axis binding patterns: "<column> on the x axis", "x axis to <column>"
        for (axis, role) in &lexicon.axes {
            let axis_toks = phrase_tokens(axis);
            for conn in &lexicon.axis_connectors.before_axis {
                let mut phrase = vec!["<column>".to_string()];
                phrase.extend(phrase_tokens(conn));
                phrase.extend(axis_toks.iter().cloned());
                let mut roles = vec![None; phrase.len()];
                roles[0] = Some(role.clone());
                patterns.push(PatternRule { phrase, roles });
            }
            for conn in &lexicon.axis_connectors.after_axis {
                let mut phrase = axis_toks.clone();
                phrase.extend(phrase_tokens(conn));
                phrase.push("<column>".to_string());
                let mut roles = vec![None; phrase.len()];
                *roles.last_mut().unwrap() = Some(role.clone());
                patterns.push(PatternRule { phrase, roles });
            }
        }

        let mut triggers: Vec<TriggerRule> = raw
            .trigger
            .into_iter()
            .map(|t| TriggerRule {
                phrase: phrase_tokens(&t.phrase),
                intents: t.intents,
                requires: t.requires,
            })
            .collect();
        // "add a trend line", "show the labels", ...
        for (noun, op) in &lexicon.annotation_nouns {
            for verb in &lexicon.creation_verbs {
                for det in ["", "a", "an", "the", "some"] {
                    let phrase = phrase_tokens(&format!("{verb} {det} {noun}"));
                    triggers.push(TriggerRule {
                        phrase,
                        intents: vec![op.clone()],
                        requires: vec![],
                    });
                }
            }
        }
        triggers.dedup();

        Ok(RuleTable {
            version: raw.version,
            intent_threshold: raw.intent_threshold,
            value_index_cap: raw.value_index_cap,
            colors,
            extent_scale: raw.extent_scale,
            qualitative_ranges: raw
                .qualitative_ranges
                .into_iter()
                .map(|(k, [lo, hi])| (k, (lo, hi)))
                .collect(),
            relational_deltas: raw.relational_deltas,
            sort_default: raw.sort_default,
            recommendations,
            lexicon,
            triggers,
            patterns,
        })
    }

    pub fn color(&self, name: &str) -> Option<Rgb> {
        self.colors.get(&normalize_phrase(name)).copied()
    }

    /// Splits a measure keyword like `very large` into (extent, magnitude).
    pub fn measure_keyword(&self, keyword: &str) -> Option<(Option<&str>, &MagnitudeEntry)> {
        let k = keyword.trim();
        let magnitude_of = |word: &str| self.lexicon.magnitudes.values().find(|m| m.keyword == word);
        if let Some(m) = magnitude_of(k) {
            return Some((None, m));
        }
        let (extent, word) = k.rsplit_once(' ')?;
        let m = magnitude_of(word)?;
        let (name, _) = self.extent_scale.get_key_value(extent)?;
        Some((Some(name.as_str()), m))
    }

    /// Every canonical measure keyword, e.g. `large`, `very large`.
    pub fn measure_keywords(&self) -> Vec<String> {
        let mut words: Vec<&str> = self.lexicon.magnitudes.values().map(|m| m.keyword.as_str()).collect();
        words.sort();
        words.dedup();
        let mut out = Vec::new();
        for w in words {
            out.push(w.to_string());
            for e in self.extent_scale.keys() {
                out.push(format!("{e} {w}"));
            }
        }
        out
    }

    pub fn is_range_keyword(&self, keyword: &str) -> bool {
        self.qualitative_ranges.contains_key(keyword)
    }

    /// Relation keywords accepted in relational parameters.
    pub fn relations(&self) -> BTreeSet<&str> {
        self.lexicon
            .relations
            .values()
            .map(|r| r.relation.as_str())
            .chain(self.lexicon.positions.values().map(String::as_str))
            .collect()
    }

    pub fn is_relation(&self, keyword: &str) -> bool {
        self.relations().contains(keyword)
    }

    /// Multiplier applied to a measure for a size-like relation.
    pub fn relation_factor(&self, relation: &str) -> Option<f64> {
        let d = &self.relational_deltas;
        match relation {
            "bigger" => Some(d.bigger),
            "smaller" => Some(d.smaller),
            "wider" => Some(d.stroke_wider),
            "narrower" => Some(1.0 / d.stroke_wider),
            _ => None,
        }
    }

    /// Multiplier a vague measure keyword applies to the current value.
    ///
    /// Growing magnitudes multiply by `1 + s`, shrinking ones divide by it,
    /// where `s` is the extent scale (`moderate` when no extent is given).
    pub fn measure_factor(&self, keyword: &str) -> Option<f64> {
        let (extent, magnitude) = self.measure_keyword(keyword)?;
        let s = *self.extent_scale.get(extent.unwrap_or("moderate"))?;
        Some(match magnitude.direction {
            Direction::Up => 1.0 + s,
            Direction::Down => 1.0 / (1.0 + s),
        })
    }

    pub fn first_recommendation(&self, y: SemanticType, x: Option<SemanticType>) -> Option<ChartType> {
        self.recommendations.iter().find(|r| r.matches(y, x)).map(|r| r.chart)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_rules_hold_reported_constants() {
        let r = RuleTable::builtin();
        assert_eq!(r.color("red"), Some(Rgb::new(255, 0, 0)));
        assert_eq!(r.color("Navy  Blue"), Some(Rgb::new(0, 0, 128)));
        assert_eq!(r.relational_deltas.bigger, 1.2);
        assert_eq!(r.relational_deltas.stroke_wider, 1.5);
        assert_eq!(r.relational_deltas.on_top_offset_px, 10.0);
        assert_eq!(r.intent_threshold, 0.5);
        assert_eq!(r.qualitative_ranges["high"], (Stat::Mean, Stat::Max));
        assert_eq!(r.sort_default.order, SortOrder::Descending);
        assert_eq!(r.sort_default.channel, "y");
        for (k, v) in [("very little", 0.5), ("little", 0.75), ("moderate", 1.0), ("very", 1.5), ("extremely", 2.0)] {
            assert_eq!(r.extent_scale[k], v);
        }
    }

    #[test]
    fn measure_keywords_parse() {
        let r = RuleTable::builtin();
        let (extent, m) = r.measure_keyword("very large").unwrap();
        assert_eq!(extent, Some("very"));
        assert_eq!(m.keyword, "large");
        assert!(r.measure_keyword("very purple").is_none());
        assert_eq!(r.measure_factor("very large"), Some(2.5));
        assert_eq!(r.measure_factor("large"), Some(2.0));
        assert_eq!(r.measure_factor("small"), Some(0.5));
        assert!(r.measure_keywords().contains(&"extremely small".to_string()));
    }

    #[test]
    fn hex_round_trip_and_lightness() {
        let c = Rgb::parse_hex("#1f77b4").unwrap();
        assert_eq!(c.hex(), "#1F77B4");
        for c in [Rgb::new(255, 0, 0), Rgb::new(12, 200, 99), Rgb::new(128, 128, 128)] {
            let (h, s, l) = c.to_hsl();
            assert_eq!(Rgb::from_hsl(h, s, l), c);
        }
        // red at lightness 0.5 -> 0.4
        assert_eq!(Rgb::new(255, 0, 0).scale_lightness(0.8), Rgb::new(204, 0, 0));
        assert_eq!(Rgb::new(0, 0, 0).scale_lightness(0.8), Rgb::new(0, 0, 0));
    }

    #[test]
    fn generated_rules_exist() {
        let r = RuleTable::builtin();
        let has = |p: &[&str]| r.triggers.iter().any(|t| t.phrase == p);
        assert!(has(&["add", "a", "trend", "line"]));
        assert!(r
            .patterns
            .iter()
            .any(|p| p.phrase == ["<column>", "on", "the", "x", "axis"] && p.roles[0].as_deref() == Some("xField")));
    }

    #[test]
    fn rejects_missing_basic_color() {
        let text = BUILTIN.replace("\nred = [255, 0, 0]", "");
        assert!(matches!(RuleTable::from_toml(&text), Err(RulesError::Invalid(_))));
        let text = BUILTIN.replace("intent_threshold = 0.5", "intent_threshold = 1.5");
        assert!(RuleTable::from_toml(&text).is_err());
    }
}
