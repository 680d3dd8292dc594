//! Stage 2: intent detection and BIO entity labeling.
//!
//! [`Tagger`] is the contract any tagger fulfils; [`ReferenceTagger`] is the
//! deterministic lexicon-and-pattern implementation shipped with the crate.

mod bio;
mod metrics;
mod reference;

use std::collections::BTreeSet;

use serde::Serialize;

use crate::abstractor::AbstractedUtterance;
use crate::action::Span;
use crate::catalog::Catalog;

pub use bio::{chunks, is_well_formed, labels_from_chunks, BioLabel, Chunk, Prefix};
pub use metrics::{evaluate, prf, Metrics, MetricsError};
pub use reference::{check_rules, ReferenceTagger};
pub(crate) use reference::is_name_like as reference_is_name_like;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Intent {
    pub name: String,
    pub score: f64,
    /// Abstracted-token span of the phrase that signalled the intent.
    pub span: Option<Span>,
}

/// Detected intents in utterance order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IntentSet {
    entries: Vec<Intent>,
}

impl IntentSet {
    /// Keeps intents scoring above `threshold`, one entry per name (the
    /// earliest), ordered by span start; intents without a span come last.
    pub fn new(intents: Vec<Intent>, threshold: f64) -> IntentSet {
        let mut entries: Vec<Intent> = Vec::new();
        for i in intents.into_iter().filter(|i| i.score > threshold) {
            match entries.iter_mut().find(|e| e.name == i.name) {
                Some(e) => {
                    let earlier = match (i.span, e.span) {
                        (Some(a), Some(b)) => a.start < b.start,
                        (Some(_), None) => true,
                        _ => false,
                    };
                    if earlier {
                        *e = i;
                    }
                }
                None => entries.push(i),
            }
        }
        entries.sort_by_key(|e| e.span.map(|s| (0, s.start)).unwrap_or((1, 0)));
        IntentSet { entries }
    }

    /// Intents known only by name, at full confidence.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> IntentSet {
        IntentSet::new(
            names
                .iter()
                .map(|n| Intent {
                    name: n.as_ref().to_string(),
                    score: 1.0,
                    span: None,
                })
                .collect(),
            0.0,
        )
    }

    pub fn names(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Intent> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaggedUtterance {
    pub abstracted: AbstractedUtterance,
    pub intents: IntentSet,
    /// One label per abstracted token.
    pub labels: Vec<BioLabel>,
}

impl TaggedUtterance {
    pub fn chunks(&self) -> Vec<Chunk> {
        chunks(&self.labels)
    }

    /// Checks the output contract against a catalog.
    pub fn validate(&self, catalog: &Catalog) -> Result<(), String> {
        if self.labels.len() != self.abstracted.len() {
            return Err(format!(
                "{} labels for {} tokens",
                self.labels.len(),
                self.abstracted.len()
            ));
        }
        if !is_well_formed(&self.labels) {
            return Err("labels are not well-formed BIO".into());
        }
        for l in &self.labels {
            if !l.is_outside() && catalog.entity_role(&l.role).is_none() {
                return Err(format!("unknown entity role `{}`", l.role));
            }
        }
        for i in self.intents.iter() {
            if catalog.operation(&i.name).is_none() {
                return Err(format!("unknown intent `{}`", i.name));
            }
        }
        Ok(())
    }
}

/// The Stage 2 contract.
pub trait Tagger {
    fn name(&self) -> &str;
    fn version(&self) -> &str;
    fn tag(&self, abstracted: &AbstractedUtterance) -> TaggedUtterance;
}
