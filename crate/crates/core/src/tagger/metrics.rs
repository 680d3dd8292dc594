use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use super::bio::chunks;
use super::TaggedUtterance;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{predictions} predictions for {gold} gold records")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error("record {index}: {predicted} predicted labels for {gold} gold labels")]
    TokenMismatch { index: usize, predicted: usize, gold: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    /// Fraction of utterances whose intent set equals the gold set.
    pub intent_accuracy: f64,
    /// Fraction of tokens whose label equals the gold label.
    pub slot_accuracy: f64,
    /// Chunk-level F1; a chunk counts only if span and role both match.
    pub entity_f1: f64,
    pub entity_precision: f64,
    pub entity_recall: f64,
}

/// Chunk-level precision, recall and F1 from raw counts. With no gold and no
/// predicted chunks all three are 1.
pub fn prf(correct: usize, predicted: usize, gold: usize) -> (f64, f64, f64) {
    let p = if predicted == 0 { if gold == 0 { 1.0 } else { 0.0 } } else { correct as f64 / predicted as f64 };
    let r = if gold == 0 { if predicted == 0 { 1.0 } else { 0.0 } } else { correct as f64 / gold as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

pub fn evaluate(predictions: &[TaggedUtterance], gold: &[TaggedUtterance]) -> Result<Metrics, MetricsError> {
    if predictions.len() != gold.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            gold: gold.len(),
        });
    }
    let mut intents_ok = 0usize;
    let mut tokens = 0usize;
    let mut tokens_ok = 0usize;
    let (mut correct, mut predicted, mut expected) = (0usize, 0usize, 0usize);
    for (index, (p, g)) in predictions.iter().zip(gold).enumerate() {
        if p.labels.len() != g.labels.len() {
            return Err(MetricsError::TokenMismatch {
                index,
                predicted: p.labels.len(),
                gold: g.labels.len(),
            });
        }
        if p.intents.names() == g.intents.names() {
            intents_ok += 1;
        }
        tokens += g.labels.len();
        tokens_ok += p.labels.iter().zip(&g.labels).filter(|(a, b)| a == b).count();
        let pc: BTreeSet<_> = chunks(&p.labels).into_iter().collect();
        let gc: BTreeSet<_> = chunks(&g.labels).into_iter().collect();
        correct += pc.intersection(&gc).count();
        predicted += pc.len();
        expected += gc.len();
    }
    let n = gold.len();
    let (entity_precision, entity_recall, entity_f1) = prf(correct, predicted, expected);
    Ok(Metrics {
        intent_accuracy: if n == 0 { 1.0 } else { intents_ok as f64 / n as f64 },
        slot_accuracy: if tokens == 0 { 1.0 } else { tokens_ok as f64 / tokens as f64 },
        entity_f1,
        entity_precision,
        entity_recall,
    })
}
