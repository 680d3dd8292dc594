//! Natural-language chart editing.
//!
//! An utterance goes through three stages: [`abstractor`] replaces dataset
//! entities and literals with placeholders, a [`tagger::Tagger`] detects
//! intents and labels entity spans, and [`synthesizer`] assembles
//! [`action::EditingAction`]s. The [`engine`] executes actions against a
//! chart session and exports a chart-spec document.

pub mod abstractor;
pub mod action;
pub mod corpus;
pub mod catalog;
pub mod dataset;
pub mod engine;
pub mod pipeline;
pub mod rules;
pub mod synthesizer;
pub mod tagger;
pub mod text;
