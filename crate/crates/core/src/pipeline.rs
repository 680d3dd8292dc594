//! The three interpreter stages wired together.

use std::sync::Arc;

use serde::Serialize;

use crate::abstractor::{abstract_utterance, AbstractedUtterance};
use crate::catalog::Catalog;
use crate::dataset::EntityIndex;
use crate::rules::RuleTable;
use crate::synthesizer::{ActionSequence, SynthesisTrace, Synthesizer};
use crate::tagger::{check_rules, ReferenceTagger, TaggedUtterance, Tagger};

/// Catalog and rule table shared by every session.
#[derive(Debug, Clone)]
pub struct Interpreter {
    pub catalog: Catalog,
    pub rules: RuleTable,
}

/// Everything the interpreter derived from one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpretation {
    pub tagged: TaggedUtterance,
    pub sequence: ActionSequence,
}

/// Serializable view of an interpretation for `--explain` and the HTTP API.
#[derive(Debug, Clone, Serialize)]
pub struct Explanation<'a> {
    pub tokens: Vec<&'a str>,
    pub abstracted: &'a [String],
    pub labels: Vec<String>,
    pub bindings: &'a [crate::abstractor::Binding],
    pub intents: &'a crate::tagger::IntentSet,
    pub synthesis: &'a SynthesisTrace,
}

impl Interpreter {
    pub fn new(catalog: Catalog, rules: RuleTable) -> Result<Interpreter, String> {
        check_rules(&rules, &catalog)?;
        Ok(Interpreter { catalog, rules })
    }

    pub fn builtin() -> Arc<Interpreter> {
        Arc::new(Interpreter {
            catalog: Catalog::builtin().clone(),
            rules: RuleTable::builtin().clone(),
        })
    }

    pub fn tagger(&self) -> ReferenceTagger<'_> {
        ReferenceTagger::new(&self.rules)
    }

    pub fn abstract_text(&self, text: &str, index: &EntityIndex) -> AbstractedUtterance {
        abstract_utterance(text, index)
    }

    pub fn interpret(&self, text: &str, index: &EntityIndex) -> Interpretation {
        self.interpret_with(&self.tagger(), text, index)
    }

    /// Runs the pipeline with a caller-supplied Stage 2.
    pub fn interpret_with(&self, tagger: &dyn Tagger, text: &str, index: &EntityIndex) -> Interpretation {
        let abstracted = self.abstract_text(text, index);
        let tagged = tagger.tag(&abstracted);
        let sequence = Synthesizer::new(&self.catalog, &self.rules).synthesize(&tagged);
        Interpretation { tagged, sequence }
    }
}

impl Interpretation {
    pub fn explain(&self) -> Explanation<'_> {
        let a = &self.tagged.abstracted;
        Explanation {
            tokens: a.tokens.iter().map(|t| t.text.as_str()).collect(),
            abstracted: &a.abstracted_tokens,
            labels: self.tagged.labels.iter().map(|l| l.to_string()).collect(),
            bindings: &a.bindings,
            intents: &self.tagged.intents,
            synthesis: &self.sequence.trace,
        }
    }
}
