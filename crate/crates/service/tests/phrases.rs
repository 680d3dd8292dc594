use talkchart::dataset::Dataset;
use talkchart::pipeline::Interpreter;
use talkchart_service::suggest::SuggestionIndex;

#[test]
fn every_shipped_phrase_is_understood() {
    let interp = Interpreter::builtin();
    let index = Dataset::sample().entity_index(interp.rules.value_index_cap);
    for p in SuggestionIndex::builtin().phrases() {
        let i = interp.interpret(&p.phrase, &index);
        assert!(!i.tagged.intents.is_empty(), "`{}` has no intent", p.phrase);
        assert!(!i.sequence.actions.is_empty(), "`{}` has no action", p.phrase);
    }
}
