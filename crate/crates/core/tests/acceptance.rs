//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Run with `cargo test -p talkchart-core --test acceptance`.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use talkchart::abstractor::{abstract_utterance, AbstractedUtterance, BindingSource, FUZZY_MIN_CHARS, FUZZY_THRESHOLD};
use talkchart::action::{Operation, Span};
use talkchart::catalog::Catalog;
use talkchart::corpus::{expand, run_benchmark, Template};
use talkchart::dataset::{Dataset, EntityIndex};
use talkchart::engine::{default_number, geometry, ChartType, Session, Sort, Status, Target};
use talkchart::pipeline::Interpreter;
use talkchart::rules::{Rgb, RuleTable, SortOrder};
use talkchart::synthesizer::{Disposition, Synthesizer, ORPHAN_RANK};
use talkchart::tagger::{evaluate, BioLabel, Intent, IntentSet, ReferenceTagger, TaggedUtterance};

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const SAMPLE_CSV: &str = include_str!("../data/carsales.csv");

fn sample_session() -> Session {
    Session::new(Interpreter::builtin(), Dataset::sample())
}

fn sample_index() -> EntityIndex {
    Dataset::sample().entity_index(RuleTable::builtin().value_index_cap)
}

fn submit(s: &mut Session, text: &str) -> Result<Vec<Status>, String> {
    let sub = s.submit(text).map_err(|e| format!("{text}: {e}"))?;
    Ok(sub.outcome.statuses)
}

fn all_success(s: &mut Session, text: &str) -> Check {
    let st = submit(s, text)?;
    ensure!(!st.is_empty() && st.iter().all(Status::is_success), "`{text}` -> {st:?}");
    Ok(())
}

// ---------------------------------------------------------------------------

fn golden_utterances() -> Check {
    let interp = Interpreter::builtin();
    let index = sample_index();
    let cases: [(&str, &[&str]); 6] = [
        ("turn the red line blue", &["{setColor, [shape=line, color=red], color=blue}"]),
        ("add black stroke to the abc bar", &["{setStroke, [shape=bar, *='abc'], stroke=black}"]),
        ("make it really large", &["{setSize, *, size=very.large}"]),
        ("make the title darker", &["{setColor, title, color=self[darker]}"]),
        ("place the legend on the right of the plot area", &["{place, legend, position=plot[right]}"]),
        ("Sales by year", &["{bindY, yAxis, field=Sales}", "{bindX, xAxis, field=Year}"]),
    ];
    for (text, expected) in cases {
        let got = interp.interpret(text, &index).sequence.canonical();
        ensure!(got == expected, "`{text}`: expected {expected:?}, got {got:?}");
    }
    let mut s = sample_session();
    let st = submit(&mut s, "Sales by year")?;
    let recommended = |x: &Status| matches!(x, Status::Recommended { defaults } if defaults.iter().any(|d| d == "chartType=bar"));
    ensure!(st.len() == 2 && st.iter().all(Status::is_success), "statuses {st:?}");
    ensure!(recommended(&st[1]), "last status {:?} does not recommend a bar chart", st[1]);
    ensure!(s.active_chart().chart_type == Some(ChartType::Bar), "chart type {:?}", s.active_chart().chart_type);
    Ok(())
}

fn numeric_rules() -> Check {
    let rules = RuleTable::builtin();
    ensure!(rules.color("red") == Some(Rgb::new(255, 0, 0)), "red = {:?}", rules.color("red"));

    let mut s = sample_session();
    all_success(&mut s, "sales by brand")?;
    all_success(&mut s, "make the title red")?;
    let title = Target::Component("title".into());
    let chart = s.active_chart().clone();
    let view = s.view(&chart.id).unwrap();
    ensure!(chart.components["title"].color == Some(Rgb::new(255, 0, 0)), "title color {:?}", chart.components["title"].color);
    let before = chart.components["title"].size.unwrap_or_else(|| default_number(&chart, &title, "size", &view));
    all_success(&mut s, "make it bigger")?;
    let after = s.active_chart().components["title"].size;
    ensure!(after == Some(before * 1.2), "size {before} -> {after:?}, expected x1.2");

    // placement on a bar: anchor top minus 10px
    all_success(&mut s, "add a note 'best seller' on the top of the Ford bar")?;
    let chart = s.active_chart();
    let view = s.view(&chart.id).unwrap();
    let bar = geometry(chart, &Target::Datum("Ford".into()), &view).ok_or("no Ford bar")?;
    let note = chart.annotations.last().ok_or("no annotation")?;
    let expected = (bar.x + bar.w / 2.0, bar.y - 10.0);
    ensure!(note.props.position == Some(expected), "note at {:?}, expected {expected:?}", note.props.position);

    // bare sort: y field, descending
    let st = submit(&mut s, "sort")?;
    ensure!(st.iter().all(Status::is_success), "sort -> {st:?}");
    let want = Sort {
        field: "Sales".into(),
        order: SortOrder::Descending,
    };
    ensure!(s.active_chart().sort.as_ref() == Some(&want), "sort {:?}", s.active_chart().sort);

    // high over Sales = (mean, max) of the rows
    let sales: Vec<f64> = SAMPLE_CSV.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().parse().unwrap()).collect();
    let mean = sales.iter().sum::<f64>() / sales.len() as f64;
    let max = sales.iter().cloned().fold(f64::MIN, f64::max);
    all_success(&mut s, "add a reference band for high sales")?;
    let band = s.active_chart().annotations.last().and_then(|a| a.range).ok_or("no band range")?;
    ensure!(
        (band.0 - mean).abs() <= 1e-9 && (band.1 - max).abs() <= 1e-9,
        "band {band:?}, oracle ({mean}, {max})"
    );

    // wider stroke on a line chart
    all_success(&mut s, "change to line chart")?;
    let chart = s.active_chart().clone();
    let view = s.view(&chart.id).unwrap();
    let mark = Target::Component("mark".into());
    let before = chart.components.get("mark").and_then(|p| p.stroke_width).unwrap_or_else(|| default_number(&chart, &mark, "strokeWidth", &view));
    all_success(&mut s, "make the line stroke wider")?;
    let after = s.active_chart().components["mark"].stroke_width;
    ensure!(after == Some(before * 1.5), "stroke width {before} -> {after:?}, expected x1.5");
    Ok(())
}

// ---------------------------------------------------------------------------
// Stage 1

const WORDS: &[&str] = &[
    "show", "the", "make", "bars", "red", "by", "of", "and", "sales", "total", "unit", "price", "brand", "region",
    "north", "south", "east", "west", "model", "year", "car", "green", "alpha", "beta", "delta", "omega", "market",
    "share", "profit", "margin", "city", "state", "revenue", "count", "united", "states", "new", "york",
];

fn phrase(rng: &mut ChaCha8Rng, max_words: usize) -> String {
    let n = rng.random_range(1..=max_words);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

fn random_schema(rng: &mut ChaCha8Rng) -> Dataset {
    let mut headers: Vec<String> = Vec::new();
    let ncols = rng.random_range(1..=4);
    while headers.len() < ncols {
        let h = capitalize(&phrase(rng, 3));
        if !headers.iter().any(|x| x.eq_ignore_ascii_case(&h)) {
            headers.push(h);
        }
    }
    let nrows = rng.random_range(1..=5);
    let rows = (0..nrows)
        .map(|_| headers.iter().map(|_| Some(capitalize(&phrase(rng, 2)))).collect())
        .collect();
    Dataset::new(&phrase(rng, 2), headers, rows).unwrap()
}

fn typo(rng: &mut ChaCha8Rng, s: &str) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    let i = rng.random_range(0..chars.len());
    chars[i] = ['x', 'q', 'z'][rng.random_range(0..3)];
    chars.into_iter().collect()
}

fn random_utterance(rng: &mut ChaCha8Rng, ds: &Dataset) -> String {
    let mut entities: Vec<String> = ds.columns.iter().map(|c| c.name.clone()).collect();
    entities.extend(ds.rows.iter().flatten().flatten().cloned());
    entities.push(ds.name.clone());
    let n = rng.random_range(1..=8);
    let mut parts = Vec::new();
    for _ in 0..n {
        let part = match rng.random_range(0..10) {
            0..=3 => WORDS.choose(rng).unwrap().to_string(),
            4..=6 => entities.choose(rng).unwrap().to_lowercase(),
            7 => {
                let e = entities.choose(rng).unwrap().clone();
                typo(rng, &e)
            }
            8 => rng.random_range(0..3000).to_string(),
            _ => {
                // fragment of a multi-word entity
                let e = entities.choose(rng).unwrap();
                let ws: Vec<&str> = e.split(' ').collect();
                let a = rng.random_range(0..ws.len());
                ws[a..rng.random_range(a + 1..=ws.len())].join(" ")
            }
        };
        parts.push(part);
    }
    parts.join(" ")
}

/// Keys of the index an n-gram matches, by brute force over every key.
fn oracle_matches(window: &str, ds: &Dataset) -> Vec<(String, f64)> {
    let mut keys: Vec<String> = ds.columns.iter().map(|c| c.name.clone()).collect();
    keys.extend(ds.rows.iter().flatten().flatten().cloned());
    keys.push(ds.name.clone());
    keys.iter()
        .filter_map(|k| {
            let key = k.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ");
            let score = if key == window {
                1.0
            } else if window.chars().count() >= FUZZY_MIN_CHARS {
                strsim::normalized_levenshtein(window, &key)
            } else {
                0.0
            };
            (score >= FUZZY_THRESHOLD).then(|| (k.clone(), score))
        })
        .collect()
}

#[derive(Default)]
struct Stage1Coverage {
    multi_word: usize,
    fuzzy: usize,
    literal: usize,
}

fn check_stage1(text: &str, ds: &Dataset, seen: &mut Stage1Coverage) -> Check {
    let index = ds.entity_index(10_000);
    let a = abstract_utterance(text, &index);
    seen.multi_word += a.bindings.iter().any(|b| b.span.len() > 1) as usize;
    seen.fuzzy += a.bindings.iter().any(|b| b.match_score < 1.0) as usize;
    seen.literal += a.bindings.iter().any(|b| b.source == BindingSource::Literal) as usize;
    ensure!(a == abstract_utterance(text, &index), "nondeterministic on `{text}`");
    let words: Vec<&str> = text.split(' ').collect();
    ensure!(a.tokens.len() == words.len(), "tokenization of `{text}`");
    let reconstructed = a.reconstruct();
    ensure!(reconstructed == words, "reconstruct {reconstructed:?} != {words:?}");

    for w in a.bindings.windows(2) {
        ensure!(w[0].span.end <= w[1].span.start, "overlapping or unsorted bindings in `{text}`: {:?}", a.bindings);
    }
    let covered: usize = a.bindings.iter().map(|b| b.span.len() - 1).sum();
    ensure!(a.abstracted_tokens.len() + covered == words.len(), "placeholder count in `{text}`");

    let lower: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
    for b in &a.bindings {
        if let BindingSource::Entity(_) = b.source {
            let window = lower[b.span.start..b.span.end].join(" ");
            let hits = oracle_matches(&window, ds);
            ensure!(hits.iter().any(|(k, _)| *k == b.canonical), "`{window}` bound to {} but oracle says {hits:?}", b.canonical);
            let best = hits.iter().map(|h| h.1).fold(0.0, f64::max);
            ensure!((b.match_score - best).abs() < 1e-12, "`{window}` score {} vs oracle best {best}", b.match_score);
        }
    }
    // longest-match dominance: every matching n-gram is bound, or is blocked
    // by an overlapping binding at least as long
    for n in 1..=words.len() {
        for start in 0..=words.len() - n {
            let span = Span::new(start, start + n);
            let window = lower[start..start + n].join(" ");
            if oracle_matches(&window, ds).is_empty() {
                continue;
            }
            let bound = a.bindings.iter().any(|b| b.span == span && matches!(b.source, BindingSource::Entity(_)));
            let blocked = a.bindings.iter().any(|b| {
                b.span.overlaps(&span) && matches!(b.source, BindingSource::Entity(_)) && b.span.len() >= n
            });
            ensure!(bound || blocked, "`{window}` at {span:?} matches but is neither bound nor dominated in `{text}`: {:?}", a.bindings);
        }
    }
    Ok(())
}

fn stage1_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut seen = Stage1Coverage::default();
    for case in 0..1000 {
        let ds = random_schema(&mut rng);
        let text = random_utterance(&mut rng, &ds);
        check_stage1(&text, &ds, &mut seen).map_err(|e| format!("case {case}: {e}"))?;
    }
    ensure!(
        seen.multi_word >= 100 && seen.fuzzy >= 50 && seen.literal >= 50,
        "weak coverage: {} multi-word, {} fuzzy, {} literal cases",
        seen.multi_word,
        seen.fuzzy,
        seen.literal
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// Stage 3

const SURFACES: &[&str] = &[
    "red", "blue", "green", "bar", "bars", "line", "title", "legend", "10", "2.5", "Ford", "china", "US", "bigger",
    "very", "large", "top", "right", "descending", "sum", "year", "month", "bold", "and", "the", "to", "of", "it",
    "abc", "Sales", "left", "darker", "hide",
];

fn random_tagged(rng: &mut ChaCha8Rng, catalog: &Catalog) -> TaggedUtterance {
    let n = rng.random_range(1..=12);
    let text: Vec<&str> = (0..n).map(|_| *SURFACES.choose(rng).unwrap()).collect();
    let abstracted = AbstractedUtterance::plain(&text.join(" "));
    let roles: Vec<&str> = catalog.entity_roles().map(|r| r.name.as_str()).collect();
    let mut labels = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if rng.random_bool(0.45) {
            labels.push(BioLabel::outside());
            i += 1;
            continue;
        }
        let role = *roles.choose(rng).unwrap();
        let len = rng.random_range(1..=3).min(n - i);
        labels.push(BioLabel::begin(role));
        for _ in 1..len {
            labels.push(BioLabel::inside(role));
        }
        i += len;
    }
    let ops: Vec<&str> = catalog.operations().iter().map(|o| o.name.as_str()).collect();
    let k = rng.random_range(0..=3);
    let intents = (0..k)
        .map(|_| Intent {
            name: ops.choose(rng).unwrap().to_string(),
            score: 1.0,
            span: if rng.random_bool(0.8) {
                let s = rng.random_range(0..n);
                Some(Span::new(s, s + 1))
            } else {
                None
            },
        })
        .collect();
    TaggedUtterance {
        abstracted,
        intents: IntentSet::new(intents, 0.5),
        labels,
    }
}

fn check_synthesis(t: &TaggedUtterance, synth: &Synthesizer, catalog: &Catalog, seen: &mut BTreeSet<String>) -> Check {
    let seq = synth.synthesize(t);
    for a in &seq.trace.actions {
        seen.insert(format!("{:?}", a.rule));
    }
    for c in &seq.trace.candidates {
        seen.insert(format!("{:?}", c.disposition).split([' ', '{']).next().unwrap().to_string());
    }
    ensure!(seq == synth.synthesize(t), "nondeterministic");
    let chunks = t.chunks();
    let trace = &seq.trace;
    ensure!(trace.candidates.len() == chunks.len(), "{} candidates for {} chunks", trace.candidates.len(), chunks.len());
    ensure!(trace.actions.len() == seq.actions.len(), "trace/action length mismatch");

    // conservation: every candidate lands in exactly one place
    let mut used = vec![0usize; chunks.len()];
    for a in &trace.actions {
        for &id in a.objects.iter().chain(&a.parameters).chain(&a.folded) {
            ensure!(id < chunks.len(), "trace refers to candidate {id}");
            used[id] += 1;
        }
    }
    for (id, (c, chunk)) in trace.candidates.iter().zip(&chunks).enumerate() {
        ensure!(c.candidate.span == chunk.span && c.candidate.role == chunk.role, "candidate {id} differs from its chunk");
        let home = match &c.disposition {
            Disposition::Consumed { intent } => {
                ensure!(t.intents.names().contains(intent.as_str()), "candidate {id} consumed by absent intent {intent}");
                trace.actions.iter().filter(|a| a.intent.as_deref() == Some(intent)).any(|a| a.objects.contains(&id) || a.parameters.contains(&id))
            }
            Disposition::Folded { action } => trace.actions.get(*action).is_some_and(|a| a.folded.contains(&id)),
            Disposition::Orphan { action } => trace.actions.get(*action).is_some_and(|a| a.objects.contains(&id) || a.parameters.contains(&id)),
        };
        ensure!(home, "candidate {id} ({:?}) not found where its disposition points", c.disposition);
        ensure!(used[id] >= 1, "candidate {id} is unused");
    }
    // duplication never shares a parameter candidate
    let mut param_uses = vec![0usize; chunks.len()];
    for a in &trace.actions {
        for &id in &a.parameters {
            param_uses[id] += 1;
        }
    }
    ensure!(param_uses.iter().all(|&u| u <= 1), "a parameter candidate is used twice: {param_uses:?}");

    // ordering: brute-force stable sort by (category rank, span start)
    let key = |i: usize| {
        let a = &seq.actions[i];
        let rank = match &a.operation {
            Operation::Star => ORPHAN_RANK,
            op => catalog.category_of(op.name().unwrap()).unwrap().rank(),
        };
        (rank, a.source_span.start)
    };
    let mut sorted: Vec<usize> = (0..seq.actions.len()).collect();
    sorted.sort_by_key(|&i| key(i));
    ensure!(sorted == (0..seq.actions.len()).collect::<Vec<_>>(), "order {:?} is not sorted by (rank, span)", (0..seq.actions.len()).map(key).collect::<Vec<_>>());
    Ok(())
}

fn synthesis_properties() -> Check {
    let catalog = Catalog::builtin();
    let synth = Synthesizer::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut seen = BTreeSet::new();
    for case in 0..1000 {
        let t = random_tagged(&mut rng, catalog);
        check_synthesis(&t, &synth, catalog, &mut seen).map_err(|e| format!("case {case} {:?} {:?}: {e}", t.abstracted.original, t.labels.iter().map(|l| l.to_string()).collect::<Vec<_>>()))?;
    }
    for rule in ["Matched", "Duplicated", "Orphan", "Consumed", "Folded"] {
        ensure!(seen.contains(rule), "no case exercised {rule}; saw {seen:?}");
    }
    let got = Interpreter::builtin().interpret("change color of china and US bar to green and blue", &sample_index()).sequence.canonical();
    let want = ["{setColor, [value='china', shape=bar], color=green}", "{setColor, [value='US', shape=bar], color=blue}"];
    ensure!(got == want, "pairing: got {got:?}");
    Ok(())
}

// ---------------------------------------------------------------------------

fn tagger_benchmark() -> Check {
    let ds = Dataset::sample();
    let rules = RuleTable::builtin();
    let records = expand(&Template::builtin(), &ds, Catalog::builtin(), rules, 2000, 7).map_err(|e| e.to_string())?;
    ensure!(records.len() == 2000, "expanded {} records", records.len());
    let report = run_benchmark(&ReferenceTagger::builtin(), &records, &ds.entity_index(rules.value_index_cap)).map_err(|e| e.to_string())?;
    let m = report.metrics;
    ensure!(
        m.intent_accuracy >= 0.99 && m.entity_f1 >= 0.99 && m.slot_accuracy >= 0.99,
        "intent {:.4} slot {:.4} entity F1 {:.4}",
        m.intent_accuracy,
        m.slot_accuracy,
        m.entity_f1
    );
    Ok(())
}

const SCRIPT: [&str; 20] = [
    "sales by brand",
    "make the title red",
    "make it bigger",
    "sort descending",
    "turn the bars blue",
    "add a trend line in green",
    "make the Ford bar orange",
    "add a note 'top seller' on the top of the Ford bar",
    "hide the legend",
    "rename the title to 'Car sales'",
    "add a reference band for high sales",
    "make the title italic",
    "change to line chart",
    "make the line stroke wider",
    "change to bar chart",
    "filter to Japan",
    "add a new chart",
    "price by year",
    "make it smaller",
    "make the title darker",
];

fn run_script() -> Result<(Session, String), String> {
    let mut s = sample_session();
    for text in SCRIPT {
        submit(&mut s, text)?;
    }
    let specs = all_specs(&s)?;
    Ok((s, specs))
}

fn all_specs(s: &Session) -> Result<String, String> {
    let mut out = String::new();
    for c in s.charts() {
        out.push_str(&s.export_spec(&c.id).map_err(|e| e.to_string())?.to_json());
    }
    Ok(out)
}

fn determinism_and_replay() -> Check {
    let (first, specs) = run_script()?;
    let (second, again) = run_script()?;
    ensure!(specs == again, "two runs from scratch differ");
    ensure!(first.history_log() == second.history_log(), "history logs differ between runs");
    ensure!(first.history().len() == 20, "history has {} entries", first.history().len());
    let successes = first.charts().iter().map(|c| c.version).sum::<u64>();
    ensure!(successes >= 20, "script applied only {successes} edits");
    let replayed = Session::replay(Interpreter::builtin(), Dataset::sample(), &first.history_log()).map_err(|e| e.to_string())?;
    ensure!(all_specs(&replayed)? == specs, "replayed spec differs");
    Ok(())
}

// ---------------------------------------------------------------------------

fn tagged(words: &str, labels: &str, intents: &[&str]) -> TaggedUtterance {
    let abstracted = AbstractedUtterance::plain(words);
    let labels: Vec<BioLabel> = labels.split(' ').map(|l| l.parse().unwrap()).collect();
    assert_eq!(abstracted.len(), labels.len(), "{words}");
    TaggedUtterance {
        abstracted,
        intents: IntentSet::from_names(intents),
        labels,
    }
}

struct HandCase {
    gold: Vec<TaggedUtterance>,
    predicted: Vec<TaggedUtterance>,
    intent_accuracy: f64,
    slot_accuracy: f64,
    entity_f1: f64,
}

fn hand_cases() -> Vec<HandCase> {
    let g = |w, l, i| tagged(w, l, i);
    vec![
        // perfect predictions
        HandCase {
            gold: vec![
                g("make it red", "O O B-color", &["setColor"]),
                g("sort", "O", &["sort"]),
                g("hide the legend", "B-visibility O B-component", &["setVisible"]),
                g("make it really large", "O O B-extent I-extent", &["setSize"]),
                g("hello", "O", &[]),
            ],
            predicted: vec![
                g("make it red", "O O B-color", &["setColor"]),
                g("sort", "O", &["sort"]),
                g("hide the legend", "B-visibility O B-component", &["setVisible"]),
                g("make it really large", "O O B-extent I-extent", &["setSize"]),
                g("hello", "O", &[]),
            ],
            // 5/5 intents, 12/12 tokens, 5 chunks all correct
            intent_accuracy: 1.0,
            slot_accuracy: 1.0,
            entity_f1: 1.0,
        },
        HandCase {
            gold: vec![
                g("turn the red line blue", "O O B-color B-shape B-color", &["setColor"]),
                g("make it bigger", "O O B-extent", &["setSize"]),
                g("sort by sales", "O O B-field", &["sort"]),
                g("color the bars green", "O O B-shape B-color", &["setColor"]),
                g("show sales by year", "O B-yField O B-xField", &["bindX", "bindY"]),
            ],
            predicted: vec![
                // one color chunk missed
                g("turn the red line blue", "O O O B-shape B-color", &["setColor"]),
                // wrong intent, right labels
                g("make it bigger", "O O B-extent", &["resize"]),
                // extra intent
                g("sort by sales", "O O B-field", &["sort", "filter"]),
                // role confusion on one chunk
                g("color the bars green", "O O B-shape B-stroke", &["setColor"]),
                // extra chunk
                g("show sales by year", "B-visibility B-yField O B-xField", &["bindX", "bindY"]),
            ],
            // intents: 1,0,0,1,1 = 3/5
            // tokens: 5+3+3+4+4 = 19; wrong: red, green, show = 16/19
            intent_accuracy: 3.0 / 5.0,
            slot_accuracy: 16.0 / 19.0,
            // gold: {red,line,blue}=3, {bigger}=1, {sales}=1, {bars,green}=2, {sales,year}=2 -> 9
            // predicted: {line,blue}=2, {bigger}=1, {sales}=1, {bars,green:stroke}=2, {show,sales,year}=3 -> 9
            // correct: 2 + 1 + 1 + 1 + 2 = 7; P = 7/9, R = 7/9, F1 = 7/9
            entity_f1: 7.0 / 9.0,
        },
        HandCase {
            gold: vec![
                g("make the title really big", "O O B-component B-extent I-extent", &["setSize"]),
                g("add a trend line", "O O O O", &["addTrendLine"]),
                g("place the legend on the right", "O O B-component O O B-position", &["place"]),
                g("a b", "O O", &[]),
                g("move it up", "O O B-direction", &["move"]),
            ],
            predicted: vec![
                // chunk boundary wrong: "really" alone
                g("make the title really big", "O O B-component B-extent O", &["setSize"]),
                // spurious chunk
                g("add a trend line", "O O B-shape I-shape", &["addTrendLine"]),
                // everything missed
                g("place the legend on the right", "O O O O O O", &[]),
                g("a b", "O O", &["sort"]),
                g("move it up", "O O B-direction", &["move"]),
            ],
            // intents: 1,1,0,0,1 = 3/5
            // tokens 5+4+6+2+3 = 20; wrong: big(1), trend(1), line(1), legend(1), right(1) = 15/20
            intent_accuracy: 3.0 / 5.0,
            slot_accuracy: 15.0 / 20.0,
            // gold chunks: 2 + 0 + 2 + 0 + 1 = 5; predicted: 2 + 1 + 0 + 0 + 1 = 4
            // correct: title, up = 2; P = 2/4, R = 2/5, F1 = 2*(1/2)(2/5)/(1/2+2/5) = 4/9
            entity_f1: 4.0 / 9.0,
        },
    ]
}

fn metrics_oracle() -> Check {
    for (i, c) in hand_cases().into_iter().enumerate() {
        let m = evaluate(&c.predicted, &c.gold).map_err(|e| e.to_string())?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        ensure!(
            close(m.intent_accuracy, c.intent_accuracy) && close(m.slot_accuracy, c.slot_accuracy) && close(m.entity_f1, c.entity_f1),
            "case {i}: got intent {} slot {} f1 {}, hand-computed {} {} {}",
            m.intent_accuracy,
            m.slot_accuracy,
            m.entity_f1,
            c.intent_accuracy,
            c.slot_accuracy,
            c.entity_f1
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Check, Duration); 7] = [
        ("golden utterance fixtures", golden_utterances, Duration::from_secs(1)),
        ("numeric rule checks", numeric_rules, Duration::from_secs(10)),
        ("stage-1 properties (1000 cases)", stage1_properties, Duration::from_secs(10)),
        ("synthesis properties (1000 cases)", synthesis_properties, Duration::from_secs(10)),
        ("tagger benchmark (2000 records)", tagger_benchmark, Duration::from_secs(120)),
        ("determinism and replay", determinism_and_replay, Duration::from_secs(30)),
        ("metrics oracle", metrics_oracle, Duration::from_secs(1)),
    ];
    let mut failed = BTreeSet::new();
    for (name, check, budget) in criteria {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let result = result.and_then(|()| {
            if took > budget {
                Err(format!("took {took:?}, budget {budget:?}"))
            } else {
                Ok(())
            }
        });
        match result {
            Ok(()) => println!("PASS  {name}  ({:.2?})", took),
            Err(e) => {
                println!("FAIL  {name}  ({:.2?}): {e}", took);
                failed.insert(name);
            }
        }
    }
    if !failed.is_empty() {
        println!("{} of 7 acceptance criteria failed", failed.len());
        std::process::exit(1);
    }
    println!("all 7 acceptance criteria passed");
}
