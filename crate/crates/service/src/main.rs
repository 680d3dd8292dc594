use std::io::{BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use talkchart::catalog::Catalog;
use talkchart::corpus::{expand, read_jsonl, run_benchmark, write_jsonl, Template};
use talkchart::dataset::Dataset;
use talkchart::engine::Session;
use talkchart::pipeline::Interpreter;
use talkchart::rules::RuleTable;
use talkchart::tagger::ReferenceTagger;
use talkchart_service::api::{router, AppState};
use talkchart_service::repl::Repl;
use talkchart_service::suggest::SuggestionIndex;

#[derive(Debug, Parser)]
#[command(name = "talkchart", version, about = "Edit charts with natural language")]
struct Cli {
    /// CSV file to work on; defaults to the bundled car sales sample.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Seed for corpus generation.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Interactive editing loop (the default).
    Repl {
        /// Print the parse trace of every utterance.
        #[arg(long)]
        explain: bool,
        /// Rewrite this file with the active chart spec after every change.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory for uploaded datasets and session snapshots.
        #[arg(long)]
        data_dir: Option<PathBuf>,
    },
    /// Generate a labelled corpus as JSON lines.
    Corpus {
        #[arg(long, default_value_t = 2000)]
        count: usize,
        /// Template file; defaults to the shipped templates.
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score the reference tagger on a corpus.
    Bench {
        #[arg(long, default_value_t = 2000)]
        count: usize,
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Score an existing JSON-lines corpus instead of generating one.
        #[arg(long)]
        records: Option<PathBuf>,
    },
}

fn load_dataset(path: Option<&Path>) -> anyhow::Result<Dataset> {
    match path {
        Some(p) => Dataset::load_csv(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(Dataset::sample()),
    }
}

fn load_templates(path: Option<&Path>) -> anyhow::Result<Vec<Template>> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Template::parse_file(&text, Catalog::builtin()).with_context(|| format!("parsing {}", p.display()))
        }
        None => Ok(Template::builtin()),
    }
}

fn repl(data: Option<&Path>, explain: bool, out: Option<PathBuf>) -> anyhow::Result<()> {
    let ds = load_dataset(data)?;
    let mut repl = Repl::new(Session::new(Interpreter::builtin(), ds));
    repl.explain = explain;
    repl.out = out;
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout();
    let interactive = stdin.is_terminal();
    if interactive {
        let cols: Vec<&str> = repl.session.dataset().columns.iter().map(|c| c.name.as_str()).collect();
        writeln!(stdout, "columns: {}  (:help for commands)", cols.join(", "))?;
    }
    let mut lines = stdin.lock().lines();
    loop {
        if interactive {
            write!(stdout, "> ")?;
            stdout.flush()?;
        }
        let Some(line) = lines.next() else { break };
        if repl.handle(&line?, &mut stdout)? == talkchart_service::repl::Step::Quit {
            break;
        }
    }
    Ok(())
}

async fn serve(data: Option<&Path>, port: u16, data_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let state = Arc::new(AppState::new(Interpreter::builtin(), SuggestionIndex::builtin()));
    if let Some(dir) = &data_dir {
        state.restore(dir).with_context(|| format!("restoring {}", dir.display()))?;
    }
    if let Some(p) = data {
        let id = state.add_dataset(load_dataset(Some(p))?);
        eprintln!("loaded {} as dataset {id}", p.display());
    }
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
        .await
        .with_context(|| format!("binding port {port}"))?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::clone(&state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    if let Some(dir) = &data_dir {
        state.snapshot(dir).await.with_context(|| format!("writing snapshot to {}", dir.display()))?;
        eprintln!("snapshot written to {}", dir.display());
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let data = cli.data.as_deref();
    let rules = RuleTable::builtin();
    match cli.command.unwrap_or(Command::Repl { explain: false, out: None }) {
        Command::Repl { explain, out } => repl(data, explain, out),
        Command::Serve { port, data_dir } => tokio::runtime::Runtime::new()?.block_on(serve(data, port, data_dir)),
        Command::Corpus { count, templates, out } => {
            let records = expand(&load_templates(templates.as_deref())?, &load_dataset(data)?, Catalog::builtin(), rules, count, cli.seed)?;
            let text = write_jsonl(&records);
            match out {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
            Ok(())
        }
        Command::Bench { count, templates, records } => {
            let ds = load_dataset(data)?;
            let records = match records {
                Some(p) => read_jsonl(&std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)?,
                None => expand(&load_templates(templates.as_deref())?, &ds, Catalog::builtin(), rules, count, cli.seed)?,
            };
            let index = ds.entity_index(rules.value_index_cap);
            let report = run_benchmark(&ReferenceTagger::builtin(), &records, &index)?;
            print!("{report}");
            Ok(())
        }
    }
}
