//! Line-oriented editing loop.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use talkchart::engine::{Session, Status};

pub struct Repl {
    pub session: Session,
    /// Print the parse trace for every utterance.
    pub explain: bool,
    /// Spec file rewritten after every change.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Continue,
    Quit,
}

const HELP: &str = "\
commands:
  :quit             leave
  :history          print the replayable history log
  :spec [chart]     print a chart spec (default: the active chart)
  :replay <file>    re-execute a history log
  :save <file>      write the history log
anything else is an editing utterance";

pub fn status_line(s: &Status) -> String {
    match s {
        Status::Applied | Status::Recommended { .. } => "applied".to_string(),
        Status::ClarificationNeeded { reason } => format!("clarification_needed: {reason}"),
        Status::Unsupported { message } => format!("unsupported: {message}"),
    }
}

impl Repl {
    pub fn new(session: Session) -> Repl {
        Repl {
            session,
            explain: false,
            out: None,
        }
    }

    /// Reads lines until `:quit` or end of input.
    pub fn run(&mut self, input: impl BufRead, out: &mut impl Write) -> anyhow::Result<()> {
        for line in input.lines() {
            if self.handle(&line?, out)? == Step::Quit {
                break;
            }
        }
        Ok(())
    }

    /// Handles one input line. Utterance problems are reported and do not
    /// end the loop; only output errors are returned.
    pub fn handle(&mut self, line: &str, out: &mut impl Write) -> anyhow::Result<Step> {
        let line = line.trim();
        if line.is_empty() {
            return Ok(Step::Continue);
        }
        if let Some(cmd) = line.strip_prefix(':') {
            return self.command(cmd, out);
        }
        let sub = match self.session.submit(line) {
            Ok(sub) => sub,
            Err(e) => {
                writeln!(out, "error: {e}")?;
                return Ok(Step::Continue);
            }
        };
        if self.explain {
            writeln!(out, "{}", serde_json::to_string_pretty(&sub.interpretation.explain())?)?;
        }
        let actions = &sub.interpretation.sequence.actions;
        if actions.is_empty() {
            writeln!(out, "no editing action recognized")?;
        }
        let mut recommended = Vec::new();
        for (a, s) in actions.iter().zip(&sub.outcome.statuses) {
            writeln!(out, "{}  {}", status_line(s), a.canonical())?;
            if let Status::Recommended { defaults } = s {
                for d in defaults {
                    if !recommended.contains(d) {
                        recommended.push(d.clone());
                    }
                }
            }
        }
        for d in &recommended {
            writeln!(out, "recommended {d}")?;
        }
        if sub.outcome.statuses.iter().any(Status::is_success) {
            self.write_spec(out)?;
        }
        Ok(Step::Continue)
    }

    fn command(&mut self, cmd: &str, out: &mut impl Write) -> anyhow::Result<Step> {
        let (name, arg) = cmd.split_once(char::is_whitespace).unwrap_or((cmd, ""));
        let arg = arg.trim();
        match name {
            "quit" | "q" | "exit" => return Ok(Step::Quit),
            "help" => writeln!(out, "{HELP}")?,
            "history" => write!(out, "{}", self.session.history_log())?,
            "spec" => {
                let id = if arg.is_empty() { self.session.active_chart().id.clone() } else { arg.to_string() };
                match self.session.export_spec(&id) {
                    Ok(spec) => writeln!(out, "{}", spec.to_json())?,
                    Err(e) => writeln!(out, "error: {e}")?,
                }
            }
            "replay" if !arg.is_empty() => match std::fs::read_to_string(arg) {
                Ok(log) => {
                    let before = self.session.history().len();
                    match self.session.replay_log(&log) {
                        Ok(()) => {
                            let n = self.session.history().len() - before;
                            writeln!(out, "replayed {n} utterances")?;
                            self.write_spec(out)?;
                        }
                        Err(e) => writeln!(out, "error: {e}")?,
                    }
                }
                Err(e) => writeln!(out, "error: {arg}: {e}")?,
            },
            "save" if !arg.is_empty() => match std::fs::write(arg, self.session.history_log()) {
                Ok(()) => writeln!(out, "saved {} utterances to {arg}", self.session.history().len())?,
                Err(e) => writeln!(out, "error: {arg}: {e}")?,
            },
            _ => writeln!(out, "unknown command `:{cmd}`; try :help")?,
        }
        Ok(Step::Continue)
    }

    fn write_spec(&self, out: &mut impl Write) -> anyhow::Result<()> {
        let Some(path) = &self.out else { return Ok(()) };
        let spec = self.session.export_spec(&self.session.active_chart().id)?;
        if let Err(e) = std::fs::write(path, spec.to_json()) {
            writeln!(out, "error: {}: {e}", path.display())?;
        }
        Ok(())
    }
}
