//! `tnorm`: check, compile, monitor and simulate time-constrained norms.
//!
//! Exit codes: 0 success, 1 errors in norm or schema files, 2 errors in the
//! scenario or event stream, 3 engine failure (firing budget exceeded).

mod load;
mod repl;

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use tnorm::engine::DEFAULT_BUDGET;
use tnorm::kb::Timestamp;
use tnorm::runtime::{DeonticEvent, EventRecord, Mode, Runtime, RuntimeConfig, RuntimeError, Summary};

use load::Diagnostic;

#[derive(Parser)]
#[command(name = "tnorm", version, about = "Monitor and simulate time-constrained norms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate norm files.
    Check(NormArgs),
    /// Print the production rules compiled from norm files.
    Compile {
        #[command(flatten)]
        norms: NormArgs,
        /// Write the rules here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monitor a time-ordered event stream.
    Run(RunArgs),
    /// Simulate a scenario, letting every deadline pass.
    Simulate(RunArgs),
    /// Interactive session with what-if evaluation.
    Repl(RunArgs),
}

#[derive(Args)]
struct NormArgs {
    /// Norm files (.tnorm).
    #[arg(long, num_args = 1.., required = true)]
    norms: Vec<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    norms: NormArgs,
    /// Schema and background fact files (N-Triples subset).
    #[arg(long, num_args = 1..)]
    schema: Vec<PathBuf>,
    /// Line-delimited event records; standard input when absent.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Print rule firings to standard error.
    #[arg(long)]
    trace: bool,
    /// Write the deontic log here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Firing limit per step.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    /// How late a monitored event may be, e.g. `5s` or `2min`.
    #[arg(long, value_parser = humantime::parse_duration)]
    skew: Option<Duration>,
    /// Enactment time of the norms; defaults to the first event's time.
    #[arg(long, value_parser = parse_time)]
    start: Option<Timestamp>,
}

fn parse_time(text: &str) -> Result<Timestamp, String> {
    Timestamp::parse(text).ok_or_else(|| format!("`{text}` is not an RFC 3339 timestamp"))
}

/// Why a command stopped, with its exit code.
struct Failure {
    code: u8,
    diagnostics: Vec<Diagnostic>,
}

impl Failure {
    fn norms(diagnostics: Vec<Diagnostic>) -> Self {
        Failure { code: 1, diagnostics }
    }

    fn scenario(diagnostic: Diagnostic) -> Self {
        Failure { code: 2, diagnostics: vec![diagnostic] }
    }

    fn io(e: io::Error) -> Self {
        Failure { code: 2, diagnostics: vec![Diagnostic::new("", 0, 0, "io", e.to_string())] }
    }

    /// Maps a runtime error; `line` locates the offending event.
    fn runtime(e: RuntimeError, source: &str, line: usize) -> Self {
        match e {
            RuntimeError::Engine(inner) => Failure { code: 3, diagnostics: vec![Diagnostic::new(source, line, 0, "engine", inner.to_string())] },
            RuntimeError::Kb(inner) => Failure::norms(vec![Diagnostic::new(source, line, 0, "schema", inner.to_string())]),
            other => Failure::scenario(Diagnostic::new(source, line, 1, "scenario", other.to_string())),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check(args) => load::check(&args.norms).map(|_| ()).map_err(Failure::norms),
        Command::Compile { norms, out } => compile(&norms, out),
        Command::Run(args) => run(&args),
        Command::Simulate(args) => simulate(&args),
        Command::Repl(args) => repl::session(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let stderr = io::stderr();
            let mut err = stderr.lock();
            for d in &failure.diagnostics {
                let _ = writeln!(err, "{}", d.to_json());
            }
            ExitCode::from(failure.code)
        }
    }
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => File::create(p)
            .map(|f| Box::new(io::BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| Failure::norms(vec![Diagnostic::new(p.display().to_string(), 0, 0, "io", e.to_string())])),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn compile(norms: &NormArgs, out: Option<PathBuf>) -> Result<(), Failure> {
    let rules = load::rules(&norms.norms).map_err(Failure::norms)?;
    let mut w = output(out.as_ref())?;
    w.write_all(rules.dump().as_bytes()).and_then(|_| w.flush()).map_err(Failure::io)
}

impl RunArgs {
    fn runtime(&self, mode: Mode, start: Timestamp) -> Result<Runtime, Failure> {
        let rules = load::rules(&self.norms.norms).map_err(Failure::norms)?;
        let background = load::background(&self.schema).map_err(Failure::norms)?;
        let mut config = RuntimeConfig::new(mode, start);
        config.budget = self.budget;
        config.skew_ms = self.skew.map_or(0, |d| d.as_millis() as i64);
        Runtime::new(rules, &background, config).map_err(|e| Failure::runtime(e, "", 0))
    }
}

/// Writes new log records and trace entries, and the final summary.
struct Reporter {
    out: Box<dyn Write>,
    trace: bool,
    traced: usize,
}

impl Reporter {
    fn new(args: &RunArgs) -> Result<Self, Failure> {
        Ok(Reporter { out: output(args.out.as_ref())?, trace: args.trace, traced: 0 })
    }

    fn emit(&mut self, rt: &Runtime, records: &[DeonticEvent]) -> Result<(), Failure> {
        if self.trace {
            let stderr = io::stderr();
            let mut err = stderr.lock();
            for firing in &rt.trace()[self.traced..] {
                writeln!(err, "{}", firing.to_json()).map_err(Failure::io)?;
            }
            self.traced = rt.trace().len();
        }
        for record in records {
            writeln!(self.out, "{record}").map_err(Failure::io)?;
        }
        self.out.flush().map_err(Failure::io)
    }

    fn finish(mut self, summary: Summary) -> Result<(), Failure> {
        self.out.flush().map_err(Failure::io)?;
        eprintln!("{}", summary.to_json());
        Ok(())
    }
}

fn simulate(args: &RunArgs) -> Result<(), Failure> {
    let source = load::scenario_name(args.scenario.as_deref());
    let events = load::scenario(args.scenario.as_deref()).map_err(Failure::scenario)?;
    let mut reporter = Reporter::new(args)?;
    let Some(start) = args.start.or(events.first().map(|e| e.time)) else {
        return reporter.finish(Summary::default());
    };
    let mut rt = args.runtime(Mode::Simulate, start)?;
    rt.simulate(events).map_err(|e| Failure::runtime(e, &source, 0))?;
    reporter.emit(&rt, rt.log())?;
    reporter.finish(rt.summary())
}

/// Monitors a stream line by line. Events sharing a timestamp are
/// evaluated together, so a batch is held until a later event or the end
/// of input arrives.
fn run(args: &RunArgs) -> Result<(), Failure> {
    let source = load::scenario_name(args.scenario.as_deref());
    let input: Box<dyn BufRead> = match &args.scenario {
        Some(p) => Box::new(BufReader::new(File::open(p).map_err(|e| {
            Failure::scenario(Diagnostic::new(&source, 0, 0, "io", e.to_string()))
        })?)),
        None => Box::new(io::stdin().lock()),
    };
    let mut reporter = Reporter::new(args)?;
    let mut rt: Option<Runtime> = None;
    let mut batch: Vec<(usize, EventRecord)> = Vec::new();

    let flush = |rt: &mut Option<Runtime>, batch: &mut Vec<(usize, EventRecord)>, reporter: &mut Reporter| {
        if batch.is_empty() {
            return Ok(());
        }
        let runtime = match rt {
            Some(r) => r,
            None => {
                let start = args.start.unwrap_or(batch[0].1.time);
                let mut fresh = args.runtime(Mode::Monitor, start)?;
                let first = fresh.step().map_err(|e| Failure::runtime(e, &source, batch[0].0))?;
                reporter.emit(&fresh, &first)?;
                rt.insert(fresh)
            }
        };
        let line = batch[0].0;
        let events = batch.drain(..).map(|(_, ev)| ev).collect();
        let records = runtime.ingest_batch(events).map_err(|e| Failure::runtime(e, &source, line))?;
        reporter.emit(runtime, &records)
    };

    for (i, text) in input.lines().enumerate() {
        let line = i + 1;
        let text = text.map_err(|e| Failure::scenario(Diagnostic::new(&source, line, 0, "io", e.to_string())))?;
        let trimmed = text.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let ev = EventRecord::from_json_str(trimmed)
            .map_err(|message| Failure::scenario(Diagnostic::new(&source, line, 1, "scenario", message)))?;
        if batch.last().is_some_and(|(_, last)| last.time != ev.time) {
            flush(&mut rt, &mut batch, &mut reporter)?;
        }
        batch.push((line, ev));
    }
    flush(&mut rt, &mut batch, &mut reporter)?;
    if let (None, Some(start)) = (&rt, args.start) {
        let mut fresh = args.runtime(Mode::Monitor, start)?;
        let first = fresh.step().map_err(|e| Failure::runtime(e, &source, 0))?;
        reporter.emit(&fresh, &first)?;
        rt = Some(fresh);
    }
    let summary = rt.as_ref().map(Runtime::summary).unwrap_or_default();
    reporter.finish(summary)
}
