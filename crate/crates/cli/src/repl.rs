//! Line-oriented interactive session over a simulation.
//!
//! Records are printed as JSON lines; everything else starts with `# ` so
//! that the output stays machine-readable.

use std::io::{self, BufRead, IsTerminal, Write};

use tnorm::kb::Timestamp;
use tnorm::runtime::{DeonticEvent, EventRecord, Mode, Runtime, RuntimeError};

use crate::{load, parse_time, Failure, RunArgs};

const HELP: &str = "\
# event <record>     stage an event (JSON, same format as scenario lines)
# advance [<time>]   move to the next instant, or step through to <time>
# state              list deontic relations and their status
# whatif <record>    show what an event would cause, then roll back
# now                print the clock
# quit";

struct Session<'a> {
    args: &'a RunArgs,
    rt: Option<Runtime>,
    out: Box<dyn Write>,
}

enum Reply {
    Continue,
    Quit,
}

impl<'a> Session<'a> {
    fn say(&mut self, text: &str) -> io::Result<()> {
        writeln!(self.out, "{text}")
    }

    fn records(&mut self, records: &[DeonticEvent]) -> io::Result<()> {
        for r in records {
            writeln!(self.out, "{r}")?;
        }
        Ok(())
    }

    /// A fresh runtime enacted at `start`, with its first step's records.
    fn start(&self, start: Timestamp) -> Result<(Runtime, Vec<DeonticEvent>), String> {
        let mut rt = self.args.runtime(Mode::Simulate, start).map_err(describe)?;
        let first = rt.step().map_err(|e| e.to_string())?;
        Ok((rt, first))
    }

    /// The session's runtime, started at `hint` (or `--start`) on first use.
    fn runtime(&mut self, hint: Option<Timestamp>) -> Result<&mut Runtime, String> {
        if self.rt.is_none() {
            let start = self.args.start.or(hint).ok_or("no clock yet: stage an event or pass --start")?;
            let (rt, first) = self.start(start)?;
            self.records(&first).map_err(|e| e.to_string())?;
            self.rt = Some(rt);
        }
        Ok(self.rt.as_mut().expect("just started"))
    }

    fn handle(&mut self, line: &str) -> Result<Reply, String> {
        let (command, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        let io = |e: io::Error| e.to_string();
        match command {
            "quit" | "exit" => return Ok(Reply::Quit),
            "help" => self.say(HELP).map_err(io)?,
            "event" => {
                let ev = EventRecord::from_json_str(rest)?;
                let (id, time) = (ev.id.clone(), ev.time);
                self.runtime(Some(time))?.stage_event(ev).map_err(|e| e.to_string())?;
                self.say(&format!("# staged {id} at {time}")).map_err(io)?;
            }
            "advance" => {
                let target = if rest.is_empty() { None } else { Some(parse_time(rest)?) };
                let rt = self.runtime(target)?;
                let before = rt.log().len();
                let result = match target {
                    Some(t) => rt.advance_until(t).map(|_| t),
                    None => rt.advance_to_next_instant(),
                };
                match result {
                    Ok(now) => {
                        let new = rt.log()[before..].to_vec();
                        self.records(&new).map_err(io)?;
                        self.say(&format!("# now {now}")).map_err(io)?;
                    }
                    Err(RuntimeError::SimulationExhausted) => self.say("# nothing left to simulate").map_err(io)?,
                    Err(e) => return Err(e.to_string()),
                }
            }
            "state" => {
                let relations = self.rt.as_ref().map(Runtime::relations).unwrap_or_default();
                if relations.is_empty() {
                    self.say("# no deontic relations").map_err(io)?;
                }
                for r in relations {
                    self.say(&r.to_json().to_string()).map_err(io)?;
                }
            }
            "whatif" => {
                let ev = EventRecord::from_json_str(rest)?;
                let time = ev.time;
                let mut copy = match &self.rt {
                    Some(rt) => rt.clone(),
                    None => self.start(self.args.start.unwrap_or(time))?.0,
                };
                let before = copy.log().len();
                copy.stage_event(ev).map_err(|e| e.to_string())?;
                while copy.next_instant().is_some_and(|t| t <= time) {
                    copy.advance_to_next_instant().map_err(|e| e.to_string())?;
                }
                let new = copy.log()[before..].to_vec();
                self.records(&new).map_err(io)?;
                self.say("# rolled back").map_err(io)?;
            }
            "now" => {
                let now = self.rt.as_ref().map(|rt| rt.now().to_string()).unwrap_or_else(|| "not started".into());
                self.say(&format!("# {now}")).map_err(io)?;
            }
            other => return Err(format!("unknown command `{other}` (try `help`)")),
        }
        Ok(Reply::Continue)
    }
}

fn describe(f: Failure) -> String {
    f.diagnostics.iter().map(|d| d.to_json().to_string()).collect::<Vec<_>>().join("\n")
}

pub fn session(args: &RunArgs) -> Result<(), Failure> {
    let out = crate::output(args.out.as_ref())?;
    let mut session = Session { args, rt: None, out };
    // Compile up front so that norm errors end the session with exit 1.
    load::rules(&args.norms.norms).map_err(Failure::norms)?;
    load::background(&args.schema).map_err(Failure::norms)?;
    if let Some(path) = &args.scenario {
        let events = load::scenario(Some(path)).map_err(Failure::scenario)?;
        for ev in events {
            let time = ev.time;
            let staged = session.runtime(Some(time)).and_then(|rt| rt.stage_event(ev).map_err(|e| e.to_string()));
            staged.map_err(|m| Failure::scenario(load::Diagnostic::new(path.display().to_string(), 0, 0, "scenario", m)))?;
        }
    }
    let stdin = io::stdin();
    let interactive = stdin.is_terminal();
    let mut lines = stdin.lock().lines();
    loop {
        if interactive {
            print!("tnorm> ");
            let _ = io::stdout().flush();
        }
        let Some(line) = lines.next() else { break };
        let line = line.map_err(Failure::io)?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match session.handle(line) {
            Ok(Reply::Quit) => break,
            Ok(Reply::Continue) => {}
            Err(message) => session.say(&format!("# error: {message}")).map_err(Failure::io)?,
        }
        session.out.flush().map_err(Failure::io)?;
    }
    session.out.flush().map_err(Failure::io)
}
