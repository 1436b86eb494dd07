//! The acceptance checks, shared by the `acceptance` target and the
//! regular test suite. Each check returns a description of the first
//! failure it finds.

use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tnorm::compiler::compile;
use tnorm::engine::EngineError;
use tnorm::kb::{Partition, Resource, Value};
use tnorm::parser::{parse, parse_and_check, pretty_print};
use tnorm::runtime::{Background, DeonticEvent, DeonticKind, EventRecord, Mode, Runtime, RuntimeConfig, RuntimeError};

use super::oracle::Oracle;
use super::{deontic_dump, fixtures_dir, multiset, random, read_fixture, scenario, scenarios, ts};

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

/// Number of seeded random scenarios compared against the oracle.
pub const RANDOM_SCENARIOS: u64 = 100;

pub const CRITERIA: &[(&str, fn() -> Check)] = &[
    ("obligation lifecycle", obligation_lifecycle),
    ("exception to a norm", exception_to_norm),
    ("general prohibition", general_prohibition),
    ("exception to a relation", exception_to_relation),
    ("exception to the whole relation", exception_to_whole_relation),
    ("implied action fulfils", implied_action_fulfils),
    ("implied action violates", implied_action_violates),
    ("implied action is excepted", implied_action_is_excepted),
    ("confluence", confluence),
    ("state immutability", state_immutability),
    ("tick granularity", tick_granularity),
    ("oracle equivalence", oracle_equivalence),
    ("parser round trip and diagnostics", parser_golden),
    ("termination", termination),
];

fn kinds(log: &[DeonticEvent]) -> Vec<DeonticKind> {
    log.iter().map(|e| e.kind).collect()
}

fn count(log: &[DeonticEvent], kind: DeonticKind) -> usize {
    log.iter().filter(|e| e.kind == kind).count()
}

fn by_cause<'a>(log: &'a [DeonticEvent], kind: DeonticKind, cause: &str) -> Vec<&'a DeonticEvent> {
    log.iter().filter(|e| e.kind == kind && e.cause.as_str() == cause).collect()
}

fn agent(e: &DeonticEvent) -> Option<&str> {
    e.agent.as_ref().map(Resource::as_str)
}

fn show(log: &[DeonticEvent]) -> String {
    log.iter().map(|e| format!("\n  {e}")).collect()
}

pub fn obligation_lifecycle() -> Check {
    let clock = Instant::now();
    let paid = scenario("norm01_paid").simulate();
    ensure!(
        kinds(paid.log()) == [DeonticKind::Activated, DeonticKind::Fulfilled],
        "paid access: {}",
        show(paid.log())
    );
    let unpaid = scenario("norm01_unpaid").simulate();
    let log = unpaid.log();
    ensure!(kinds(log) == [DeonticKind::Activated, DeonticKind::Violated], "unpaid access: {}", show(log));
    let violation = &log[1];
    ensure!(violation.at == ts("2021-03-02T09:00:00Z"), "violated at {}", violation.at);
    ensure!(violation.cause.as_str() == "Norm01#tevend_n#e1", "violation caused by {}", violation.cause);
    ensure!(
        unpaid.kb().has_class(&violation.cause, "TimeEvent"),
        "the cause {} is not the deadline TimeEvent",
        violation.cause
    );
    let elapsed = clock.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(())
}

pub fn exception_to_norm() -> Check {
    let rt = scenario("ambulance").simulate();
    let log = rt.log();
    let ambulance_dr = Resource::new("Norm01#dr#e1");
    ensure!(!rt.kb().has_class(&ambulance_dr, "DeonticRelation"), "the ambulance access created a relation");
    ensure!(
        !log.iter().any(|e| e.dr == ambulance_dr && e.kind != DeonticKind::Inhibited),
        "the ambulance access has lifecycle records: {}",
        show(log)
    );
    ensure!(count(log, DeonticKind::Inhibited) == 1, "expected one inhibition: {}", show(log));
    ensure!(by_cause(log, DeonticKind::Inhibited, "e1").len() == 1, "inhibition not caused by e1: {}", show(log));
    ensure!(by_cause(log, DeonticKind::Activated, "e2").len() == 1, "the private car did not activate: {}", show(log));
    let relations = rt
        .kb()
        .facts_in(Partition::Deontic)
        .filter(|f| f.is_class_membership() && f.object == Value::resource("DeonticRelation"))
        .count();
    ensure!(relations == 1, "expected only the private car relation, found {relations}");
    Ok(())
}

pub fn general_prohibition() -> Check {
    let rt = scenario("norm02_lending").simulate();
    let log = rt.log();
    ensure!(count(log, DeonticKind::Activated) == 1, "expected one relation: {}", show(log));
    let dr = &log.iter().find(|e| e.kind == DeonticKind::Activated).expect("counted").dr;
    let violations: Vec<&DeonticEvent> = log.iter().filter(|e| e.kind == DeonticKind::Violated).collect();
    ensure!(violations.len() == 2, "expected two violations: {}", show(log));
    ensure!(violations.iter().all(|e| &e.dr == dr), "violations on different relations: {}", show(log));
    let mut agents: Vec<Option<&str>> = violations.iter().map(|e| agent(e)).collect();
    agents.sort();
    ensure!(agents == [Some("alice"), Some("bob")], "violating agents {agents:?}");
    ensure!(by_cause(log, DeonticKind::Violated, "l4").is_empty(), "lending after two years violated");
    Ok(())
}

pub fn exception_to_relation() -> Check {
    let rt = scenario("teacher").simulate();
    let log = rt.log();
    let inhibited = by_cause(log, DeonticKind::Inhibited, "l1");
    ensure!(inhibited.len() == 1 && agent(inhibited[0]) == Some("teacher1"), "teacher not inhibited: {}", show(log));
    ensure!(
        !log.iter().any(|e| e.kind == DeonticKind::Violated && agent(e) == Some("teacher1")),
        "teacher violated: {}",
        show(log)
    );
    let bob = by_cause(log, DeonticKind::Violated, "l2");
    ensure!(bob.len() == 1 && agent(bob[0]) == Some("bob"), "other borrower not violated: {}", show(log));
    Ok(())
}

pub fn exception_to_whole_relation() -> Check {
    let leave = scenario("covid_leave").simulate();
    ensure!(by_cause(leave.log(), DeonticKind::Violated, "l1").len() == 1, "leaving did not violate: {}", show(leave.log()));

    let fire_first = scenario("covid_fire_then_leave").simulate();
    let log = fire_first.log();
    ensure!(by_cause(log, DeonticKind::Inhibited, "f1").len() == 1, "fire did not inhibit: {}", show(log));
    ensure!(count(log, DeonticKind::Violated) == 0, "leaving after the fire violated: {}", show(log));
    ensure!(count(log, DeonticKind::Fulfilled) == 0, "inhibited relation fulfilled: {}", show(log));

    let leave_first = scenario("covid_leave_then_fire").simulate();
    let log = leave_first.log();
    ensure!(by_cause(log, DeonticKind::Violated, "l1").len() == 1, "earlier violation missing: {}", show(log));
    ensure!(count(log, DeonticKind::Inhibited) == 0, "the later fire inhibited a violated relation: {}", show(log));
    let status = leave_first.relations();
    ensure!(
        status.iter().any(|r| r.dr.as_str() == "Norm03#dr#s1" && r.status.name() == "violated"),
        "relation status {:?}",
        status
    );
    Ok(())
}

fn cause_classes(s: &super::Scenario, cause: &str) -> Vec<String> {
    s.events.iter().find(|e| e.id.as_str() == cause).map(|e| e.classes.clone()).unwrap_or_default()
}

pub fn implied_action_fulfils() -> Check {
    let s = scenario("transfer_sell");
    let log = s.simulate().log().to_vec();
    let fulfilled = by_cause(&log, DeonticKind::Fulfilled, "s1");
    ensure!(fulfilled.len() == 1, "the sale did not fulfil: {}", show(&log));
    ensure!(cause_classes(&s, "s1") == ["SellAction"], "the sale is not a plain SellAction");
    ensure!(s.source.contains("TransferAction(?e2)"), "the norm does not regulate TransferAction");
    Ok(())
}

pub fn implied_action_violates() -> Check {
    let s = scenario("usage_reproduce");
    let log = s.simulate().log().to_vec();
    ensure!(by_cause(&log, DeonticKind::Violated, "r1").len() == 1, "reproduction did not violate: {}", show(&log));
    ensure!(cause_classes(&s, "r1") == ["ReproduceAction"], "the violation is not a plain ReproduceAction");
    ensure!(s.source.contains("UseAction(?e2)"), "the norm does not regulate UseAction");
    Ok(())
}

pub fn implied_action_is_excepted() -> Check {
    let s = scenario("seizure_sell");
    let log = s.simulate().log().to_vec();
    ensure!(by_cause(&log, DeonticKind::Inhibited, "s1").len() == 1, "the sale was not excepted: {}", show(&log));
    ensure!(by_cause(&log, DeonticKind::Violated, "s1").is_empty(), "the sale violated: {}", show(&log));
    ensure!(by_cause(&log, DeonticKind::Violated, "d1").len() == 1, "disposal did not violate: {}", show(&log));
    ensure!(s.source.contains("TransferAction("), "the exception is not conditioned on TransferAction");
    Ok(())
}

pub fn confluence() -> Check {
    for s in scenarios() {
        let forward = deontic_dump(&s.simulate());
        let reversed = deontic_dump(&s.simulate_with(s.reversed_rules()));
        ensure!(forward == reversed, "{}: deontic partitions differ", s.name);
    }
    Ok(())
}

fn state_dump(rt: &Runtime) -> String {
    rt.kb().dump(Some(Partition::State))
}

/// Drives a simulation one instant at a time, comparing STATE around every
/// engine run.
pub fn stepwise_state_check(s: &super::Scenario) -> Check {
    let mut rt = s.runtime(s.rules(), Mode::Simulate);
    for ev in s.events.clone() {
        rt.stage_event(ev).map_err(|e| e.to_string())?;
    }
    loop {
        rt.admit_due().map_err(|e| e.to_string())?;
        let before = state_dump(&rt);
        rt.settle().map_err(|e| e.to_string())?;
        ensure!(state_dump(&rt) == before, "{}: STATE changed at {}", s.name, rt.now());
        match rt.next_instant() {
            Some(t) => rt.move_clock(t),
            None => break,
        }
    }
    ensure!(rt.log() == s.simulate().log(), "{}: stepwise run differs from simulate", s.name);
    Ok(())
}

pub fn state_immutability() -> Check {
    scenarios().iter().try_for_each(stepwise_state_check)
}

pub fn tick_granularity() -> Check {
    for s in scenarios() {
        let jumping = s.simulate();
        let ticking = s.ticks(60_000);
        ensure!(
            jumping.log() == ticking.log(),
            "{}: instant jumping{}\nfixed ticks{}",
            s.name,
            show(jumping.log()),
            show(ticking.log())
        );
    }
    Ok(())
}

pub fn oracle_check(s: &super::Scenario) -> Check {
    let engine = s.simulate();
    let expected = Oracle::run(&s.items(), &s.background, s.start(), &s.events);
    ensure!(
        multiset(engine.log()) == multiset(&expected),
        "{}: engine{}\noracle{}",
        s.name,
        show(engine.log()),
        show(&expected)
    );
    Ok(())
}

pub fn random_scenarios(count: u64) -> impl Iterator<Item = super::Scenario> {
    (0..count).map(|seed| random::scenario(&mut ChaCha8Rng::seed_from_u64(seed), &format!("random-{seed}")))
}

pub fn oracle_equivalence() -> Check {
    scenarios().iter().try_for_each(oracle_check)?;
    random_scenarios(RANDOM_SCENARIOS).try_for_each(|s| oracle_check(&s))
}

pub const LISTINGS: &[&str] = &["norm01", "ambulance", "fire"];

pub fn parser_golden() -> Check {
    for name in LISTINGS {
        let text = read_fixture(&format!("{name}.tnorm"));
        let items = parse(&text).map_err(|e| format!("{name}: {e:?}"))?;
        let printed = pretty_print(&items);
        let again = parse(&printed).map_err(|e| format!("{name} reprinted: {e:?}\n{printed}"))?;
        ensure!(again == items, "{name}: reparsed AST differs\n{printed}");
        ensure!(pretty_print(&again) == printed, "{name}: printing is not stable");
    }
    let mut codes = Vec::new();
    for entry in std::fs::read_dir(fixtures_dir().join("invalid")).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let code = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        match parse_and_check(&text) {
            Ok(_) => return Err(format!("{code}: accepted")),
            Err(errors) => ensure!(
                errors.iter().any(|e| e.kind.code() == code),
                "{code}: reported {:?}",
                errors.iter().map(|e| e.kind.code()).collect::<Vec<_>>()
            ),
        }
        codes.push(code);
    }
    for required in [
        "syntax",
        "unbound-variable",
        "missing-actor",
        "malformed-outcome",
        "unknown-target",
        "unbound-exception-variable",
        "consequent-mismatch",
    ] {
        ensure!(codes.iter().any(|c| c == required), "no fixture for {required}");
    }
    Ok(())
}

/// Budget for the self-triggering ruleset. Matching is naive, so every
/// firing rescans a growing KB; a small limit keeps the check fast.
pub const LOOP_BUDGET: usize = 500;

/// Runs the self-triggering ruleset under `budget`.
pub fn run_loop_rules(budget: usize) -> Result<Vec<DeonticEvent>, RuntimeError> {
    let rules = compile(&parse_and_check(&read_fixture("loop.tnorm")).expect("loop fixture parses")).expect("compiles");
    let start = ts("2021-03-01T09:00:00Z");
    let mut config = RuntimeConfig::new(Mode::Simulate, start);
    config.budget = budget;
    let mut rt = Runtime::new(rules, &Background::prelude(), config)?;
    rt.simulate(vec![EventRecord::new("e1", &["Ping"], start)])
}

pub fn termination() -> Check {
    for s in scenarios() {
        let mut rt = s.runtime(s.rules(), Mode::Simulate);
        rt.simulate(s.events.clone()).map_err(|e| format!("{}: {e}", s.name))?;
    }
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let _ = tx.send(run_loop_rules(LOOP_BUDGET));
    });
    match rx.recv_timeout(Duration::from_secs(60)) {
        Ok(Err(RuntimeError::Engine(EngineError::FixpointBudgetExceeded(limit)))) => {
            ensure!(limit == LOOP_BUDGET, "stopped at budget {limit}");
            Ok(())
        }
        Ok(other) => Err(format!("self-triggering rules ended with {other:?}")),
        Err(_) => Err("self-triggering rules did not stop".into()),
    }
}
