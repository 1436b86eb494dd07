//! Shared fixtures and runners for the integration tests.
#![allow(dead_code)]

pub mod criteria;
pub mod oracle;
pub mod random;

use std::collections::BTreeMap;
use std::path::PathBuf;

use tnorm::compiler::{compile, RuleSet};
use tnorm::kb::{Partition, Timestamp};
use tnorm::parser::{parse_and_check, Item};
use tnorm::runtime::{
    parse_scenario, Background, DeonticEvent, EventRecord, Mode, Runtime, RuntimeConfig,
};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn read_fixture(path: &str) -> String {
    let full = fixtures_dir().join(path);
    std::fs::read_to_string(&full).unwrap_or_else(|e| panic!("{}: {e}", full.display()))
}

/// Norm sources by file name, concatenated.
pub fn norm_source(names: &[&str]) -> String {
    names.iter().map(|n| read_fixture(&format!("{n}.tnorm")) + "\n").collect()
}

pub fn background(names: &[&str]) -> Background {
    let texts: Vec<String> = names.iter().map(|n| read_fixture(&format!("background/{n}.nt"))).collect();
    Background::from_documents(&texts.iter().map(String::as_str).collect::<Vec<_>>()).unwrap()
}

pub fn ts(text: &str) -> Timestamp {
    Timestamp::parse(text).unwrap_or_else(|| panic!("bad timestamp {text}"))
}

/// Enactment instant when a scenario has no events.
pub const DEFAULT_START: &str = "2021-01-01T00:00:00Z";

/// A named scenario: norms, background knowledge and an event stream.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub source: String,
    pub background: Background,
    pub events: Vec<EventRecord>,
}

impl Scenario {
    pub fn new(name: &str, norms: &[&str], background_names: &[&str], events: Vec<EventRecord>) -> Self {
        Scenario {
            name: name.to_string(),
            source: norm_source(norms),
            background: background(background_names),
            events,
        }
    }

    /// Norm enactment and initial clock: the first event's time.
    pub fn start(&self) -> Timestamp {
        self.events.first().map(|e| e.time).unwrap_or_else(|| ts(DEFAULT_START))
    }

    pub fn items(&self) -> Vec<Item> {
        parse_and_check(&self.source).unwrap_or_else(|e| panic!("{}: {e:?}", self.name))
    }

    pub fn rules(&self) -> RuleSet {
        compile(&self.items()).unwrap()
    }

    /// Rules compiled from the blocks in reverse presentation order.
    pub fn reversed_rules(&self) -> RuleSet {
        let mut items = self.items();
        items.reverse();
        compile(&items).unwrap()
    }

    pub fn runtime(&self, rules: RuleSet, mode: Mode) -> Runtime {
        Runtime::new(rules, &self.background, RuntimeConfig::new(mode, self.start())).unwrap()
    }

    /// Instant-jumping simulation until nothing is left.
    pub fn simulate_with(&self, rules: RuleSet) -> Runtime {
        let mut rt = self.runtime(rules, Mode::Simulate);
        rt.simulate(self.events.clone()).unwrap_or_else(|e| panic!("{}: {e}", self.name));
        rt
    }

    pub fn simulate(&self) -> Runtime {
        self.simulate_with(self.rules())
    }

    /// Monitoring over the stream; deadlines after the last event stay
    /// pending.
    pub fn monitor(&self) -> Runtime {
        let mut rt = self.runtime(self.rules(), Mode::Monitor);
        rt.monitor(self.events.clone()).unwrap_or_else(|e| panic!("{}: {e}", self.name));
        rt
    }

    /// Fixed-interval simulation: the clock moves by `tick_ms` and every
    /// tick is one step, until nothing is pending.
    pub fn ticks(&self, tick_ms: i64) -> Runtime {
        let mut rt = self.runtime(self.rules(), Mode::Simulate);
        for ev in self.events.clone() {
            rt.stage_event(ev).unwrap();
        }
        let mut now = self.start();
        loop {
            rt.step_at(now).unwrap();
            if rt.is_idle() {
                return rt;
            }
            now = now.add_millis(tick_ms).unwrap();
        }
    }
}

/// Every scenario listed in the fixture manifest.
pub fn scenarios() -> Vec<Scenario> {
    let manifest: serde_json::Value = serde_json::from_str(&read_fixture("scenarios.json")).unwrap();
    let strings = |v: &serde_json::Value| -> Vec<String> {
        v.as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_string()).collect()
    };
    manifest
        .as_array()
        .unwrap()
        .iter()
        .map(|entry| {
            let name = entry["name"].as_str().unwrap();
            let norms = strings(&entry["norms"]);
            let bg = strings(&entry["background"]);
            let events = parse_scenario(&read_fixture(&format!("scenarios/{name}.jsonl")))
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            Scenario::new(
                name,
                &norms.iter().map(String::as_str).collect::<Vec<_>>(),
                &bg.iter().map(String::as_str).collect::<Vec<_>>(),
                events,
            )
        })
        .collect()
}

pub fn scenario(name: &str) -> Scenario {
    scenarios().into_iter().find(|s| s.name == name).unwrap_or_else(|| panic!("no scenario {name}"))
}

/// Order-insensitive view of a deontic log.
pub fn multiset(log: &[DeonticEvent]) -> BTreeMap<DeonticEvent, usize> {
    let mut out = BTreeMap::new();
    for e in log {
        *out.entry(e.clone()).or_insert(0) += 1;
    }
    out
}

pub fn deontic_dump(rt: &Runtime) -> String {
    rt.kb().dump(Some(Partition::Deontic))
}
