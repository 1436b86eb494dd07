//! The monitoring and simulation loop.
//!
//! Each step admits whatever became due (scenario events and deadlines),
//! materializes the working memory, runs the rule engine to a fixpoint and
//! projects the new lifecycle facts into [`DeonticEvent`]s. Deadlines created
//! by norms are queued and marked `happened` once the clock reaches them.

mod deontic;
mod scenario;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use thiserror::Error;

pub use deontic::{DeonticEvent, DeonticKind, RelationState, RelationStatus, Summary};
pub use scenario::{parse_scenario, EventRecord, ScenarioError};

use crate::compiler::RuleSet;
use crate::engine::{Engine, EngineError, Firing, DEFAULT_BUDGET};
use crate::kb::{
    load_schema_with_declarations, parse_document, vocab, Fact, Kb, KbError, Partition, Resource, Schema, Timestamp,
    Value,
};

/// Resource of the event that enacts every loaded norm.
pub const ENACTMENT_EVENT: &str = "enactment";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Events arrive at the current time; the clock follows them.
    Monitor,
    /// Events are scheduled ahead and the clock jumps between instants.
    Simulate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuntimeConfig {
    pub mode: Mode,
    /// Tolerated lateness of monitored events, in milliseconds.
    pub skew_ms: i64,
    /// Firing limit per step.
    pub budget: usize,
    /// Initial clock value and enactment instant of the norms.
    pub start: Timestamp,
}

impl RuntimeConfig {
    pub fn new(mode: Mode, start: Timestamp) -> Self {
        RuntimeConfig { mode, skew_ms: 0, budget: DEFAULT_BUDGET, start }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuntimeError {
    #[error("event {event} at {time} is older than the clock ({now}) allows")]
    StaleEvent { event: Resource, time: Timestamp, now: Timestamp },
    #[error("event {event} at {time} lies before the simulation clock ({now})")]
    PastEvent { event: Resource, time: Timestamp, now: Timestamp },
    #[error("event id {0} was already ingested")]
    DuplicateEvent(Resource),
    #[error("nothing left to simulate")]
    SimulationExhausted,
    #[error("{0} is not available in this mode")]
    WrongMode(&'static str),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Kb(#[from] KbError),
}

/// Schema (prelude included) and background facts loaded from documents.
#[derive(Debug, Clone)]
pub struct Background {
    pub schema: Arc<Schema>,
    pub facts: Vec<Fact>,
}

impl Background {
    /// Parses triple documents and merges them with the prelude.
    pub fn from_documents(texts: &[&str]) -> Result<Self, KbError> {
        let mut axioms = Vec::new();
        let mut declarations = Vec::new();
        let mut facts = Vec::new();
        for text in std::iter::once(&vocab::PRELUDE).chain(texts) {
            let doc = parse_document(text)?;
            axioms.extend(doc.axioms);
            declarations.extend(doc.declarations);
            facts.extend(doc.facts);
        }
        let schema = load_schema_with_declarations(axioms, declarations)?;
        Ok(Background { schema: Arc::new(schema), facts })
    }

    pub fn prelude() -> Self {
        Self::from_documents(&[]).expect("the prelude is well-formed")
    }
}

#[derive(Debug, Clone)]
pub struct Runtime {
    kb: Kb,
    schema: Arc<Schema>,
    engine: Engine,
    config: RuntimeConfig,
    now: Timestamp,
    /// Created time events not yet marked, by due instant then id.
    pending: BTreeSet<(Timestamp, Resource)>,
    /// Accepted events not yet in the working memory.
    scheduled: BTreeMap<(Timestamp, usize), EventRecord>,
    next_slot: usize,
    seen: HashSet<Resource>,
    /// Working memory size at the last fixpoint. The engine is skipped
    /// while nothing was added since, as no new instance can match.
    settled_len: usize,
    log: Vec<DeonticEvent>,
    trace: Vec<Firing>,
}

impl Runtime {
    /// Loads the background facts and enacts every norm at `config.start`.
    /// Nothing fires until the first [`Runtime::step`].
    pub fn new(rules: RuleSet, background: &Background, config: RuntimeConfig) -> Result<Self, RuntimeError> {
        let mut kb = Kb::new();
        kb.load_facts(background.facts.iter().cloned(), Partition::State)?;
        let start = config.start;
        for norm in &rules.norms {
            kb.assert_unchecked(
                Fact::new(Resource::new(&norm.name), vocab::ENACTED_AT, Value::Timestamp(start)),
                Partition::Deontic,
            );
        }
        let enactment = Resource::new(ENACTMENT_EVENT);
        let instant = Resource::new(format!("{ENACTMENT_EVENT}#instant"));
        for fact in [
            Fact::typed(enactment.clone(), vocab::NORM_ENACTMENT),
            Fact::new(enactment.clone(), vocab::AT_TIME, Value::Resource(instant.clone())),
            Fact::new(instant, vocab::IN_XSD_DATE_TIME_STAMP, Value::Timestamp(start)),
            Fact::new(enactment.clone(), vocab::HAPPENED, Value::Timestamp(start)),
        ] {
            kb.assert_unchecked(fact, Partition::State);
        }
        let engine = Engine::new(rules).with_budget(config.budget);
        Ok(Runtime {
            kb,
            schema: background.schema.clone(),
            engine,
            now: start,
            config,
            pending: BTreeSet::new(),
            scheduled: BTreeMap::new(),
            next_slot: 0,
            seen: HashSet::from([enactment]),
            settled_len: 0,
            log: Vec::new(),
            trace: Vec::new(),
        })
    }

    pub fn now(&self) -> Timestamp {
        self.now
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn kb(&self) -> &Kb {
        &self.kb
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn rules(&self) -> &RuleSet {
        self.engine.rules()
    }

    /// Every deontic event emitted so far, in emission order.
    pub fn log(&self) -> &[DeonticEvent] {
        &self.log
    }

    /// Every rule firing so far.
    pub fn trace(&self) -> &[Firing] {
        &self.trace
    }

    pub fn summary(&self) -> Summary {
        Summary::of(&self.log)
    }

    /// Deadlines not yet reached.
    pub fn pending(&self) -> impl Iterator<Item = &(Timestamp, Resource)> {
        self.pending.iter()
    }

    /// Current status of every deontic relation.
    pub fn relations(&self) -> Vec<RelationState> {
        deontic::relations(&self.kb)
    }

    fn accept(&mut self, ev: EventRecord) -> Result<(), RuntimeError> {
        if !self.seen.insert(ev.id.clone()) {
            return Err(RuntimeError::DuplicateEvent(ev.id));
        }
        self.scheduled.insert((ev.time, self.next_slot), ev);
        self.next_slot += 1;
        Ok(())
    }

    /// Monitor mode: ingests one event and steps.
    pub fn ingest_event(&mut self, ev: EventRecord) -> Result<Vec<DeonticEvent>, RuntimeError> {
        self.ingest_batch(vec![ev])
    }

    /// Monitor mode: ingests events sharing one timestamp and evaluates them
    /// in a single step. Deadlines falling before that timestamp are
    /// processed first, each at its own instant.
    pub fn ingest_batch(&mut self, batch: Vec<EventRecord>) -> Result<Vec<DeonticEvent>, RuntimeError> {
        if self.config.mode != Mode::Monitor {
            return Err(RuntimeError::WrongMode("ingesting"));
        }
        let Some(time) = batch.iter().map(|e| e.time).max() else {
            return Ok(Vec::new());
        };
        let oldest = self.now.add_millis(-self.config.skew_ms).unwrap_or(self.now);
        let mut ids = HashSet::new();
        for ev in &batch {
            if ev.time < oldest {
                return Err(RuntimeError::StaleEvent { event: ev.id.clone(), time: ev.time, now: self.now });
            }
            if self.seen.contains(&ev.id) || !ids.insert(ev.id.clone()) {
                return Err(RuntimeError::DuplicateEvent(ev.id.clone()));
            }
        }
        let mut out = self.advance_to(time.max(self.now), true)?;
        for ev in batch {
            self.accept(ev)?;
        }
        out.extend(self.step()?);
        Ok(out)
    }

    /// Simulate mode: schedules an event for when the clock reaches it.
    pub fn stage_event(&mut self, ev: EventRecord) -> Result<(), RuntimeError> {
        if self.config.mode != Mode::Simulate {
            return Err(RuntimeError::WrongMode("staging"));
        }
        if ev.time < self.now {
            return Err(RuntimeError::PastEvent { event: ev.id.clone(), time: ev.time, now: self.now });
        }
        self.accept(ev)
    }

    /// The earliest pending deadline or scheduled event.
    pub fn next_instant(&self) -> Option<Timestamp> {
        let due = self.pending.first().map(|(t, _)| *t);
        let event = self.scheduled.first_key_value().map(|((t, _), _)| *t);
        match (due, event) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Simulate mode: jumps to the next deadline or scheduled event and
    /// steps there. Returns the new clock value.
    pub fn advance_to_next_instant(&mut self) -> Result<Timestamp, RuntimeError> {
        if self.config.mode != Mode::Simulate {
            return Err(RuntimeError::WrongMode("advancing to the next instant"));
        }
        let next = self.next_instant().ok_or(RuntimeError::SimulationExhausted)?;
        self.now = self.now.max(next);
        self.step()?;
        Ok(self.now)
    }

    /// Moves the clock to `target`, stepping at every intermediate instant
    /// where something is due. With `exclusive`, nothing due exactly at
    /// `target` is processed and the clock stops there without stepping.
    fn advance_to(&mut self, target: Timestamp, exclusive: bool) -> Result<Vec<DeonticEvent>, RuntimeError> {
        let mut out = Vec::new();
        while let Some(next) = self.next_instant().filter(|&t| t < target || (!exclusive && t == target)) {
            self.now = self.now.max(next);
            out.extend(self.step()?);
        }
        self.now = self.now.max(target);
        Ok(out)
    }

    /// Moves the clock to `target` and steps there, processing every
    /// intermediate instant on the way. Usable in both modes; in monitor
    /// mode it acts as a heartbeat that lets deadlines pass.
    pub fn advance_until(&mut self, target: Timestamp) -> Result<Vec<DeonticEvent>, RuntimeError> {
        let mut out = self.advance_to(target, true)?;
        out.extend(self.step()?);
        Ok(out)
    }

    /// Sets the clock to `time` if later, without stepping.
    pub fn move_clock(&mut self, time: Timestamp) {
        self.now = self.now.max(time);
    }

    /// Sets the clock to `time` (if later) and steps once, without visiting
    /// the instants in between. Used for fixed-interval ticking.
    pub fn step_at(&mut self, time: Timestamp) -> Result<Vec<DeonticEvent>, RuntimeError> {
        self.move_clock(time);
        self.step()
    }

    /// Whether deadlines or scheduled events remain.
    pub fn is_idle(&self) -> bool {
        self.next_instant().is_none()
    }

    /// Admits everything due at the current time, then runs the engine.
    pub fn step(&mut self) -> Result<Vec<DeonticEvent>, RuntimeError> {
        self.admit_due()?;
        self.settle()
    }

    /// Marks due deadlines, asserts due events and materializes.
    pub fn admit_due(&mut self) -> Result<(), RuntimeError> {
        self.mark_due_deadlines();
        while let Some(entry) = self.scheduled.first_entry() {
            if entry.key().0 > self.now {
                break;
            }
            let ev = entry.remove();
            self.assert_event(&ev)?;
        }
        self.kb.materialize(&self.schema);
        Ok(())
    }

    /// Runs the engine to a fixpoint, repeating while newly created
    /// deadlines are already due. The firing budget covers the whole call.
    pub fn settle(&mut self) -> Result<Vec<DeonticEvent>, RuntimeError> {
        let mut out = Vec::new();
        if self.kb.len() == self.settled_len {
            return Ok(out);
        }
        let mut fired = 0;
        loop {
            let firings = self.engine.run_to_fixpoint(&mut self.kb, &self.schema)?.firings;
            fired += firings.len();
            out.extend(deontic::extract(&self.kb, self.engine.rules(), &firings));
            for fact in firings.iter().flat_map(|f| &f.added) {
                if fact.is_class_membership() && fact.object == Value::resource(vocab::TIME_EVENT) {
                    if let Some(due) = self.kb.time_of(&fact.subject) {
                        self.pending.insert((due, fact.subject.clone()));
                    }
                }
            }
            self.trace.extend(firings);
            if !self.mark_due_deadlines() {
                break;
            }
            if fired >= self.config.budget {
                return Err(EngineError::FixpointBudgetExceeded(self.config.budget).into());
            }
            self.kb.materialize(&self.schema);
        }
        self.settled_len = self.kb.len();
        self.log.extend(out.iter().cloned());
        Ok(out)
    }

    fn mark_due_deadlines(&mut self) -> bool {
        let mut marked = false;
        while let Some((due, _)) = self.pending.first() {
            if *due > self.now {
                break;
            }
            let (due, tev) = self.pending.pop_first().expect("checked non-empty");
            self.kb.assert_unchecked(Fact::new(tev, vocab::HAPPENED, Value::Timestamp(due)), Partition::Deontic);
            marked = true;
        }
        marked
    }

    fn assert_event(&mut self, ev: &EventRecord) -> Result<(), RuntimeError> {
        let id = &ev.id;
        for class in &ev.classes {
            self.kb.assert_fact(Fact::typed(id.clone(), class), Partition::State)?;
        }
        self.kb.assert_fact(Fact::typed(id.clone(), vocab::EVENT), Partition::State)?;
        for (property, value) in &ev.properties {
            self.kb.assert_fact(Fact::new(id.clone(), property, value.clone()), Partition::State)?;
        }
        let instant = Resource::new(format!("{id}#instant"));
        self.kb.assert_fact(Fact::new(id.clone(), vocab::AT_TIME, Value::Resource(instant.clone())), Partition::State)?;
        self.kb.assert_fact(Fact::new(instant, vocab::IN_XSD_DATE_TIME_STAMP, Value::Timestamp(ev.time)), Partition::State)?;
        self.kb.assert_unchecked(Fact::new(id.clone(), vocab::HAPPENED, Value::Timestamp(ev.time)), Partition::State);
        Ok(())
    }

    /// Monitor mode: feeds a time-ordered stream, one step per distinct
    /// timestamp.
    pub fn monitor(&mut self, events: Vec<EventRecord>) -> Result<Vec<DeonticEvent>, RuntimeError> {
        let mut out = self.step()?;
        for batch in group_by_time(events) {
            out.extend(self.ingest_batch(batch)?);
        }
        Ok(out)
    }

    /// Simulate mode: schedules every event and advances until nothing is
    /// left.
    pub fn simulate(&mut self, events: Vec<EventRecord>) -> Result<Vec<DeonticEvent>, RuntimeError> {
        for ev in events {
            self.stage_event(ev)?;
        }
        let start = self.log.len();
        self.step()?;
        loop {
            match self.advance_to_next_instant() {
                Ok(_) => {}
                Err(RuntimeError::SimulationExhausted) => break,
                Err(e) => return Err(e),
            }
        }
        Ok(self.log[start..].to_vec())
    }
}

/// Splits a time-ordered stream into runs of equal timestamps.
pub fn group_by_time(events: Vec<EventRecord>) -> Vec<Vec<EventRecord>> {
    let mut out: Vec<Vec<EventRecord>> = Vec::new();
    for ev in events {
        match out.last_mut() {
            Some(last) if last[0].time == ev.time => last.push(ev),
            _ => out.push(vec![ev]),
        }
    }
    out
}
