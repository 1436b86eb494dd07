//! Reference semantics that interprets norm ASTs directly.
//!
//! The interpreter keeps one record per deontic relation with the binding
//! of its activation and evaluates the regulated part against that binding,
//! so it needs neither production rules nor variable threading. Time moves
//! from instant to instant; at each one, applicable exceptions are applied
//! before any norm consequence, and norm consequences one at a time.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use tnorm::kb::{vocab, Binding, Fact, Kb, Partition, Pattern, Resource, Term, Timestamp, Value};
use tnorm::parser::{AssertStmt, ExceptionAst, ExceptionKind, Item, NormAst};
use tnorm::runtime::{Background, DeonticEvent, DeonticKind, EventRecord, ENACTMENT_EVENT};

struct Relation {
    norm: usize,
    id: Resource,
    binding: Binding,
    activated_at: Timestamp,
    /// Regulated events covered by an exception.
    excepted: HashSet<Resource>,
    /// Events that suspended the whole relation.
    suspensions: HashSet<Resource>,
    /// Regulated events (specific relations) or agents (general ones) that
    /// already produced an outcome.
    settled: HashSet<Resource>,
    /// Terminating events the ELSE branch already fired for.
    closed_by: HashSet<Resource>,
}

pub struct Oracle {
    norms: Vec<NormAst>,
    exceptions: Vec<ExceptionAst>,
    kb: Kb,
    background: Background,
    start: Timestamp,
    relations: Vec<Relation>,
    decided: HashSet<(usize, Resource)>,
    inhibited: HashSet<(usize, Resource)>,
    /// (exception, event) pairs disabled by an exception to that exception.
    disabled: HashSet<(String, Resource)>,
    events: HashSet<Resource>,
    happened_deadlines: HashSet<Resource>,
    deadlines: BTreeSet<(Timestamp, Resource)>,
    log: Vec<DeonticEvent>,
}

fn resolve(term: &Term, binding: &Binding) -> Option<Value> {
    term.resolve(binding).cloned()
}

fn first<'a>(kb: &'a Kb, subject: &Resource, predicate: &str) -> Option<Resource> {
    kb.objects(subject, predicate).filter_map(Value::as_resource).min().cloned()
}

impl Oracle {
    pub fn new(items: &[Item], background: &Background, start: Timestamp) -> Self {
        let mut kb = Kb::new();
        for f in &background.facts {
            kb.assert_unchecked(f.clone(), Partition::State);
        }
        let enactment = Resource::new(ENACTMENT_EVENT);
        let instant = Resource::new(format!("{ENACTMENT_EVENT}#instant"));
        kb.assert_unchecked(Fact::typed(enactment.clone(), vocab::NORM_ENACTMENT), Partition::State);
        kb.assert_unchecked(Fact::new(enactment.clone(), vocab::AT_TIME, Value::Resource(instant.clone())), Partition::State);
        kb.assert_unchecked(Fact::new(instant, vocab::IN_XSD_DATE_TIME_STAMP, Value::Timestamp(start)), Partition::State);
        kb.materialize(&background.schema);
        Oracle {
            norms: items.iter().filter_map(Item::as_norm).cloned().collect(),
            exceptions: items.iter().filter_map(Item::as_exception).cloned().collect(),
            kb,
            background: background.clone(),
            start,
            relations: Vec::new(),
            decided: HashSet::new(),
            inhibited: HashSet::new(),
            disabled: HashSet::new(),
            events: HashSet::from([enactment]),
            happened_deadlines: HashSet::new(),
            deadlines: BTreeSet::new(),
            log: Vec::new(),
        }
    }

    /// Replays `events` (time ordered) and every deadline they lead to.
    pub fn run(items: &[Item], background: &Background, start: Timestamp, events: &[EventRecord]) -> Vec<DeonticEvent> {
        let mut oracle = Oracle::new(items, background, start);
        let mut queue: BTreeMap<Timestamp, Vec<&EventRecord>> = BTreeMap::new();
        for ev in events {
            queue.entry(ev.time).or_default().push(ev);
        }
        let mut now = start;
        oracle.saturate(now);
        loop {
            let next_event = queue.keys().next().copied();
            let next_deadline = oracle.deadlines.first().map(|(t, _)| *t);
            let next = match (next_event, next_deadline) {
                (Some(a), Some(b)) => a.min(b),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => break,
            };
            now = now.max(next);
            if next_event == Some(next) {
                for ev in queue.remove(&next).unwrap() {
                    oracle.add_event(ev);
                }
            }
            oracle.saturate(now);
        }
        oracle.log
    }

    fn add_event(&mut self, ev: &EventRecord) {
        let id = ev.id.clone();
        let instant = Resource::new(format!("{id}#instant"));
        let mut facts = vec![
            Fact::typed(id.clone(), vocab::EVENT),
            Fact::new(id.clone(), vocab::AT_TIME, Value::Resource(instant.clone())),
            Fact::new(instant, vocab::IN_XSD_DATE_TIME_STAMP, Value::Timestamp(ev.time)),
        ];
        facts.extend(ev.classes.iter().map(|c| Fact::typed(id.clone(), c)));
        facts.extend(ev.properties.iter().map(|(p, v)| Fact::new(id.clone(), p, v.clone())));
        for f in facts {
            self.kb.assert_unchecked(f, Partition::State);
        }
        self.events.insert(id);
    }

    fn happened(&self, event: &Resource) -> bool {
        self.events.contains(event) || self.happened_deadlines.contains(event)
    }

    fn time(&self, event: &Resource) -> Option<Timestamp> {
        self.kb.time_of(event)
    }

    fn query(&self, pattern: &Pattern, initial: &Binding) -> Vec<Binding> {
        self.kb.query_with(pattern, initial).expect("validated conditions")
    }

    fn saturate(&mut self, now: Timestamp) {
        loop {
            while let Some((due, tev)) = self.deadlines.first().cloned() {
                if due > now {
                    break;
                }
                self.deadlines.pop_first();
                self.happened_deadlines.insert(tev);
            }
            self.kb.materialize(&self.background.schema);
            if self.apply_exceptions() {
                continue;
            }
            if !self.apply_one_norm_step() {
                break;
            }
        }
    }

    // ---- exceptions ---------------------------------------------------

    fn inhibitors_of(&self, name: &str) -> Vec<ExceptionAst> {
        self.exceptions.iter().filter(|x| x.kind == ExceptionKind::ToException && x.target == name).cloned().collect()
    }

    /// Whether exception `exc`, matched with `binding` on event `event`, is
    /// itself excepted. `event_var` names the event in `binding`.
    fn is_disabled(&mut self, exc: &ExceptionAst, binding: &Binding, event_var: &str, event: &Resource) -> bool {
        let key = (exc.name.clone(), event.clone());
        if self.disabled.contains(&key) {
            return true;
        }
        for meta in self.inhibitors_of(&exc.name) {
            let mut own = meta.conditions.clone();
            own.rename(&meta.event_var, event_var);
            if !self.query(&own, binding).is_empty() {
                self.disabled.insert(key);
                return true;
            }
        }
        false
    }

    fn norm_index(&self, name: &str) -> Option<usize> {
        self.norms.iter().position(|n| n.name == name)
    }

    fn apply_exceptions(&mut self) -> bool {
        let mut changed = false;
        for exc in self.exceptions.clone() {
            let Some(n) = self.norm_index(&exc.target) else { continue };
            changed |= match exc.kind {
                ExceptionKind::ToNorm => self.apply_to_norm(&exc, n),
                ExceptionKind::ToRegulatedEvent => self.apply_to_regulated(&exc, n),
                ExceptionKind::ToRelation => self.apply_to_relation(&exc, n),
                ExceptionKind::ToException => false,
            };
        }
        changed
    }

    fn activation_candidates(&self, n: usize) -> Vec<Binding> {
        let norm = &self.norms[n];
        let start = self.start;
        self.query(&norm.outer.conditions, &Binding::new())
            .into_iter()
            .filter(|b| {
                let e1 = b[&norm.outer.event_var].as_resource().cloned().expect("event individual");
                self.time(&e1).is_some_and(|t| t >= start)
            })
            .collect()
    }

    fn apply_to_norm(&mut self, exc: &ExceptionAst, n: usize) -> bool {
        let e1_var = self.norms[n].outer.event_var.clone();
        let mut own = exc.conditions.clone();
        own.rename(&exc.event_var, &e1_var);
        let mut changed = false;
        for b in self.activation_candidates(n) {
            let e1 = b[&e1_var].as_resource().cloned().unwrap();
            if self.inhibited.contains(&(n, e1.clone())) {
                continue;
            }
            let Some(hit) = self.query(&own, &b).into_iter().next() else { continue };
            if self.is_disabled(exc, &hit, &e1_var, &e1) {
                continue;
            }
            self.inhibited.insert((n, e1.clone()));
            self.decided.insert((n, e1.clone()));
            let norm = &self.norms[n];
            let dr = Resource::new(format!("{}#{}#{}", norm.name, norm.dr_var().unwrap(), e1));
            self.log.push(DeonticEvent {
                kind: DeonticKind::Inhibited,
                dr,
                norm: norm.name.clone(),
                agent: first(&self.kb, &e1, vocab::ACTOR),
                at: self.time(&e1).unwrap(),
                cause: e1,
            });
            changed = true;
        }
        changed
    }

    /// Regulated events of relation `r` inside its window, with bindings.
    fn regulated_candidates(&self, r: usize) -> Vec<(Resource, Binding)> {
        let rel = &self.relations[r];
        let norm = &self.norms[rel.norm];
        let inner = &norm.inner;
        let mut out = Vec::new();
        for b in self.query(&inner.conditions, &rel.binding) {
            let e2 = b[&inner.event_var].as_resource().cloned().expect("event individual");
            let Some(t2) = self.time(&e2) else { continue };
            if t2 < rel.activated_at {
                continue;
            }
            if let Some(before) = &inner.before {
                if rel.binding.contains_key(&before.event_var) {
                    let Some(b2) = self.query(&before.conditions, &b).into_iter().next() else { continue };
                    let deadline = b2[&before.event_var].as_resource().cloned().unwrap();
                    if self.time(&deadline).is_none_or(|t3| t2 >= t3) {
                        continue;
                    }
                } else {
                    let closed = self.query(&before.conditions, &b).into_iter().any(|b3| {
                        let e3 = b3[&before.event_var].as_resource().cloned().unwrap();
                        self.happened(&e3)
                            && self.time(&e3).is_some_and(|t3| t3 >= rel.activated_at && t3 <= t2)
                    });
                    if closed {
                        continue;
                    }
                }
            }
            out.push((e2, b));
        }
        out.sort_by(|a, b| a.0.as_str().cmp(b.0.as_str()).then_with(|| a.1.cmp(&b.1)));
        out
    }

    fn dr_agent(&self, dr: &Resource, cause: &Resource) -> Option<Resource> {
        first(&self.kb, dr, vocab::DEBTOR).or_else(|| first(&self.kb, cause, vocab::ACTOR))
    }

    fn apply_to_regulated(&mut self, exc: &ExceptionAst, n: usize) -> bool {
        let norm = self.norms[n].clone();
        let dr_var = norm.dr_var().unwrap().to_string();
        let mut own = exc.conditions.clone();
        if let Some(d) = exc.dr_var() {
            own.rename(d, &dr_var);
        }
        own.rename(&exc.event_var, &norm.inner.event_var);
        let mut changed = false;
        for r in 0..self.relations.len() {
            if self.relations[r].norm != n {
                continue;
            }
            for (e2, b) in self.regulated_candidates(r) {
                if self.relations[r].excepted.contains(&e2) {
                    continue;
                }
                let Some(hit) = self.query(&own, &b).into_iter().next() else { continue };
                if self.is_disabled(exc, &hit, &norm.inner.event_var, &e2) {
                    continue;
                }
                self.relations[r].excepted.insert(e2.clone());
                let dr = self.relations[r].id.clone();
                self.log.push(DeonticEvent {
                    kind: DeonticKind::Inhibited,
                    agent: self.dr_agent(&dr, &e2),
                    norm: norm.name.clone(),
                    at: self.time(&e2).unwrap(),
                    dr,
                    cause: e2,
                });
                changed = true;
            }
        }
        changed
    }

    fn apply_to_relation(&mut self, exc: &ExceptionAst, n: usize) -> bool {
        let dr_var = exc.dr_var().unwrap().to_string();
        let local = exc.conditions.bound_vars();
        let mut changed = false;
        for r in 0..self.relations.len() {
            if self.relations[r].norm != n {
                continue;
            }
            let rel = &self.relations[r];
            let mut initial: Binding = rel
                .binding
                .iter()
                .filter(|(k, _)| !local.contains(*k) && exc.conditions.vars().contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            initial.insert(dr_var.clone(), Value::Resource(rel.id.clone()));
            initial.remove(&exc.event_var);
            let ta = rel.activated_at;
            let mut hits: BTreeMap<Resource, Binding> = BTreeMap::new();
            for b in self.query(&exc.conditions, &initial) {
                let en = b[&exc.event_var].as_resource().cloned().unwrap();
                if self.time(&en).is_some_and(|t| t >= ta) {
                    hits.entry(en).or_insert(b);
                }
            }
            for (en, b) in hits {
                if self.relations[r].suspensions.contains(&en) || self.is_disabled(exc, &b, &exc.event_var, &en) {
                    continue;
                }
                self.relations[r].suspensions.insert(en.clone());
                let dr = self.relations[r].id.clone();
                self.log.push(DeonticEvent {
                    kind: DeonticKind::Inhibited,
                    agent: self.dr_agent(&dr, &en),
                    norm: self.norms[n].name.clone(),
                    at: self.time(&en).unwrap(),
                    dr,
                    cause: en,
                });
                changed = true;
            }
        }
        changed
    }

    // ---- norms --------------------------------------------------------

    fn apply_one_norm_step(&mut self) -> bool {
        for n in 0..self.norms.len() {
            if self.activate(n) {
                return true;
            }
        }
        for r in 0..self.relations.len() {
            if self.regulate(r) || self.close(r) {
                return true;
            }
        }
        false
    }

    fn assert(&mut self, stmt: &AssertStmt, binding: &Binding) -> Option<Fact> {
        let subject = resolve(&stmt.subject, binding)?.as_resource()?.clone();
        let object = resolve(&stmt.object, binding)?;
        let fact = Fact::new(subject, &stmt.predicate, object);
        self.kb.assert_unchecked(fact.clone(), Partition::Deontic).then_some(fact)
    }

    fn activate(&mut self, n: usize) -> bool {
        let norm = self.norms[n].clone();
        let e1_var = &norm.outer.event_var;
        let Some(mut b) = self.activation_candidates(n).into_iter().find(|b| {
            let e1 = b[e1_var].as_resource().unwrap();
            !self.decided.contains(&(n, e1.clone()))
        }) else {
            return false;
        };
        let e1 = b[e1_var].as_resource().cloned().unwrap();
        self.decided.insert((n, e1.clone()));
        for c in &norm.computes {
            let value = c.expr.eval(&b).expect("computable");
            b.insert(c.target.clone(), value);
        }
        for c in &norm.creates {
            let id = Resource::new(format!("{}#{}#{}", norm.name, c.var, e1));
            b.insert(c.var.clone(), Value::Resource(id.clone()));
            self.kb.assert_unchecked(Fact::typed(id, &c.class), Partition::Deontic);
        }
        let dr_var = norm.dr_var().unwrap();
        let dr = b[dr_var].as_resource().cloned().unwrap();
        for stmt in &norm.asserts {
            self.assert(stmt, &b);
        }
        let generated = AssertStmt::new(vocab::IS_GENERATED, Term::var(dr_var), Term::resource(&norm.name));
        let activated = AssertStmt::new(vocab::ACTIVATED, Term::var(dr_var), Term::var(e1_var));
        self.assert(&generated, &b);
        self.assert(&activated, &b);
        let ta = self.time(&e1).unwrap();
        if let Some(before) = &norm.inner.before {
            if let Some(Value::Resource(tev)) = b.get(&before.event_var) {
                if let Some(due) = self.time(tev) {
                    self.deadlines.insert((due, tev.clone()));
                }
            }
        }
        self.log.push(DeonticEvent {
            kind: DeonticKind::Activated,
            dr: dr.clone(),
            norm: norm.name.clone(),
            agent: first(&self.kb, &dr, vocab::DEBTOR),
            cause: e1,
            at: ta,
        });
        self.relations.push(Relation {
            norm: n,
            id: dr,
            binding: b,
            activated_at: ta,
            excepted: HashSet::new(),
            suspensions: HashSet::new(),
            settled: HashSet::new(),
            closed_by: HashSet::new(),
        });
        true
    }

    /// Records the outcome facts of `asserts` and the matching log entries.
    fn record_outcome(&mut self, r: usize, asserts: &[AssertStmt], binding: &Binding) {
        let dr = self.relations[r].id.clone();
        let norm = self.norms[self.relations[r].norm].name.clone();
        let agent_of = |pred: &str| {
            asserts
                .iter()
                .find(|a| a.predicate == pred && resolve(&a.object, binding) == Some(Value::Resource(dr.clone())))
                .and_then(|a| resolve(&a.subject, binding))
                .and_then(|v| v.as_resource().cloned())
        };
        let agents = [agent_of(vocab::FULFILLS), agent_of(vocab::VIOLATES)];
        for stmt in asserts {
            let Some(fact) = self.assert(stmt, binding) else { continue };
            let kind = match &*fact.predicate {
                vocab::FULFILLED => DeonticKind::Fulfilled,
                vocab::VIOLATED => DeonticKind::Violated,
                _ => continue,
            };
            let cause = fact.object.as_resource().cloned().unwrap();
            let agent = if kind == DeonticKind::Fulfilled { agents[0].clone() } else { agents[1].clone() };
            self.log.push(DeonticEvent {
                kind,
                dr: dr.clone(),
                norm: norm.clone(),
                agent,
                at: self.time(&cause).unwrap(),
                cause,
            });
        }
    }

    fn is_specific(norm: &NormAst) -> bool {
        let scope = norm.activation_scope();
        norm.inner
            .then_asserts
            .iter()
            .find(|a| a.predicate == vocab::FULFILLS || a.predicate == vocab::VIOLATES)
            .is_none_or(|a| a.subject.as_var().is_some_and(|v| scope.contains(v)))
    }

    fn regulate(&mut self, r: usize) -> bool {
        if !self.relations[r].suspensions.is_empty() {
            return false;
        }
        let norm = self.norms[self.relations[r].norm].clone();
        let specific = Self::is_specific(&norm);
        for (e2, b) in self.regulated_candidates(r) {
            let rel = &self.relations[r];
            if rel.excepted.contains(&e2) {
                continue;
            }
            let key = if specific {
                e2.clone()
            } else {
                let agent = norm
                    .inner
                    .then_asserts
                    .iter()
                    .find(|a| a.predicate == vocab::FULFILLS || a.predicate == vocab::VIOLATES)
                    .and_then(|a| resolve(&a.subject, &b))
                    .and_then(|v| v.as_resource().cloned())
                    .expect("agent of a general relation");
                agent
            };
            if rel.settled.contains(&key) {
                continue;
            }
            self.relations[r].settled.insert(key);
            self.record_outcome(r, &norm.inner.then_asserts, &b);
            return true;
        }
        false
    }

    /// The ELSE branch: fires once the terminating event happened with no
    /// qualifying regulated event before it.
    fn close(&mut self, r: usize) -> bool {
        let norm = self.norms[self.relations[r].norm].clone();
        let (Some(before), Some(else_asserts)) = (&norm.inner.before, &norm.inner.else_asserts) else {
            return false;
        };
        let rel = &self.relations[r];
        if !rel.suspensions.is_empty() {
            return false;
        }
        let state_pred = else_asserts
            .iter()
            .find(|a| a.predicate == vocab::FULFILLED || a.predicate == vocab::VIOLATED)
            .map(|a| a.predicate.clone());
        if let Some(p) = &state_pred {
            if self.kb.objects(&rel.id, p).next().is_some() {
                return false;
            }
        }
        let ta = rel.activated_at;
        let mut terminations: Vec<(Resource, Binding)> = self
            .query(&before.conditions, &rel.binding)
            .into_iter()
            .filter_map(|b| {
                let e3 = b[&before.event_var].as_resource().cloned()?;
                let fresh = !rel.binding.contains_key(&before.event_var);
                let ok = self.happened(&e3) && (!fresh || self.time(&e3).is_some_and(|t| t >= ta));
                ok.then_some((e3, b))
            })
            .collect();
        terminations.sort_by(|a, b| a.0.as_str().cmp(b.0.as_str()));
        for (e3, b) in terminations {
            let rel = &self.relations[r];
            if rel.excepted.contains(&e3) || rel.closed_by.contains(&e3) {
                continue;
            }
            let Some(t3) = self.time(&e3) else { continue };
            let regulated_in_time = self.query(&norm.inner.conditions, &rel.binding).into_iter().any(|b2| {
                let e2 = b2[&norm.inner.event_var].as_resource().cloned().unwrap();
                !rel.excepted.contains(&e2) && self.time(&e2).is_some_and(|t2| t2 >= ta && t2 < t3)
            });
            if regulated_in_time {
                continue;
            }
            let debtor = norm.asserts.iter().find_map(|a| match (&*a.predicate, &a.object) {
                (vocab::DEBTOR, Term::Var(o)) => rel.binding.get(o).cloned(),
                _ => None,
            });
            let mut asserts = Vec::new();
            for a in else_asserts {
                let mut a = a.clone();
                for t in [&mut a.subject, &mut a.object] {
                    if let Term::Var(v) = t {
                        if !b.contains_key(v.as_str()) {
                            if let Some(d) = &debtor {
                                *t = Term::Const(d.clone());
                            }
                        }
                    }
                }
                if resolve(&a.subject, &b).is_some() && resolve(&a.object, &b).is_some() {
                    asserts.push(a);
                }
            }
            self.relations[r].closed_by.insert(e3);
            self.record_outcome(r, &asserts, &b);
            return true;
        }
        false
    }
}
