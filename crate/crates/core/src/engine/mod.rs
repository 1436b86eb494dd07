//! Forward-chaining production system over the working memory.
//!
//! Matching is naive: after every firing the agenda is recomputed from
//! scratch, so facts asserted by an exception immediately falsify the
//! negated guards of pending norm instances.

use std::collections::HashSet;

use serde_json::{json, Map, Value as Json};
use thiserror::Error;

use crate::compiler::{fresh_id, Action, ProductionRule, RuleSet};
use crate::kb::{vocab, Binding, Fact, Kb, KbError, Partition, Schema, Term, Value};

pub const DEFAULT_BUDGET: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    /// An action referenced a variable the conditions did not bind, or
    /// produced a value of the wrong kind.
    #[error("rule {rule}: {message}")]
    Action { rule: String, message: String },
    #[error("firing budget of {0} exceeded")]
    FixpointBudgetExceeded(usize),
    #[error("rule {rule}: {source}")]
    Query { rule: String, source: KbError },
}

/// A rule together with one satisfying binding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleInstance {
    pub rule_index: usize,
    pub rule_id: String,
    pub priority: u8,
    pub binding: Binding,
    pub dedup_key: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Agenda {
    pub instances: Vec<RuleInstance>,
}

impl Agenda {
    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn first(&self) -> Option<&RuleInstance> {
        self.instances.first()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Firing {
    pub seq: usize,
    pub rule_id: String,
    pub binding: Binding,
    /// Facts that were new when the instance fired.
    pub added: Vec<Fact>,
}

impl Firing {
    /// The `--trace` record.
    pub fn to_json(&self) -> Json {
        let binding: Map<String, Json> =
            self.binding.iter().map(|(k, v)| (k.clone(), Json::String(v.to_string()))).collect();
        json!({
            "seq": self.seq,
            "rule_id": self.rule_id,
            "binding": binding,
            "added_facts": self.added.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FiringTrace {
    pub firings: Vec<Firing>,
}

impl FiringTrace {
    pub fn is_empty(&self) -> bool {
        self.firings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.firings.len()
    }

    pub fn added_facts(&self) -> impl Iterator<Item = &Fact> {
        self.firings.iter().flat_map(|f| f.added.iter())
    }
}

#[derive(Debug, Clone)]
pub struct Engine {
    rules: RuleSet,
    /// Rule indices in agenda order: priority descending, then presentation.
    order: Vec<usize>,
    fired: HashSet<String>,
    budget: usize,
    seq: usize,
}

fn dedup_key(rule_id: &str, binding: &Binding) -> String {
    format!("{rule_id} {binding:?}")
}

impl Engine {
    pub fn new(rules: RuleSet) -> Self {
        let mut order: Vec<usize> = (0..rules.rules.len()).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(rules.rules[i].priority), i));
        Engine { rules, order, fired: HashSet::new(), budget: DEFAULT_BUDGET, seq: 0 }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn rules(&self) -> &RuleSet {
        &self.rules
    }

    /// Number of firings so far over the engine's lifetime.
    pub fn fired_count(&self) -> usize {
        self.seq
    }

    fn instances_of(&self, index: usize, kb: &Kb) -> Result<Vec<RuleInstance>, EngineError> {
        let rule = &self.rules.rules[index];
        let bindings = kb
            .query(&rule.conditions)
            .map_err(|source| EngineError::Query { rule: rule.id.clone(), source })?;
        let mut out: Vec<RuleInstance> = bindings
            .into_iter()
            .map(|binding| {
                let dedup_key = dedup_key(&rule.id, &binding);
                RuleInstance { rule_index: index, rule_id: rule.id.clone(), priority: rule.priority, binding, dedup_key }
            })
            .filter(|inst| !self.fired.contains(&inst.dedup_key))
            .collect();
        out.sort_by(|a, b| a.dedup_key.cmp(&b.dedup_key));
        Ok(out)
    }

    /// Every applicable instance that has not fired yet, in conflict
    /// resolution order.
    pub fn match_agenda(&self, kb: &Kb) -> Result<Agenda, EngineError> {
        let mut instances = Vec::new();
        for &i in &self.order {
            instances.extend(self.instances_of(i, kb)?);
        }
        Ok(Agenda { instances })
    }

    /// The instance conflict resolution would pick, without building the
    /// whole agenda.
    fn next_instance(&self, kb: &Kb) -> Result<Option<RuleInstance>, EngineError> {
        for &i in &self.order {
            if let Some(first) = self.instances_of(i, kb)?.into_iter().next() {
                return Ok(Some(first));
            }
        }
        Ok(None)
    }

    /// Executes the actions of `instance` against the deontic partition.
    pub fn fire(&mut self, instance: &RuleInstance, kb: &mut Kb) -> Result<Firing, EngineError> {
        self.fired.insert(instance.dedup_key.clone());
        self.seq += 1;
        let rule = &self.rules.rules[instance.rule_index];
        let mut binding = instance.binding.clone();
        let mut added = Vec::new();
        for action in &rule.actions {
            for fact in execute(rule, action, &mut binding)? {
                if kb.assert_unchecked(fact.clone(), Partition::Deontic) {
                    added.push(fact);
                }
            }
        }
        Ok(Firing { seq: self.seq, rule_id: rule.id.clone(), binding, added })
    }

    /// Alternates materialization and firing until no instance applies.
    pub fn run_to_fixpoint(&mut self, kb: &mut Kb, schema: &Schema) -> Result<FiringTrace, EngineError> {
        let mut trace = FiringTrace::default();
        loop {
            kb.materialize(schema);
            let Some(instance) = self.next_instance(kb)? else {
                return Ok(trace);
            };
            if trace.firings.len() >= self.budget {
                return Err(EngineError::FixpointBudgetExceeded(self.budget));
            }
            trace.firings.push(self.fire(&instance, kb)?);
        }
    }
}

fn action_error(rule: &ProductionRule, message: String) -> EngineError {
    EngineError::Action { rule: rule.id.clone(), message }
}

fn resolve(rule: &ProductionRule, term: &Term, binding: &Binding) -> Result<Value, EngineError> {
    term.resolve(binding).cloned().ok_or_else(|| action_error(rule, format!("unbound variable {term}")))
}

fn execute(rule: &ProductionRule, action: &Action, binding: &mut Binding) -> Result<Vec<Fact>, EngineError> {
    match action {
        Action::Compute(c) => {
            let value = c.expr.eval(binding).map_err(|e| action_error(rule, format!("computing ?{}: {e}", c.target)))?;
            binding.insert(c.target.clone(), value);
            Ok(vec![])
        }
        Action::Create { class, var, norm, event_var } => {
            let event = match binding.get(event_var) {
                Some(Value::Resource(r)) => r.clone(),
                Some(other) => return Err(action_error(rule, format!("?{event_var} is not an individual: {other}"))),
                None => return Err(action_error(rule, format!("unbound variable ?{event_var}"))),
            };
            let id = fresh_id(norm, &event, var);
            binding.insert(var.clone(), Value::Resource(id.clone()));
            Ok(vec![Fact::typed(id, class)])
        }
        Action::Assert(a) => {
            let subject = match resolve(rule, &a.subject, binding)? {
                Value::Resource(r) => r,
                other => return Err(action_error(rule, format!("subject of {} is not an individual: {other}", a.predicate))),
            };
            let object = resolve(rule, &a.object, binding)?;
            if a.predicate == vocab::A && object.as_resource().is_none() {
                return Err(action_error(rule, format!("class of {subject} is not a name: {object}")));
            }
            Ok(vec![Fact::new(subject, &a.predicate, object)])
        }
    }
}
