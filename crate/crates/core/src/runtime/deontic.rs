use std::fmt;

use serde_json::{json, Value as Json};

use crate::compiler::{fresh_id, Action, RuleSet};
use crate::engine::Firing;
use crate::kb::{vocab, Fact, Kb, Partition, Resource, Timestamp, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DeonticKind {
    Activated,
    Fulfilled,
    Violated,
    Inhibited,
}

impl DeonticKind {
    pub fn name(&self) -> &'static str {
        match self {
            DeonticKind::Activated => "Activated",
            DeonticKind::Fulfilled => "Fulfilled",
            DeonticKind::Violated => "Violated",
            DeonticKind::Inhibited => "Inhibited",
        }
    }
}

/// One lifecycle record of the deontic log.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeonticEvent {
    pub kind: DeonticKind,
    pub dr: Resource,
    pub norm: String,
    pub agent: Option<Resource>,
    pub cause: Resource,
    /// Time of the cause event.
    pub at: Timestamp,
}

impl DeonticEvent {
    pub fn to_json(&self) -> Json {
        json!({
            "kind": self.kind.name(),
            "dr": self.dr.as_str(),
            "norm": self.norm,
            "agent": self.agent.as_ref().map(|a| a.as_str()),
            "cause": self.cause.as_str(),
            "at": self.at.to_string(),
        })
    }
}

impl fmt::Display for DeonticEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

/// Counts over a deontic log.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Summary {
    pub activations: usize,
    pub fulfilments: usize,
    pub violations: usize,
    pub inhibitions: usize,
}

impl Summary {
    pub fn of(log: &[DeonticEvent]) -> Self {
        let mut s = Summary::default();
        for e in log {
            match e.kind {
                DeonticKind::Activated => s.activations += 1,
                DeonticKind::Fulfilled => s.fulfilments += 1,
                DeonticKind::Violated => s.violations += 1,
                DeonticKind::Inhibited => s.inhibitions += 1,
            }
        }
        s
    }

    pub fn to_json(&self) -> Json {
        json!({
            "activations": self.activations,
            "fulfilments": self.fulfilments,
            "violations": self.violations,
            "inhibitions": self.inhibitions,
        })
    }
}

fn first_resource<'a>(kb: &'a Kb, subject: &Resource, predicate: &str) -> Option<&'a Resource> {
    kb.objects(subject, predicate).filter_map(Value::as_resource).min()
}

fn norm_of(kb: &Kb, dr: &Resource) -> String {
    first_resource(kb, dr, vocab::IS_GENERATED).map(|n| n.as_str().to_string()).unwrap_or_default()
}

/// Translates the lifecycle facts added by `firings` into log records.
pub(super) fn extract(kb: &Kb, rules: &RuleSet, firings: &[Firing]) -> Vec<DeonticEvent> {
    let mut out = Vec::new();
    let time = |r: &Resource| kb.time_of(r).unwrap_or(Timestamp::from_millis(0));
    for firing in firings {
        let Some(rule) = rules.rule(&firing.rule_id) else { continue };
        let resolved: Vec<Fact> = rule
            .actions
            .iter()
            .filter_map(|a| match a {
                Action::Assert(a) => {
                    let s = a.subject.resolve(&firing.binding)?.as_resource()?.clone();
                    let o = a.object.resolve(&firing.binding)?.clone();
                    Some(Fact::new(s, &a.predicate, o))
                }
                _ => None,
            })
            .collect();
        for fact in &firing.added {
            let subject = &fact.subject;
            let object = fact.object.as_resource();
            match (&*fact.predicate, object) {
                (vocab::A, Some(class)) if class.as_str() == vocab::DEONTIC_RELATION => {
                    let Some(cause) = first_resource(kb, subject, vocab::ACTIVATED) else { continue };
                    out.push(DeonticEvent {
                        kind: DeonticKind::Activated,
                        dr: subject.clone(),
                        norm: norm_of(kb, subject),
                        agent: first_resource(kb, subject, vocab::DEBTOR).cloned(),
                        cause: cause.clone(),
                        at: time(cause),
                    });
                }
                (vocab::FULFILLED | vocab::VIOLATED, Some(cause)) => {
                    let (kind, agent_pred) = if &*fact.predicate == vocab::FULFILLED {
                        (DeonticKind::Fulfilled, vocab::FULFILLS)
                    } else {
                        (DeonticKind::Violated, vocab::VIOLATES)
                    };
                    let agent = resolved
                        .iter()
                        .find(|f| &*f.predicate == agent_pred && f.object.as_resource() == Some(subject))
                        .map(|f| f.subject.clone());
                    out.push(DeonticEvent {
                        kind,
                        dr: subject.clone(),
                        norm: norm_of(kb, subject),
                        agent,
                        cause: cause.clone(),
                        at: time(cause),
                    });
                }
                (vocab::EXCEPTION_TO_NORM, Some(cause)) => {
                    let norm = subject.as_str();
                    let Some(info) = rules.norm(norm) else { continue };
                    out.push(DeonticEvent {
                        kind: DeonticKind::Inhibited,
                        dr: fresh_id(norm, cause, &info.dr_var),
                        norm: norm.to_string(),
                        agent: first_resource(kb, cause, vocab::ACTOR).cloned(),
                        cause: cause.clone(),
                        at: time(cause),
                    });
                }
                (vocab::EXCEPTION_TO_DR | vocab::EXCEPTION_TO_WHOLE_DR, Some(cause)) => {
                    let agent = first_resource(kb, subject, vocab::DEBTOR)
                        .or_else(|| first_resource(kb, cause, vocab::ACTOR))
                        .cloned();
                    out.push(DeonticEvent {
                        kind: DeonticKind::Inhibited,
                        dr: subject.clone(),
                        norm: norm_of(kb, subject),
                        agent,
                        cause: cause.clone(),
                        at: time(cause),
                    });
                }
                _ => {}
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationStatus {
    /// In force: no outcome yet and the deadline has not passed.
    Active,
    Fulfilled,
    Violated,
    /// Suspended by an exception triggered by an unrelated event.
    Suspended,
    /// Deadline passed without any recorded outcome.
    Closed,
}

impl RelationStatus {
    pub fn name(&self) -> &'static str {
        match self {
            RelationStatus::Active => "active",
            RelationStatus::Fulfilled => "fulfilled",
            RelationStatus::Violated => "violated",
            RelationStatus::Suspended => "suspended",
            RelationStatus::Closed => "closed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct RelationState {
    pub dr: Resource,
    pub norm: String,
    pub debtor: Option<Resource>,
    pub status: RelationStatus,
}

impl RelationState {
    pub fn to_json(&self) -> Json {
        json!({
            "dr": self.dr.as_str(),
            "norm": self.norm,
            "debtor": self.debtor.as_ref().map(|d| d.as_str()),
            "status": self.status.name(),
        })
    }
}

/// Derived status of every deontic relation in the KB.
pub(super) fn relations(kb: &Kb) -> Vec<RelationState> {
    let drs: Vec<Resource> = kb
        .facts_in(Partition::Deontic)
        .filter(|f| f.is_class_membership() && f.object == Value::resource(vocab::DEONTIC_RELATION))
        .map(|f| f.subject.clone())
        .collect();
    let has = |dr: &Resource, p: &str| kb.objects(dr, p).next().is_some();
    let mut out: Vec<RelationState> = drs
        .into_iter()
        .map(|dr| {
            let deadline_passed = kb
                .objects(&dr, vocab::END)
                .filter_map(Value::as_resource)
                .any(|tev| kb.objects(tev, vocab::HAPPENED).next().is_some());
            let status = if has(&dr, vocab::EXCEPTION_TO_WHOLE_DR) {
                RelationStatus::Suspended
            } else if has(&dr, vocab::VIOLATED) {
                RelationStatus::Violated
            } else if has(&dr, vocab::FULFILLED) {
                RelationStatus::Fulfilled
            } else if deadline_passed {
                RelationStatus::Closed
            } else {
                RelationStatus::Active
            };
            RelationState {
                norm: norm_of(kb, &dr),
                debtor: first_resource(kb, &dr, vocab::DEBTOR).cloned(),
                dr,
                status,
            }
        })
        .collect();
    out.sort();
    out
}
