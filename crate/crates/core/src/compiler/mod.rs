//! Translation of norm and exception blocks into prioritized production
//! rules.

mod exception;
mod norm;
mod thread;

use std::fmt;

use thiserror::Error;

use crate::kb::{vocab, Atom, CmpOp, Expr, Pattern, Resource, Term};
use crate::parser::{AssertStmt, ComputeStmt, ExceptionAst, Item, NormAst};

pub use exception::compile_exception;
pub use norm::compile_norm;

pub const NORM_PRIORITY: u8 = 1;
pub const EXCEPTION_PRIORITY: u8 = 2;
pub const META_EXCEPTION_PRIORITY: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error("rule {rule}: variable ?{var} cannot be recovered from the deontic relation")]
    Unthreadable { rule: String, var: String },
    #[error("exception {exception}: {reason}")]
    KindMismatch { exception: String, reason: String },
    #[error("exception {exception}: unknown target {target}")]
    UnknownTarget { exception: String, target: String },
    #[error("norm {norm}: no DeonticRelation is created")]
    MissingDeonticRelation { norm: String },
}

/// Which part of a block a rule was generated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuleKind {
    Activation,
    Regulated,
    Else,
    Exception,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Compute(ComputeStmt),
    /// Mints `<norm>#<var>#<event>` and asserts its class membership.
    Create { class: String, var: String, norm: String, event_var: String },
    Assert(AssertStmt),
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Compute(c) => write!(f, "COMPUTE ?{} = {}", c.target, c.expr),
            Action::Create { class, var, norm, event_var } => {
                write!(f, "CREATE {class}(?{var}) AS {norm}#{var}#?{event_var}")
            }
            Action::Assert(a) => write!(f, "ASSERT {}", a.to_atom()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductionRule {
    pub id: String,
    pub priority: u8,
    pub conditions: Pattern,
    pub actions: Vec<Action>,
    /// Name of the norm or exception the rule came from.
    pub block: String,
    pub kind: RuleKind,
}

impl fmt::Display for ProductionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RULE {}", self.id)?;
        writeln!(f, "PRIORITY {}", self.priority)?;
        writeln!(f, "IF")?;
        for atom in &self.conditions.atoms {
            writeln!(f, "  {atom}")?;
        }
        writeln!(f, "THEN")?;
        for action in &self.actions {
            writeln!(f, "  {action}")?;
        }
        writeln!(f, "END")
    }
}

/// What the runtime needs to know about a compiled norm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormInfo {
    pub name: String,
    pub dr_var: String,
    pub event_var: String,
    pub unconditional: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleSet {
    pub rules: Vec<ProductionRule>,
    pub norms: Vec<NormInfo>,
}

impl RuleSet {
    pub fn rule(&self, id: &str) -> Option<&ProductionRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    pub fn norm(&self, name: &str) -> Option<&NormInfo> {
        self.norms.iter().find(|n| n.name == name)
    }

    /// The stable textual listing used by `compile` and golden tests.
    pub fn dump(&self) -> String {
        self.rules.iter().map(|r| r.to_string()).collect::<Vec<_>>().join("\n")
    }
}

/// Deterministic identity of an individual created by a norm activation.
pub fn fresh_id(norm: &str, event: &Resource, slot: &str) -> Resource {
    Resource::new(format!("{norm}#{slot}#{}", event.as_str()))
}

/// Compiles validated blocks in source order.
pub fn compile(items: &[Item]) -> Result<RuleSet, CompileError> {
    let mut set = RuleSet::default();
    for item in items {
        match item {
            Item::Norm(n) => {
                let dr_var =
                    n.dr_var().ok_or_else(|| CompileError::MissingDeonticRelation { norm: n.name.clone() })?;
                set.norms.push(NormInfo {
                    name: n.name.clone(),
                    dr_var: dr_var.to_string(),
                    event_var: n.outer.event_var.clone(),
                    unconditional: n.unconditional,
                });
                set.rules.extend(compile_norm(n)?);
            }
            Item::Exception(e) => {
                let (norm, via) = resolve_target(e, items)?;
                set.rules.push(compile_exception(e, norm, via)?);
            }
        }
    }
    Ok(set)
}

/// The norm an exception ultimately applies to, plus the intermediate
/// exception for exceptions to exceptions.
fn resolve_target<'a>(
    e: &ExceptionAst,
    items: &'a [Item],
) -> Result<(&'a NormAst, Option<&'a ExceptionAst>), CompileError> {
    let unknown = || CompileError::UnknownTarget { exception: e.name.clone(), target: e.target.clone() };
    let find = |name: &str| items.iter().find(|i| i.name() == name);
    match find(&e.target).ok_or_else(unknown)? {
        Item::Norm(n) => Ok((n, None)),
        Item::Exception(x) => match find(&x.target) {
            Some(Item::Norm(n)) => Ok((n, Some(x))),
            _ => Err(unknown()),
        },
    }
}

pub(crate) fn var(name: &str) -> Term {
    Term::var(name)
}

pub(crate) fn prop(predicate: &str, subject: Term, object: Term) -> Atom {
    Atom::property(predicate, subject, object)
}

pub(crate) fn cmp(lhs: &str, op: CmpOp, rhs: &str) -> Atom {
    Atom::Comparison { lhs: Expr::var(lhs), op, rhs: Expr::var(rhs) }
}

/// Variable holding the timestamp of `event` in `atoms`, reusing an existing
/// `atTime`/`inXSDDateTimeStamp` chain when one is present.
pub(crate) fn time_of(atoms: &mut Vec<Atom>, event: &str) -> String {
    for a in atoms.iter() {
        let Atom::Property { predicate, subject: Term::Var(s), object: Term::Var(inst) } = a else { continue };
        if predicate != vocab::AT_TIME || s != event {
            continue;
        }
        for b in atoms.iter() {
            if let Atom::Property { predicate, subject: Term::Var(i), object: Term::Var(t) } = b {
                if predicate == vocab::IN_XSD_DATE_TIME_STAMP && i == inst {
                    return t.clone();
                }
            }
        }
    }
    let inst = format!("__i_{event}");
    let t = format!("__t_{event}");
    atoms.push(prop(vocab::AT_TIME, var(event), var(&inst)));
    atoms.push(prop(vocab::IN_XSD_DATE_TIME_STAMP, var(&inst), var(&t)));
    t
}

pub(crate) fn push_unique(atoms: &mut Vec<Atom>, atom: Atom) {
    if !atoms.contains(&atom) {
        atoms.push(atom);
    }
}
