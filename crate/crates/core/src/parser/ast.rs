use std::collections::BTreeSet;

use crate::kb::{vocab, Atom, Expr, Pattern, Term};

/// Source position of a block. Positions never take part in AST equality,
/// so a pretty-printed and reparsed block compares equal to the original.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

/// `ON ?event WHERE conditions`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trigger {
    pub event_var: String,
    pub conditions: Pattern,
}

/// `BEFORE ?event [WHERE conditions]`. The event is either a variable of the
/// enclosing scope (a created deadline) or a fresh event bound by the
/// conditions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Before {
    pub event_var: String,
    pub conditions: Pattern,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComputeStmt {
    pub target: String,
    pub expr: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CreateStmt {
    pub var: String,
    pub class: String,
}

/// `predicate(subject, object)`; a class assertion uses predicate `a`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct AssertStmt {
    pub predicate: String,
    pub subject: Term,
    pub object: Term,
}

impl AssertStmt {
    pub fn new(predicate: &str, subject: Term, object: Term) -> Self {
        AssertStmt { predicate: predicate.to_string(), subject, object }
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        [&self.subject, &self.object].into_iter().filter_map(Term::as_var)
    }

    pub fn to_atom(&self) -> Atom {
        if self.predicate == vocab::A {
            if let Term::Const(crate::kb::Value::Resource(class)) = &self.object {
                return Atom::class(class.as_str(), self.subject.clone());
            }
        }
        Atom::property(&self.predicate, self.subject.clone(), self.object.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inner {
    pub event_var: String,
    pub before: Option<Before>,
    pub conditions: Pattern,
    pub then_asserts: Vec<AssertStmt>,
    pub else_asserts: Option<Vec<AssertStmt>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormAst {
    pub name: String,
    /// The activating trigger. Unconditional norms get a synthesized trigger
    /// on the built-in enactment event.
    pub outer: Trigger,
    pub unconditional: bool,
    pub computes: Vec<ComputeStmt>,
    pub creates: Vec<CreateStmt>,
    pub asserts: Vec<AssertStmt>,
    pub inner: Inner,
    pub span: Span,
}

impl NormAst {
    /// Variable of the created deontic relation.
    pub fn dr_var(&self) -> Option<&str> {
        self.creates.iter().find(|c| c.class == vocab::DEONTIC_RELATION).map(|c| c.var.as_str())
    }

    /// Variables visible after the activation part: outer bindings,
    /// computed and created variables.
    pub fn activation_scope(&self) -> BTreeSet<String> {
        let mut scope = self.outer.conditions.bound_vars();
        scope.insert(self.outer.event_var.clone());
        scope.extend(self.computes.iter().map(|c| c.target.clone()));
        scope.extend(self.creates.iter().map(|c| c.var.clone()));
        scope
    }

    /// Variables visible inside the regulated part.
    pub fn regulated_scope(&self) -> BTreeSet<String> {
        let mut scope = self.activation_scope();
        scope.insert(self.inner.event_var.clone());
        if let Some(b) = &self.inner.before {
            scope.insert(b.event_var.clone());
            scope.extend(b.conditions.bound_vars());
        }
        scope.extend(self.inner.conditions.bound_vars());
        scope
    }

    /// Variable bound to the regulated event's actor.
    pub fn actor_var(&self) -> Option<&str> {
        self.inner.conditions.atoms.iter().find_map(|a| match a {
            Atom::Property { predicate, subject: Term::Var(s), object: Term::Var(o) }
                if predicate == vocab::ACTOR && *s == self.inner.event_var =>
            {
                Some(o.as_str())
            }
            _ => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExceptionKind {
    /// Inhibits activation of the norm.
    ToNorm,
    /// Inhibits the outcome of a regulated event.
    ToRegulatedEvent,
    /// Suspends a deontic relation when an unrelated event happens.
    ToRelation,
    /// Inhibits another exception.
    ToException,
}

impl ExceptionKind {
    pub fn type_number(&self) -> Option<u8> {
        match self {
            ExceptionKind::ToNorm => Some(1),
            ExceptionKind::ToRegulatedEvent => Some(2),
            ExceptionKind::ToRelation => Some(3),
            ExceptionKind::ToException => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Consequent {
    /// `exceptionToNorm(Norm, ?event)`
    ToNorm { norm: String, event_var: String },
    /// `exceptionToDR(?dr, ?event)`
    ToDr { dr_var: String, event_var: String },
    /// `exceptionToException(Exception, ?event)`
    ToException { exception: String, event_var: String },
}

impl Consequent {
    pub fn predicate(&self) -> &'static str {
        match self {
            Consequent::ToNorm { .. } => vocab::EXCEPTION_TO_NORM,
            Consequent::ToDr { .. } => vocab::EXCEPTION_TO_DR,
            Consequent::ToException { .. } => vocab::EXCEPTION_TO_EXCEPTION,
        }
    }

    pub fn event_var(&self) -> &str {
        match self {
            Consequent::ToNorm { event_var, .. }
            | Consequent::ToDr { event_var, .. }
            | Consequent::ToException { event_var, .. } => event_var,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExceptionAst {
    pub name: String,
    /// Whether the name was written in the source or derived from the target.
    pub named: bool,
    pub target: String,
    pub kind: ExceptionKind,
    /// Whether `TYPE n` was written.
    pub explicit_type: bool,
    pub event_var: String,
    pub conditions: Pattern,
    pub consequent: Consequent,
    pub span: Span,
}

impl ExceptionAst {
    /// The deontic relation variable for exceptions to relations.
    pub fn dr_var(&self) -> Option<&str> {
        match &self.consequent {
            Consequent::ToDr { dr_var, .. } => Some(dr_var),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Item {
    Norm(NormAst),
    Exception(ExceptionAst),
}

impl Item {
    pub fn name(&self) -> &str {
        match self {
            Item::Norm(n) => &n.name,
            Item::Exception(e) => &e.name,
        }
    }

    pub fn span(&self) -> Span {
        match self {
            Item::Norm(n) => n.span,
            Item::Exception(e) => e.span,
        }
    }

    pub fn as_norm(&self) -> Option<&NormAst> {
        match self {
            Item::Norm(n) => Some(n),
            Item::Exception(_) => None,
        }
    }

    pub fn as_exception(&self) -> Option<&ExceptionAst> {
        match self {
            Item::Exception(e) => Some(e),
            Item::Norm(_) => None,
        }
    }
}
