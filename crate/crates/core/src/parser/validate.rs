//! Static checks on parsed blocks: scoping, outcome pairs, compute typing,
//! and cross references between exceptions and their targets.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::error::{ErrorKind, ParseError};
use crate::kb::{vocab, ArithOp, Atom, Expr, KbError, Pattern, Term, Value};

struct Sink {
    span: Span,
    errors: Vec<ParseError>,
}

impl Sink {
    fn push(&mut self, kind: ErrorKind) {
        self.errors.push(ParseError::new(self.span.line, self.span.col, kind));
    }
}

fn range_check(sink: &mut Sink, block: &str, pattern: &Pattern, outer: &BTreeSet<String>) {
    if let Err(KbError::NotRangeRestricted(var)) = pattern.check_range_restricted(outer) {
        sink.push(ErrorKind::NotRangeRestricted { block: block.to_string(), var });
    }
}

fn positively_bound(pattern: &Pattern, var: &str) -> bool {
    pattern.bound_vars().contains(var)
}

const OUTCOME_PREDICATES: [&str; 4] = [vocab::FULFILLS, vocab::VIOLATES, vocab::FULFILLED, vocab::VIOLATED];

fn misspelled_outcome(predicate: &str) -> Option<&'static str> {
    match predicate {
        "fullfilled" | "fulfiled" | "fullfiled" => Some(vocab::FULFILLED),
        "fullfills" | "fulfils" => Some(vocab::FULFILLS),
        "violeted" => Some(vocab::VIOLATED),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Fulfilment,
    Violation,
}

/// Checks one THEN/ELSE branch and returns the outcome it produces.
fn check_outcome(
    sink: &mut Sink,
    norm: &NormAst,
    branch: &str,
    asserts: &[AssertStmt],
    event_var: &str,
) -> Option<Outcome> {
    let malformed = |reason: String| ErrorKind::MalformedOutcome { block: format!("{} {branch}", norm.name), reason };
    for a in asserts {
        if let Some(correct) = misspelled_outcome(&a.predicate) {
            sink.push(malformed(format!("unknown predicate `{}`; did you mean `{correct}`?", a.predicate)));
            return None;
        }
    }
    let agent_asserts: Vec<&AssertStmt> =
        asserts.iter().filter(|a| a.predicate == vocab::FULFILLS || a.predicate == vocab::VIOLATES).collect();
    let state_asserts: Vec<&AssertStmt> =
        asserts.iter().filter(|a| a.predicate == vocab::FULFILLED || a.predicate == vocab::VIOLATED).collect();
    let (agent, state) = match (agent_asserts.as_slice(), state_asserts.as_slice()) {
        ([a], [s]) => (*a, *s),
        _ => {
            sink.push(malformed(
                "exactly one outcome pair is required: fulfills+fulfilled or violates+violated".into(),
            ));
            return None;
        }
    };
    let outcome = if agent.predicate == vocab::FULFILLS { Outcome::Fulfilment } else { Outcome::Violation };
    let expected_state = match outcome {
        Outcome::Fulfilment => vocab::FULFILLED,
        Outcome::Violation => vocab::VIOLATED,
    };
    if state.predicate != expected_state {
        sink.push(malformed(format!("`{}` must be paired with `{expected_state}`", agent.predicate)));
        return None;
    }
    let dr = norm.dr_var();
    let dr_ok = |t: &Term| t.as_var().is_some() && t.as_var() == dr;
    if agent.subject.as_var().is_none() || !dr_ok(&agent.object) {
        sink.push(malformed(format!("expected `{}(?agent, ?{})`", agent.predicate, dr.unwrap_or("dr"))));
        return None;
    }
    if !dr_ok(&state.subject) || state.object.as_var() != Some(event_var) {
        sink.push(malformed(format!(
            "expected `{}(?{}, ?{event_var})`",
            state.predicate,
            dr.unwrap_or("dr")
        )));
        return None;
    }
    Some(outcome)
}

fn check_extra_asserts(sink: &mut Sink, norm: &NormAst, branch: &str, asserts: &[AssertStmt], allow_outcomes: bool) {
    for a in asserts {
        let reserved = if allow_outcomes {
            vocab::is_lifecycle_property(&a.predicate) && !OUTCOME_PREDICATES.contains(&a.predicate.as_str())
        } else {
            vocab::is_lifecycle_property(&a.predicate)
                && ![vocab::IS_GENERATED, vocab::ACTIVATED, vocab::DEBTOR, vocab::END].contains(&a.predicate.as_str())
        };
        if reserved {
            sink.push(ErrorKind::InvalidAssert {
                block: format!("{} {branch}", norm.name),
                reason: format!("`{}` cannot be asserted here", a.predicate),
            });
        }
    }
}

fn check_vars_bound(sink: &mut Sink, block: &str, vars: impl IntoIterator<Item = String>, scope: &BTreeSet<String>) {
    let mut reported = BTreeSet::new();
    for v in vars {
        if !scope.contains(&v) && reported.insert(v.clone()) {
            sink.push(ErrorKind::UnboundVariable { block: block.to_string(), var: v });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Timestamp,
    Duration,
    Number,
    Other,
    Unknown,
}

fn infer(expr: &Expr, types: &BTreeMap<String, Ty>) -> Result<Ty, String> {
    Ok(match expr {
        Expr::Term(Term::Var(v)) => types.get(v).copied().unwrap_or(Ty::Unknown),
        Expr::Term(Term::Const(c)) => match c {
            Value::Integer(_) | Value::Decimal(_) => Ty::Number,
            Value::Timestamp(_) => Ty::Timestamp,
            Value::Duration(_) => Ty::Duration,
            _ => Ty::Other,
        },
        Expr::Field { base, unit } => match infer(base, types)? {
            Ty::Timestamp | Ty::Unknown => Ty::Number,
            _ => return Err(format!("`.{}` needs a timestamp", unit.name())),
        },
        Expr::Shift { base, amount, unit, .. } => {
            match infer(base, types)? {
                Ty::Timestamp | Ty::Unknown => {}
                _ => return Err(format!("only timestamps can be moved by {}s", unit.name())),
            }
            match infer(amount, types)? {
                Ty::Number | Ty::Unknown => {}
                _ => return Err(format!("the number of {}s must be numeric", unit.name())),
            }
            Ty::Timestamp
        }
        Expr::Binary { op, lhs, rhs } => {
            let (l, r) = (infer(lhs, types)?, infer(rhs, types)?);
            use Ty::*;
            match (op, l, r) {
                (_, Unknown, _) | (_, _, Unknown) => Unknown,
                (_, Number, Number) => Number,
                (ArithOp::Sub, Timestamp, Timestamp) => Duration,
                (ArithOp::Add | ArithOp::Sub, Timestamp, Duration) | (ArithOp::Add, Duration, Timestamp) => Timestamp,
                (ArithOp::Add | ArithOp::Sub, Duration, Duration) => Duration,
                (ArithOp::Mul, Duration, Number) | (ArithOp::Mul, Number, Duration) => Duration,
                (ArithOp::Add | ArithOp::Sub, Timestamp, Number) | (ArithOp::Add, Number, Timestamp) => {
                    return Err("adding a plain number to a timestamp needs a time unit (e.g. `+ 24 hour`)".into())
                }
                (op, l, r) => return Err(format!("cannot apply `{}` to {l:?} and {r:?}", op.symbol())),
            }
        }
    })
}

fn timestamp_vars(pattern: &Pattern) -> impl Iterator<Item = String> + '_ {
    pattern.atoms.iter().filter_map(|a| match a {
        Atom::Property { predicate, object: Term::Var(v), .. } if predicate == vocab::IN_XSD_DATE_TIME_STAMP => {
            Some(v.clone())
        }
        _ => None,
    })
}

pub fn validate_norm(norm: &NormAst) -> Vec<ParseError> {
    let mut sink = Sink { span: norm.span, errors: Vec::new() };
    let name = norm.name.as_str();

    range_check(&mut sink, name, &norm.outer.conditions, &BTreeSet::new());
    if !positively_bound(&norm.outer.conditions, &norm.outer.event_var) {
        sink.push(ErrorKind::UnboundVariable { block: format!("{name} ON"), var: norm.outer.event_var.clone() });
    }

    let mut scope = norm.outer.conditions.bound_vars();
    scope.insert(norm.outer.event_var.clone());
    let mut types: BTreeMap<String, Ty> = timestamp_vars(&norm.outer.conditions).map(|v| (v, Ty::Timestamp)).collect();
    for c in &norm.computes {
        let mut vars = BTreeSet::new();
        c.expr.vars(&mut vars);
        check_vars_bound(&mut sink, &format!("{name} COMPUTE"), vars, &scope);
        match infer(&c.expr, &types) {
            Ok(ty) => {
                types.insert(c.target.clone(), ty);
            }
            Err(reason) => sink.push(ErrorKind::ComputeType { block: format!("{name} COMPUTE ?{}", c.target), reason }),
        }
        if !scope.insert(c.target.clone()) {
            sink.push(ErrorKind::InvalidAssert {
                block: format!("{name} COMPUTE"),
                reason: format!("?{} is already bound", c.target),
            });
        }
    }

    let drs = norm.creates.iter().filter(|c| c.class == vocab::DEONTIC_RELATION).count();
    if drs != 1 {
        sink.push(ErrorKind::MissingDeonticRelation { norm: name.to_string() });
    }
    for c in &norm.creates {
        if !scope.insert(c.var.clone()) {
            sink.push(ErrorKind::InvalidAssert {
                block: format!("{name} CREATE"),
                reason: format!("?{} is already bound", c.var),
            });
        }
    }

    check_vars_bound(
        &mut sink,
        &format!("{name} ASSERT"),
        norm.asserts.iter().flat_map(|a| a.vars().map(str::to_string).collect::<Vec<_>>()),
        &scope,
    );
    check_extra_asserts(&mut sink, norm, "ASSERT", &norm.asserts, false);
    for a in &norm.asserts {
        if a.predicate == vocab::IS_GENERATED && a.object != Term::resource(name) {
            sink.push(ErrorKind::InvalidAssert {
                block: format!("{name} ASSERT"),
                reason: format!("isGenerated must name the norm itself ({name})"),
            });
        }
    }

    let inner = &norm.inner;
    let mut inner_scope = scope.clone();
    if let Some(before) = &inner.before {
        range_check(&mut sink, &format!("{name} BEFORE"), &before.conditions, &scope);
        if !scope.contains(&before.event_var) && !positively_bound(&before.conditions, &before.event_var) {
            sink.push(ErrorKind::UnboundVariable { block: format!("{name} BEFORE"), var: before.event_var.clone() });
        }
        inner_scope.insert(before.event_var.clone());
        inner_scope.extend(before.conditions.bound_vars());
    }
    range_check(&mut sink, &format!("{name} ON ?{}", inner.event_var), &inner.conditions, &inner_scope);
    if !positively_bound(&inner.conditions, &inner.event_var) {
        sink.push(ErrorKind::UnboundVariable { block: format!("{name} ON"), var: inner.event_var.clone() });
    }
    let actor = norm.actor_var();
    if actor.is_none() {
        sink.push(ErrorKind::MissingActor { norm: name.to_string() });
    }
    let else_scope = inner_scope.clone();
    inner_scope.extend(inner.conditions.bound_vars());

    check_vars_bound(
        &mut sink,
        &format!("{name} THEN"),
        inner.then_asserts.iter().flat_map(|a| a.vars().map(str::to_string).collect::<Vec<_>>()),
        &inner_scope,
    );
    check_extra_asserts(&mut sink, norm, "THEN", &inner.then_asserts, true);
    let then = check_outcome(&mut sink, norm, "THEN", &inner.then_asserts, &inner.event_var);

    if let Some(else_asserts) = &inner.else_asserts {
        match &inner.before {
            None => sink.push(ErrorKind::ElseWithoutBefore { norm: name.to_string() }),
            Some(before) => {
                let mut scope = else_scope.clone();
                // An agent that is only the regulated event's actor is
                // replaced by the debtor or dropped when compiled.
                if let Some(actor) = actor {
                    scope.insert(actor.to_string());
                }
                check_vars_bound(
                    &mut sink,
                    &format!("{name} ELSE"),
                    else_asserts.iter().flat_map(|a| a.vars().map(str::to_string).collect::<Vec<_>>()),
                    &scope,
                );
                check_extra_asserts(&mut sink, norm, "ELSE", else_asserts, true);
                let otherwise = check_outcome(&mut sink, norm, "ELSE", else_asserts, &before.event_var);
                if let (Some(a), Some(b)) = (then, otherwise) {
                    if a == b {
                        sink.push(ErrorKind::MalformedOutcome {
                            block: name.to_string(),
                            reason: "THEN and ELSE must carry opposite outcomes".into(),
                        });
                    }
                }
            }
        }
    }
    sink.errors
}

/// Checks an exception on its own; references to the target are checked by
/// [`validate_cross_refs`].
pub fn validate_exception(exc: &ExceptionAst) -> Vec<ParseError> {
    let mut sink = Sink { span: exc.span, errors: Vec::new() };
    let mismatch = |reason: String| ErrorKind::ConsequentMismatch { exception: exc.name.clone(), reason };
    if exc.consequent.event_var() != exc.event_var {
        sink.push(mismatch(format!(
            "the consequent must refer to the exception's event ?{}, not ?{}",
            exc.event_var,
            exc.consequent.event_var()
        )));
    }
    match &exc.consequent {
        Consequent::ToNorm { norm, .. } if *norm != exc.target => {
            sink.push(mismatch(format!("exceptionToNorm names `{norm}` but the exception is to `{}`", exc.target)))
        }
        Consequent::ToException { exception, .. } if *exception != exc.target => sink.push(mismatch(format!(
            "exceptionToException names `{exception}` but the exception is to `{}`",
            exc.target
        ))),
        Consequent::ToDr { dr_var, .. } => {
            let has_generated = exc.conditions.atoms.iter().any(|a| {
                matches!(a, Atom::Property { predicate, subject: Term::Var(d), object }
                    if predicate == vocab::IS_GENERATED && d == dr_var && *object == Term::resource(&exc.target))
            });
            if !has_generated {
                sink.push(ErrorKind::MissingIsGenerated { exception: exc.name.clone(), target: exc.target.clone() });
            }
        }
        _ => {}
    }
    if exc.kind == ExceptionKind::ToRelation && !positively_bound(&exc.conditions, &exc.event_var) {
        sink.push(ErrorKind::UnboundVariable { block: exc.name.clone(), var: exc.event_var.clone() });
    }
    sink.errors
}

/// Variables an exception may use without binding them itself.
fn exception_scope(exc: &ExceptionAst, items: &BTreeMap<&str, &Item>, depth: usize) -> Option<BTreeSet<String>> {
    let target = items.get(exc.target.as_str())?;
    let mut scope = match (exc.kind, target) {
        (ExceptionKind::ToNorm, Item::Norm(n)) => {
            let mut s = n.outer.conditions.bound_vars();
            s.insert(n.outer.event_var.clone());
            s
        }
        (ExceptionKind::ToRegulatedEvent, Item::Norm(n)) => n.regulated_scope(),
        (ExceptionKind::ToRelation, Item::Norm(n)) => n.activation_scope(),
        (ExceptionKind::ToException, Item::Exception(t)) if depth == 0 => {
            let mut s = exception_scope(t, items, depth + 1)?;
            s.extend(t.conditions.bound_vars());
            s.insert(t.event_var.clone());
            s
        }
        _ => return None,
    };
    scope.insert(exc.event_var.clone());
    Some(scope)
}

/// Checks that exception targets exist and that exceptions only use
/// variables bound locally or in their target's scope. Also rejects
/// duplicate block names.
pub fn validate_cross_refs(items: &[Item]) -> Result<(), Vec<ParseError>> {
    let mut errors = Vec::new();
    let mut by_name: BTreeMap<&str, &Item> = BTreeMap::new();
    for item in items {
        if by_name.insert(item.name(), item).is_some() {
            let span = item.span();
            errors.push(ParseError::new(span.line, span.col, ErrorKind::DuplicateName(item.name().to_string())));
        }
    }
    for exc in items.iter().filter_map(Item::as_exception) {
        let mut sink = Sink { span: exc.span, errors: Vec::new() };
        let unknown = || ErrorKind::UnknownTarget { exception: exc.name.clone(), target: exc.target.clone() };
        match (exc.kind, by_name.get(exc.target.as_str())) {
            (ExceptionKind::ToException, Some(Item::Exception(t))) => {
                if t.kind == ExceptionKind::ToException {
                    sink.push(ErrorKind::NestingTooDeep { exception: exc.name.clone() });
                }
            }
            (ExceptionKind::ToException, _) | (_, Some(Item::Exception(_))) | (_, None) => sink.push(unknown()),
            (_, Some(Item::Norm(_))) => {}
        }
        if sink.errors.is_empty() {
            if let Some(scope) = exception_scope(exc, &by_name, 0) {
                range_check(&mut sink, &exc.name, &exc.conditions, &scope);
                let mut available = scope.clone();
                available.extend(exc.conditions.bound_vars());
                let mut needed = BTreeSet::new();
                for atom in &exc.conditions.atoms {
                    if let Atom::Comparison { .. } = atom {
                        atom.vars(&mut needed);
                    }
                }
                if let Some(dr) = exc.dr_var() {
                    needed.insert(dr.to_string());
                }
                for var in needed.difference(&available) {
                    sink.push(ErrorKind::UnboundExceptionVariable { var: var.clone(), exception: exc.name.clone() });
                }
            }
        }
        errors.extend(sink.errors);
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors)
    }
}
