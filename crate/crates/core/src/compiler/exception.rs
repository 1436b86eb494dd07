use std::collections::BTreeSet;

use super::norm::{activation_context, regulated_context, ACTIVATION_TIME};
use super::thread::thread;
use super::{
    cmp, prop, push_unique, time_of, var, Action, CompileError, ProductionRule, RuleKind, EXCEPTION_PRIORITY,
    META_EXCEPTION_PRIORITY,
};
use crate::kb::{vocab, Atom, CmpOp, Pattern, Term};
use crate::parser::{AssertStmt, Consequent, ExceptionAst, ExceptionKind, NormAst};

/// One rule per exception. `norm` is the norm the exception ultimately
/// applies to; `via` is the inhibited exception for exceptions to
/// exceptions.
pub fn compile_exception(
    exc: &ExceptionAst,
    norm: &NormAst,
    via: Option<&ExceptionAst>,
) -> Result<ProductionRule, CompileError> {
    check_consequent(exc)?;
    match (exc.kind, via) {
        (ExceptionKind::ToException, Some(target)) => {
            let inner = compile_exception(target, norm, None)?;
            let guard = inhibitor_guard(&target.name, &event_of(&inner));
            let event = event_of(&inner);
            let mut atoms: Vec<Atom> = inner.conditions.atoms.into_iter().filter(|a| *a != guard).collect();
            let mut own = exc.conditions.clone();
            own.rename(&exc.event_var, &event);
            for a in own.atoms {
                push_unique(&mut atoms, a);
            }
            atoms.push(inhibitor_guard(&exc.name, &event));
            let action = AssertStmt::new(vocab::EXCEPTION_TO_EXCEPTION, Term::resource(&target.name), var(&event));
            Ok(rule(exc, META_EXCEPTION_PRIORITY, atoms, action))
        }
        (ExceptionKind::ToException, None) | (_, Some(_)) => Err(CompileError::KindMismatch {
            exception: exc.name.clone(),
            reason: "exceptions to exceptions must target an exception".into(),
        }),
        (ExceptionKind::ToNorm, None) => {
            let e1 = norm.outer.event_var.as_str();
            let mut atoms = activation_context(norm);
            let mut own = exc.conditions.clone();
            own.rename(&exc.event_var, e1);
            for a in own.atoms {
                push_unique(&mut atoms, a);
            }
            atoms.push(inhibitor_guard(&exc.name, e1));
            let action = AssertStmt::new(vocab::EXCEPTION_TO_NORM, Term::resource(&norm.name), var(e1));
            Ok(rule(exc, EXCEPTION_PRIORITY, atoms, action))
        }
        (ExceptionKind::ToRegulatedEvent, None) => {
            let dr = norm_dr(norm)?;
            let e2 = norm.inner.event_var.as_str();
            let own = own_conditions(exc, dr, e2);
            let extra: BTreeSet<String> = own.vars();
            let (mut atoms, _) = regulated_context(norm, dr, &extra, &exc.name)?;
            for a in own.atoms {
                push_unique(&mut atoms, a);
            }
            atoms.push(inhibitor_guard(&exc.name, e2));
            let action = AssertStmt::new(vocab::EXCEPTION_TO_DR, var(dr), var(e2));
            Ok(rule(exc, EXCEPTION_PRIORITY, atoms, action))
        }
        (ExceptionKind::ToRelation, None) => {
            let dr = norm_dr(norm)?;
            let en = exc.event_var.as_str();
            let own = own_conditions(exc, dr, en);
            let scope = norm.activation_scope();
            let local = own.bound_vars();
            let needed: BTreeSet<String> =
                own.vars().into_iter().filter(|v| v != dr && !local.contains(v) && scope.contains(v)).collect();

            let (positive, rest): (Vec<Atom>, Vec<Atom>) = own.atoms.into_iter().partition(Atom::is_positive);
            let mut atoms = positive;
            push_unique(&mut atoms, prop(vocab::IS_GENERATED, var(dr), Term::resource(&norm.name)));
            for a in thread(norm, dr, &needed, &exc.name)? {
                push_unique(&mut atoms, a);
            }
            let tn = time_of(&mut atoms, en);
            atoms.push(prop(vocab::ACTIVATED_AT, var(dr), var(ACTIVATION_TIME)));
            atoms.push(cmp(&tn, CmpOp::Ge, ACTIVATION_TIME));
            atoms.extend(rest);
            atoms.push(inhibitor_guard(&exc.name, en));
            let action = AssertStmt::new(vocab::EXCEPTION_TO_WHOLE_DR, var(dr), var(en));
            Ok(rule(exc, EXCEPTION_PRIORITY, atoms, action))
        }
    }
}

fn rule(exc: &ExceptionAst, priority: u8, atoms: Vec<Atom>, action: AssertStmt) -> ProductionRule {
    ProductionRule {
        id: exc.name.clone(),
        priority,
        conditions: Pattern::new(atoms),
        actions: vec![Action::Assert(action)],
        block: exc.name.clone(),
        kind: RuleKind::Exception,
    }
}

fn norm_dr(norm: &NormAst) -> Result<&str, CompileError> {
    norm.dr_var().ok_or_else(|| CompileError::MissingDeonticRelation { norm: norm.name.clone() })
}

/// The exception's conditions with its event and relation variables renamed
/// to the ones used by the norm rules.
fn own_conditions(exc: &ExceptionAst, dr: &str, event: &str) -> Pattern {
    let mut own = exc.conditions.clone();
    if let Some(d) = exc.dr_var() {
        own.rename(d, dr);
    }
    own.rename(&exc.event_var, event);
    own
}

fn inhibitor_guard(exception: &str, event: &str) -> Atom {
    Atom::not(prop(vocab::EXCEPTION_TO_EXCEPTION, Term::resource(exception), var(event)))
}

/// Event variable of the fact asserted by an exception rule.
fn event_of(rule: &ProductionRule) -> String {
    match rule.actions.first() {
        Some(Action::Assert(a)) => a.object.as_var().unwrap_or_default().to_string(),
        _ => String::new(),
    }
}

fn check_consequent(exc: &ExceptionAst) -> Result<(), CompileError> {
    let ok = matches!(
        (exc.kind, &exc.consequent),
        (ExceptionKind::ToNorm, Consequent::ToNorm { .. })
            | (ExceptionKind::ToRegulatedEvent | ExceptionKind::ToRelation, Consequent::ToDr { .. })
            | (ExceptionKind::ToException, Consequent::ToException { .. })
    );
    if ok {
        Ok(())
    } else {
        Err(CompileError::KindMismatch {
            exception: exc.name.clone(),
            reason: format!("consequent {} does not match the exception kind", exc.consequent.predicate()),
        })
    }
}
