use std::collections::BTreeSet;

use super::thread::thread;
use super::{
    cmp, prop, push_unique, time_of, var, Action, CompileError, ProductionRule, RuleKind, NORM_PRIORITY,
};
use crate::kb::{vocab, Atom, CmpOp, Pattern, Term};
use crate::parser::{AssertStmt, NormAst};

pub(super) const ACTIVATION_TIME: &str = "__ta";

/// Rule 1, Rule 2 and (when ELSE is present) Rule 3 of a norm.
pub fn compile_norm(norm: &NormAst) -> Result<Vec<ProductionRule>, CompileError> {
    let dr = norm.dr_var().ok_or_else(|| CompileError::MissingDeonticRelation { norm: norm.name.clone() })?;
    let mut rules = vec![activation(norm, dr), regulated(norm, dr)?];
    if norm.inner.else_asserts.is_some() && norm.inner.before.is_some() {
        rules.push(else_rule(norm, dr)?);
    }
    Ok(rules)
}

fn activation(norm: &NormAst, dr: &str) -> ProductionRule {
    let e1 = norm.outer.event_var.as_str();
    let mut atoms = activation_context(norm);
    let t1 = time_of(&mut atoms, e1);
    atoms.push(Atom::not(prop(vocab::EXCEPTION_TO_NORM, Term::resource(&norm.name), var(e1))));

    let mut actions: Vec<Action> = norm.computes.iter().cloned().map(Action::Compute).collect();
    for c in &norm.creates {
        actions.push(Action::Create {
            class: c.class.clone(),
            var: c.var.clone(),
            norm: norm.name.clone(),
            event_var: e1.to_string(),
        });
    }
    let mut asserts = norm.asserts.clone();
    for required in [
        AssertStmt::new(vocab::IS_GENERATED, var(dr), Term::resource(&norm.name)),
        AssertStmt::new(vocab::ACTIVATED, var(dr), var(e1)),
    ] {
        if !asserts.contains(&required) {
            asserts.push(required);
        }
    }
    asserts.push(AssertStmt::new(vocab::ACTIVATED_AT, var(dr), var(&t1)));
    actions.extend(asserts.into_iter().map(Action::Assert));

    ProductionRule {
        id: format!("{}/activation", norm.name),
        priority: NORM_PRIORITY,
        conditions: Pattern::new(atoms),
        actions,
        block: norm.name.clone(),
        kind: RuleKind::Activation,
    }
}

/// Outer trigger plus the enactment guard, without the exception guard.
pub(super) fn activation_context(norm: &NormAst) -> Vec<Atom> {
    let e1 = norm.outer.event_var.as_str();
    let mut atoms = norm.outer.conditions.atoms.clone();
    let t1 = time_of(&mut atoms, e1);
    atoms.push(prop(vocab::ENACTED_AT, Term::resource(&norm.name), var("__enact")));
    atoms.push(cmp(&t1, CmpOp::Ge, "__enact"));
    atoms
}

fn scope_vars(norm: &NormAst, used: BTreeSet<String>, dr: &str) -> BTreeSet<String> {
    let scope = norm.activation_scope();
    used.into_iter().filter(|v| v != dr && scope.contains(v)).collect()
}

fn inner_vars(norm: &NormAst) -> BTreeSet<String> {
    let mut used = norm.inner.conditions.vars();
    if let Some(b) = &norm.inner.before {
        used.insert(b.event_var.clone());
        used.extend(b.conditions.vars());
    }
    used
}

fn before_is_outer(norm: &NormAst) -> bool {
    norm.inner.before.as_ref().is_some_and(|b| norm.activation_scope().contains(&b.event_var))
}

/// The matching part of Rule 2 (regulated event, timing and deadline)
/// without exception or refraction guards. `extra` lists further variables
/// of the activation scope the caller needs bound.
pub(super) fn regulated_context(
    norm: &NormAst,
    dr: &str,
    extra: &BTreeSet<String>,
    rule_id: &str,
) -> Result<(Vec<Atom>, String), CompileError> {
    let inner = &norm.inner;
    let e2 = inner.event_var.as_str();
    let mut used = inner_vars(norm);
    for a in &inner.then_asserts {
        used.extend(a.vars().map(str::to_string));
    }
    used.extend(extra.iter().cloned());
    let needed = scope_vars(norm, used, dr);

    let mut atoms = vec![prop(vocab::IS_GENERATED, var(dr), Term::resource(&norm.name))];
    for a in thread(norm, dr, &needed, rule_id)? {
        push_unique(&mut atoms, a);
    }
    for a in &inner.conditions.atoms {
        push_unique(&mut atoms, a.clone());
    }
    let t2 = time_of(&mut atoms, e2);
    atoms.push(prop(vocab::ACTIVATED_AT, var(dr), var(ACTIVATION_TIME)));
    atoms.push(cmp(&t2, CmpOp::Ge, ACTIVATION_TIME));

    if let Some(b) = &inner.before {
        if before_is_outer(norm) {
            for a in &b.conditions.atoms {
                push_unique(&mut atoms, a.clone());
            }
            let t3 = time_of(&mut atoms, &b.event_var);
            atoms.push(cmp(&t2, CmpOp::Lt, &t3));
        } else {
            // No terminating event may have happened between activation
            // and the regulated event.
            let mut group = b.conditions.atoms.clone();
            group.push(prop(vocab::HAPPENED, var(&b.event_var), var(&format!("__h_{}", b.event_var))));
            let t3 = time_of(&mut group, &b.event_var);
            group.push(cmp(&t3, CmpOp::Ge, ACTIVATION_TIME));
            group.push(cmp(&t3, CmpOp::Le, &t2));
            atoms.push(Atom::Negated(group));
        }
    }
    Ok((atoms, t2))
}

fn exception_guards(atoms: &mut Vec<Atom>, dr: &str, event: &str) {
    atoms.push(Atom::not(prop(vocab::EXCEPTION_TO_DR, var(dr), var(event))));
    atoms.push(Atom::not(prop(vocab::EXCEPTION_TO_WHOLE_DR, var(dr), var("__any"))));
}

fn find_assert<'a>(asserts: &'a [AssertStmt], predicates: &[&str]) -> Option<&'a AssertStmt> {
    asserts.iter().find(|a| predicates.contains(&a.predicate.as_str()))
}

fn regulated(norm: &NormAst, dr: &str) -> Result<ProductionRule, CompileError> {
    let id = format!("{}/regulated", norm.name);
    let e2 = norm.inner.event_var.as_str();
    let (mut atoms, _) = regulated_context(norm, dr, &BTreeSet::new(), &id)?;
    exception_guards(&mut atoms, dr, e2);

    let then = &norm.inner.then_asserts;
    let agent_assert = find_assert(then, &[vocab::FULFILLS, vocab::VIOLATES]);
    let state_assert = find_assert(then, &[vocab::FULFILLED, vocab::VIOLATED]);
    let scope = norm.activation_scope();
    let specific = agent_assert.is_some_and(|a| a.subject.as_var().is_some_and(|v| scope.contains(v)));
    match (specific, agent_assert, state_assert) {
        (false, Some(a), _) => {
            atoms.push(Atom::not(prop(&a.predicate, a.subject.clone(), var(dr))));
        }
        (_, _, Some(s)) => {
            atoms.push(Atom::not(prop(&s.predicate, var(dr), var(e2))));
        }
        _ => {}
    }

    Ok(ProductionRule {
        id,
        priority: NORM_PRIORITY,
        conditions: Pattern::new(atoms),
        actions: then.iter().cloned().map(Action::Assert).collect(),
        block: norm.name.clone(),
        kind: RuleKind::Regulated,
    })
}

/// ELSE asserts with inner-only agents rebound to the debtor, or dropped
/// when the relation has no debtor.
fn else_actions(norm: &NormAst, dr: &str) -> Vec<AssertStmt> {
    let scope = norm.activation_scope();
    let debtor = norm.asserts.iter().find_map(|a| match (&*a.predicate, &a.subject, &a.object) {
        (vocab::DEBTOR, Term::Var(s), Term::Var(o)) if s == dr => Some(o.clone()),
        _ => None,
    });
    let mut out = Vec::new();
    for a in norm.inner.else_asserts.iter().flatten() {
        let mut a = a.clone();
        let local: Vec<String> = a.vars().filter(|v| !scope.contains(*v)).map(str::to_string).collect();
        let before_var = norm.inner.before.as_ref().map(|b| b.event_var.as_str());
        let local: Vec<String> = local.into_iter().filter(|v| Some(v.as_str()) != before_var).collect();
        if local.is_empty() {
            out.push(a);
            continue;
        }
        let Some(debtor) = &debtor else { continue };
        for v in local {
            for t in [&mut a.subject, &mut a.object] {
                if t.as_var() == Some(v.as_str()) {
                    *t = var(debtor);
                }
            }
        }
        out.push(a);
    }
    out
}

fn else_rule(norm: &NormAst, dr: &str) -> Result<ProductionRule, CompileError> {
    let id = format!("{}/else", norm.name);
    let inner = &norm.inner;
    let before = inner.before.as_ref().expect("else rule requires BEFORE");
    let e3 = before.event_var.as_str();
    let actions = else_actions(norm, dr);

    let mut used = inner_vars(norm);
    for a in &actions {
        used.extend(a.vars().map(str::to_string));
    }
    let needed = scope_vars(norm, used, dr);

    let mut atoms = vec![prop(vocab::IS_GENERATED, var(dr), Term::resource(&norm.name))];
    for a in thread(norm, dr, &needed, &id)? {
        push_unique(&mut atoms, a);
    }
    atoms.push(prop(vocab::ACTIVATED_AT, var(dr), var(ACTIVATION_TIME)));
    let fresh = !before_is_outer(norm);
    if fresh {
        for a in &before.conditions.atoms {
            push_unique(&mut atoms, a.clone());
        }
    }
    atoms.push(prop(vocab::HAPPENED, var(e3), var(&format!("__h_{e3}"))));
    let t3 = time_of(&mut atoms, e3);
    if fresh {
        atoms.push(cmp(&t3, CmpOp::Ge, ACTIVATION_TIME));
    } else {
        for a in &before.conditions.atoms {
            push_unique(&mut atoms, a.clone());
        }
    }

    // No qualifying regulated event strictly before the terminating one.
    let mut group: Vec<Atom> = Vec::new();
    for a in &inner.conditions.atoms {
        push_unique(&mut group, a.clone());
    }
    let t2 = time_of(&mut group, &inner.event_var);
    group.push(cmp(&t2, CmpOp::Ge, ACTIVATION_TIME));
    group.push(cmp(&t2, CmpOp::Lt, &t3));
    group.push(Atom::not(prop(vocab::EXCEPTION_TO_DR, var(dr), var(&inner.event_var))));
    atoms.push(Atom::Negated(group));

    exception_guards(&mut atoms, dr, e3);
    if let Some(s) = find_assert(&actions, &[vocab::FULFILLED, vocab::VIOLATED]) {
        atoms.push(Atom::not(prop(&s.predicate, var(dr), var("__done"))));
    }

    Ok(ProductionRule {
        id,
        priority: NORM_PRIORITY,
        conditions: Pattern::new(atoms),
        actions: actions.into_iter().map(Action::Assert).collect(),
        block: norm.name.clone(),
        kind: RuleKind::Else,
    })
}
