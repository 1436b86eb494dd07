use std::fmt::Write;

use super::ast::*;
use crate::kb::{vocab, Pattern, Term, Value};

fn assert_stmt(a: &AssertStmt) -> String {
    match (&*a.predicate, &a.object) {
        (vocab::A, Term::Const(Value::Resource(class))) => format!("{class}({})", a.subject),
        _ => format!("{}({},{})", a.predicate, a.subject, a.object),
    }
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join("; ")
}

fn conditions(p: &Pattern) -> String {
    p.to_string()
}

/// Renders blocks in canonical source form; parsing the result yields
/// structurally equal ASTs.
pub fn pretty_print(items: &[Item]) -> String {
    let mut out = String::new();
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        match item {
            Item::Norm(n) => print_norm(&mut out, n),
            Item::Exception(e) => print_exception(&mut out, e),
        }
    }
    out
}

fn print_norm(out: &mut String, n: &NormAst) {
    let _ = writeln!(out, "NORM {}", n.name);
    if !n.unconditional {
        let _ = writeln!(out, "ON ?{}", n.outer.event_var);
        let _ = writeln!(out, "   WHERE {}", conditions(&n.outer.conditions));
        let _ = writeln!(out, "THEN");
    }
    if !n.computes.is_empty() {
        let _ = writeln!(out, "   COMPUTE {}", join(&n.computes, |c| format!("?{} = {}", c.target, c.expr)));
    }
    let _ = writeln!(out, "   CREATE  {};", join(&n.creates, |c| format!("{}(?{})", c.class, c.var)));
    if !n.asserts.is_empty() {
        let _ = writeln!(out, "   ASSERT  {};", join(&n.asserts, assert_stmt));
    }
    let inner = &n.inner;
    let _ = write!(out, "   ON ?{}", inner.event_var);
    if let Some(b) = &inner.before {
        let _ = write!(out, " BEFORE ?{}", b.event_var);
        if !b.conditions.atoms.is_empty() {
            let _ = write!(out, "\n      WHERE {}", conditions(&b.conditions));
        }
    }
    let _ = writeln!(out);
    if !inner.conditions.atoms.is_empty() {
        let _ = writeln!(out, "      WHERE {}", conditions(&inner.conditions));
    }
    let _ = writeln!(out, "   THEN ASSERT {}", join(&inner.then_asserts, assert_stmt));
    if let Some(e) = &inner.else_asserts {
        let _ = writeln!(out, "   ELSE ASSERT {}", join(e, assert_stmt));
    }
}

fn print_exception(out: &mut String, e: &ExceptionAst) {
    let _ = write!(out, "EXCEPTION ");
    if e.named {
        let _ = write!(out, "{} ", e.name);
    }
    let _ = write!(out, "TO {}", e.target);
    if e.explicit_type {
        if let Some(n) = e.kind.type_number() {
            let _ = write!(out, " TYPE {n}");
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "ON ?{}", e.event_var);
    if !e.conditions.atoms.is_empty() {
        let _ = writeln!(out, "WHERE {}", conditions(&e.conditions));
    }
    let consequent = match &e.consequent {
        Consequent::ToNorm { norm, event_var } => format!("{}({norm},?{event_var})", vocab::EXCEPTION_TO_NORM),
        Consequent::ToDr { dr_var, event_var } => format!("{}(?{dr_var},?{event_var})", vocab::EXCEPTION_TO_DR),
        Consequent::ToException { exception, event_var } => {
            format!("{}({exception},?{event_var})", vocab::EXCEPTION_TO_EXCEPTION)
        }
    };
    let _ = writeln!(out, "THEN {consequent}");
}
