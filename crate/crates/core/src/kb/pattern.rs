use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use super::value::{TimeUnit, Value};
use super::KbError;

/// Variable assignment produced by matching. Keys are variable names without
/// the leading `?`.
pub type Binding = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(Value),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn resource(id: &str) -> Self {
        Term::Const(Value::resource(id))
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    pub fn resolve<'a>(&'a self, binding: &'a Binding) -> Option<&'a Value> {
        match self {
            Term::Var(v) => binding.get(v),
            Term::Const(c) => Some(c),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "?{v}"),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }

    pub fn holds(&self, lhs: &Value, rhs: &Value) -> bool {
        use std::cmp::Ordering::*;
        match self {
            CmpOp::Eq => lhs.same(rhs),
            CmpOp::Ne => !lhs.same(rhs),
            _ => match lhs.compare(rhs) {
                None => false,
                Some(ord) => match self {
                    CmpOp::Lt => ord == Less,
                    CmpOp::Le => ord != Greater,
                    CmpOp::Ge => ord != Less,
                    CmpOp::Gt => ord == Greater,
                    CmpOp::Eq | CmpOp::Ne => unreachable!(),
                },
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(&self) -> char {
        match self {
            ArithOp::Add => '+',
            ArithOp::Sub => '-',
            ArithOp::Mul => '*',
            ArithOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Expr {
    Term(Term),
    /// Calendar field of a timestamp (hour of day, year, ...).
    Field { base: Box<Expr>, unit: TimeUnit },
    /// Timestamp moved by `amount` units.
    Shift { base: Box<Expr>, amount: Box<Expr>, unit: TimeUnit, subtract: bool },
    Binary { op: ArithOp, lhs: Box<Expr>, rhs: Box<Expr> },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("variable ?{0} is unbound")]
    Unbound(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("arithmetic overflow")]
    Overflow,
}

impl Expr {
    pub fn var(name: &str) -> Self {
        Expr::Term(Term::var(name))
    }

    pub fn constant(value: Value) -> Self {
        Expr::Term(Term::Const(value))
    }

    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Term(Term::Var(v)) => {
                out.insert(v.clone());
            }
            Expr::Term(Term::Const(_)) => {}
            Expr::Field { base, .. } => base.vars(out),
            Expr::Shift { base, amount, .. } => {
                base.vars(out);
                amount.vars(out);
            }
            Expr::Binary { lhs, rhs, .. } => {
                lhs.vars(out);
                rhs.vars(out);
            }
        }
    }

    pub fn rename(&mut self, from: &str, to: &str) {
        match self {
            Expr::Term(t) => rename_term(t, from, to),
            Expr::Field { base, .. } => base.rename(from, to),
            Expr::Shift { base, amount, .. } => {
                base.rename(from, to);
                amount.rename(from, to);
            }
            Expr::Binary { lhs, rhs, .. } => {
                lhs.rename(from, to);
                rhs.rename(from, to);
            }
        }
    }

    pub fn eval(&self, binding: &Binding) -> Result<Value, EvalError> {
        match self {
            Expr::Term(t) => match t {
                Term::Var(v) => binding.get(v).cloned().ok_or_else(|| EvalError::Unbound(v.clone())),
                Term::Const(c) => Ok(c.clone()),
            },
            Expr::Field { base, unit } => match base.eval(binding)? {
                Value::Timestamp(ts) => Ok(Value::Integer(ts.field(*unit))),
                other => Err(EvalError::Type(format!("`.{}` applied to non-timestamp {other}", unit.name()))),
            },
            Expr::Shift { base, amount, unit, subtract } => {
                let ts = match base.eval(binding)? {
                    Value::Timestamp(ts) => ts,
                    other => return Err(EvalError::Type(format!("cannot shift non-timestamp {other}"))),
                };
                let amount = amount.eval(binding)?;
                let shifted = match (amount, unit.fixed_millis()) {
                    (Value::Integer(n), _) => ts.shift(if *subtract { -n } else { n }, *unit),
                    (Value::Decimal(d), Some(ms)) => {
                        let delta = (d.0 * ms as f64).round() as i64;
                        ts.add_millis(if *subtract { -delta } else { delta })
                    }
                    (other, _) => {
                        return Err(EvalError::Type(format!("cannot shift by {other} {}s", unit.name())));
                    }
                };
                shifted.map(Value::Timestamp).ok_or(EvalError::Overflow)
            }
            Expr::Binary { op, lhs, rhs } => arith(*op, lhs.eval(binding)?, rhs.eval(binding)?),
        }
    }
}

fn arith(op: ArithOp, lhs: Value, rhs: Value) -> Result<Value, EvalError> {
    use ArithOp::*;
    use Value::*;
    let type_error = |l: &Value, r: &Value| EvalError::Type(format!("cannot compute {l} {} {r}", op.symbol()));
    match (&lhs, &rhs) {
        (Integer(a), Integer(b)) => match op {
            Add => a.checked_add(*b).map(Integer).ok_or(EvalError::Overflow),
            Sub => a.checked_sub(*b).map(Integer).ok_or(EvalError::Overflow),
            Mul => a.checked_mul(*b).map(Integer).ok_or(EvalError::Overflow),
            Div => {
                if *b == 0 {
                    Err(EvalError::Type("division by zero".into()))
                } else if a % b == 0 {
                    Ok(Integer(a / b))
                } else {
                    Ok(Value::decimal(*a as f64 / *b as f64))
                }
            }
        },
        (Integer(_) | Decimal(_), Integer(_) | Decimal(_)) => {
            let (a, b) = (lhs.as_f64().unwrap(), rhs.as_f64().unwrap());
            Ok(Value::decimal(match op {
                Add => a + b,
                Sub => a - b,
                Mul => a * b,
                Div => {
                    if b == 0.0 {
                        return Err(EvalError::Type("division by zero".into()));
                    }
                    a / b
                }
            }))
        }
        (Timestamp(t), Duration(d)) => match op {
            Add => t.add_millis(*d).map(Timestamp).ok_or(EvalError::Overflow),
            Sub => t.add_millis(-*d).map(Timestamp).ok_or(EvalError::Overflow),
            _ => Err(type_error(&lhs, &rhs)),
        },
        (Duration(d), Timestamp(t)) if op == Add => t.add_millis(*d).map(Timestamp).ok_or(EvalError::Overflow),
        (Timestamp(a), Timestamp(b)) if op == Sub => Ok(Duration(a.millis() - b.millis())),
        (Duration(a), Duration(b)) => match op {
            Add => Ok(Duration(a + b)),
            Sub => Ok(Duration(a - b)),
            _ => Err(type_error(&lhs, &rhs)),
        },
        (Duration(d), Integer(n)) | (Integer(n), Duration(d)) if op == Mul => {
            d.checked_mul(*n).map(Duration).ok_or(EvalError::Overflow)
        }
        _ => Err(type_error(&lhs, &rhs)),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Term(t) => write!(f, "{t}"),
            Expr::Field { base, unit } => write!(f, "{}.{}", Paren(base), unit.name()),
            Expr::Shift { base, amount, unit, subtract } => {
                let sign = if *subtract { '-' } else { '+' };
                write!(f, "{} {sign} {} {}", Paren(base), Paren(amount), unit.name())
            }
            Expr::Binary { op, lhs, rhs } => write!(f, "{} {} {}", Paren(lhs), op.symbol(), Paren(rhs)),
        }
    }
}

/// Parenthesizes compound subexpressions.
struct Paren<'a>(&'a Expr);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Expr::Binary { .. } | Expr::Shift { .. } => write!(f, "({})", self.0),
            e => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Atom {
    Class { class: String, term: Term },
    Property { predicate: String, subject: Term, object: Term },
    Comparison { lhs: Expr, op: CmpOp, rhs: Expr },
    Negated(Vec<Atom>),
}

impl Atom {
    pub fn class(class: &str, term: Term) -> Self {
        Atom::Class { class: class.to_string(), term }
    }

    pub fn property(predicate: &str, subject: Term, object: Term) -> Self {
        Atom::Property { predicate: predicate.to_string(), subject, object }
    }

    pub fn not(atom: Atom) -> Self {
        Atom::Negated(vec![atom])
    }

    pub fn is_positive(&self) -> bool {
        matches!(self, Atom::Class { .. } | Atom::Property { .. })
    }

    /// Variables this atom binds when matched (positive atoms only).
    pub fn binds(&self, out: &mut BTreeSet<String>) {
        match self {
            Atom::Class { term, .. } => {
                if let Some(v) = term.as_var() {
                    out.insert(v.to_string());
                }
            }
            Atom::Property { subject, object, .. } => {
                for t in [subject, object] {
                    if let Some(v) = t.as_var() {
                        out.insert(v.to_string());
                    }
                }
            }
            Atom::Comparison { .. } | Atom::Negated(_) => {}
        }
    }

    /// Every variable mentioned anywhere in the atom.
    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Atom::Class { .. } | Atom::Property { .. } => self.binds(out),
            Atom::Comparison { lhs, rhs, .. } => {
                lhs.vars(out);
                rhs.vars(out);
            }
            Atom::Negated(atoms) => atoms.iter().for_each(|a| a.vars(out)),
        }
    }

    pub fn rename(&mut self, from: &str, to: &str) {
        match self {
            Atom::Class { term, .. } => rename_term(term, from, to),
            Atom::Property { subject, object, .. } => {
                rename_term(subject, from, to);
                rename_term(object, from, to);
            }
            Atom::Comparison { lhs, rhs, .. } => {
                lhs.rename(from, to);
                rhs.rename(from, to);
            }
            Atom::Negated(atoms) => atoms.iter_mut().for_each(|a| a.rename(from, to)),
        }
    }

    /// Every predicate (class or property name) used by the atom.
    pub fn predicates(&self, out: &mut BTreeSet<String>) {
        match self {
            Atom::Class { class, .. } => {
                out.insert(class.clone());
            }
            Atom::Property { predicate, .. } => {
                out.insert(predicate.clone());
            }
            Atom::Comparison { .. } => {}
            Atom::Negated(atoms) => atoms.iter().for_each(|a| a.predicates(out)),
        }
    }
}

fn rename_term(term: &mut Term, from: &str, to: &str) {
    if let Term::Var(v) = term {
        if v == from {
            *v = to.to_string();
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Class { class, term } => write!(f, "{class}({term})"),
            Atom::Property { predicate, subject, object } => write!(f, "{predicate}({subject},{object})"),
            Atom::Comparison { lhs, op, rhs } => write!(f, "{lhs} {} {rhs}", op.symbol()),
            Atom::Negated(atoms) if atoms.len() == 1 && !matches!(atoms[0], Atom::Comparison { .. }) => {
                write!(f, "NOT {}", atoms[0])
            }
            Atom::Negated(atoms) => {
                write!(f, "NOT (")?;
                for (i, a) in atoms.iter().enumerate() {
                    if i > 0 {
                        write!(f, " AND ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A conjunctive query: atoms are matched left to right.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pattern {
    pub atoms: Vec<Atom>,
}

impl Pattern {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Pattern { atoms }
    }

    pub fn push(&mut self, atom: Atom) {
        self.atoms.push(atom);
    }

    /// Pushes unless a structurally equal atom is already present.
    pub fn push_unique(&mut self, atom: Atom) {
        if !self.atoms.contains(&atom) {
            self.atoms.push(atom);
        }
    }

    /// Variables bound by top-level positive atoms.
    pub fn bound_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for a in &self.atoms {
            a.binds(&mut out);
        }
        out
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for a in &self.atoms {
            a.vars(&mut out);
        }
        out
    }

    pub fn predicates(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for a in &self.atoms {
            a.predicates(&mut out);
        }
        out
    }

    pub fn rename(&mut self, from: &str, to: &str) {
        self.atoms.iter_mut().for_each(|a| a.rename(from, to));
    }

    /// Checks that every comparison only mentions variables bound by a
    /// preceding positive atom (or by `outer`). Inside a negated group,
    /// variables not bound outside are local to the group.
    pub fn check_range_restricted(&self, outer: &BTreeSet<String>) -> Result<(), KbError> {
        check_atoms(&self.atoms, outer.clone())
    }
}

fn check_atoms(atoms: &[Atom], mut bound: BTreeSet<String>) -> Result<(), KbError> {
    for atom in atoms {
        match atom {
            Atom::Class { .. } | Atom::Property { .. } => atom.binds(&mut bound),
            Atom::Comparison { lhs, rhs, .. } => {
                let mut vars = BTreeSet::new();
                lhs.vars(&mut vars);
                rhs.vars(&mut vars);
                if let Some(v) = vars.iter().find(|v| !bound.contains(*v)) {
                    return Err(KbError::NotRangeRestricted(v.clone()));
                }
            }
            Atom::Negated(inner) => check_atoms(inner, bound.clone())?,
        }
    }
    Ok(())
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, " AND ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}
