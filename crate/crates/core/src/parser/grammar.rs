//! Recursive-descent parser for norm and exception blocks.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::*;
use super::error::{ErrorKind, ParseError};
use super::lexer::{Keyword, Tok, Token};
use crate::kb::{vocab, ArithOp, Atom, CmpOp, Expr, Pattern, Term, TimeUnit, Value};

type PResult<T> = Result<T, ParseError>;

pub(super) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    /// Unnamed exceptions seen so far, per target, for default names.
    unnamed: BTreeMap<String, usize>,
}

impl Parser {
    pub(super) fn new(toks: Vec<Token>) -> Self {
        Parser { toks, pos: 0, unnamed: BTreeMap::new() }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn here(&self) -> Span {
        let t = &self.toks[self.pos];
        Span { line: t.line, col: t.col }
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError::new(
            t.line,
            t.col,
            ErrorKind::Syntax { expected: expected.to_string(), found: t.tok.describe() },
        )
    }

    fn error_at(&self, span: Span, kind: ErrorKind) -> ParseError {
        ParseError::new(span.line, span.col, kind)
    }

    fn at_keyword(&self, k: Keyword) -> bool {
        *self.peek() == Tok::Keyword(k)
    }

    fn eat_keyword(&mut self, k: Keyword) -> bool {
        if self.at_keyword(k) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, k: Keyword) -> PResult<()> {
        if self.eat_keyword(k) {
            Ok(())
        } else {
            Err(self.error(&format!("`{}`", k.as_str())))
        }
    }

    fn expect(&mut self, tok: Tok, expected: &str) -> PResult<()> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.error(expected))
        }
    }

    fn ident(&mut self, expected: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.error(expected)),
        }
    }

    fn var(&mut self) -> PResult<String> {
        let span = self.here();
        match self.peek().clone() {
            Tok::Var(v) => {
                self.advance();
                check_var_name(&v, span)?;
                Ok(v)
            }
            _ => Err(self.error("a variable")),
        }
    }

    /// Skips to the next block keyword after an error.
    fn recover(&mut self, block_start: usize) {
        if self.pos == block_start {
            self.advance();
        }
        while !matches!(self.peek(), Tok::Eof | Tok::Keyword(Keyword::Norm | Keyword::Exception)) {
            self.advance();
        }
    }

    pub(super) fn parse_file(&mut self) -> (Vec<Item>, Vec<ParseError>) {
        let mut items = Vec::new();
        let mut errors = Vec::new();
        loop {
            let start = self.pos;
            let result = match self.peek() {
                Tok::Eof => break,
                Tok::Keyword(Keyword::Norm) => self.norm().map(Item::Norm),
                Tok::Keyword(Keyword::Exception) => self.exception().map(Item::Exception),
                _ => Err(self.error("`NORM` or `EXCEPTION`")),
            };
            match result {
                Ok(item) => items.push(item),
                Err(e) => {
                    errors.push(e);
                    self.recover(start);
                }
            }
        }
        (items, errors)
    }

    fn norm(&mut self) -> PResult<NormAst> {
        let span = self.here();
        self.expect_keyword(Keyword::Norm)?;
        let name = self.ident("a norm name")?;

        let outer = if self.at_keyword(Keyword::On) {
            self.advance();
            let event_var = self.var()?;
            self.expect_keyword(Keyword::Where)?;
            let conditions = self.conditions()?;
            self.expect_keyword(Keyword::Then)?;
            Some(Trigger { event_var, conditions })
        } else {
            None
        };

        let mut computes = Vec::new();
        if self.eat_keyword(Keyword::Compute) {
            computes = self.list(Self::compute)?;
        }
        self.expect_keyword(Keyword::Create)?;
        let creates = self.list(Self::create)?;
        let mut asserts = Vec::new();
        if self.eat_keyword(Keyword::Assert) {
            asserts = self.list(Self::assert_stmt)?;
        }
        let inner = self.inner()?;

        let mut norm = NormAst {
            name,
            outer: Trigger { event_var: String::new(), conditions: Pattern::default() },
            unconditional: outer.is_none(),
            computes,
            creates,
            asserts,
            inner,
            span,
        };
        norm.outer = match outer {
            Some(t) => t,
            None => enactment_trigger(&norm),
        };
        Ok(norm)
    }

    fn inner(&mut self) -> PResult<Inner> {
        self.expect_keyword(Keyword::On)?;
        let event_var = self.var()?;
        let mut before = None;
        let mut conditions = Pattern::default();
        if self.eat_keyword(Keyword::Before) {
            let before_var = self.var()?;
            let mut before_conditions = Pattern::default();
            if self.eat_keyword(Keyword::Where) {
                let first = self.conditions()?;
                if self.eat_keyword(Keyword::Where) {
                    before_conditions = first;
                    conditions = self.conditions()?;
                } else {
                    conditions = first;
                }
            }
            before = Some(Before { event_var: before_var, conditions: before_conditions });
        } else if self.eat_keyword(Keyword::Where) {
            conditions = self.conditions()?;
        }
        self.expect_keyword(Keyword::Then)?;
        self.eat_keyword(Keyword::Assert);
        let then_asserts = self.list(Self::assert_stmt)?;
        let else_asserts = if self.eat_keyword(Keyword::Else) {
            self.eat_keyword(Keyword::Assert);
            Some(self.list(Self::assert_stmt)?)
        } else {
            None
        };
        Ok(Inner { event_var, before, conditions, then_asserts, else_asserts })
    }

    fn exception(&mut self) -> PResult<ExceptionAst> {
        let span = self.here();
        self.expect_keyword(Keyword::Exception)?;
        let given_name = match self.peek() {
            Tok::Ident(_) => Some(self.ident("an exception name")?),
            _ => None,
        };
        self.expect_keyword(Keyword::To)?;
        let target = self.ident("the name of a norm or exception")?;
        let mut declared = None;
        if self.eat_keyword(Keyword::Type) {
            let type_span = self.here();
            declared = Some(match self.advance() {
                Tok::Int(1) => ExceptionKind::ToNorm,
                Tok::Int(2) => ExceptionKind::ToRegulatedEvent,
                Tok::Int(3) => ExceptionKind::ToRelation,
                other => {
                    return Err(self.error_at(
                        type_span,
                        ErrorKind::Syntax { expected: "`1`, `2` or `3`".into(), found: other.describe() },
                    ))
                }
            });
        }
        self.expect_keyword(Keyword::On)?;
        let event_var = self.var()?;
        let mut conditions = Pattern::default();
        if self.eat_keyword(Keyword::Where) {
            conditions = self.conditions()?;
        }
        self.expect_keyword(Keyword::Then)?;
        self.eat_keyword(Keyword::Assert);
        let consequent_span = self.here();
        let stmt = self.assert_stmt()?;
        if *self.peek() == Tok::Semi {
            self.advance();
        }

        let name = match &given_name {
            Some(n) => n.clone(),
            None => {
                let k = self.unnamed.entry(target.clone()).or_insert(0);
                *k += 1;
                format!("Exc_{target}_{k}")
            }
        };
        let mismatch = |reason: String| {
            ParseError::new(
                consequent_span.line,
                consequent_span.col,
                ErrorKind::ConsequentMismatch { exception: name.clone(), reason },
            )
        };
        let consequent = consequent_of(&stmt).map_err(mismatch)?;
        let kind = match (declared, &consequent) {
            (Some(k @ ExceptionKind::ToNorm), Consequent::ToNorm { .. }) => k,
            (Some(k @ (ExceptionKind::ToRegulatedEvent | ExceptionKind::ToRelation)), Consequent::ToDr { .. }) => k,
            (None, Consequent::ToNorm { .. }) => ExceptionKind::ToNorm,
            (None, Consequent::ToDr { .. }) => ExceptionKind::ToRegulatedEvent,
            (None, Consequent::ToException { .. }) => ExceptionKind::ToException,
            (Some(k), c) => {
                return Err(mismatch(format!(
                    "TYPE {} does not match consequent `{}`",
                    k.type_number().unwrap_or(0),
                    c.predicate()
                )))
            }
        };
        if kind == ExceptionKind::ToRelation {
            if let Consequent::ToDr { dr_var, .. } = &consequent {
                insert_resolution_guards(&mut conditions, dr_var);
            }
        }
        Ok(ExceptionAst {
            name,
            named: given_name.is_some(),
            target,
            kind,
            explicit_type: declared.is_some(),
            event_var,
            conditions,
            consequent,
            span,
        })
    }

    /// `item (; item)* [;]`, ending at anything that cannot start an item.
    fn list<T>(&mut self, item: fn(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        let mut out = vec![item(self)?];
        while *self.peek() == Tok::Semi {
            self.advance();
            if matches!(self.peek(), Tok::Ident(_) | Tok::Var(_)) {
                out.push(item(self)?);
            } else {
                break;
            }
        }
        Ok(out)
    }

    fn compute(&mut self) -> PResult<ComputeStmt> {
        let span = self.here();
        let target = self.var()?;
        let target_unit = if *self.peek() == Tok::Dot {
            self.advance();
            Some(self.time_unit()?)
        } else {
            None
        };
        self.expect(Tok::Eq, "`=`")?;
        let expr = self.expr()?;
        let expr = normalize_compute(expr, target_unit).map_err(|reason| {
            self.error_at(span, ErrorKind::ComputeType { block: format!("COMPUTE ?{target}"), reason })
        })?;
        Ok(ComputeStmt { target, expr })
    }

    fn time_unit(&mut self) -> PResult<TimeUnit> {
        match self.peek().clone() {
            Tok::Ident(w) => match TimeUnit::parse(&w) {
                Some(u) => {
                    self.advance();
                    Ok(u)
                }
                None => Err(self.error("a time field (year, month, day, hour, minute, second)")),
            },
            _ => Err(self.error("a time field (year, month, day, hour, minute, second)")),
        }
    }

    fn create(&mut self) -> PResult<CreateStmt> {
        let class = self.ident("a class name")?;
        self.expect(Tok::LParen, "`(`")?;
        let var = self.var()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(CreateStmt { var, class })
    }

    fn assert_stmt(&mut self) -> PResult<AssertStmt> {
        let atom = self.atom()?;
        Ok(match atom {
            Atom::Class { class, term } => AssertStmt::new(vocab::A, term, Term::resource(&class)),
            Atom::Property { predicate, subject, object } => AssertStmt { predicate, subject, object },
            _ => unreachable!("atom() only returns class or property atoms"),
        })
    }

    fn conditions(&mut self) -> PResult<Pattern> {
        let mut atoms = vec![self.condition()?];
        while self.eat_keyword(Keyword::And) {
            atoms.push(self.condition()?);
        }
        Ok(Pattern::new(atoms))
    }

    fn condition(&mut self) -> PResult<Atom> {
        if self.eat_keyword(Keyword::Not) {
            if *self.peek() == Tok::LParen {
                self.advance();
                let inner = self.conditions()?;
                self.expect(Tok::RParen, "`)`")?;
                return Ok(Atom::Negated(inner.atoms));
            }
            return Ok(Atom::Negated(vec![self.condition()?]));
        }
        if matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::LParen {
            return self.atom();
        }
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Ge => CmpOp::Ge,
            Tok::Gt => CmpOp::Gt,
            _ => return Err(self.error("a comparison operator")),
        };
        self.advance();
        let rhs = self.expr()?;
        Ok(Atom::Comparison { lhs, op, rhs })
    }

    fn atom(&mut self) -> PResult<Atom> {
        let name = self.ident("a class or property name")?;
        self.expect(Tok::LParen, "`(`")?;
        let first = self.term()?;
        if *self.peek() == Tok::Comma {
            self.advance();
            let second = self.term()?;
            self.expect(Tok::RParen, "`)`")?;
            Ok(Atom::Property { predicate: name, subject: first, object: second })
        } else {
            self.expect(Tok::RParen, "`,` or `)`")?;
            Ok(Atom::Class { class: name, term: first })
        }
    }

    fn term(&mut self) -> PResult<Term> {
        let span = self.here();
        let term = match self.peek().clone() {
            Tok::Var(v) => {
                check_var_name(&v, span)?;
                Term::Var(v)
            }
            Tok::Ident(s) => Term::Const(Value::resource(s)),
            Tok::Str(s) => Term::Const(Value::text(s)),
            Tok::Int(i) => Term::Const(Value::Integer(i)),
            Tok::Dec(d) => Term::Const(Value::decimal(d)),
            Tok::Minus => {
                self.advance();
                return match self.peek().clone() {
                    Tok::Int(i) => {
                        self.advance();
                        Ok(Term::Const(Value::Integer(-i)))
                    }
                    Tok::Dec(d) => {
                        self.advance();
                        Ok(Term::Const(Value::decimal(-d)))
                    }
                    _ => Err(self.error("a number")),
                };
            }
            _ => return Err(self.error("a variable or constant")),
        };
        self.advance();
        Ok(term)
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.product()?;
        loop {
            let subtract = match self.peek() {
                Tok::Plus => false,
                Tok::Minus => true,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.product()?;
            let unit = match self.peek() {
                Tok::Ident(w) => TimeUnit::parse(w),
                _ => None,
            };
            lhs = match unit {
                Some(unit) => {
                    self.advance();
                    Expr::Shift { base: Box::new(lhs), amount: Box::new(rhs), unit, subtract }
                }
                None => Expr::Binary {
                    op: if subtract { ArithOp::Sub } else { ArithOp::Add },
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
            };
        }
    }

    fn product(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => ArithOp::Mul,
                Tok::Slash => ArithOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) };
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Minus {
            if let Tok::Int(_) | Tok::Dec(_) = self.peek_at(1) {
                return Ok(Expr::Term(self.term()?));
            }
            self.advance();
            let operand = self.unary()?;
            return Ok(Expr::Binary {
                op: ArithOp::Sub,
                lhs: Box::new(Expr::constant(Value::Integer(0))),
                rhs: Box::new(operand),
            });
        }
        let mut base = if *self.peek() == Tok::LParen {
            self.advance();
            let e = self.expr()?;
            self.expect(Tok::RParen, "`)`")?;
            e
        } else {
            Expr::Term(self.term()?)
        };
        while *self.peek() == Tok::Dot {
            self.advance();
            let unit = self.time_unit()?;
            base = Expr::Field { base: Box::new(base), unit };
        }
        Ok(base)
    }
}

fn check_var_name(v: &str, span: Span) -> PResult<()> {
    if v.starts_with("__") {
        return Err(ParseError::new(span.line, span.col, ErrorKind::ReservedVariable(v.to_string())));
    }
    Ok(())
}

/// `?x.unit = ?t.unit ± n` and `?x = ?t.unit ± n` both mean "t moved by n
/// units"; any other use of a field target is rejected.
fn normalize_compute(expr: Expr, target_unit: Option<TimeUnit>) -> Result<Expr, String> {
    let field_shift = match &expr {
        Expr::Binary { op: op @ (ArithOp::Add | ArithOp::Sub), lhs, rhs } => match &**lhs {
            Expr::Field { base, unit } => Some((base.clone(), rhs.clone(), *unit, *op == ArithOp::Sub)),
            _ => None,
        },
        _ => None,
    };
    match (field_shift, target_unit) {
        (Some((base, amount, unit, subtract)), target) => {
            if let Some(t) = target {
                if t != unit {
                    return Err(format!("target field `.{}` does not match `.{}`", t.name(), unit.name()));
                }
            }
            Ok(Expr::Shift { base, amount, unit, subtract })
        }
        (None, None) => Ok(expr),
        (None, Some(t)) => match &expr {
            Expr::Shift { unit, .. } if *unit == t => Ok(expr),
            _ => Err(format!("a `.{}` target needs an expression of the form `?t.{} + n`", t.name(), t.name())),
        },
    }
}

fn consequent_of(stmt: &AssertStmt) -> Result<Consequent, String> {
    let event_var = match &stmt.object {
        Term::Var(v) => v.clone(),
        _ => return Err(format!("the second argument of `{}` must be the exception's event", stmt.predicate)),
    };
    match (stmt.predicate.as_str(), &stmt.subject) {
        (vocab::EXCEPTION_TO_NORM, Term::Const(Value::Resource(n))) => {
            Ok(Consequent::ToNorm { norm: n.as_str().to_string(), event_var })
        }
        (vocab::EXCEPTION_TO_DR, Term::Var(dr)) => Ok(Consequent::ToDr { dr_var: dr.clone(), event_var }),
        (vocab::EXCEPTION_TO_EXCEPTION, Term::Const(Value::Resource(x))) => {
            Ok(Consequent::ToException { exception: x.as_str().to_string(), event_var })
        }
        (vocab::EXCEPTION_TO_NORM | vocab::EXCEPTION_TO_EXCEPTION, _) => {
            Err(format!("the first argument of `{}` must be a name", stmt.predicate))
        }
        (vocab::EXCEPTION_TO_DR, _) => Err("the first argument of `exceptionToDR` must be a variable".into()),
        (other, _) => Err(format!(
            "consequent must be exceptionToNorm, exceptionToDR or exceptionToException, found `{other}`"
        )),
    }
}

/// Adds `NOT fulfills(?a,?dr)` / `NOT violates(?a,?dr)` unless present.
fn insert_resolution_guards(conditions: &mut Pattern, dr_var: &str) {
    let bound = conditions.bound_vars();
    let all = conditions.vars();
    let agent = if bound.contains("agent") { "agent".to_string() } else { fresh_name("anyAgent", &all) };
    for predicate in [vocab::FULFILLS, vocab::VIOLATES] {
        let present = conditions.atoms.iter().any(|a| match a {
            Atom::Negated(g) => matches!(
                g.as_slice(),
                [Atom::Property { predicate: p, object: Term::Var(d), .. }] if p == predicate && d == dr_var
            ),
            _ => false,
        });
        if !present {
            conditions.push(Atom::not(Atom::property(predicate, Term::var(&agent), Term::var(dr_var))));
        }
    }
}

fn fresh_name(base: &str, used: &BTreeSet<String>) -> String {
    if !used.contains(base) {
        return base.to_string();
    }
    (1..).map(|i| format!("{base}_{i}")).find(|n| !used.contains(n)).expect("unbounded search")
}

/// Every variable mentioned anywhere in a norm.
pub(super) fn norm_vars(norm: &NormAst) -> BTreeSet<String> {
    let mut vars = norm.outer.conditions.vars();
    vars.insert(norm.outer.event_var.clone());
    for c in &norm.computes {
        vars.insert(c.target.clone());
        c.expr.vars(&mut vars);
    }
    vars.extend(norm.creates.iter().map(|c| c.var.clone()));
    let inner = &norm.inner;
    let asserts = norm.asserts.iter().chain(&inner.then_asserts).chain(inner.else_asserts.iter().flatten());
    for a in asserts {
        vars.extend(a.vars().map(str::to_string));
    }
    vars.insert(inner.event_var.clone());
    vars.extend(inner.conditions.vars());
    if let Some(b) = &inner.before {
        vars.insert(b.event_var.clone());
        vars.extend(b.conditions.vars());
    }
    vars.retain(|v| !v.is_empty());
    vars
}

fn enactment_trigger(norm: &NormAst) -> Trigger {
    let event_var = fresh_name("e1", &norm_vars(norm));
    Trigger {
        conditions: Pattern::new(vec![Atom::class(vocab::NORM_ENACTMENT, Term::var(&event_var))]),
        event_var,
    }
}
