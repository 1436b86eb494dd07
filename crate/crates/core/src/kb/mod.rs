//! Working memory: a fact store split into a STATE partition (events and
//! domain data) and a DEONTIC partition (norm lifecycle), a materializer for
//! the subclass/subproperty fragment, and conjunctive queries with
//! negation-as-failure.

mod ntriples;
mod pattern;
mod schema;
mod value;
pub mod vocab;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use ntriples::{format_object, parse_document, Document};
pub use pattern::{ArithOp, Atom, Binding, CmpOp, EvalError, Expr, Pattern, Term};
pub use schema::{load_schema, load_schema_with_declarations, Declaration, Schema, SchemaAxiom};
pub use value::{format_duration, parse_duration, Resource, TimeUnit, Timestamp, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KbError {
    #[error("cyclic hierarchy through {}", .0.join(", "))]
    CyclicHierarchy(Vec<String>),
    #[error("reserved vocabulary misuse: {0}")]
    ReservedVocabularyMisuse(String),
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("variable ?{0} is not bound by a preceding positive atom")]
    NotRangeRestricted(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Partition {
    State,
    Deontic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Origin {
    Asserted,
    Inferred,
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    pub subject: Resource,
    pub predicate: Arc<str>,
    pub object: Value,
}

impl Fact {
    pub fn new(subject: impl Into<Resource>, predicate: &str, object: Value) -> Self {
        Fact { subject: subject.into(), predicate: Arc::from(predicate), object }
    }

    /// `subject a class`.
    pub fn typed(subject: impl Into<Resource>, class: &str) -> Self {
        Fact::new(subject, vocab::A, Value::resource(class))
    }

    pub fn is_class_membership(&self) -> bool {
        &*self.predicate == vocab::A
    }
}

impl From<String> for Resource {
    fn from(s: String) -> Self {
        Resource::new(s)
    }
}

impl fmt::Debug for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", ntriples::format_fact(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FactMeta {
    pub partition: Partition,
    pub origin: Origin,
}

#[derive(Debug, Clone, Default)]
pub struct Kb {
    facts: BTreeMap<Fact, FactMeta>,
    log: Vec<Fact>,
    by_subject: HashMap<Arc<str>, BTreeMap<Resource, Vec<Value>>>,
    by_object: HashMap<Arc<str>, BTreeMap<Resource, BTreeSet<Resource>>>,
    materialized: usize,
    schema_fingerprint: Option<u64>,
    strict: Option<Arc<Schema>>,
}

impl Kb {
    pub fn new() -> Self {
        Kb::default()
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.facts.contains_key(fact)
    }

    pub fn meta(&self, fact: &Fact) -> Option<FactMeta> {
        self.facts.get(fact).copied()
    }

    /// All facts, sorted.
    pub fn iter(&self) -> impl Iterator<Item = (&Fact, FactMeta)> {
        self.facts.iter().map(|(f, m)| (f, *m))
    }

    pub fn facts_in(&self, partition: Partition) -> impl Iterator<Item = &Fact> {
        self.facts.iter().filter(move |(_, m)| m.partition == partition).map(|(f, _)| f)
    }

    /// Facts in insertion order.
    pub fn log(&self) -> &[Fact] {
        &self.log
    }

    /// Rejects predicates the schema does not declare when `schema` is set.
    pub fn set_strict_vocabulary(&mut self, schema: Option<Arc<Schema>>) {
        self.strict = schema;
    }

    /// Asserts a user fact. State facts may not use norm lifecycle vocabulary.
    /// Returns whether the fact is new.
    pub fn assert_fact(&mut self, fact: Fact, partition: Partition) -> Result<bool, KbError> {
        if partition == Partition::State {
            check_state_fact(&fact)?;
        }
        Ok(self.assert_unchecked(fact, partition))
    }

    /// Asserts without the vocabulary check; used by the rule engine and the
    /// runtime for the facts they own.
    pub fn assert_unchecked(&mut self, fact: Fact, partition: Partition) -> bool {
        self.insert(fact, FactMeta { partition, origin: Origin::Asserted })
    }

    fn insert(&mut self, fact: Fact, meta: FactMeta) -> bool {
        if let Some(existing) = self.facts.get_mut(&fact) {
            if meta.origin == Origin::Asserted {
                existing.origin = Origin::Asserted;
            }
            return false;
        }
        self.by_subject
            .entry(fact.predicate.clone())
            .or_default()
            .entry(fact.subject.clone())
            .or_default()
            .push(fact.object.clone());
        if let Value::Resource(obj) = &fact.object {
            self.by_object
                .entry(fact.predicate.clone())
                .or_default()
                .entry(obj.clone())
                .or_default()
                .insert(fact.subject.clone());
        }
        self.facts.insert(fact.clone(), meta);
        self.log.push(fact);
        true
    }

    /// Closes the KB under `(x a C), C ⊑* D ⊢ (x a D)` and
    /// `(x p y), p ⊑* q ⊢ (x q y)`. Returns the number of inferred facts.
    pub fn materialize(&mut self, schema: &Schema) -> usize {
        if self.schema_fingerprint != Some(schema.fingerprint()) {
            self.schema_fingerprint = Some(schema.fingerprint());
            self.materialized = 0;
        }
        let mut added = 0;
        while self.materialized < self.log.len() {
            let fact = self.log[self.materialized].clone();
            self.materialized += 1;
            let partition = self.facts[&fact].partition;
            let meta = FactMeta { partition, origin: Origin::Inferred };
            let mut derived = Vec::new();
            if fact.is_class_membership() {
                if let Value::Resource(class) = &fact.object {
                    for sup in schema.super_classes_of(class.as_str()) {
                        derived.push(Fact::typed(fact.subject.clone(), sup));
                    }
                }
            } else {
                for sup in schema.super_properties_of(&fact.predicate) {
                    derived.push(Fact::new(fact.subject.clone(), sup, fact.object.clone()));
                }
            }
            for d in derived {
                if self.insert(d, meta) {
                    added += 1;
                }
            }
        }
        added
    }

    /// Objects of `(subject, predicate, ?)`.
    pub fn objects<'a>(&'a self, subject: &Resource, predicate: &str) -> impl Iterator<Item = &'a Value> + 'a {
        self.by_subject
            .get(predicate)
            .and_then(|m| m.get(subject))
            .into_iter()
            .flat_map(|v| v.iter())
    }

    pub fn has_class(&self, subject: &Resource, class: &str) -> bool {
        self.contains(&Fact::typed(subject.clone(), class))
    }

    /// Timestamp of an event or time event via `atTime` / `inXSDDateTimeStamp`.
    pub fn time_of(&self, event: &Resource) -> Option<Timestamp> {
        self.objects(event, vocab::AT_TIME)
            .filter_map(Value::as_resource)
            .flat_map(|inst| self.objects(inst, vocab::IN_XSD_DATE_TIME_STAMP))
            .filter_map(Value::as_timestamp)
            .min()
    }

    pub fn query(&self, pattern: &Pattern) -> Result<Vec<Binding>, KbError> {
        self.query_with(pattern, &Binding::new())
    }

    /// Evaluates `pattern` with some variables already bound. The result is
    /// sorted and duplicate free; bindings include the pre-bound variables.
    pub fn query_with(&self, pattern: &Pattern, initial: &Binding) -> Result<Vec<Binding>, KbError> {
        let outer: BTreeSet<String> = initial.keys().cloned().collect();
        pattern.check_range_restricted(&outer)?;
        if let Some(schema) = &self.strict {
            for p in pattern.predicates() {
                if p != vocab::A && !schema.declares_property(&p) && !schema.declares_class(&p) {
                    return Err(KbError::UnknownPredicate(p));
                }
            }
        }
        let mut out = BTreeSet::new();
        let mut binding = initial.clone();
        self.solve(&pattern.atoms, &mut binding, &mut |b| {
            out.insert(b.clone());
            true
        });
        Ok(out.into_iter().collect())
    }

    /// Whether `atoms` has at least one solution extending `binding`.
    pub fn exists(&self, atoms: &[Atom], binding: &Binding) -> bool {
        let mut found = false;
        let mut b = binding.clone();
        self.solve(atoms, &mut b, &mut |_| {
            found = true;
            false
        });
        found
    }

    /// Backtracking join. `emit` returns false to stop the search.
    fn solve(&self, atoms: &[Atom], binding: &mut Binding, emit: &mut dyn FnMut(&Binding) -> bool) -> bool {
        let Some((atom, rest)) = atoms.split_first() else {
            return emit(binding);
        };
        match atom {
            Atom::Class { class, term } => {
                let class_value = Term::Const(Value::resource(class));
                self.match_property(vocab::A, term, &class_value, rest, binding, emit)
            }
            Atom::Property { predicate, subject, object } => {
                self.match_property(predicate, subject, object, rest, binding, emit)
            }
            Atom::Comparison { lhs, op, rhs } => {
                let holds = match (lhs.eval(binding), rhs.eval(binding)) {
                    (Ok(l), Ok(r)) => op.holds(&l, &r),
                    _ => false,
                };
                if holds {
                    self.solve(rest, binding, emit)
                } else {
                    true
                }
            }
            Atom::Negated(group) => {
                if self.exists(group, binding) {
                    true
                } else {
                    self.solve(rest, binding, emit)
                }
            }
        }
    }

    fn match_property(
        &self,
        predicate: &str,
        subject: &Term,
        object: &Term,
        rest: &[Atom],
        binding: &mut Binding,
        emit: &mut dyn FnMut(&Binding) -> bool,
    ) -> bool {
        let subject_value = subject.resolve(binding).cloned();
        let object_value = object.resolve(binding).cloned();
        match subject_value {
            Some(Value::Resource(s)) => {
                let Some(values) = self.by_subject.get(predicate).and_then(|m| m.get(&s)) else {
                    return true;
                };
                match object_value {
                    Some(o) => {
                        if values.iter().any(|v| v.same(&o)) {
                            return self.solve(rest, binding, emit);
                        }
                        true
                    }
                    None => {
                        let var = object.as_var().expect("unresolved term is a variable");
                        for v in values {
                            binding.insert(var.to_string(), v.clone());
                            let go_on = self.solve(rest, binding, emit);
                            binding.remove(var);
                            if !go_on {
                                return false;
                            }
                        }
                        true
                    }
                }
            }
            Some(_) => true,
            None => {
                let svar = subject.as_var().expect("unresolved term is a variable").to_string();
                if let Some(Value::Resource(o)) = &object_value {
                    let Some(subjects) = self.by_object.get(predicate).and_then(|m| m.get(o)) else {
                        return true;
                    };
                    for s in subjects {
                        binding.insert(svar.clone(), Value::Resource(s.clone()));
                        let go_on = self.solve(rest, binding, emit);
                        binding.remove(&svar);
                        if !go_on {
                            return false;
                        }
                    }
                    return true;
                }
                let Some(all) = self.by_subject.get(predicate) else {
                    return true;
                };
                for (s, values) in all {
                    binding.insert(svar.clone(), Value::Resource(s.clone()));
                    // The object may be the same variable as the subject.
                    let obj_now = object.resolve(binding).cloned();
                    let go_on = match obj_now {
                        Some(o) => {
                            if values.iter().any(|v| v.same(&o)) {
                                self.solve(rest, binding, emit)
                            } else {
                                true
                            }
                        }
                        None => {
                            let ovar = object.as_var().expect("unresolved term is a variable").to_string();
                            let mut go_on = true;
                            for v in values {
                                binding.insert(ovar.clone(), v.clone());
                                go_on = self.solve(rest, binding, emit);
                                binding.remove(&ovar);
                                if !go_on {
                                    break;
                                }
                            }
                            go_on
                        }
                    };
                    binding.remove(&svar);
                    if !go_on {
                        return false;
                    }
                }
                true
            }
        }
    }

    /// Serializes facts of one partition (or all) in the triple file format,
    /// sorted, one per line.
    pub fn dump(&self, partition: Option<Partition>) -> String {
        let mut out = String::new();
        for (fact, meta) in &self.facts {
            if partition.is_none_or(|p| p == meta.partition) {
                out.push_str(&ntriples::format_fact(fact));
                out.push('\n');
            }
        }
        out
    }

    /// Loads the facts of a parsed document into `partition`.
    pub fn load_facts(&mut self, facts: impl IntoIterator<Item = Fact>, partition: Partition) -> Result<usize, KbError> {
        let mut n = 0;
        for f in facts {
            if self.assert_fact(f, partition)? {
                n += 1;
            }
        }
        Ok(n)
    }
}

fn check_state_fact(fact: &Fact) -> Result<(), KbError> {
    if vocab::is_lifecycle_property(&fact.predicate) {
        return Err(KbError::ReservedVocabularyMisuse(format!(
            "`{}` is norm lifecycle vocabulary and cannot be asserted as state ({fact})",
            fact.predicate
        )));
    }
    if fact.is_class_membership() && fact.object == Value::resource(vocab::DEONTIC_RELATION) {
        return Err(KbError::ReservedVocabularyMisuse(format!(
            "deontic relations cannot be asserted as state ({fact})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(v: &str) -> Term {
        Term::var(v)
    }

    #[test]
    fn assert_is_idempotent() {
        let mut kb = Kb::new();
        let f = Fact::typed("e1", "RestrictedTrafficAreaAccess");
        assert!(kb.assert_fact(f.clone(), Partition::State).unwrap());
        assert!(!kb.assert_fact(f, Partition::State).unwrap());
        assert_eq!(kb.len(), 1);
    }

    #[test]
    fn deontic_facts_are_queryable() {
        let mut kb = Kb::new();
        kb.assert_fact(Fact::new("dr1", vocab::IS_GENERATED, Value::resource("Norm01")), Partition::Deontic)
            .unwrap();
        let p = Pattern::new(vec![Atom::property(vocab::IS_GENERATED, var("d"), Term::resource("Norm01"))]);
        let rows = kb.query(&p).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0]["d"], Value::resource("dr1"));
    }

    #[test]
    fn lifecycle_vocabulary_is_rejected_in_state() {
        let mut kb = Kb::new();
        let err = kb.assert_fact(Fact::new("e1", vocab::FULFILLS, Value::resource("dr1")), Partition::State);
        assert!(matches!(err, Err(KbError::ReservedVocabularyMisuse(_))));
        assert!(kb.is_empty());
    }

    #[test]
    fn sell_is_inferred_to_be_a_transfer() {
        let schema = load_schema([SchemaAxiom::SubClassOf { sub: "SellAction".into(), sup: "TransferAction".into() }])
            .unwrap();
        let mut kb = Kb::new();
        kb.assert_fact(Fact::typed("e", "SellAction"), Partition::State).unwrap();
        assert_eq!(kb.materialize(&schema), 1);
        let inferred = Fact::typed("e", "TransferAction");
        assert_eq!(kb.meta(&inferred), Some(FactMeta { partition: Partition::State, origin: Origin::Inferred }));
    }

    #[test]
    fn materialize_empty_kb() {
        let mut kb = Kb::new();
        assert_eq!(kb.materialize(&load_schema([]).unwrap()), 0);
        assert!(kb.is_empty());
    }

    #[test]
    fn inferred_facts_stay_in_premise_partition() {
        let schema =
            load_schema([SchemaAxiom::SubPropertyOf { sub: "p".into(), sup: "q".into() }]).unwrap();
        let mut kb = Kb::new();
        kb.assert_unchecked(Fact::new("x", "p", Value::Integer(1)), Partition::Deontic);
        kb.materialize(&schema);
        assert_eq!(kb.meta(&Fact::new("x", "q", Value::Integer(1))).unwrap().partition, Partition::Deontic);
    }

    #[test]
    fn payment_pattern_matches_price() {
        let mut kb = Kb::new();
        kb.assert_fact(Fact::typed("pay1", "PayAction"), Partition::State).unwrap();
        kb.assert_fact(Fact::new("pay1", "price", Value::Integer(6)), Partition::State).unwrap();
        kb.assert_fact(Fact::typed("pay2", "PayAction"), Partition::State).unwrap();
        kb.assert_fact(Fact::new("pay2", "price", Value::decimal(5.5)), Partition::State).unwrap();
        let p = Pattern::new(vec![
            Atom::class("PayAction", var("e")),
            Atom::property("price", var("e"), Term::Const(Value::Integer(6))),
        ]);
        let rows = kb.query(&p).unwrap();
        assert_eq!(rows, vec![Binding::from([("e".to_string(), Value::resource("pay1"))])]);
    }

    #[test]
    fn query_over_empty_kb() {
        let kb = Kb::new();
        let p = Pattern::new(vec![Atom::class("PayAction", var("e"))]);
        assert!(kb.query(&p).unwrap().is_empty());
    }

    #[test]
    fn repeated_variable_in_one_atom() {
        let mut kb = Kb::new();
        kb.assert_fact(Fact::new("a", "knows", Value::resource("a")), Partition::State).unwrap();
        kb.assert_fact(Fact::new("a", "knows", Value::resource("b")), Partition::State).unwrap();
        let p = Pattern::new(vec![Atom::property("knows", var("x"), var("x"))]);
        assert_eq!(kb.query(&p).unwrap().len(), 1);
    }

    #[test]
    fn strict_vocabulary_rejects_unknown_predicates() {
        let mut kb = Kb::new();
        kb.set_strict_vocabulary(Some(Arc::new(load_schema([]).unwrap())));
        let p = Pattern::new(vec![Atom::property("price", var("e"), var("p"))]);
        assert_eq!(kb.query(&p), Err(KbError::UnknownPredicate("price".into())));
        let ok = Pattern::new(vec![Atom::property(vocab::ACTOR, var("e"), var("p"))]);
        assert!(kb.query(&ok).is_ok());
    }

    #[test]
    fn query_rejects_unranged_comparison() {
        let kb = Kb::new();
        let p = Pattern::new(vec![Atom::Comparison {
            lhs: Expr::var("t"),
            op: CmpOp::Lt,
            rhs: Expr::constant(Value::Integer(3)),
        }]);
        assert_eq!(kb.query(&p), Err(KbError::NotRangeRestricted("t".into())));
    }

    #[test]
    fn time_of_follows_instant() {
        let mut kb = Kb::new();
        let t = Timestamp::parse("2021-03-01T09:00:00Z").unwrap();
        kb.assert_fact(Fact::new("e1", vocab::AT_TIME, Value::resource("i1")), Partition::State).unwrap();
        kb.assert_fact(Fact::new("i1", vocab::IN_XSD_DATE_TIME_STAMP, Value::Timestamp(t)), Partition::State)
            .unwrap();
        assert_eq!(kb.time_of(&Resource::new("e1")), Some(t));
        assert_eq!(kb.time_of(&Resource::new("e2")), None);
    }
}
