use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use petgraph::algo::tarjan_scc;
use petgraph::graphmap::DiGraphMap;

use super::vocab;
use super::KbError;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SchemaAxiom {
    SubClassOf { sub: String, sup: String },
    SubPropertyOf { sub: String, sup: String },
}

/// An indexed ontology: reflexive-transitive closures of the subclass and
/// subproperty hierarchies plus the set of declared names.
#[derive(Debug, Clone, Default)]
pub struct Schema {
    axioms: Vec<SchemaAxiom>,
    super_classes: BTreeMap<Arc<str>, Vec<Arc<str>>>,
    super_properties: BTreeMap<Arc<str>, Vec<Arc<str>>>,
    classes: BTreeSet<String>,
    properties: BTreeSet<String>,
    fingerprint: u64,
}

impl Schema {
    /// Strict superclasses of `class` (not including itself), sorted.
    pub fn super_classes_of(&self, class: &str) -> &[Arc<str>] {
        self.super_classes.get(class).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn super_properties_of(&self, property: &str) -> &[Arc<str>] {
        self.super_properties.get(property).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `sub ⊑* sup` (reflexive).
    pub fn is_subclass(&self, sub: &str, sup: &str) -> bool {
        sub == sup || self.super_classes_of(sub).iter().any(|c| &**c == sup)
    }

    pub fn is_subproperty(&self, sub: &str, sup: &str) -> bool {
        sub == sup || self.super_properties_of(sub).iter().any(|p| &**p == sup)
    }

    pub fn axioms(&self) -> &[SchemaAxiom] {
        &self.axioms
    }

    pub fn declares_class(&self, name: &str) -> bool {
        self.classes.contains(name)
    }

    pub fn declares_property(&self, name: &str) -> bool {
        self.properties.contains(name)
    }

    /// Identifies the closure; the KB uses it to tell whether incremental
    /// materialization state is still valid.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Returns a schema extended with more axioms and declarations.
    pub fn extend(
        &self,
        axioms: impl IntoIterator<Item = SchemaAxiom>,
        declarations: impl IntoIterator<Item = Declaration>,
    ) -> Result<Schema, KbError> {
        let mut all = self.axioms.clone();
        all.extend(axioms);
        let mut decls: Vec<Declaration> = self
            .classes
            .iter()
            .map(|c| Declaration::Class(c.clone()))
            .chain(self.properties.iter().map(|p| Declaration::Property(p.clone())))
            .collect();
        decls.extend(declarations);
        build(all, decls)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Declaration {
    Class(String),
    Property(String),
}

/// Indexes axioms; rejects cyclic hierarchies (self-loops are ignored).
pub fn load_schema(axioms: impl IntoIterator<Item = SchemaAxiom>) -> Result<Schema, KbError> {
    build(axioms.into_iter().collect(), Vec::new())
}

pub fn load_schema_with_declarations(
    axioms: impl IntoIterator<Item = SchemaAxiom>,
    declarations: impl IntoIterator<Item = Declaration>,
) -> Result<Schema, KbError> {
    build(axioms.into_iter().collect(), declarations.into_iter().collect())
}

fn build(mut axioms: Vec<SchemaAxiom>, declarations: Vec<Declaration>) -> Result<Schema, KbError> {
    axioms.sort();
    axioms.dedup();

    let mut class_edges = Vec::new();
    let mut property_edges = Vec::new();
    let mut classes: BTreeSet<String> = vocab::RESERVED_CLASSES.iter().map(|s| s.to_string()).collect();
    let mut properties: BTreeSet<String> = vocab::RESERVED_PROPERTIES.iter().map(|s| s.to_string()).collect();

    for axiom in &axioms {
        match axiom {
            SchemaAxiom::SubClassOf { sub, sup } => {
                for name in [sub, sup] {
                    if vocab::is_reserved_property(name) || name == vocab::A {
                        return Err(KbError::ReservedVocabularyMisuse(format!(
                            "`{name}` is a reserved property and cannot be used as a class"
                        )));
                    }
                    classes.insert(name.clone());
                }
                class_edges.push((sub.as_str(), sup.as_str()));
            }
            SchemaAxiom::SubPropertyOf { sub, sup } => {
                for name in [sub, sup] {
                    if vocab::is_reserved_class(name) || name == vocab::A {
                        return Err(KbError::ReservedVocabularyMisuse(format!(
                            "`{name}` cannot be used in a subproperty axiom"
                        )));
                    }
                    properties.insert(name.clone());
                }
                property_edges.push((sub.as_str(), sup.as_str()));
            }
        }
    }
    for decl in declarations {
        match decl {
            Declaration::Class(c) => {
                if vocab::is_reserved_property(&c) {
                    return Err(KbError::ReservedVocabularyMisuse(format!(
                        "`{c}` is a reserved property and cannot be declared a class"
                    )));
                }
                classes.insert(c);
            }
            Declaration::Property(p) => {
                if vocab::is_reserved_class(&p) {
                    return Err(KbError::ReservedVocabularyMisuse(format!(
                        "`{p}` is a reserved class and cannot be declared a property"
                    )));
                }
                properties.insert(p);
            }
        }
    }

    let super_classes = closure(&class_edges)?;
    let super_properties = closure(&property_edges)?;

    let mut hasher = std::collections::hash_map::DefaultHasher::new();
    std::hash::Hash::hash(&axioms, &mut hasher);
    let fingerprint = std::hash::Hasher::finish(&hasher);

    Ok(Schema { axioms, super_classes, super_properties, classes, properties, fingerprint })
}

fn closure(edges: &[(&str, &str)]) -> Result<BTreeMap<Arc<str>, Vec<Arc<str>>>, KbError> {
    let mut graph: DiGraphMap<&str, ()> = DiGraphMap::new();
    for &(sub, sup) in edges {
        if sub != sup {
            graph.add_edge(sub, sup, ());
        }
    }
    for scc in tarjan_scc(&graph) {
        if scc.len() > 1 {
            let mut names: Vec<String> = scc.iter().map(|s| s.to_string()).collect();
            names.sort();
            return Err(KbError::CyclicHierarchy(names));
        }
    }

    let mut out = BTreeMap::new();
    for node in graph.nodes() {
        let mut seen = BTreeSet::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            for next in graph.neighbors(n) {
                if seen.insert(next) {
                    stack.push(next);
                }
            }
        }
        if !seen.is_empty() {
            out.insert(Arc::from(node), seen.into_iter().map(Arc::from).collect());
        }
    }
    Ok(out)
}
