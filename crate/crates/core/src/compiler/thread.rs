//! Recovering activation-time variables inside the later rules of a norm.
//!
//! Rules 2 and 3 only see the deontic relation through `isGenerated`. Any
//! other variable of the activation part has to be reached from `?dr`,
//! first through the facts the activation rule asserted about it and then,
//! when those run out, through the (immutable) state atoms of the activating
//! trigger.

use std::collections::{BTreeMap, BTreeSet};

use super::CompileError;
use crate::kb::{Atom, Term};
use crate::parser::NormAst;

struct Reach {
    /// var -> (discovery order, atom that reached it, var it was reached from)
    found: BTreeMap<String, (usize, Atom, String)>,
    reached: BTreeSet<String>,
    seq: usize,
}

impl Reach {
    fn spread(&mut self, edges: &[Atom]) {
        loop {
            let mut progress = false;
            for atom in edges {
                let Atom::Property { subject: Term::Var(s), object: Term::Var(o), .. } = atom else {
                    continue;
                };
                for (from, to) in [(s, o), (o, s)] {
                    if self.reached.contains(from) && !self.reached.contains(to) {
                        self.reached.insert(to.clone());
                        self.seq += 1;
                        self.found.insert(to.clone(), (self.seq, atom.clone(), from.clone()));
                        progress = true;
                    }
                }
            }
            if !progress {
                return;
            }
        }
    }
}

/// Atoms binding every variable in `needed`, starting from `dr`, in an
/// order where each atom shares a variable with an earlier one.
pub(super) fn thread(
    norm: &NormAst,
    dr: &str,
    needed: &BTreeSet<String>,
    rule_id: &str,
) -> Result<Vec<Atom>, CompileError> {
    let asserted: Vec<Atom> = norm.asserts.iter().map(|a| a.to_atom()).collect();
    let state: Vec<Atom> = norm.outer.conditions.atoms.iter().filter(|a| a.is_positive()).cloned().collect();

    let mut reach = Reach { found: BTreeMap::new(), reached: BTreeSet::from([dr.to_string()]), seq: 0 };
    reach.spread(&asserted);
    reach.spread(&state);

    let mut chosen: BTreeMap<usize, Atom> = BTreeMap::new();
    for var in needed {
        if var == dr {
            continue;
        }
        let mut current = var.clone();
        while current != dr {
            let Some((seq, atom, from)) = reach.found.get(&current) else {
                return Err(CompileError::Unthreadable { rule: rule_id.to_string(), var: var.clone() });
            };
            chosen.insert(*seq, atom.clone());
            current = from.clone();
        }
    }
    let mut out: Vec<Atom> = Vec::new();
    for atom in chosen.into_values() {
        if !out.contains(&atom) {
            out.push(atom);
        }
    }
    Ok(out)
}
