//! Rule-based construction of the universal taxonomy.
//!
//! The working multiset starts with every dataset class and identity
//! mappings. Each step applies the first applicable rule, scanning rules in
//! order and pairs `(i, j)`, `i < j`, in ascending order:
//!
//! 1. equal parts are merged,
//! 2. a strict superset is replaced by the subset plus the remainder,
//! 3. two overlapping parts are replaced by their two differences and
//!    their intersection.
//!
//! At the fixpoint all parts are pairwise disjoint and every dataset class
//! maps to the parts that make it up.

use std::collections::BTreeMap;

use super::atoms::AtomSet;
use super::collection::{Collection, LabelRef};
use super::universal::{MappingSet, Signature, UniversalClass, UniversalTaxonomy};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WorkingSet {
    pub parts: Vec<AtomSet>,
    /// Per dataset, per class: ascending indices into `parts`.
    pub maps: Vec<Vec<Vec<usize>>>,
}

/// The rule applied by one resolution step, in pre-step part indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Resolution {
    Merge { kept: usize, removed: usize },
    Split { superset: usize, subset: usize },
    Overlap { left: usize, right: usize },
}

impl WorkingSet {
    pub fn from_collection(collection: &Collection) -> Self {
        let mut parts = Vec::new();
        let maps = collection
            .datasets()
            .iter()
            .map(|d| {
                d.classes
                    .iter()
                    .map(|c| {
                        parts.push(c.atoms.clone());
                        vec![parts.len() - 1]
                    })
                    .collect()
            })
            .collect();
        WorkingSet { parts, maps }
    }

    fn find_rule(&self) -> Option<Resolution> {
        let n = self.parts.len();
        let pairs = || (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)));
        if let Some((i, j)) = pairs().find(|&(i, j)| self.parts[i] == self.parts[j]) {
            return Some(Resolution::Merge { kept: i, removed: j });
        }
        for (i, j) in pairs() {
            let (a, b) = (&self.parts[i], &self.parts[j]);
            if a.is_subset(b) {
                return Some(Resolution::Split { superset: j, subset: i });
            }
            if b.is_subset(a) {
                return Some(Resolution::Split { superset: i, subset: j });
            }
        }
        pairs()
            .find(|&(i, j)| self.parts[i].intersects(&self.parts[j]))
            .map(|(left, right)| Resolution::Overlap { left, right })
    }

    /// Applies the first applicable rule; `None` at the fixpoint.
    pub fn step(&mut self) -> Option<Resolution> {
        let rule = self.find_rule()?;
        match rule {
            Resolution::Merge { kept, removed } => self.rewrite(&[removed], vec![], |old| {
                (old == removed).then(|| vec![Target::Kept(kept)])
            }),
            Resolution::Split { superset, subset } => {
                let rest = self.parts[superset].difference(&self.parts[subset]);
                self.rewrite(&[superset], vec![rest], |old| {
                    (old == superset).then(|| vec![Target::Kept(subset), Target::Added(0)])
                })
            }
            Resolution::Overlap { left, right } => {
                let (a, b) = (&self.parts[left], &self.parts[right]);
                let added = vec![a.difference(b), b.difference(a), a.intersection(b)];
                self.rewrite(&[left, right], added, |old| {
                    if old == left {
                        Some(vec![Target::Added(0), Target::Added(2)])
                    } else if old == right {
                        Some(vec![Target::Added(1), Target::Added(2)])
                    } else {
                        None
                    }
                })
            }
        }
        Some(rule)
    }

    /// Removes `removed` parts, appends `added`, and remaps every mapping
    /// entry through `replace` (entries it does not replace are kept).
    fn rewrite(
        &mut self,
        removed: &[usize],
        added: Vec<AtomSet>,
        replace: impl Fn(usize) -> Option<Vec<Target>>,
    ) {
        let mut new_index = vec![usize::MAX; self.parts.len()];
        let mut parts = Vec::with_capacity(self.parts.len() + added.len());
        for (i, p) in self.parts.drain(..).enumerate() {
            if !removed.contains(&i) {
                new_index[i] = parts.len();
                parts.push(p);
            }
        }
        let base = parts.len();
        parts.extend(added);
        let resolve = |t: &Target| match *t {
            Target::Kept(old) => new_index[old],
            Target::Added(k) => base + k,
        };
        for set in self.maps.iter_mut().flatten() {
            let mut out: Vec<usize> = set
                .iter()
                .flat_map(|&old| match replace(old) {
                    Some(ts) => ts.iter().map(resolve).collect::<Vec<_>>(),
                    None => vec![new_index[old]],
                })
                .collect();
            out.sort_unstable();
            out.dedup();
            *set = out;
        }
        self.parts = parts;
    }

    pub fn is_fixpoint(&self) -> bool {
        self.find_rule().is_none()
    }

    /// Runs to the fixpoint, returning the rules applied.
    pub fn resolve(&mut self) -> Vec<Resolution> {
        std::iter::from_fn(|| self.step()).collect()
    }

    /// Converts a fixpoint into a universal taxonomy ordered by signature,
    /// keeping the mappings accumulated by the rules.
    pub fn into_universal(self, collection: &Collection) -> (UniversalTaxonomy, MappingSet) {
        debug_assert!(self.is_fixpoint());
        let signature = |p: &AtomSet| -> Signature {
            collection
                .labels()
                .filter(|&l| p.is_subset(collection.class_atoms(l)))
                .collect()
        };
        let mut order: Vec<(Signature, usize)> = self.parts.iter().enumerate().map(|(i, p)| (signature(p), i)).collect();
        order.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| self.parts[a.1].cmp(&self.parts[b.1])));
        let rank: BTreeMap<usize, usize> = order.iter().enumerate().map(|(id, &(_, i))| (i, id)).collect();
        let classes = order
            .into_iter()
            .enumerate()
            .map(|(id, (signature, i))| UniversalClass {
                id,
                atoms: self.parts[i].clone(),
                display_name: collection.atom_names(&self.parts[i]).join("+"),
                signature,
            })
            .collect();
        let maps = self
            .maps
            .iter()
            .map(|ds| {
                ds.iter()
                    .map(|set| {
                        let mut v: Vec<usize> = set.iter().map(|i| rank[i]).collect();
                        v.sort_unstable();
                        v
                    })
                    .collect()
            })
            .collect();
        (UniversalTaxonomy::new(classes), MappingSet { maps })
    }

    pub fn mapped(&self, label: LabelRef) -> &[usize] {
        &self.maps[label.dataset][label.class]
    }
}

enum Target {
    Kept(usize),
    Added(usize),
}

/// Pure form of a single resolution step.
pub fn resolve_step(working: &WorkingSet) -> (WorkingSet, Option<Resolution>) {
    let mut next = working.clone();
    let rule = next.step();
    (next, rule)
}

/// The rule-based construction path: resolution to fixpoint.
pub fn build_universal_by_rules(collection: &Collection) -> (UniversalTaxonomy, MappingSet) {
    let mut ws = WorkingSet::from_collection(collection);
    ws.resolve();
    ws.into_universal(collection)
}
