use std::collections::BTreeMap;

use super::atoms::AtomSet;
use super::collection::{Collection, LabelRef};
use crate::error::{invariant, Error, Result};

/// The set of dataset classes that contain a universal class.
pub type Signature = Vec<LabelRef>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniversalClass {
    pub id: usize,
    pub atoms: AtomSet,
    /// Sorted by `(dataset, class)`.
    pub signature: Signature,
    pub display_name: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniversalTaxonomy {
    pub classes: Vec<UniversalClass>,
    pub trainable: Vec<bool>,
    pub dominator: Vec<Option<usize>>,
}

impl UniversalTaxonomy {
    pub fn new(classes: Vec<UniversalClass>) -> Self {
        let n = classes.len();
        UniversalTaxonomy {
            classes,
            trainable: vec![true; n],
            dominator: vec![None; n],
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn trainable_ids(&self) -> Vec<usize> {
        (0..self.len()).filter(|&u| self.trainable[u]).collect()
    }

    pub fn is_filtered(&self) -> bool {
        self.trainable.iter().any(|t| !t)
    }

    pub fn by_name(&self, name: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|u| u.display_name == name)
            .ok_or_else(|| Error::NotFound(format!("universal class `{name}`")))
    }
}

/// Per dataset, per class: the ascending ids of the universal classes the
/// class maps to.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct MappingSet {
    pub maps: Vec<Vec<Vec<usize>>>,
}

impl MappingSet {
    pub fn get(&self, label: LabelRef) -> &[usize] {
        &self.maps[label.dataset][label.class]
    }

    pub fn num_datasets(&self) -> usize {
        self.maps.len()
    }

    /// Universal classes that no class of dataset `d` maps to.
    pub fn foreign(&self, d: usize, num_universal: usize) -> Vec<usize> {
        let mut native = vec![false; num_universal];
        for set in &self.maps[d] {
            for &u in set {
                native[u] = true;
            }
        }
        (0..num_universal).filter(|&u| !native[u]).collect()
    }

    /// Re-expresses the mapping over positions in `active` (ascending
    /// universal ids), e.g. the trainable classes that own a logit.
    /// Ids outside `active` are dropped.
    pub fn reindexed(&self, active: &[usize]) -> MappingSet {
        let pos: BTreeMap<usize, usize> = active.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        MappingSet {
            maps: self
                .maps
                .iter()
                .map(|ds| {
                    ds.iter()
                        .map(|set| set.iter().filter_map(|u| pos.get(u).copied()).collect())
                        .collect()
                })
                .collect(),
        }
    }
}

/// Signature of every atom: the dataset classes that contain it.
pub fn atom_signatures(collection: &Collection) -> Vec<Signature> {
    let mut sigs = vec![Vec::new(); collection.atoms().len()];
    for label in collection.labels() {
        for a in collection.class_atoms(label).iter() {
            sigs[a].push(label);
        }
    }
    sigs
}

/// Universal taxonomy as the partition of atoms by identical membership
/// signature. Classes are ordered by signature; mappings follow from
/// containment.
pub fn build_universal_from_atoms(collection: &Collection) -> (UniversalTaxonomy, MappingSet) {
    let mut groups: BTreeMap<Signature, AtomSet> = BTreeMap::new();
    for (atom, sig) in atom_signatures(collection).into_iter().enumerate() {
        if sig.is_empty() {
            continue;
        }
        groups.entry(sig).or_default().insert(atom);
    }
    let classes = groups
        .into_iter()
        .enumerate()
        .map(|(id, (signature, atoms))| UniversalClass {
            id,
            display_name: collection.atom_names(&atoms).join("+"),
            atoms,
            signature,
        })
        .collect::<Vec<_>>();
    let tax = UniversalTaxonomy::new(classes);
    let maps = derive_mappings(collection, &tax);
    (tax, maps)
}

/// `m(c) = { u : u ⊆ c }` restricted to trainable classes.
pub fn derive_mappings(collection: &Collection, tax: &UniversalTaxonomy) -> MappingSet {
    let maps = collection
        .datasets()
        .iter()
        .enumerate()
        .map(|(d, ds)| {
            (0..ds.classes.len())
                .map(|c| {
                    let atoms = collection.class_atoms(LabelRef::new(d, c));
                    tax.classes
                        .iter()
                        .filter(|u| tax.trainable[u.id] && u.atoms.is_subset(atoms))
                        .map(|u| u.id)
                        .collect()
                })
                .collect()
        })
        .collect();
    MappingSet { maps }
}

/// Checks every structural invariant linking a collection, a universal
/// taxonomy over it and the mappings.
pub fn validate_universal(collection: &Collection, tax: &UniversalTaxonomy, maps: &MappingSet) -> Result<()> {
    collection.validate()?;
    let n = tax.len();
    if tax.trainable.len() != n || tax.dominator.len() != n {
        return Err(invariant("taxonomy-shape", "trainable/dominator arrays do not match class count"));
    }
    let mut union = AtomSet::new();
    for (i, u) in tax.classes.iter().enumerate() {
        if u.id != i {
            return Err(invariant("universal-ids-dense", format!("class `{}` has id {} at position {i}", u.display_name, u.id)));
        }
        if u.atoms.is_empty() {
            return Err(invariant("universal-non-empty", format!("class `{}` has no atoms", u.display_name)));
        }
        for v in &tax.classes[..i] {
            if u.atoms.intersects(&v.atoms) {
                return Err(invariant(
                    "universal-disjoint",
                    format!("universal classes `{}` and `{}` overlap", v.display_name, u.display_name),
                ));
            }
            if u.signature == v.signature {
                return Err(invariant(
                    "universal-signatures-distinct",
                    format!("universal classes `{}` and `{}` share a signature", v.display_name, u.display_name),
                ));
            }
        }
        let mut sig = Vec::new();
        for label in collection.labels() {
            let c = collection.class_atoms(label);
            if u.atoms.is_subset(c) {
                sig.push(label);
            } else if u.atoms.intersects(c) {
                return Err(invariant(
                    "at-most-one-intersection",
                    format!(
                        "universal class `{}` partially overlaps `{}`",
                        u.display_name,
                        collection.label_name(label)
                    ),
                ));
            }
        }
        if sig != u.signature {
            return Err(invariant(
                "signature-exact",
                format!("signature of `{}` does not list exactly its containing classes", u.display_name),
            ));
        }
        union.union_with(&u.atoms);
    }
    if union != collection.covered_atoms() {
        return Err(invariant("universal-covers-collection", "union of universal classes differs from union of dataset classes"));
    }
    check_trainability(tax)?;
    let expected = derive_mappings(collection, tax);
    if maps.maps.len() != expected.maps.len() {
        return Err(invariant("mapping-shape", "mapping does not list every dataset"));
    }
    for label in collection.labels() {
        let got = maps.maps[label.dataset].get(label.class);
        if got.map(Vec::as_slice) != Some(expected.get(label)) {
            return Err(invariant(
                "mapping-exact",
                format!(
                    "`{}` must map to exactly the trainable universal classes it contains",
                    collection.label_name(label)
                ),
            ));
        }
        if expected.get(label).is_empty() {
            return Err(invariant(
                "mapping-non-empty",
                format!("`{}` maps to no trainable universal class", collection.label_name(label)),
            ));
        }
    }
    Ok(())
}

/// Trainable flags are either all set or exactly the outcome of the
/// signature-dominance filter.
fn check_trainability(tax: &UniversalTaxonomy) -> Result<()> {
    if !tax.is_filtered() {
        if tax.dominator.iter().any(Option::is_some) {
            return Err(invariant("dominator-consistent", "trainable class lists a dominator"));
        }
        return Ok(());
    }
    let (flags, doms) = super::filter::dominance(tax);
    if flags != tax.trainable || doms != tax.dominator {
        return Err(invariant(
            "trainability-exact",
            "trainable flags or dominators disagree with the signature-dominance rule",
        ));
    }
    Ok(())
}
