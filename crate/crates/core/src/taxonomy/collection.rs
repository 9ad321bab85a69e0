use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::atoms::{AtomId, AtomSet};
use crate::error::{invariant, Error, Result};

/// Reference to a class of a dataset in a collection: `(dataset, class)` indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelRef {
    pub dataset: usize,
    pub class: usize,
}

impl LabelRef {
    pub fn new(dataset: usize, class: usize) -> Self {
        LabelRef { dataset, class }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConceptAtom {
    pub id: AtomId,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetClass {
    pub name: String,
    pub atoms: AtomSet,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetTaxonomy {
    pub name: String,
    pub classes: Vec<DatasetClass>,
}

/// A collection of datasets whose classes are expressed over a shared
/// inventory of concept atoms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Collection {
    atoms: Vec<ConceptAtom>,
    datasets: Vec<DatasetTaxonomy>,
}

impl Collection {
    /// Builds a collection and checks all of its invariants.
    pub fn new(atom_names: Vec<String>, datasets: Vec<DatasetTaxonomy>) -> Result<Self> {
        let c = Self::new_unchecked(atom_names, datasets);
        c.validate()?;
        Ok(c)
    }

    pub(crate) fn new_unchecked(atom_names: Vec<String>, datasets: Vec<DatasetTaxonomy>) -> Self {
        let atoms = atom_names
            .into_iter()
            .enumerate()
            .map(|(id, name)| ConceptAtom { id, name })
            .collect();
        Collection { atoms, datasets }
    }

    /// Convenience constructor from `(dataset, [(class, [atom names])])` tables.
    /// Atoms are registered in order of first appearance.
    pub fn from_tables(tables: &[(&str, ClassTable)]) -> Result<Self> {
        let mut names: Vec<String> = Vec::new();
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        let mut datasets = Vec::new();
        for (dname, classes) in tables {
            let mut out = Vec::new();
            for (cname, atoms) in classes.iter() {
                let set = atoms
                    .iter()
                    .map(|a| {
                        *index.entry(a).or_insert_with(|| {
                            names.push(a.to_string());
                            names.len() - 1
                        })
                    })
                    .collect();
                out.push(DatasetClass {
                    name: cname.to_string(),
                    atoms: set,
                });
            }
            datasets.push(DatasetTaxonomy {
                name: dname.to_string(),
                classes: out,
            });
        }
        Collection::new(names, datasets)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for a in &self.atoms {
            if a.name.is_empty() {
                return Err(invariant("atom-names-non-empty", format!("atom {} has an empty name", a.id)));
            }
            if !seen.insert(a.name.as_str()) {
                return Err(invariant("atom-names-unique", format!("atom `{}` listed twice", a.name)));
            }
        }
        let mut dnames = HashSet::new();
        let mut referenced = AtomSet::new();
        for d in &self.datasets {
            if d.name.is_empty() || d.name.contains('.') || d.name.contains(char::is_whitespace) {
                return Err(invariant(
                    "dataset-names-well-formed",
                    format!("dataset name `{}` must be non-empty without dots or whitespace", d.name),
                ));
            }
            if !dnames.insert(d.name.as_str()) {
                return Err(invariant("dataset-names-unique", format!("dataset `{}` listed twice", d.name)));
            }
            let mut cnames = HashSet::new();
            for (i, c) in d.classes.iter().enumerate() {
                if c.name.is_empty() {
                    return Err(invariant("class-names-non-empty", format!("dataset `{}` has an unnamed class", d.name)));
                }
                if !cnames.insert(c.name.as_str()) {
                    return Err(invariant(
                        "class-names-unique",
                        format!("class `{}` listed twice in dataset `{}`", c.name, d.name),
                    ));
                }
                if c.atoms.is_empty() {
                    return Err(invariant("class-atoms-non-empty", format!("class `{}.{}` has no atoms", d.name, c.name)));
                }
                if let Some(bad) = c.atoms.iter().find(|&a| a >= self.atoms.len()) {
                    return Err(invariant(
                        "class-atoms-known",
                        format!("class `{}.{}` references unknown atom id {bad}", d.name, c.name),
                    ));
                }
                for other in &d.classes[..i] {
                    if c.atoms.intersects(&other.atoms) {
                        let shared: Vec<_> = c
                            .atoms
                            .intersection(&other.atoms)
                            .iter()
                            .map(|a| self.atoms[a].name.clone())
                            .collect();
                        return Err(invariant(
                            "dataset-classes-disjoint",
                            format!(
                                "classes `{}` and `{}` of dataset `{}` share atoms {:?}",
                                other.name, c.name, d.name, shared
                            ),
                        ));
                    }
                }
                referenced.union_with(&c.atoms);
            }
        }
        if let Some(a) = self.atoms.iter().find(|a| !referenced.contains(a.id)) {
            return Err(invariant("atoms-referenced", format!("atom `{}` belongs to no class", a.name)));
        }
        Ok(())
    }

    pub fn atoms(&self) -> &[ConceptAtom] {
        &self.atoms
    }

    pub fn datasets(&self) -> &[DatasetTaxonomy] {
        &self.datasets
    }

    pub fn dataset(&self, d: usize) -> &DatasetTaxonomy {
        &self.datasets[d]
    }

    pub fn class(&self, label: LabelRef) -> &DatasetClass {
        &self.datasets[label.dataset].classes[label.class]
    }

    pub fn class_atoms(&self, label: LabelRef) -> &AtomSet {
        &self.class(label).atoms
    }

    /// `dataset.class`
    pub fn label_name(&self, label: LabelRef) -> String {
        format!("{}.{}", self.datasets[label.dataset].name, self.class(label).name)
    }

    /// All classes in `(dataset, class)` order.
    pub fn labels(&self) -> impl Iterator<Item = LabelRef> + '_ {
        self.datasets
            .iter()
            .enumerate()
            .flat_map(|(d, ds)| (0..ds.classes.len()).map(move |c| LabelRef::new(d, c)))
    }

    pub fn num_labels(&self) -> usize {
        self.datasets.iter().map(|d| d.classes.len()).sum()
    }

    pub fn dataset_index(&self, name: &str) -> Result<usize> {
        self.datasets
            .iter()
            .position(|d| d.name == name)
            .ok_or_else(|| Error::NotFound(format!("dataset `{name}`")))
    }

    pub fn class_index(&self, dataset: usize, name: &str) -> Result<usize> {
        self.datasets[dataset]
            .classes
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::NotFound(format!("class `{}.{name}`", self.datasets[dataset].name)))
    }

    /// Resolves `dataset.class`.
    pub fn label_by_name(&self, qualified: &str) -> Result<LabelRef> {
        let (d, c) = qualified
            .split_once('.')
            .ok_or_else(|| Error::NotFound(format!("`{qualified}` is not of the form dataset.class")))?;
        let d = self.dataset_index(d)?;
        Ok(LabelRef::new(d, self.class_index(d, c)?))
    }

    pub fn atom_index(&self, name: &str) -> Option<AtomId> {
        self.atoms.iter().position(|a| a.name == name)
    }

    pub fn atom_names(&self, set: &AtomSet) -> Vec<String> {
        set.iter().map(|a| self.atoms[a].name.clone()).collect()
    }

    /// Union of the atoms of every class.
    pub fn covered_atoms(&self) -> AtomSet {
        let mut all = AtomSet::new();
        for l in self.labels() {
            all.union_with(self.class_atoms(l));
        }
        all
    }

    /// The class of dataset `d` containing `atom`, if any.
    pub fn class_containing(&self, d: usize, atom: AtomId) -> Option<usize> {
        self.datasets[d].classes.iter().position(|c| c.atoms.contains(atom))
    }

    pub fn to_file(&self) -> CollectionFile {
        CollectionFile {
            atoms: self.atoms.iter().map(|a| a.name.clone()).collect(),
            datasets: self
                .datasets
                .iter()
                .map(|d| DatasetFile {
                    name: d.name.clone(),
                    classes: d
                        .classes
                        .iter()
                        .map(|c| ClassFile {
                            name: c.name.clone(),
                            atoms: self.atom_names(&c.atoms),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    pub fn from_file(file: &CollectionFile) -> Result<Self> {
        let index: BTreeMap<&str, usize> = file
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| (a.as_str(), i))
            .collect();
        let mut datasets = Vec::new();
        for d in &file.datasets {
            let mut classes = Vec::new();
            for c in &d.classes {
                let mut atoms = AtomSet::new();
                for a in &c.atoms {
                    let id = index.get(a.as_str()).ok_or_else(|| {
                        invariant(
                            "class-atoms-known",
                            format!("class `{}.{}` references undeclared atom `{a}`", d.name, c.name),
                        )
                    })?;
                    atoms.insert(*id);
                }
                classes.push(DatasetClass {
                    name: c.name.clone(),
                    atoms,
                });
            }
            datasets.push(DatasetTaxonomy {
                name: d.name.clone(),
                classes,
            });
        }
        Collection::new(file.atoms.clone(), datasets)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CollectionFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            detail: e.to_string(),
        })?;
        Collection::from_file(&file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("collection serializes") + "\n"
    }
}

/// On-disk collection schema: atoms are referenced by name.
/// `(class, atom names)` rows of one dataset.
pub type ClassTable<'a> = &'a [(&'a str, &'a [&'a str])];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionFile {
    pub atoms: Vec<String>,
    pub datasets: Vec<DatasetFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    pub name: String,
    pub classes: Vec<ClassFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassFile {
    pub name: String,
    pub atoms: Vec<String>,
}
