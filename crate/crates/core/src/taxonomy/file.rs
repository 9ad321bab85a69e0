use serde::{Deserialize, Serialize};

use super::atoms::AtomSet;
use super::collection::{Collection, CollectionFile, DatasetFile};
use super::declarations::{build_universal_from_declarations, DeclarationProgram};
use super::filter::{filter_untrainable, FilterReport};
use super::universal::{build_universal_from_atoms, validate_universal, MappingSet, UniversalClass, UniversalTaxonomy};
use crate::error::{invariant, Error, Result};

/// A collection together with its universal taxonomy and mappings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaxonomyArtifacts {
    pub collection: Collection,
    pub taxonomy: UniversalTaxonomy,
    pub mappings: MappingSet,
}

impl TaxonomyArtifacts {
    pub fn from_collection(collection: Collection) -> Self {
        let (taxonomy, mappings) = build_universal_from_atoms(&collection);
        TaxonomyArtifacts {
            collection,
            taxonomy,
            mappings,
        }
    }

    pub fn from_program(prog: &DeclarationProgram) -> Result<Self> {
        let (collection, taxonomy, mappings) = build_universal_from_declarations(prog)?;
        Ok(TaxonomyArtifacts {
            collection,
            taxonomy,
            mappings,
        })
    }

    pub fn filtered(&self) -> (Self, FilterReport) {
        let (taxonomy, mappings, report) = filter_untrainable(&self.collection, &self.taxonomy, &self.mappings);
        (
            TaxonomyArtifacts {
                collection: self.collection.clone(),
                taxonomy,
                mappings,
            },
            report,
        )
    }

    pub fn validate(&self) -> Result<()> {
        validate_universal(&self.collection, &self.taxonomy, &self.mappings)
    }

    /// Universal ids that own a logit (the trainable ones).
    pub fn active(&self) -> Vec<usize> {
        self.taxonomy.trainable_ids()
    }

    /// Mappings over logit positions rather than universal ids.
    pub fn logit_mappings(&self) -> MappingSet {
        self.mappings.reindexed(&self.active())
    }

    pub fn to_file(&self) -> TaxonomyFile {
        let c = &self.collection;
        let t = &self.taxonomy;
        let CollectionFile { atoms, datasets } = c.to_file();
        TaxonomyFile {
            atoms,
            datasets,
            universal: t
                .classes
                .iter()
                .map(|u| UniversalEntry {
                    id: u.id,
                    name: u.display_name.clone(),
                    atoms: c.atom_names(&u.atoms),
                    signature: u.signature.iter().map(|&l| c.label_name(l)).collect(),
                    trainable: t.trainable[u.id],
                    dominator: t.dominator[u.id].map(|d| t.classes[d].display_name.clone()),
                })
                .collect(),
            mappings: c
                .datasets()
                .iter()
                .enumerate()
                .map(|(d, ds)| DatasetMapping {
                    dataset: ds.name.clone(),
                    classes: ds
                        .classes
                        .iter()
                        .enumerate()
                        .map(|(k, cls)| ClassMapping {
                            class: cls.name.clone(),
                            universal: self.mappings.maps[d][k]
                                .iter()
                                .map(|&u| t.classes[u].display_name.clone())
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Reads a taxonomy file and checks every invariant.
    pub fn from_file(file: &TaxonomyFile) -> Result<Self> {
        let collection = Collection::from_file(&CollectionFile {
            atoms: file.atoms.clone(),
            datasets: file.datasets.clone(),
        })?;
        let atom = |name: &str| {
            collection
                .atom_index(name)
                .ok_or_else(|| invariant("universal-atoms-known", format!("unknown atom `{name}`")))
        };
        let mut classes = Vec::new();
        for (i, e) in file.universal.iter().enumerate() {
            if e.id != i {
                return Err(invariant("universal-ids-dense", format!("entry {i} has id {}", e.id)));
            }
            let atoms = e.atoms.iter().map(|a| atom(a)).collect::<Result<AtomSet>>()?;
            let signature = e
                .signature
                .iter()
                .map(|q| collection.label_by_name(q))
                .collect::<Result<Vec<_>>>()?;
            classes.push(UniversalClass {
                id: e.id,
                atoms,
                signature,
                display_name: e.name.clone(),
            });
        }
        let mut taxonomy = UniversalTaxonomy::new(classes);
        for (i, e) in file.universal.iter().enumerate() {
            taxonomy.trainable[i] = e.trainable;
            taxonomy.dominator[i] = e.dominator.as_deref().map(|n| taxonomy.by_name(n)).transpose()?;
        }
        if file.mappings.len() != collection.datasets().len() {
            return Err(invariant("mapping-shape", "mappings must list every dataset in order"));
        }
        let mut maps = Vec::new();
        for (d, dm) in file.mappings.iter().enumerate() {
            let ds = collection.dataset(d);
            if dm.dataset != ds.name || dm.classes.len() != ds.classes.len() {
                return Err(invariant(
                    "mapping-shape",
                    format!("mapping for `{}` must list its classes in order", ds.name),
                ));
            }
            let mut per = Vec::new();
            for (cm, cls) in dm.classes.iter().zip(&ds.classes) {
                if cm.class != cls.name {
                    return Err(invariant(
                        "mapping-shape",
                        format!("expected class `{}` in mapping of `{}`", cls.name, ds.name),
                    ));
                }
                let mut ids = cm.universal.iter().map(|n| taxonomy.by_name(n)).collect::<Result<Vec<_>>>()?;
                ids.sort_unstable();
                per.push(ids);
            }
            maps.push(per);
        }
        let out = TaxonomyArtifacts {
            collection,
            taxonomy,
            mappings: MappingSet { maps },
        };
        out.validate()?;
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("taxonomy serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TaxonomyFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            detail: e.to_string(),
        })?;
        TaxonomyArtifacts::from_file(&file)
    }
}

/// On-disk taxonomy: the collection plus universal classes and mappings,
/// all referenced by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomyFile {
    pub atoms: Vec<String>,
    pub datasets: Vec<DatasetFile>,
    pub universal: Vec<UniversalEntry>,
    pub mappings: Vec<DatasetMapping>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniversalEntry {
    pub id: usize,
    pub name: String,
    pub atoms: Vec<String>,
    /// `dataset.class` of every containing class.
    pub signature: Vec<String>,
    pub trainable: bool,
    pub dominator: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMapping {
    pub dataset: String,
    pub classes: Vec<ClassMapping>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassMapping {
    pub class: String,
    pub universal: Vec<String>,
}
