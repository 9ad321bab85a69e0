//! Universal taxonomy construction over collections of datasets with
//! inconsistent labeling policies.

mod atoms;
mod collection;
mod declarations;
mod file;
mod filter;
pub mod fixtures;
mod matrix;
mod resolve;
mod universal;

pub use atoms::{classify_relation, AtomId, AtomSet, Relation};
pub use collection::{ClassFile, Collection, CollectionFile, ConceptAtom, DatasetClass, DatasetFile, DatasetTaxonomy, LabelRef};
pub use declarations::{build_universal_from_declarations, ClassName, DeclarationProgram, Statement};
pub use file::{ClassMapping, DatasetMapping, TaxonomyArtifacts, TaxonomyFile, UniversalEntry};
pub use filter::{filter_untrainable, FilterReport};
pub use matrix::{mapping_matrix, MappingMatrix, VOID_ROW};
pub use resolve::{build_universal_by_rules, resolve_step, Resolution, WorkingSet};
pub use universal::{
    atom_signatures, build_universal_from_atoms, derive_mappings, validate_universal, MappingSet, Signature,
    UniversalClass, UniversalTaxonomy,
};
