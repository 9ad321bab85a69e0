//! Universal taxonomies for multi-dataset semantic segmentation.
//!
//! * [`taxonomy`]: classes as atom sets, universal taxonomy construction by
//!   signature grouping or rule-based resolution, declaration programs,
//!   trainability filtering and mapping matrices.
//! * [`loss`]: universal posteriors, partial-label NLL+ and its gradient,
//!   max aggregation of masks, two-head joint posteriors.
//! * [`eval`]: projection to dataset label spaces with a void class,
//!   post-inference mapping for baselines, confusion matrices and mIoU.
//! * [`pseudo`]: universal pseudo-labels from native ground truth and
//!   foreign dataset-specific posteriors.
//! * [`toy`]: deterministic 2D problems and a small MLP trainer.

pub mod error;
pub mod eval;
pub mod loss;
pub mod pseudo;
pub mod taxonomy;
pub mod toy;

pub use error::{Error, Result};
pub use taxonomy::{
    build_universal_from_atoms, build_universal_from_declarations, classify_relation, filter_untrainable, mapping_matrix,
    AtomSet, Collection, DeclarationProgram, LabelRef, MappingSet, Relation, TaxonomyArtifacts, UniversalTaxonomy,
};
