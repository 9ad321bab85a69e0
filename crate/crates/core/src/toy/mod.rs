//! Deterministic 2D toy problems and a small MLP trainer.
//!
//! A problem places Gaussian blobs of samples on the atoms of a collection.
//! Each training sample is labeled by one dataset that covers its atom, so
//! models only ever see dataset classes. Held-out samples keep their true
//! universal class for evaluation.

mod data;
mod mlp;
pub mod problems;
mod report;
mod train;

pub use data::{generate_toy, normal_pair, ConceptSpec, LabeledSample, TestSample, ToyData, ToyProblem, ToyProblemSpec};
pub use mlp::{Adam, Dense, ForwardCache, LayerFile, Mlp, MlpFile};
pub use report::{
    accuracy_report, dead_logit_report, decision_surface_csv, eval_report, evaluate_dataset, predict_all, share,
    trace_csv, AccuracyReport, ClassStats, Grid, TrainReport, DEAD_FREQUENCY,
};
pub use train::{dataset_label, train, Mode, ModelFile, OutputSpace, Scoring, TrainConfig, TrainOutcome, TrainedModel};
