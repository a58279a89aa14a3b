//! Make graph-classification datasets unlearnable.
//!
//! The crate flips a small, budgeted set of edges per graph — chosen by the
//! gradient of a surrogate GNN's loss with respect to the adjacency matrix —
//! so that models trained on the poisoned data generalize poorly to clean
//! test graphs, while the graphs themselves stay visually near-identical.
//!
//! Subsystems:
//!
//! * [`graph`] — data model, perturbation budgets, flip application,
//! * [`tu`] — flat-file benchmark ingestion/serialization and edit logs,
//! * [`nn`] — dense GCN/GIN engine with exact adjacency gradients,
//! * [`poison`] — the error-minimizing crafting loop and its baselines,
//! * [`harness`] — victim training, evaluation, and the experiment matrix,
//! * [`synth`] — deterministic synthetic benchmark generation.

pub mod error;
pub mod graph;
pub mod harness;
pub mod nn;
pub mod poison;
pub mod synth;
pub mod tu;

#[doc(hidden)]
pub mod test_support;

pub use error::{Error, Result};
pub use graph::{
    apply_flips, resolve_budget, EditLog, FeatureKind, Flip, FlipOp, Graph, GraphDataset,
    PerturbationBudget,
};
pub use nn::{Arch, ModelConfig, ModelParams};
pub use poison::{
    craft_noise_for_graph, error_max_noise, poison_dataset, random_noise, select_flips,
    PoisonConfig, PoisonRunStats,
};
pub use harness::{
    evaluate, run_experiment, split_dataset, train_victim, EvalReport, TrainConfig,
};
