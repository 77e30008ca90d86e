//! Learning of linguistic first-order TSK fuzzy rule bases for regression.
//!
//! The pipeline selects representative training examples, discretizes every
//! input into a ladder of non-uniform partitions, and searches with a genetic
//! algorithm for the granularities and displacements whose rule base, with
//! Elastic-Net consequents, best fits the training data.

pub mod data;
pub mod density;
pub mod discretize;
pub mod error;
pub mod evolution;
pub mod fuzzy;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod selection;
pub mod sgd;
pub mod synthetic;
pub mod tsk;

pub use data::{kfold_split, load_dataset, Dataset, FoldSplit, Format, VariableMeta};
pub use density::{find_output_splits, DensityLabels};
pub use discretize::{discretize_dataset, discretize_variable, GranularityLadder};
pub use error::{Error, Result};
pub use evolution::{Chromosome, EvolutionConfig, EvolutionReport};
pub use fuzzy::{apply_displacement, build_partition, FuzzyPartition, Trapezoid};
pub use model::{Metadata, ModelFile, RuleSpec, VariableSpec};
pub use pipeline::{crossval, evaluate, run_fold, train, CrossvalOutcome, Errors, FoldReport, RunReport, Summary, TrainConfig, TrainedModel};
pub use selection::{loo_1nn_mse, select_instances, SelectionResult};
pub use sgd::{sgd_elastic_net, tune_hyperparams, Matrix, SgdConfig, Tuned};
pub use tsk::{build_design_matrix, build_rulebase, matching_degree, wang_mendel_antecedents, DataBase, TskRule, TskRuleBase};
