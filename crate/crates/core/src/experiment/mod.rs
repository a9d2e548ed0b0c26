//! Experiment harness: dataset ingestion, baselines and repeated runs of the
//! sampling optimizers.

pub mod baselines;
pub mod dataset;
pub mod runner;
pub mod synthetic;

pub use baselines::{compute_baselines, score_all, BaselineRow, Baselines, PolicyScores};
pub use dataset::{ingest_dataset, parse_withcount, Dataset, DatasetSummary};
pub use runner::{
    run_experiment, run_experiment_with, run_once, run_seed, Algorithm, CellSummary, DatasetSource,
    ExperimentPlan, ExperimentReport, RulesSource, RunRecord, Workbench,
};
pub use synthetic::{builtin_dictionary, heavy_head, SyntheticDataset, SyntheticParams};
