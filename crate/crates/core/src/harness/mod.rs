//! Config-driven experiment runs: generate, perturb, train, evaluate,
//! degrade, and write hashed artifacts.

mod config;
mod run;
mod sweep;

pub use config::{
    bundled, validate_config, ConfigIssue, DatasetConfig, DeploymentConfig, DirectoryDataset, DirectorySplit,
    EvaluationConfig, ExperimentConfig, ModelConfig, PerturbationConfig, Split, SyntheticDataset, TrainingConfig,
    Transform,
};
pub use run::{
    derive_seed, load_data, load_summary, perturb, read_manifest, run_experiment, run_pipeline, streams, EpochLog,
    ManifestEntry, RunArtifacts, RunResult, RunSummary, Stage, StageError, ERROR_FILE, MANIFEST_FILE,
};
pub use sweep::{parse_vary, set_path, sweep, SweepError, SweepPoint, SWEEP_SUMMARY};
