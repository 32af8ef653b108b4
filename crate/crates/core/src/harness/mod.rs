//! Dataset loading, instance selection and experiment runs.

pub mod compare;
pub mod config;
pub mod dataset;
pub mod instances;
pub mod runner;

pub use compare::{compare_records, compare_runs, ComparisonReport};
pub use config::{ExperimentConfig, OracleSpec, ReferenceOverrides};
pub use dataset::{dataset_stats, load_jodie_csv, read_jodie_csv, write_jodie_csv, DatasetDescriptor, DatasetStats};
pub use instances::{resample_destination, select_instances, InstanceSelection, InstanceSpec, SelectedInstance};
pub use runner::{load_graph, read_manifest, read_records, run_experiment, Manifest, RunOutput, SkippedInstance};
