//! Configuration-driven workflows behind the `imc` binary.

pub mod config;
pub mod experiment;
pub mod workflows;

pub use config::{BenchSpec, ExperimentConfig, InstrumentalSpec, KappaPolicy, KernelSpec, LawSpec, NoiseSpec, ScanSpec, TargetSpec};
pub use experiment::{Experiment, ReplicationOutput};
pub use workflows::{bench, bench_report, ess_scan, ess_scan_rows, mean_vector_mse, run, verify, verify_spec, verify_to, BenchReport, BenchResult, RunSummary, ScanSummary, VerifyConfig, VerifyReport, VerifyTolerances};
