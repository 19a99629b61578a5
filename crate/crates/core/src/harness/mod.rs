//! Experiment orchestration: configuration, closed-loop runs, performance
//! metrics, initial-condition sweeps, the verification suite and output.

pub mod config;
pub mod emit;
pub mod metrics;
pub mod sim;
pub mod svg;
pub mod sweep;
pub mod verify;

pub use config::{ControlUpdate, ExperimentConfig, IcPair, NoiseConfig, ProfileConfig};
pub use emit::{emit_run, emit_summary, Format};
pub use metrics::{gamma_p, gamma_tau, pfm, pfm_for, PfmResult};
pub use sim::{run_experiment, run_experiment_with_rng, run_rng, LogRow, RunLog, Simulation};
pub use sweep::{sweep, Execution, Stat, SweepCell, SweepSummary};
pub use verify::{verify, verify_with, Check, VerifyOptions, VerifyReport};
