//! Monte Carlo orchestration: trials, ergodic-rate sweeps and statistical
//! validation runs.

pub mod config;
pub mod sweep;
pub mod trial;
pub mod validate;

pub use config::ExperimentConfig;
pub use sweep::{ergodic_rate, sweep, SweepAxis, SweepPoint, SweepResult};
pub use trial::{run_trial, trial_rng, Realization, TrialContext};
