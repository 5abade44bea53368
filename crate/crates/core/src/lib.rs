//! Near-field holographic-surface cell-free uplink simulator.
//!
//! Base stations equipped with reconfigurable holographic surfaces are
//! scattered as a Poisson point process; each focuses its surface on the
//! nearest UE and a central unit combines all observations with an MMSE
//! receiver. The crate provides the Monte Carlo rate engine, closed-form
//! ergodic-rate bounds, and the statistical checks tying the two together.

pub mod analysis;
pub mod beamforming;
pub mod channel;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod impairments;
pub mod linalg;
pub mod simulation;

pub use error::{Error, Result};
