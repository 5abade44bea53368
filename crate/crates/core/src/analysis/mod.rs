//! Closed-form ergodic-rate bounds and the integrals behind them.

pub mod bounds;
pub mod quad;

pub use bounds::*;
