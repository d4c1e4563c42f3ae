//! Mosaic permutation tests for factor models with known exposures.
//!
//! The model is `Y_t = L_t X_t + eps_t` with known exposures `L_t`. Under the
//! null the residual series of different assets are independent. The panel is
//! cut into tiles, residuals are estimated separately inside each tile, and
//! rows are shuffled within tiles to build an exact permutation null.

pub mod baselines;
pub mod cli;
pub mod error;
pub mod panel;
pub mod permute;
pub mod residuals;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod tiling;

pub use error::{MosaicError, Result};
