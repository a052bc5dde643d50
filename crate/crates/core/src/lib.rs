//! Simulation and analysis of the Poisson random connection model: Monte Carlo
//! estimators of cluster statistics, Ornstein-Zernike solvers on periodic grids
//! and the low-intensity expansion of the pair-connectedness and
//! direct-connectedness functions.

pub mod error;
pub mod expansion;
pub mod mc;
pub mod model;
pub mod oze;
pub mod quad;
pub mod rng;

pub use error::{Error, Result};
pub use model::{BoxGeometry, ConnectionFunction, RcmSample};
pub use rng::RngSpec;
