//! Periodic grid functions, spectral convolution and the Ornstein-Zernike
//! solvers.

mod grid;
mod solver;
mod spectral;

pub use grid::{grid_from_radial, GridFunction, GridGeometry, RadialFunction, Sampling};
pub use solver::{
    mean_cluster_from_q, one_term_truncation_bound, oze_residual, solve_oze_fourier, solve_oze_neumann,
    MeanClusterFromQ, NeumannSolution, OzeSolution, SPECTRAL_FLOOR,
};
pub use spectral::{convolve, SpectralFunction};
