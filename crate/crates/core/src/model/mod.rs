//! Connection functions, finite boxes and sampled realisations of the random
//! connection model.

mod connection;
mod geometry;
mod sample;

pub use connection::{ball_volume, norm, sphere_area, ConnectionFunction, PhiKind, TRUNCATION_EPSILON};
pub use geometry::{Boundary, BoxGeometry};
pub use sample::{sample_rcm, sample_rcm_with, PairSearch, RcmSample};
