use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ConnectionFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Free,
}

/// The cube `[-L/2, L/2)^d`, centred on the origin so that a pin at 0 sits in
/// the middle of the box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxGeometry {
    pub dimension: usize,
    pub side_length: f64,
    pub boundary: Boundary,
}

impl BoxGeometry {
    pub fn new(dimension: usize, side_length: f64, boundary: Boundary) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if !(side_length > 0.0 && side_length.is_finite()) {
            return Err(Error::InvalidParameter(format!("side length must be positive, got {side_length}")));
        }
        Ok(Self {
            dimension,
            side_length,
            boundary,
        })
    }

    pub fn periodic(dimension: usize, side_length: f64) -> Result<Self> {
        Self::new(dimension, side_length, Boundary::Periodic)
    }

    pub fn volume(&self) -> f64 {
        self.side_length.powi(self.dimension as i32)
    }

    pub fn half(&self) -> f64 {
        0.5 * self.side_length
    }

    pub fn check_compatible(&self, phi: &ConnectionFunction) -> Result<()> {
        if phi.dimension() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: phi.dimension(),
            });
        }
        if self.side_length <= 2.0 * phi.truncation_radius() {
            return Err(Error::BoxTooSmall {
                side: self.side_length,
                truncation: phi.truncation_radius(),
            });
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let h = self.half();
        x.len() == self.dimension && x.iter().all(|&c| c >= -h && c <= h)
    }

    /// Displacement `b - a`, using the minimal image for periodic boxes.
    #[inline]
    pub fn displacement_into(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        let l = self.side_length;
        for k in 0..a.len() {
            let mut dx = b[k] - a[k];
            if self.boundary == Boundary::Periodic {
                dx -= l * (dx / l).round();
            }
            out[k] = dx;
        }
    }

    #[inline]
    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let l = self.side_length;
        let mut s = 0.0;
        for k in 0..a.len() {
            let mut dx = b[k] - a[k];
            if self.boundary == Boundary::Periodic {
                dx -= l * (dx / l).round();
            }
            s += dx * dx;
        }
        s.sqrt()
    }

    /// Distance from `x` to the nearest face of the box.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        let h = self.half();
        x.iter().map(|c| h - c.abs()).fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_image() {
        let b = BoxGeometry::periodic(1, 10.0).unwrap();
        assert!((b.distance(&[-4.5], &[4.5]) - 1.0).abs() < 1e-12);
        let f = BoxGeometry::new(1, 10.0, Boundary::Free).unwrap();
        assert!((f.distance(&[-4.5], &[4.5]) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn compatibility_guard() {
        let phi = ConnectionFunction::gilbert(1, 1.0).unwrap();
        assert!(BoxGeometry::periodic(1, 2.0).unwrap().check_compatible(&phi).is_err());
        assert!(BoxGeometry::periodic(1, 2.5).unwrap().check_compatible(&phi).is_ok());
        assert!(BoxGeometry::periodic(2, 5.0).unwrap().check_compatible(&phi).is_err());
    }
}
