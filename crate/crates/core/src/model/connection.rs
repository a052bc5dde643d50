use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate_checked, QuadOptions};

/// Value below which a non-compact connection function is cut off.
pub const TRUNCATION_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhiKind {
    /// Indicator of the closed ball of the given radius.
    Gilbert { radius: f64 },
    /// `exp(-rate * |x|)`.
    Exponential { rate: f64 },
    /// Piecewise linear in `|x|` through `(radius, value)` knots, constant
    /// before the first knot and zero after the last one.
    RadialTable { radii: Vec<f64>, values: Vec<f64> },
}

/// Radially symmetric connection probability on R^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectionFunction {
    kind: PhiKind,
    dimension: usize,
    truncation_radius: f64,
    mass: f64,
}

/// Volume of the d-ball of radius `r`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = V_{d-2} * 2 pi / d
    let mut v = if d % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if d % 2 == 0 { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    v * r.powi(d as i32)
}

/// Surface area of the unit sphere in R^d.
pub fn sphere_area(d: usize) -> f64 {
    d as f64 * ball_volume(d, 1.0)
}

impl ConnectionFunction {
    pub fn gilbert(dimension: usize, radius: f64) -> Result<Self> {
        check_dimension(dimension)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("gilbert radius must be positive, got {radius}")));
        }
        Ok(Self {
            kind: PhiKind::Gilbert { radius },
            dimension,
            truncation_radius: radius,
            mass: ball_volume(dimension, radius),
        })
    }

    pub fn exponential(dimension: usize, rate: f64) -> Result<Self> {
        check_dimension(dimension)?;
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("exponential rate must be positive, got {rate}")));
        }
        let truncation_radius = -TRUNCATION_EPSILON.ln() / rate;
        let mut f = Self {
            kind: PhiKind::Exponential { rate },
            dimension,
            truncation_radius,
            mass: 0.0,
        };
        f.mass = if dimension == 1 { 2.0 / rate } else { f.radial_mass()? };
        Ok(f)
    }

    pub fn radial_table(dimension: usize, radii: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_dimension(dimension)?;
        if radii.is_empty() || radii.len() != values.len() {
            return Err(Error::InvalidParameter("radial table needs matching, non-empty radii and values".into()));
        }
        if radii[0] < 0.0 || radii.windows(2).any(|w| !(w[1] > w[0])) || radii.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidParameter("radial table radii must be finite, non-negative and strictly increasing".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("radial table values must lie in [0, 1]".into()));
        }
        let truncation_radius = *radii.last().unwrap();
        let mut f = Self {
            kind: PhiKind::RadialTable { radii, values },
            dimension,
            truncation_radius,
            mass: 0.0,
        };
        f.mass = f.radial_mass()?;
        if !(f.mass > 0.0) {
            return Err(Error::InvalidParameter("connection function has zero mass".into()));
        }
        Ok(f)
    }

    pub fn kind(&self) -> &PhiKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn truncation_radius(&self) -> f64 {
        self.truncation_radius
    }

    /// Total mass m_phi.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// True when phi only takes the values 0 and 1.
    pub fn is_indicator(&self) -> bool {
        matches!(self.kind, PhiKind::Gilbert { .. })
    }

    /// phi as a function of |x|. Exactly zero beyond the truncation radius.
    pub fn eval_radial(&self, r: f64) -> f64 {
        let r = r.abs();
        if r > self.truncation_radius {
            return 0.0;
        }
        match &self.kind {
            PhiKind::Gilbert { .. } => 1.0,
            PhiKind::Exponential { rate } => (-rate * r).exp(),
            PhiKind::RadialTable { radii, values } => {
                if r <= radii[0] {
                    return values[0];
                }
                let k = radii.partition_point(|&q| q < r);
                if k >= radii.len() {
                    return *values.last().unwrap();
                }
                let (r0, r1) = (radii[k - 1], radii[k]);
                let w = (r - r0) / (r1 - r0);
                values[k - 1] * (1.0 - w) + values[k] * w
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_radial(norm(x))
    }

    /// Radii where phi (as a function of |x|) is not smooth.
    pub fn radial_breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            PhiKind::Gilbert { radius } => vec![*radius],
            PhiKind::Exponential { .. } => vec![self.truncation_radius],
            PhiKind::RadialTable { radii, .. } => radii.clone(),
        }
    }

    fn radial_mass(&self) -> Result<f64> {
        let d = self.dimension;
        let mut pts = vec![0.0];
        match &self.kind {
            PhiKind::Exponential { rate } => {
                // split the decay into pieces of a few characteristic lengths
                let step = 2.0 / rate;
                let mut r = step;
                while r < self.truncation_radius {
                    pts.push(r);
                    r += step;
                }
                pts.push(self.truncation_radius);
            }
            _ => pts.extend(self.radial_breakpoints()),
        }
        let opts = QuadOptions {
            abs_tol: 1e-300,
            rel_tol: 1e-12,
            max_depth: 50,
        };
        let r = integrate_checked(|r| self.eval_radial(r) * r.powi(d as i32 - 1), &pts, &opts)?;
        Ok(sphere_area(d) * r.value)
    }

    fn max_value(&self) -> f64 {
        match &self.kind {
            PhiKind::RadialTable { values, .. } => values.iter().copied().fold(0.0, f64::max),
            _ => 1.0,
        }
    }

    /// Draws a displacement from the probability density phi / m_phi.
    pub fn sample_displacement<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dimension;
        let r = match &self.kind {
            PhiKind::Gilbert { radius } => radius * rng.random::<f64>().powf(1.0 / d as f64),
            PhiKind::Exponential { rate } => {
                let gamma = Gamma::new(d as f64, 1.0 / rate).expect("valid gamma parameters");
                loop {
                    let r: f64 = gamma.sample(rng);
                    if r <= self.truncation_radius {
                        break r;
                    }
                }
            }
            PhiKind::RadialTable { .. } => {
                let top = self.max_value();
                loop {
                    let r = self.truncation_radius * rng.random::<f64>().powf(1.0 / d as f64);
                    if rng.random::<f64>() * top < self.eval_radial(r) {
                        break r;
                    }
                }
            }
        };
        random_direction(d, rng).into_iter().map(|u| u * r).collect()
    }
}

fn check_dimension(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    Ok(())
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn random_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    if d == 1 {
        return vec![if rng.random::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eval_examples() {
        let g = ConnectionFunction::gilbert(1, 1.0).unwrap();
        assert_eq!(g.eval(&[0.0]), 1.0);
        assert_eq!(g.eval(&[1.0]), 1.0);
        assert_eq!(g.eval(&[1.5]), 0.0);
        assert_eq!(g.eval(&[-1.5]), 0.0);
        let e = ConnectionFunction::exponential(1, 1.0).unwrap();
        assert!((e.eval(&[1.0]) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(e.eval(&[-1.0]), e.eval(&[1.0]));
        assert_eq!(e.eval(&[e.truncation_radius() * 1.0001]), 0.0);
    }

    #[test]
    fn masses() {
        assert_eq!(ConnectionFunction::gilbert(1, 1.0).unwrap().mass(), 2.0);
        assert!((ConnectionFunction::gilbert(2, 1.0).unwrap().mass() - PI).abs() < 1e-15);
        assert!((ConnectionFunction::gilbert(3, 2.0).unwrap().mass() - 4.0 / 3.0 * PI * 8.0).abs() < 1e-12);
        assert_eq!(ConnectionFunction::exponential(1, 2.0).unwrap().mass(), 1.0);
        // the quadrature route agrees with the closed form 2 pi / a^2 in d = 2
        let e2 = ConnectionFunction::exponential(2, 1.5).unwrap();
        assert!((e2.mass() / (2.0 * PI / 2.25) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn exponential_d1_quadrature_oracle() {
        let e = ConnectionFunction::exponential(1, 2.0).unwrap();
        let q = e.radial_mass().unwrap();
        assert!((q - 1.0).abs() < 1e-10, "{q}");
    }

    #[test]
    fn table_interpolation_and_mass() {
        let t = ConnectionFunction::radial_table(1, vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 0.0]).unwrap();
        assert_eq!(t.eval_radial(0.5), 1.0);
        assert!((t.eval_radial(1.5) - 0.5).abs() < 1e-15);
        assert_eq!(t.eval_radial(2.5), 0.0);
        // 2 * (1 + 1/2)
        assert!((t.mass() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ConnectionFunction::gilbert(1, 0.0).is_err());
        assert!(ConnectionFunction::gilbert(0, 1.0).is_err());
        assert!(ConnectionFunction::exponential(1, -1.0).is_err());
        assert!(ConnectionFunction::radial_table(1, vec![1.0, 0.5], vec![1.0, 0.0]).is_err());
        assert!(ConnectionFunction::radial_table(1, vec![0.0, 1.0], vec![1.0, 1.5]).is_err());
    }

    #[test]
    fn displacement_sampler_matches_phi() {
        // mean of |Y| under phi/m_phi for the unit disk is 2/3
        let g = ConnectionFunction::gilbert(2, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let m: f64 = (0..n).map(|_| norm(&g.sample_displacement(&mut rng))).sum::<f64>() / n as f64;
        assert!((m - 2.0 / 3.0).abs() < 0.005, "{m}");
        // exponential in d = 1: |Y| ~ Exp(a), mean 1/a
        let e = ConnectionFunction::exponential(1, 2.0).unwrap();
        let m: f64 = (0..n).map(|_| norm(&e.sample_displacement(&mut rng))).sum::<f64>() / n as f64;
        assert!((m - 0.5).abs() < 0.01, "{m}");
        let t = ConnectionFunction::radial_table(1, vec![0.0, 1.0, 2.0], vec![1.0, 1.0, 0.0]).unwrap();
        // E|Y| = (int_0^1 r dr + int_1^2 r(2-r) dr) / 1.5 = (1/2 + 2/3) / 1.5
        let m: f64 = (0..n).map(|_| norm(&t.sample_displacement(&mut rng))).sum::<f64>() / n as f64;
        assert!((m - (0.5 + 2.0 / 3.0) / 1.5).abs() < 0.01, "{m}");
    }
}
