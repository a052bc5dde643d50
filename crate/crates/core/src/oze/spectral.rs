use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use super::grid::{GridFunction, GridGeometry};
use crate::error::Result;

/// Discrete approximation of the continuous Fourier transform:
/// `h^d * DFT(values)`.
#[derive(Debug, Clone)]
pub struct SpectralFunction {
    geometry: GridGeometry,
    coeffs: Vec<Complex64>,
}

fn plans(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut planner = FftPlanner::new();
    (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
}

/// In-place multi-dimensional FFT, one axis at a time (unnormalised).
fn fft_nd(data: &mut [Complex64], geometry: &GridGeometry, plan: &Arc<dyn Fft<f64>>) {
    let n = geometry.cells;
    let d = geometry.dimension;
    if d == 1 {
        plan.process(data);
        return;
    }
    let total = data.len();
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        let block = stride * n;
        for base in (0..total).step_by(block) {
            for off in 0..stride {
                let start = base + off;
                for k in 0..n {
                    line[k] = data[start + k * stride];
                }
                plan.process(&mut line);
                for k in 0..n {
                    data[start + k * stride] = line[k];
                }
            }
        }
    }
}

impl SpectralFunction {
    pub fn forward(f: &GridFunction) -> Self {
        let geometry = *f.geometry();
        let (fwd, _) = plans(geometry.cells);
        let mut coeffs: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_nd(&mut coeffs, &geometry, &fwd);
        let scale = geometry.cell_volume();
        for c in &mut coeffs {
            *c *= scale;
        }
        Self { geometry, coeffs }
    }

    /// Real part of the inverse transform; the imaginary residue is returned
    /// alongside as a sanity measure.
    pub fn inverse(&self) -> (GridFunction, f64) {
        let (_, inv) = plans(self.geometry.cells);
        let mut data = self.coeffs.clone();
        fft_nd(&mut data, &self.geometry, &inv);
        let scale = 1.0 / (self.geometry.len() as f64 * self.geometry.cell_volume());
        let mut imag = 0.0f64;
        let values = data
            .iter()
            .map(|c| {
                imag = imag.max((c.im * scale).abs());
                c.re * scale
            })
            .collect();
        let g = GridFunction::from_values(self.geometry, values).expect("finite transform");
        (g, imag)
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Largest imaginary part relative to the largest modulus.
    pub fn relative_imaginary(&self) -> f64 {
        let m = self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if m == 0.0 {
            return 0.0;
        }
        self.coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max) / m
    }
}

/// Periodic convolution `h^d * sum_y f(x - y) g(y)`, computed spectrally.
pub fn convolve(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    f.check_same_geometry(g)?;
    let mut a = SpectralFunction::forward(f);
    let b = SpectralFunction::forward(g);
    for (x, y) in a.coeffs.iter_mut().zip(&b.coeffs) {
        *x *= y;
    }
    Ok(a.inverse().0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ConnectionFunction;
    use crate::oze::grid::{grid_from_radial, Sampling};
    use proptest::prelude::*;

    fn direct_convolution(f: &GridFunction, g: &GridFunction) -> GridFunction {
        let geo = *f.geometry();
        let mut out = GridFunction::zeros(geo);
        for x in 0..geo.len() {
            let ox = geo.offsets(x);
            let mut s = 0.0;
            for y in 0..geo.len() {
                let oy = geo.offsets(y);
                let diff: Vec<isize> = ox.iter().zip(&oy).map(|(a, b)| a - b).collect();
                s += f.at_offsets(&diff) * g.values()[y];
            }
            out.values_mut()[x] = s * geo.cell_volume();
        }
        out
    }

    #[test]
    fn delta_is_identity() {
        for d in [1, 2] {
            let geo = GridGeometry::new(d, 16, 0.2).unwrap();
            let f = GridFunction::from_fn(geo, |x| (x.iter().sum::<f64>() * 1.3).cos() + 0.1 * x[0]);
            let c = convolve(&f, &GridFunction::delta(geo)).unwrap();
            assert!(c.max_abs_diff(&f).unwrap() < 1e-10);
        }
    }

    #[test]
    fn gilbert_self_convolution_is_triangle() {
        let geo = GridGeometry::new(1, 512, 1.0 / 32.0).unwrap();
        let phi = ConnectionFunction::gilbert(1, 1.0).unwrap();
        let f = grid_from_radial(&phi, geo, Sampling::CellCenter).unwrap();
        let c = convolve(&f, &f).unwrap();
        assert!((c.values()[0] - 2.0).abs() <= geo.spacing + 1e-12);
        for i in 0..geo.len() {
            let x = geo.coordinates(i)[0];
            let overlap = (2.0 - x.abs()).max(0.0);
            assert!((c.values()[i] - overlap).abs() <= 2.0 * geo.spacing, "x={x}");
        }
    }

    #[test]
    fn matches_direct_sum_in_2d() {
        let geo = GridGeometry::new(2, 8, 0.5).unwrap();
        let f = GridFunction::from_fn(geo, |x| (-(x[0] * x[0] + 2.0 * x[1] * x[1])).exp());
        let g = GridFunction::from_fn(geo, |x| if x[0].abs() < 1.1 { 1.0 + x[1] } else { 0.0 });
        let a = convolve(&f, &g).unwrap();
        let b = direct_convolution(&f, &g);
        assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
    }

    #[test]
    fn geometry_mismatch() {
        let a = GridFunction::zeros(GridGeometry::new(1, 8, 0.5).unwrap());
        let b = GridFunction::zeros(GridGeometry::new(1, 8, 0.25).unwrap());
        assert!(convolve(&a, &b).is_err());
    }

    #[test]
    fn even_input_has_real_spectrum() {
        let geo = GridGeometry::new(1, 64, 0.1).unwrap();
        let f = GridFunction::from_fn(geo, |x| (-x[0].abs()).exp());
        assert!(SpectralFunction::forward(&f).relative_imaginary() < 1e-10);
    }

    proptest! {
        #[test]
        fn young_sup_bound(vals in proptest::collection::vec(-1.0f64..1.0, 64), wals in proptest::collection::vec(-1.0f64..1.0, 64)) {
            let geo = GridGeometry::new(1, 64, 0.37).unwrap();
            let f = GridFunction::from_values(geo, vals).unwrap();
            let g = GridFunction::from_values(geo, wals).unwrap();
            let c = convolve(&f, &g).unwrap();
            prop_assert!(c.sup_norm() <= f.l1_norm() * g.sup_norm() * (1.0 + 1e-12) + 1e-12);
            prop_assert!(c.l1_norm() <= f.l1_norm() * g.l1_norm() * (1.0 + 1e-12) + 1e-12);
        }
    }
}
