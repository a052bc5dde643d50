use num_complex::Complex64;
use serde::Serialize;

use super::grid::GridFunction;
use super::spectral::{convolve, SpectralFunction};
use crate::error::{Error, Result};

/// Smallest admissible value of `1 + t * P^(w)`; spectral division is refused
/// below it.
pub const SPECTRAL_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct OzeSolution {
    pub q: GridFunction,
    /// `min_w Re(1 + t * P^(w))` over all grid frequencies.
    pub min_denominator: f64,
}

/// Solves `P = Q + t Q * P` by dividing `P^ / (1 + t P^)` frequency by frequency.
pub fn solve_oze_fourier(p: &GridFunction, t: f64) -> Result<OzeSolution> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("intensity must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok(OzeSolution {
            q: p.clone(),
            min_denominator: 1.0,
        });
    }
    let mut spec = SpectralFunction::forward(p);
    let geometry = *spec.geometry();
    let mut min_den = f64::INFINITY;
    let mut worst = 0usize;
    for (i, c) in spec.coeffs().iter().enumerate() {
        let den = 1.0 + t * c.re;
        if den < min_den {
            min_den = den;
            worst = i;
        }
    }
    if !(min_den > SPECTRAL_FLOOR) {
        return Err(Error::SpectralFloor {
            value: min_den,
            index: geometry.unflatten(worst),
        });
    }
    for c in spec.coeffs_mut() {
        *c /= Complex64::new(1.0, 0.0) + t * *c;
    }
    Ok(OzeSolution {
        q: spec.inverse().0,
        min_denominator: min_den,
    })
}

/// `sup |P - Q - t Q * P|`.
pub fn oze_residual(p: &GridFunction, q: &GridFunction, t: f64) -> Result<f64> {
    let qp = convolve(q, p)?;
    let rhs = q.add_scaled(&qp, t)?;
    p.max_abs_diff(&rhs)
}

#[derive(Debug, Clone)]
pub struct NeumannSolution {
    pub q: GridFunction,
    pub terms: usize,
    /// Sup norm of the first omitted term.
    pub last_term: f64,
}

/// `Q = sum_n (-t)^n P^{*(n+1)}`, summed until a term drops below `tol` in sup norm.
pub fn solve_oze_neumann(p: &GridFunction, t: f64, max_terms: usize, tol: f64) -> Result<NeumannSolution> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("intensity must be non-negative, got {t}")));
    }
    let contraction = t * p.l1_norm();
    if contraction >= 1.0 {
        return Err(Error::NeumannPrecondition(contraction));
    }
    if t == 0.0 {
        return Ok(NeumannSolution {
            q: p.clone(),
            terms: 1,
            last_term: 0.0,
        });
    }
    let mut sum = p.clone();
    let mut term = p.clone();
    let mut terms = 1;
    loop {
        term = convolve(&term, p)?.scaled(-t);
        let size = term.sup_norm();
        if size < tol {
            return Ok(NeumannSolution {
                q: sum,
                terms,
                last_term: size,
            });
        }
        if terms >= max_terms {
            return Err(Error::NeumannDivergence { terms, last: size });
        }
        sum.add_scaled_in_place(&term, 1.0)?;
        terms += 1;
    }
}

/// Bound on `sup |Q - P|` from geometric summation of the Young inequalities.
pub fn one_term_truncation_bound(p: &GridFunction, t: f64) -> f64 {
    let a = t * p.l1_norm();
    a * p.sup_norm() / (1.0 - a)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeanClusterFromQ {
    pub integral_q: f64,
    pub mean_size: f64,
}

/// `(1 - t * int Q)^-1`, after checking `0 <= int Q < 1/t`.
pub fn mean_cluster_from_q(q: &GridFunction, t: f64) -> Result<MeanClusterFromQ> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("intensity must be non-negative, got {t}")));
    }
    let integral = q.integral();
    if integral < 0.0 || (t > 0.0 && t * integral >= 1.0) {
        return Err(Error::QIntegralOutOfRange { integral, t });
    }
    Ok(MeanClusterFromQ {
        integral_q: integral,
        mean_size: 1.0 / (1.0 - t * integral),
    })
}
