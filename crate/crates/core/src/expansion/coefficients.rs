use std::f64::consts::E;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::combinatorics::{connectivity_coefficients, pi_n, pivotal_free, KappaTable};
use super::graph::{enum_connected_graphs, LabeledGraph};
use super::integrals::{eval_integral, DiscretePhi, IntegralEstimate, Integrand, IntegrationMethod};
use crate::error::{Error, Result};
use crate::oze::{convolve, GridFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientKind {
    P,
    Q,
}

/// `p_n(., 0)` or `q_n(., 0)` on the grid.
#[derive(Debug, Clone)]
pub struct CoefficientGrid {
    pub order: usize,
    pub kind: CoefficientKind,
    pub method: IntegrationMethod,
    pub values: GridFunction,
    /// Pointwise Monte Carlo standard errors; zero for elimination.
    pub std_errors: GridFunction,
    /// For `p`: the `pi`/`I` representation when it was computed.
    pub cross_check: Option<GridFunction>,
    /// Sup-distance to the cross-check for elimination, largest standard
    /// error for Monte Carlo.
    pub error_estimate: f64,
    /// Graphs with a nonzero weight that entered the sum.
    pub graphs_used: usize,
}

/// Both coefficients of one order, sharing the `J` evaluations.
#[derive(Debug, Clone)]
pub struct OrderCoefficients {
    pub p: CoefficientGrid,
    pub q: CoefficientGrid,
    /// `|G_n|`.
    pub graph_count: usize,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `2 (1 + e) (2 m e)^n`, the sup bound on `|p_n(., 0)|`.
pub fn coefficient_bound(n: usize, mass: f64) -> f64 {
    2.0 * (1.0 + E) * (2.0 * mass * E).powi(n as i32)
}

struct WeightedSum {
    values: GridFunction,
    variance: GridFunction,
    used: usize,
}

fn weighted_sum(estimates: &[(f64, &IntegralEstimate)], zero: &GridFunction) -> WeightedSum {
    let mut values = zero.clone();
    let mut variance = zero.clone();
    for (w, e) in estimates {
        for k in 0..values.values().len() {
            values.values_mut()[k] += w * e.values.values()[k];
            variance.values_mut()[k] += (w * e.std_errors.values()[k]).powi(2);
        }
    }
    WeightedSum {
        values,
        variance,
        used: estimates.len(),
    }
}

fn sqrt_grid(g: &GridFunction) -> GridFunction {
    let mut out = g.clone();
    out.values_mut().iter_mut().for_each(|v| *v = v.sqrt());
    out
}

/// Computes `p_n` as `(1/n!) sum kappa_n(H) J_n(H)` and `q_n` as the same sum
/// over pivotal-free graphs. With `cross_check`, `p_n` is also formed as
/// `(1/n!) sum pi_n(G) I_n(G)` (only for `n <= 2`).
pub fn assemble_order(
    n: usize,
    phi: &DiscretePhi,
    method: IntegrationMethod,
    cross_check: bool,
) -> Result<OrderCoefficients> {
    phi.check_order(n)?;
    let graphs = enum_connected_graphs(n)?;
    let kappa = KappaTable::new(n)?;
    let terms: Vec<(LabeledGraph, i64)> = graphs
        .iter()
        .map(|g| (*g, kappa.get(g)))
        .filter(|(_, k)| *k != 0)
        .collect();
    let j: Vec<IntegralEstimate> = terms
        .par_iter()
        .map(|(g, _)| eval_integral(g, Integrand::J, phi, method))
        .collect::<Result<_>>()?;
    let nf = factorial(n);
    let zero = GridFunction::zeros(*phi.geometry());
    let all: Vec<(f64, &IntegralEstimate)> = terms.iter().zip(&j).map(|((_, k), e)| (*k as f64 / nf, e)).collect();
    let free: Vec<(f64, &IntegralEstimate)> = terms
        .iter()
        .zip(&j)
        .filter(|((g, _), _)| pivotal_free(g))
        .map(|((_, k), e)| (*k as f64 / nf, e))
        .collect();
    let p = weighted_sum(&all, &zero);
    let q = weighted_sum(&free, &zero);
    let cross = if cross_check && n <= 2 {
        let pi_terms: Vec<(LabeledGraph, i64)> = graphs.iter().map(|g| (*g, pi_n(g))).filter(|(_, p)| *p != 0).collect();
        let i: Vec<IntegralEstimate> = pi_terms
            .par_iter()
            .map(|(g, _)| eval_integral(g, Integrand::I, phi, method))
            .collect::<Result<_>>()?;
        let w: Vec<(f64, &IntegralEstimate)> = pi_terms.iter().zip(&i).map(|((_, p), e)| (*p as f64 / nf, e)).collect();
        Some(weighted_sum(&w, &zero).values)
    } else {
        None
    };
    let p_err = sqrt_grid(&p.variance);
    let q_err = sqrt_grid(&q.variance);
    let (p_est, q_est) = match method {
        IntegrationMethod::Elimination => (
            cross.as_ref().map_or(Ok(0.0), |c| c.max_abs_diff(&p.values))?,
            0.0,
        ),
        IntegrationMethod::MonteCarlo { .. } => (p_err.sup_norm(), q_err.sup_norm()),
    };
    Ok(OrderCoefficients {
        p: CoefficientGrid {
            order: n,
            kind: CoefficientKind::P,
            method,
            values: p.values,
            std_errors: p_err,
            cross_check: cross,
            error_estimate: p_est,
            graphs_used: p.used,
        },
        q: CoefficientGrid {
            order: n,
            kind: CoefficientKind::Q,
            method,
            values: q.values,
            std_errors: q_err,
            cross_check: None,
            error_estimate: q_est,
            graphs_used: q.used,
        },
        graph_count: graphs.len(),
    })
}

pub fn assemble_p(n: usize, phi: &DiscretePhi, method: IntegrationMethod) -> Result<CoefficientGrid> {
    Ok(assemble_order(n, phi, method, true)?.p)
}

pub fn assemble_q(n: usize, phi: &DiscretePhi, method: IntegrationMethod) -> Result<CoefficientGrid> {
    Ok(assemble_order(n, phi, method, false)?.q)
}

/// Orders `0..=order`, with the `pi`/`I` cross-check where it is feasible.
pub fn assemble_up_to(order: usize, phi: &DiscretePhi, method: IntegrationMethod) -> Result<Vec<OrderCoefficients>> {
    (0..=order).map(|n| assemble_order(n, phi, method, true)).collect()
}

/// Residual of `q_n = p_n - sum_{k<n} q_{n-1-k} * p_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecursionCheck {
    pub order: usize,
    pub residual: f64,
    /// Largest sup-norm among the terms of the recursion.
    pub scale: f64,
    pub relative: f64,
    /// Largest `|residual| / sigma` over cells with a propagated error, for
    /// Monte Carlo coefficients.
    pub max_z: Option<f64>,
}

pub fn recursion_check(coeffs: &[OrderCoefficients], n: usize) -> Result<RecursionCheck> {
    if n >= coeffs.len() {
        return Err(Error::InvalidParameter(format!("order {n} was not assembled")));
    }
    let pn = &coeffs[n].p;
    let qn = &coeffs[n].q;
    let mut residual = qn.values.add_scaled(&pn.values, -1.0)?;
    let mut sigma2 = pn.std_errors.clone();
    sigma2.values_mut().iter_mut().zip(qn.std_errors.values()).for_each(|(a, b)| *a = *a * *a + b * b);
    let mut scale = pn.values.sup_norm().max(qn.values.sup_norm());
    let abs = |g: &GridFunction| {
        let mut out = g.clone();
        out.values_mut().iter_mut().for_each(|v| *v = v.abs());
        out
    };
    for k in 0..n {
        let a = &coeffs[n - 1 - k].q;
        let b = &coeffs[k].p;
        let term = convolve(&a.values, &b.values)?;
        scale = scale.max(term.sup_norm());
        residual.add_scaled_in_place(&term, 1.0)?;
        // conservative error of a product of two noisy factors
        let e = convolve(&a.std_errors, &abs(&b.values))?.add_scaled(&convolve(&abs(&a.values), &b.std_errors)?, 1.0)?;
        sigma2.values_mut().iter_mut().zip(e.values()).for_each(|(s, v)| *s += v * v);
    }
    let r = residual.sup_norm();
    let max_z = if sigma2.values().iter().any(|&s| s > 0.0) {
        Some(
            residual
                .values()
                .iter()
                .zip(sigma2.values())
                .filter(|(_, &s)| s > 0.0)
                .map(|(v, s)| v.abs() / s.sqrt())
                .fold(0.0, f64::max),
        )
    } else {
        None
    };
    Ok(RecursionCheck {
        order: n,
        residual: r,
        scale,
        relative: if scale > 0.0 { r / scale } else { r },
        max_z,
    })
}

/// Truncated power series with a fitted geometric tail bound.
#[derive(Debug, Clone)]
pub struct SeriesResult {
    pub t: f64,
    pub order: usize,
    pub values: GridFunction,
    /// `c1 (c2 t)^(N+1) / (1 - c2 t)`; infinite outside the fitted radius.
    pub tail_bound: f64,
    pub c1: f64,
    pub c2: f64,
    pub warnings: Vec<String>,
}

/// Constants `c1, c2` with `a_n <= c1 c2^n` for every given sup-norm `a_n`:
/// `c2 = max (a_n / a_0)^(1/n)` and `c1 = max a_n c2^-n`.
pub fn fit_geometric(norms: &[f64]) -> Option<(f64, f64)> {
    if norms.len() < 2 || norms[0] <= 0.0 {
        return None;
    }
    let c2 = norms
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, &a)| (a / norms[0]).powf(1.0 / n as f64))
        .fold(0.0, f64::max);
    if c2 <= 0.0 {
        return Some((norms[0], 0.0));
    }
    let c1 = norms
        .iter()
        .enumerate()
        .map(|(n, &a)| a / c2.powi(n as i32))
        .fold(0.0, f64::max);
    Some((c1, c2))
}

/// `sum_{n <= N} t^n c_n` with the tail bound fitted from the coefficient
/// sup-norms. A single coefficient falls back to the constants of the
/// a-priori bound [`coefficient_bound`].
pub fn series(t: f64, coeffs: &[&GridFunction], mass: f64) -> Result<SeriesResult> {
    if coeffs.is_empty() {
        return Err(Error::InvalidParameter("series needs at least one coefficient".into()));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("intensity must be finite and non-negative, got {t}")));
    }
    let mut values = coeffs[0].clone();
    for (n, c) in coeffs.iter().enumerate().skip(1) {
        values.add_scaled_in_place(c, t.powi(n as i32))?;
    }
    let norms: Vec<f64> = coeffs.iter().map(|c| c.sup_norm()).collect();
    let (c1, c2) = fit_geometric(&norms).unwrap_or((2.0 * (1.0 + E), 2.0 * mass * E));
    let order = coeffs.len() - 1;
    let mut warnings = Vec::new();
    let tail_bound = if c2 * t < 1.0 {
        c1 * (c2 * t).powi(order as i32 + 1) / (1.0 - c2 * t)
    } else {
        warnings.push(format!(
            "t = {t} is outside the fitted radius of convergence {:.4}; tail bound unavailable",
            1.0 / c2
        ));
        f64::INFINITY
    };
    Ok(SeriesResult {
        t,
        order,
        values,
        tail_bound,
        c1,
        c2,
        warnings,
    })
}

/// `sum_{n <= N} t^n p_n(., 0)`.
pub fn series_p(t: f64, coeffs: &[OrderCoefficients], mass: f64) -> Result<SeriesResult> {
    let c: Vec<&GridFunction> = coeffs.iter().map(|c| &c.p.values).collect();
    series(t, &c, mass)
}

/// `sum_{n <= N} t^n q_n(., 0)`.
pub fn series_q(t: f64, coeffs: &[OrderCoefficients], mass: f64) -> Result<SeriesResult> {
    let c: Vec<&GridFunction> = coeffs.iter().map(|c| &c.q.values).collect();
    series(t, &c, mass)
}

/// Integrated connection probabilities against their factorial bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub order: usize,
    /// `int int P(Gamma(0, x_1..x_n, x) connected)`.
    pub pinned_value: f64,
    /// `n! m^n e^(n+2)`.
    pub pinned_bound: f64,
    /// `int P(Gamma(0, x_1..x_n) connected)`.
    pub free_value: f64,
    /// `n! m^n e^(n+1)`.
    pub free_bound: f64,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.pinned_value <= self.pinned_bound && self.free_value <= self.free_bound
    }
}

/// `int int P(Gamma(0, x_1..x_k, x) connected)` summed over the grid.
fn connected_integral(k: usize, phi: &DiscretePhi) -> Result<f64> {
    let graphs = enum_connected_graphs(k)?;
    let method = IntegrationMethod::Elimination;
    if k <= 2 {
        let parts: Vec<f64> = graphs
            .par_iter()
            .map(|g| eval_integral(g, Integrand::I, phi, method).map(|e| e.values.integral()))
            .collect::<Result<_>>()?;
        Ok(parts.iter().sum())
    } else {
        // I is out of reach for elimination here; use the J expansion of the
        // connectivity indicator instead
        let c = connectivity_coefficients(k)?;
        let terms: Vec<(LabeledGraph, i64)> =
            graphs.iter().map(|g| (*g, c[g.mask() as usize])).filter(|(_, w)| *w != 0).collect();
        let parts: Vec<f64> = terms
            .par_iter()
            .map(|(g, w)| eval_integral(g, Integrand::J, phi, method).map(|e| *w as f64 * e.values.integral()))
            .collect::<Result<_>>()?;
        Ok(parts.iter().sum())
    }
}

/// Checks both integral inequalities at order `n <= 3` using the discrete
/// mass of `phi`.
pub fn bound_check_integral(n: usize, phi: &DiscretePhi) -> Result<BoundReport> {
    if n > 3 {
        return Err(Error::OrderTooLarge { n, max: 3 });
    }
    phi.check_order(n)?;
    let m = phi.mass();
    let nf = factorial(n);
    let pinned_value = connected_integral(n, phi)?;
    // without the pinned end the last free vertex plays its role
    let free_value = if n == 0 { 1.0 } else { connected_integral(n - 1, phi)? };
    Ok(BoundReport {
        order: n,
        pinned_value,
        pinned_bound: nf * m.powi(n as i32) * E.powi(n as i32 + 2),
        free_value,
        free_bound: nf * m.powi(n as i32) * E.powi(n as i32 + 1),
    })
}
