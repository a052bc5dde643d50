use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::stats::{batch_means, Estimate, BATCHES};
use super::table::{EstimateRow, EstimateTable, InputDescriptor, RunMetadata};
use crate::error::{Error, Result};
use crate::model::{sample_rcm, Boundary, BoxGeometry, ConnectionFunction, PhiKind, RcmSample};
use crate::quad::{integrate_checked, QuadOptions};
use crate::rng::RngSpec;

// Task ids keep the estimators on disjoint random streams.
const TASK_SIZE_DIST: u64 = 1 << 20;
const TASK_MEAN_SIZE: u64 = 2 << 20;
const TASK_DENSITY: u64 = 3 << 20;
const TASK_INVERSE_SIZE: u64 = 4 << 20;

/// Boundary-touch fraction above which a mean-size run carries a warning.
pub const BOUNDARY_WARNING_FRACTION: f64 = 0.01;

fn metadata(estimator: &str, t: f64, phi: &ConnectionFunction, geometry: &BoxGeometry, seed: u64, replicates: u64, started: Instant) -> RunMetadata {
    RunMetadata {
        estimator: estimator.into(),
        t,
        connection: phi.clone(),
        geometry: *geometry,
        seed,
        replicates,
        wall_time_s: started.elapsed().as_secs_f64(),
        warnings: vec![],
    }
}

fn validate(t: f64, phi: &ConnectionFunction, geometry: &BoxGeometry) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("intensity must be finite and non-negative, got {t}")));
    }
    geometry.check_compatible(phi)
}

fn origin_sample(t: f64, phi: &ConnectionFunction, geometry: &BoxGeometry, rng: RngSpec) -> RcmSample {
    sample_rcm(t, phi, geometry, &[vec![0.0; geometry.dimension]], rng).expect("validated sample parameters")
}

/// Empirical pmf of `|C(0)|` for sizes `1..=max_size` plus an overflow row.
pub fn estimate_cluster_size_dist(
    t: f64,
    phi: &ConnectionFunction,
    geometry: &BoxGeometry,
    max_size: usize,
    replicates: u64,
    seed: u64,
) -> Result<EstimateTable> {
    let started = Instant::now();
    validate(t, phi, geometry)?;
    if max_size == 0 {
        return Err(Error::InvalidParameter("max_size must be at least 1".into()));
    }
    let counts = (0..replicates)
        .into_par_iter()
        .fold(
            || vec![0u64; max_size + 1],
            |mut acc, r| {
                let s = origin_sample(t, phi, geometry, RngSpec::task_stream(seed, TASK_SIZE_DIST, r));
                let size = s.cluster_of(0).len();
                acc[size.min(max_size + 1) - 1] += 1;
                acc
            },
        )
        .reduce(
            || vec![0u64; max_size + 1],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let mut rows: Vec<EstimateRow> = (0..max_size)
        .map(|k| EstimateRow::new(InputDescriptor::Size(k + 1), Estimate::binomial(counts[k], replicates)))
        .collect();
    rows.push(EstimateRow::new(InputDescriptor::Overflow, Estimate::binomial(counts[max_size], replicates)));
    Ok(EstimateTable {
        rows,
        metadata: metadata("cluster-size-distribution", t, phi, geometry, seed, replicates, started),
    })
}

/// `P(|C(0)| = n + 1)` by deterministic quadrature, for d = 1, compactly
/// supported phi and `n <= 2`.
pub fn cluster_size_exact_small(t: f64, phi: &ConnectionFunction, n: usize) -> Result<f64> {
    if phi.dimension() != 1 {
        return Err(Error::InvalidParameter("exact cluster-size quadrature is implemented for d = 1 only".into()));
    }
    if matches!(phi.kind(), PhiKind::Exponential { .. }) {
        return Err(Error::InvalidParameter("exact cluster-size quadrature needs a compactly supported phi".into()));
    }
    if n > 2 {
        return Err(Error::OrderTooLarge { n, max: 2 });
    }
    if n == 0 {
        return Ok((-t * phi.mass()).exp());
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let r = phi.truncation_radius();
    // radii where phi is not smooth, mirrored; all kinks of the integrands
    // are sums of two of these
    let mut base: Vec<f64> = vec![0.0];
    for b in phi.radial_breakpoints() {
        base.push(b);
        base.push(-b);
    }
    let mut sums: Vec<f64> = Vec::new();
    for a in &base {
        for b in &base {
            sums.push(a + b);
        }
    }
    let inner = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-10,
        max_depth: 40,
    };
    let outer = QuadOptions {
        abs_tol: 1e-13,
        rel_tol: 1e-8,
        max_depth: 40,
    };
    // int (1 - prod_i (1 - phi(y - x_i))) dy
    let union_measure = |xs: &[f64]| -> Result<f64> {
        let mut pts = Vec::new();
        for &x in xs {
            for &b in &base {
                pts.push(x + b);
            }
        }
        let v = integrate_checked(
            |y| 1.0 - xs.iter().map(|&x| 1.0 - phi.eval_radial(y - x)).product::<f64>(),
            &pts,
            &inner,
        )?;
        Ok(v.value)
    };
    let mut failure: Option<Error> = None;
    let value = match n {
        1 => {
            let pts: Vec<f64> = base.iter().map(|b| b.clamp(-r, r)).collect();
            integrate_checked(
                |x1| {
                    let a = phi.eval_radial(x1);
                    if a == 0.0 {
                        return 0.0;
                    }
                    match union_measure(&[0.0, x1]) {
                        Ok(u) => a * (-t * u).exp(),
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    }
                },
                &pts,
                &outer,
            )?
            .value
                * t
        }
        _ => {
            let outer_pts: Vec<f64> = sums.iter().copied().filter(|s| s.abs() <= 2.0 * r).collect();
            let v = integrate_checked(
                |x1| {
                    let mut pts: Vec<f64> = Vec::new();
                    for &s in &sums {
                        for c in [s, x1 + s] {
                            if c.abs() <= 2.0 * r {
                                pts.push(c);
                            }
                        }
                    }
                    let a = phi.eval_radial(x1);
                    let inner_v = integrate_checked(
                        |x2| {
                            let b = phi.eval_radial(x2);
                            let c = phi.eval_radial(x1 - x2);
                            let connected = a * b + a * c + b * c - 2.0 * a * b * c;
                            if connected == 0.0 {
                                return 0.0;
                            }
                            match union_measure(&[0.0, x1, x2]) {
                                Ok(u) => connected * (-t * u).exp(),
                                Err(e) => {
                                    failure.get_or_insert(e);
                                    0.0
                                }
                            }
                        },
                        &pts,
                        &inner,
                    );
                    match inner_v {
                        Ok(v) => v.value,
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    }
                },
                &outer_pts,
                &outer,
            )?;
            v.value * t * t / 2.0
        }
    };
    match failure {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// Output of [`estimate_mean_cluster_size`].
#[derive(Debug, Clone, Serialize)]
pub struct MeanClusterEstimate {
    /// Sample mean of `|C(0)|` with a batch-means error.
    pub mean: Estimate,
    /// Share of replicates whose origin cluster came within one truncation
    /// radius of the box faces.
    pub boundary_touch_fraction: f64,
    pub warnings: Vec<String>,
}

fn subcritical_guard(t: f64, phi: &ConnectionFunction, bound: Option<f64>) -> Result<()> {
    let bound = bound.unwrap_or(1.0 / phi.mass());
    if t >= bound {
        return Err(Error::NotSubcritical { t, bound });
    }
    Ok(())
}

fn touches_boundary(s: &RcmSample, cluster: &[usize], reach: f64) -> bool {
    cluster.iter().any(|&i| s.geometry().distance_to_boundary(s.point(i)) <= reach)
}

/// Mean size of the origin's cluster.
///
/// `subcritical_bound` defaults to `1 / m_phi`; at or above it the call fails.
pub fn estimate_mean_cluster_size(
    t: f64,
    phi: &ConnectionFunction,
    geometry: &BoxGeometry,
    replicates: u64,
    seed: u64,
    subcritical_bound: Option<f64>,
) -> Result<MeanClusterEstimate> {
    validate(t, phi, geometry)?;
    subcritical_guard(t, phi, subcritical_bound)?;
    let reach = phi.truncation_radius();
    let per: Vec<(f64, bool)> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let s = origin_sample(t, phi, geometry, RngSpec::task_stream(seed, TASK_MEAN_SIZE, r));
            let c = s.cluster_of(0);
            (c.len() as f64, touches_boundary(&s, &c, reach))
        })
        .collect();
    let sizes: Vec<f64> = per.iter().map(|p| p.0).collect();
    let touched = per.iter().filter(|p| p.1).count();
    let fraction = if replicates == 0 { 0.0 } else { touched as f64 / replicates as f64 };
    let mut warnings = Vec::new();
    if fraction > BOUNDARY_WARNING_FRACTION {
        warnings.push(format!(
            "{:.2}% of origin clusters reached the box boundary; finite-volume bias likely",
            100.0 * fraction
        ));
    }
    Ok(MeanClusterEstimate {
        mean: batch_means(&sizes, BATCHES),
        boundary_touch_fraction: fraction,
        warnings,
    })
}

/// Output of [`estimate_cluster_density`].
#[derive(Debug, Clone, Serialize)]
pub struct ClusterDensity {
    /// Clusters per unit volume in unpinned samples.
    pub density: Estimate,
    /// `t * E[1 / |C(0)|]` from samples pinned at the origin.
    pub per_vertex: Estimate,
}

/// Number of clusters per unit volume, alongside `t * E[1/|C(0)|]`.
///
/// In a free box only clusters staying one truncation radius away from the
/// faces are counted.
pub fn estimate_cluster_density(
    t: f64,
    phi: &ConnectionFunction,
    geometry: &BoxGeometry,
    replicates: u64,
    seed: u64,
    subcritical_bound: Option<f64>,
) -> Result<ClusterDensity> {
    validate(t, phi, geometry)?;
    subcritical_guard(t, phi, subcritical_bound)?;
    let volume = geometry.volume();
    let reach = phi.truncation_radius();
    let counts: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let s = sample_rcm(t, phi, geometry, &[], RngSpec::task_stream(seed, TASK_DENSITY, r))
                .expect("validated sample parameters");
            let (labels, count) = s.components();
            if geometry.boundary == Boundary::Periodic {
                return count as f64 / volume;
            }
            let mut bad = vec![false; s.len()];
            for i in 0..s.len() {
                if geometry.distance_to_boundary(s.point(i)) <= reach {
                    bad[labels[i]] = true;
                }
            }
            (0..s.len()).filter(|&i| labels[i] == i && !bad[i]).count() as f64 / volume
        })
        .collect();
    let inverse: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let s = origin_sample(t, phi, geometry, RngSpec::task_stream(seed, TASK_INVERSE_SIZE, r));
            t / s.cluster_of(0).len() as f64
        })
        .collect();
    Ok(ClusterDensity {
        density: batch_means(&counts, BATCHES),
        per_vertex: batch_means(&inverse, BATCHES),
    })
}
