use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::Estimate;
use super::table::{EstimateRow, EstimateTable, InputDescriptor, RunMetadata};
use crate::error::{Error, Result};
use crate::model::{ball_volume, sample_rcm, BoxGeometry, ConnectionFunction};
use crate::oze::RadialFunction;
use crate::rng::RngSpec;

/// Estimates `P_t(x)`: the chance that pins at 0 and `x` share a cluster.
///
/// Displacement `k` uses streams `task_stream(seed, k, r)`, so adding probes
/// does not change the estimates at existing ones.
pub fn estimate_pairconn(
    t: f64,
    phi: &ConnectionFunction,
    geometry: &BoxGeometry,
    displacements: &[Vec<f64>],
    replicates: u64,
    seed: u64,
) -> Result<EstimateTable> {
    let started = Instant::now();
    geometry.check_compatible(phi)?;
    let d = geometry.dimension;
    for x in displacements {
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
    }
    let origin = vec![0.0; d];
    let rows = displacements
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let pins = [origin.clone(), x.clone()];
            // fail early on a bad pin before fanning out
            sample_rcm(0.0, phi, geometry, &pins, RngSpec::task_stream(seed, k as u64, 0))?;
            let hits: u64 = (0..replicates)
                .into_par_iter()
                .map(|r| {
                    let s = sample_rcm(t, phi, geometry, &pins, RngSpec::task_stream(seed, k as u64, r))
                        .expect("validated sample parameters");
                    u64::from(s.connected(0, 1))
                })
                .sum();
            Ok(EstimateRow::new(
                InputDescriptor::Displacement(x.clone()),
                Estimate::binomial(hits, replicates),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateTable {
        rows,
        metadata: RunMetadata {
            estimator: "pair-connectedness".into(),
            t,
            connection: phi.clone(),
            geometry: *geometry,
            seed,
            replicates,
            wall_time_s: started.elapsed().as_secs_f64(),
            warnings: vec![],
        },
    })
}

/// Piecewise-constant radial function on bins `[edges[k], edges[k+1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub dimension: usize,
    pub edges: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub counts: Vec<u64>,
}

impl RadialProfile {
    pub fn new(dimension: usize, edges: Vec<f64>, values: Vec<f64>, std_errors: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if edges.len() != values.len() + 1 || values.len() != std_errors.len() || values.len() != counts.len() {
            return Err(Error::InvalidParameter("radial profile needs one more edge than values".into()));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) || edges[0] < 0.0 {
            return Err(Error::InvalidParameter("radial profile edges must increase from a non-negative start".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("radial profile values must be finite".into()));
        }
        Ok(Self {
            dimension,
            edges,
            values,
            std_errors,
            counts,
        })
    }

    /// Rebuilds bins from pair-connectedness rows whose probes sit at bin
    /// centres: edges fall halfway between consecutive probe radii.
    pub fn from_rows(dimension: usize, rows: &[EstimateRow]) -> Result<Self> {
        let mut pts: Vec<(f64, &EstimateRow)> = rows
            .iter()
            .filter_map(|r| match &r.input {
                InputDescriptor::Displacement(x) => Some((crate::model::norm(x), r)),
                _ => None,
            })
            .collect();
        if pts.is_empty() {
            return Err(Error::Parse("no displacement rows to build a radial profile from".into()));
        }
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut edges = vec![0.0];
        for w in pts.windows(2) {
            edges.push(0.5 * (w[0].0 + w[1].0));
        }
        let last = pts[pts.len() - 1].0;
        let prev = edges[edges.len() - 1];
        edges.push(last + (last - prev));
        Self::new(
            dimension,
            edges,
            pts.iter().map(|p| p.1.estimate).collect(),
            pts.iter().map(|p| p.1.std_error).collect(),
            pts.iter().map(|p| p.1.replicates).collect(),
        )
    }

    fn shell_volume(&self, k: usize) -> f64 {
        ball_volume(self.dimension, self.edges[k + 1]) - ball_volume(self.dimension, self.edges[k])
    }

    /// `int P` over R^d: bin values times spherical shell volumes.
    pub fn integral(&self) -> Estimate {
        let mut value = 0.0;
        let mut var = 0.0;
        for k in 0..self.values.len() {
            let w = self.shell_volume(k);
            value += w * self.values[k];
            var += (w * self.std_errors[k]).powi(2);
        }
        Estimate {
            value,
            std_error: var.sqrt(),
            replicates: self.counts.iter().copied().min().unwrap_or(0),
        }
    }
}

impl RadialFunction for RadialProfile {
    fn radial_value(&self, r: f64) -> f64 {
        if r < self.edges[0] || r >= self.edges[self.edges.len() - 1] {
            return 0.0;
        }
        let k = self.edges.partition_point(|&e| e <= r) - 1;
        self.values[k]
    }

    fn support_radius(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    fn radial_breakpoints(&self) -> Vec<f64> {
        self.edges.clone()
    }
}

/// Probe displacements at the centres of bins of width `bin_width` covering
/// `[0, r_max)`, along the first axis.
pub fn radial_probes(dimension: usize, bin_width: f64, r_max: f64) -> Vec<Vec<f64>> {
    let bins = (r_max / bin_width).round().max(1.0) as usize;
    (0..bins)
        .map(|k| {
            let mut x = vec![0.0; dimension];
            x[0] = (k as f64 + 0.5) * bin_width;
            x
        })
        .collect()
}

/// Pair-connectedness on radial bins, ready for integration or gridding.
pub fn estimate_radial_profile(
    t: f64,
    phi: &ConnectionFunction,
    geometry: &BoxGeometry,
    bin_width: f64,
    r_max: f64,
    replicates: u64,
    seed: u64,
) -> Result<(RadialProfile, EstimateTable)> {
    if !(bin_width > 0.0 && r_max > bin_width) {
        return Err(Error::InvalidParameter(format!("need 0 < bin width < r_max, got {bin_width}, {r_max}")));
    }
    let probes = radial_probes(geometry.dimension, bin_width, r_max);
    let table = estimate_pairconn(t, phi, geometry, &probes, replicates, seed)?;
    let profile = RadialProfile::from_rows(geometry.dimension, &table.rows)?;
    Ok((profile, table))
}
