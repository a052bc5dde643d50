use std::collections::VecDeque;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BoxGeometry, ConnectionFunction};
use crate::model::geometry::Boundary;
use crate::rng::{pair_uniform, RngSpec};

/// How candidate pairs within the truncation radius are found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairSearch {
    #[default]
    CellList,
    /// O(k^2) scan, kept as an oracle for the cell list.
    BruteForce,
}

/// One realisation of the random connection model in a finite box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RcmSample {
    dimension: usize,
    /// Flat coordinates, `dimension` per point. Pinned points come first.
    points: Vec<f64>,
    pinned_count: usize,
    /// Sorted `(i, j)` with `i < j`.
    edges: Vec<(u32, u32)>,
    #[serde(skip)]
    offsets: Vec<usize>,
    #[serde(skip)]
    neighbours: Vec<u32>,
    geometry: BoxGeometry,
    rng: RngSpec,
}

/// Samples a Poisson(t) process in `geometry`, prepends `pins` and connects every
/// pair independently with probability phi of its displacement.
pub fn sample_rcm(
    t: f64,
    phi: &ConnectionFunction,
    geometry: &BoxGeometry,
    pins: &[Vec<f64>],
    rng: RngSpec,
) -> Result<RcmSample> {
    sample_rcm_with(t, phi, geometry, pins, rng, PairSearch::CellList)
}

pub fn sample_rcm_with(
    t: f64,
    phi: &ConnectionFunction,
    geometry: &BoxGeometry,
    pins: &[Vec<f64>],
    rng: RngSpec,
    search: PairSearch,
) -> Result<RcmSample> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!("intensity must be finite and non-negative, got {t}")));
    }
    geometry.check_compatible(phi)?;
    let d = geometry.dimension;
    for (index, p) in pins.iter().enumerate() {
        if p.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: p.len() });
        }
        if !geometry.contains(p) {
            return Err(Error::PinOutsideBox {
                index,
                position: p.clone(),
                half: geometry.half(),
            });
        }
    }

    let mut gen = rng.rng();
    let lambda = t * geometry.volume();
    let count = if lambda > 0.0 {
        Poisson::new(lambda)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .sample(&mut gen) as usize
    } else {
        0
    };
    let mut points = Vec::with_capacity((pins.len() + count) * d);
    for p in pins {
        points.extend_from_slice(p);
    }
    let half = geometry.half();
    for _ in 0..count * d {
        points.push(gen.random::<f64>() * geometry.side_length - half);
    }

    let key = rng.edge_key();
    let mut edges = Vec::new();
    let mut accept = |i: usize, j: usize, r: f64| {
        let p = phi.eval_radial(r);
        if p > 0.0 && pair_uniform(key, i, j) < p {
            edges.push((i as u32, j as u32));
        }
    };
    let r_max = phi.truncation_radius();
    match search {
        PairSearch::BruteForce => brute_force_pairs(&points, geometry, r_max, &mut accept),
        PairSearch::CellList => cell_list_pairs(&points, geometry, r_max, &mut accept),
    }
    edges.sort_unstable();
    Ok(RcmSample::from_parts(d, points, pins.len(), edges, *geometry, rng))
}

fn brute_force_pairs<F: FnMut(usize, usize, f64)>(points: &[f64], geometry: &BoxGeometry, r_max: f64, f: &mut F) {
    let d = geometry.dimension;
    let k = points.len() / d;
    for i in 0..k {
        for j in i + 1..k {
            let r = geometry.distance(&points[i * d..(i + 1) * d], &points[j * d..(j + 1) * d]);
            if r <= r_max {
                f(i, j, r);
            }
        }
    }
}

fn cell_list_pairs<F: FnMut(usize, usize, f64)>(points: &[f64], geometry: &BoxGeometry, r_max: f64, f: &mut F) {
    let d = geometry.dimension;
    let k = points.len() / d;
    let l = geometry.side_length;
    let mut m = (l / r_max).floor() as usize;
    // keep the table comparable to the number of points
    let cap = ((4 * k).max(64) as f64).powf(1.0 / d as f64).floor() as usize;
    m = m.min(cap.max(1));
    let periodic = geometry.boundary == Boundary::Periodic;
    if m < 3 || k < 16 {
        brute_force_pairs(points, geometry, r_max, f);
        return;
    }
    let cell = l / m as f64;
    let half = geometry.half();
    let cell_of = |p: &[f64]| -> usize {
        let mut idx = 0usize;
        for &c in p {
            let a = (((c + half) / cell).floor() as isize).clamp(0, m as isize - 1) as usize;
            idx = idx * m + a;
        }
        idx
    };
    let n_cells = m.pow(d as u32);
    let mut start = vec![0usize; n_cells + 1];
    let owner: Vec<usize> = (0..k).map(|i| cell_of(&points[i * d..(i + 1) * d])).collect();
    for &c in &owner {
        start[c + 1] += 1;
    }
    for c in 0..n_cells {
        start[c + 1] += start[c];
    }
    let mut fill = start.clone();
    let mut order = vec![0usize; k];
    for (i, &c) in owner.iter().enumerate() {
        order[fill[c]] = i;
        fill[c] += 1;
    }

    let n_off = 3usize.pow(d as u32);
    let mut coord = vec![0isize; d];
    let mut nb = vec![0isize; d];
    for c in 0..n_cells {
        if start[c] == start[c + 1] {
            continue;
        }
        let mut rest = c;
        for a in (0..d).rev() {
            coord[a] = (rest % m) as isize;
            rest /= m;
        }
        'offsets: for o in 0..n_off {
            let mut code = o;
            for a in 0..d {
                let delta = (code % 3) as isize - 1;
                code /= 3;
                let mut v = coord[a] + delta;
                if periodic {
                    v = v.rem_euclid(m as isize);
                } else if v < 0 || v >= m as isize {
                    continue 'offsets;
                }
                nb[a] = v;
            }
            let nc = nb.iter().fold(0usize, |acc, &v| acc * m + v as usize);
            for &i in &order[start[c]..start[c + 1]] {
                for &j in &order[start[nc]..start[nc + 1]] {
                    if j <= i {
                        continue;
                    }
                    let r = geometry.distance(&points[i * d..(i + 1) * d], &points[j * d..(j + 1) * d]);
                    if r <= r_max {
                        f(i, j, r);
                    }
                }
            }
        }
    }
}

impl RcmSample {
    fn from_parts(
        dimension: usize,
        points: Vec<f64>,
        pinned_count: usize,
        edges: Vec<(u32, u32)>,
        geometry: BoxGeometry,
        rng: RngSpec,
    ) -> Self {
        let k = points.len() / dimension;
        let mut degree = vec![0usize; k + 1];
        for &(i, j) in &edges {
            degree[i as usize + 1] += 1;
            degree[j as usize + 1] += 1;
        }
        for v in 0..k {
            degree[v + 1] += degree[v];
        }
        let offsets = degree.clone();
        let mut fill = degree;
        let mut neighbours = vec![0u32; 2 * edges.len()];
        for &(i, j) in &edges {
            neighbours[fill[i as usize]] = j;
            fill[i as usize] += 1;
            neighbours[fill[j as usize]] = i;
            fill[j as usize] += 1;
        }
        Self {
            dimension,
            points,
            pinned_count,
            edges,
            offsets,
            neighbours,
            geometry,
            rng,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn pinned_count(&self) -> usize {
        self.pinned_count
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn geometry(&self) -> &BoxGeometry {
        &self.geometry
    }

    pub fn rng(&self) -> RngSpec {
        self.rng
    }

    pub fn neighbours(&self, i: usize) -> &[u32] {
        &self.neighbours[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Connected component of `vertex`, sorted ascending.
    pub fn cluster_of(&self, vertex: usize) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut out = vec![vertex];
        seen[vertex] = true;
        let mut queue = VecDeque::from([vertex]);
        while let Some(v) = queue.pop_front() {
            for &w in self.neighbours(v) {
                let w = w as usize;
                if !seen[w] {
                    seen[w] = true;
                    out.push(w);
                    queue.push_back(w);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Whether `a` and `b` lie in the same cluster; stops as soon as `b` is reached.
    pub fn connected(&self, a: usize, b: usize) -> bool {
        if a == b {
            return true;
        }
        let mut seen = vec![false; self.len()];
        seen[a] = true;
        let mut stack = vec![a];
        while let Some(v) = stack.pop() {
            for &w in self.neighbours(v) {
                let w = w as usize;
                if w == b {
                    return true;
                }
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        false
    }

    /// Component label per vertex (labels are the smallest member index) and
    /// the number of components.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let k = self.len();
        let mut label = vec![usize::MAX; k];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..k {
            if label[s] != usize::MAX {
                continue;
            }
            count += 1;
            label[s] = s;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &w in self.neighbours(v) {
                    let w = w as usize;
                    if label[w] == usize::MAX {
                        label[w] = s;
                        stack.push(w);
                    }
                }
            }
        }
        (label, count)
    }

    /// Points CSV: `index,pinned,x0,..,x{d-1}`.
    pub fn write_points_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "index,pinned")?;
        for a in 0..self.dimension {
            write!(w, ",x{a}")?;
        }
        writeln!(w)?;
        for i in 0..self.len() {
            write!(w, "{i},{}", u8::from(i < self.pinned_count))?;
            for c in self.point(i) {
                write!(w, ",{c}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Edge list CSV: `i,j` with `i < j`.
    pub fn write_edges_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j")?;
        for (i, j) in &self.edges {
            writeln!(w, "{i},{j}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gilbert1() -> (ConnectionFunction, BoxGeometry) {
        (ConnectionFunction::gilbert(1, 1.0).unwrap(), BoxGeometry::periodic(1, 40.0).unwrap())
    }

    #[test]
    fn deterministic_edge_between_close_pins() {
        let (phi, b) = gilbert1();
        let s = sample_rcm(0.0, &phi, &b, &[vec![0.0], vec![0.7]], RngSpec::new(1, 0)).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.edges(), &[(0, 1)]);
        assert_eq!(s.cluster_of(0), vec![0, 1]);
    }

    #[test]
    fn far_pins_stay_apart() {
        let (phi, b) = gilbert1();
        let s = sample_rcm(0.0, &phi, &b, &[vec![0.0], vec![5.0]], RngSpec::new(1, 0)).unwrap();
        assert!(s.edges().is_empty());
        assert_eq!(s.cluster_of(1), vec![1]);
    }

    #[test]
    fn errors() {
        let (phi, b) = gilbert1();
        assert!(matches!(
            sample_rcm(0.1, &phi, &b, &[vec![30.0]], RngSpec::new(1, 0)),
            Err(Error::PinOutsideBox { .. })
        ));
        let small = BoxGeometry::periodic(1, 1.5).unwrap();
        assert!(matches!(
            sample_rcm(0.1, &phi, &small, &[], RngSpec::new(1, 0)),
            Err(Error::BoxTooSmall { .. })
        ));
        assert!(sample_rcm(-1.0, &phi, &b, &[], RngSpec::new(1, 0)).is_err());
    }

    #[test]
    fn cell_list_matches_brute_force() {
        for (d, l, boundary) in [(1, 40.0, Boundary::Periodic), (2, 12.0, Boundary::Periodic), (2, 12.0, Boundary::Free), (3, 6.5, Boundary::Periodic)] {
            let phi = ConnectionFunction::exponential(d, 12.0).unwrap();
            let b = BoxGeometry::new(d, l, boundary).unwrap();
            for stream in 0..4 {
                let rng = RngSpec::new(99, stream);
                let a = sample_rcm_with(3.0, &phi, &b, &[vec![0.0; d]], rng, PairSearch::CellList).unwrap();
                let c = sample_rcm_with(3.0, &phi, &b, &[vec![0.0; d]], rng, PairSearch::BruteForce).unwrap();
                assert!(a.len() > 16);
                assert_eq!(a.edges(), c.edges(), "d={d} {boundary:?}");
            }
        }
    }

    #[test]
    fn export_headers() {
        let (phi, b) = gilbert1();
        let s = sample_rcm(0.0, &phi, &b, &[vec![0.0], vec![0.5]], RngSpec::new(1, 0)).unwrap();
        let mut p = Vec::new();
        s.write_points_csv(&mut p).unwrap();
        assert_eq!(String::from_utf8(p).unwrap(), "index,pinned,x0\n0,1,0\n1,1,0.5\n");
        let mut e = Vec::new();
        s.write_edges_csv(&mut e).unwrap();
        assert_eq!(String::from_utf8(e).unwrap(), "i,j\n0,1\n");
    }
}
