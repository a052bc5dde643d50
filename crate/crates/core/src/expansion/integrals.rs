use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::LabeledGraph;
use crate::error::{Error, Result};
use crate::model::ConnectionFunction;
use crate::oze::{grid_from_radial, GridFunction, GridGeometry, Sampling};
use crate::rng::RngSpec;

/// Largest intermediate table (in cells) the elimination method will build.
pub const ELIMINATION_BUDGET: usize = 1 << 26;

/// Connection function on a grid, read through lifted integer offsets: the
/// value is zero as soon as any offset component exceeds the support.
#[derive(Debug, Clone)]
pub struct DiscretePhi {
    grid: GridFunction,
    support: i64,
    side: usize,
    table: Vec<f64>,
    mass: f64,
}

impl DiscretePhi {
    /// Cell-averaged `phi` on `geometry`.
    pub fn new(f: &ConnectionFunction, geometry: GridGeometry) -> Result<Self> {
        if f.dimension() != geometry.dimension {
            return Err(Error::DimensionMismatch {
                expected: geometry.dimension,
                got: f.dimension(),
            });
        }
        Self::from_grid(grid_from_radial(f, geometry, Sampling::CellAverage)?)
    }

    pub fn from_grid(grid: GridFunction) -> Result<Self> {
        let geo = *grid.geometry();
        if grid.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("connection function values must lie in [0, 1]".into()));
        }
        let support = (0..geo.len())
            .filter(|&i| grid.values()[i] != 0.0)
            .flat_map(|i| geo.offsets(i))
            .map(|o| o.unsigned_abs() as i64)
            .max()
            .unwrap_or(0);
        if 2 * support >= geo.cells as i64 {
            return Err(Error::WraparoundGuard {
                grid_length: geo.length(),
                support: support as f64 * geo.spacing,
            });
        }
        let side = 2 * support as usize + 1;
        let d = geo.dimension;
        let mut table = vec![0.0; side.pow(d as u32)];
        let mut off = vec![0isize; d];
        for (k, slot) in table.iter_mut().enumerate() {
            let mut r = k;
            for o in off.iter_mut() {
                *o = (r % side) as isize - support as isize;
                r /= side;
            }
            *slot = grid.at_offsets(&off);
        }
        let mass = grid.integral();
        Ok(Self {
            grid,
            support,
            side,
            table,
            mass,
        })
    }

    pub fn grid(&self) -> &GridFunction {
        &self.grid
    }

    pub fn geometry(&self) -> &GridGeometry {
        self.grid.geometry()
    }

    /// Largest nonzero offset component, in cells.
    pub fn support_cells(&self) -> i64 {
        self.support
    }

    /// `h^d * sum phi`, the discrete mass.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    #[inline]
    pub fn value(&self, diff: &[i64]) -> f64 {
        let mut k = 0usize;
        let mut stride = 1usize;
        for &c in diff {
            if c.abs() > self.support {
                return 0.0;
            }
            k += (c + self.support) as usize * stride;
            stride *= self.side;
        }
        self.table[k]
    }

    /// Integrals of order `n` reach `(n+1)` supports from the origin; they
    /// must not wrap around the grid.
    pub fn check_order(&self, n: usize) -> Result<()> {
        let geo = self.geometry();
        if 2 * (n as i64 + 1) * self.support >= geo.cells as i64 {
            return Err(Error::WraparoundGuard {
                grid_length: geo.length(),
                support: (n + 1) as f64 * self.support as f64 * geo.spacing,
            });
        }
        Ok(())
    }

    fn reach_points(&self, n: usize) -> Vec<Vec<i64>> {
        let d = self.geometry().dimension;
        let r = (n as i64 + 1) * self.support;
        let side = (2 * r + 1) as usize;
        (0..side.pow(d as u32))
            .map(|mut k| {
                (0..d)
                    .map(|_| {
                        let c = (k % side) as i64 - r;
                        k /= side;
                        c
                    })
                    .collect()
            })
            .collect()
    }
}

/// Which graph integral to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrand {
    /// `prod_{E(G)} phi`.
    J,
    /// `prod_{E(G)} phi * prod_{non-edges} (1 - phi)`.
    I,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum IntegrationMethod {
    /// Exact summation over the grid by eliminating one vertex at a time.
    Elimination,
    /// Spanning-tree importance sampling, `samples` draws per output cell.
    MonteCarlo { samples: u64, seed: u64 },
}

impl IntegrationMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            IntegrationMethod::Elimination => "elimination",
            IntegrationMethod::MonteCarlo { .. } => "monte-carlo",
        }
    }
}

/// A graph integral over every grid displacement of the end-vertex.
#[derive(Debug, Clone)]
pub struct IntegralEstimate {
    pub graph: LabeledGraph,
    pub integrand: Integrand,
    pub method: IntegrationMethod,
    pub values: GridFunction,
    /// Zero for elimination.
    pub std_errors: GridFunction,
}

pub fn eval_j(g: &LabeledGraph, phi: &DiscretePhi, method: IntegrationMethod) -> Result<IntegralEstimate> {
    eval_integral(g, Integrand::J, phi, method)
}

/// `eval_i` with elimination is limited to `n <= 2`: the `(1 - phi)` factors
/// couple every pair of vertices.
pub fn eval_i(g: &LabeledGraph, phi: &DiscretePhi, method: IntegrationMethod) -> Result<IntegralEstimate> {
    eval_integral(g, Integrand::I, phi, method)
}

pub fn eval_integral(
    g: &LabeledGraph,
    integrand: Integrand,
    phi: &DiscretePhi,
    method: IntegrationMethod,
) -> Result<IntegralEstimate> {
    let n = g.order();
    phi.check_order(n)?;
    let geo = *phi.geometry();
    let points = phi.reach_points(n);
    let cell = geo.cell_volume();
    let d0 = g.distances_from(0);
    let de = g.distances_from(g.end_vertex());
    let results: Vec<(f64, f64)> = match method {
        IntegrationMethod::Elimination => {
            if integrand == Integrand::I && n > 2 {
                return Err(Error::EliminationInfeasible(format!(
                    "the I integrand couples all {} vertices; use Monte Carlo above order 2",
                    n + 2
                )));
            }
            points
                .par_iter()
                .map(|x| eliminate_at(g, integrand, phi, x, &d0, &de, cell).map(|v| (v, 0.0)))
                .collect::<Result<Vec<_>>>()?
        }
        IntegrationMethod::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidParameter("Monte Carlo integration needs at least 2 samples".into()));
            }
            let sampler = TreeSampler::new(g, phi)?;
            let task = g.mask() | (n as u64) << 21;
            let flavour = if integrand == Integrand::I { 1u64 << 39 } else { 0 };
            points
                .par_iter()
                .map(|x| {
                    let off: Vec<isize> = x.iter().map(|&c| c as isize).collect();
                    let flat = geo.flat_of_offsets(&off) as u64;
                    let mut rng = RngSpec::task_stream(seed, task, flat | flavour).rng();
                    sampler.estimate(integrand, x, samples, &mut rng)
                })
                .collect()
        }
    };
    let mut values = GridFunction::zeros(geo);
    let mut errors = GridFunction::zeros(geo);
    for (x, (v, e)) in points.iter().zip(results) {
        let off: Vec<isize> = x.iter().map(|&c| c as isize).collect();
        let k = geo.flat_of_offsets(&off);
        values.values_mut()[k] = v;
        errors.values_mut()[k] = e;
    }
    Ok(IntegralEstimate {
        graph: *g,
        integrand,
        method,
        values,
        std_errors: errors,
    })
}

/// Factor over at most two free vertices; `table[ia * len(b) + ib]`.
struct Factor {
    vars: Vec<usize>,
    table: Vec<f64>,
}

/// Candidate positions of one free vertex: a box of lifted offsets.
struct Window {
    points: Vec<i64>,
    len: usize,
}

fn window(x: &[i64], d0: usize, de: usize, s: i64) -> Window {
    let d = x.len();
    let mut lo = vec![0i64; d];
    let mut ext = vec![0usize; d];
    for k in 0..d {
        let a = (-(d0 as i64) * s).max(x[k] - de as i64 * s);
        let b = (d0 as i64 * s).min(x[k] + de as i64 * s);
        if a > b {
            return Window { points: vec![], len: 0 };
        }
        lo[k] = a;
        ext[k] = (b - a + 1) as usize;
    }
    let len: usize = ext.iter().product();
    let mut points = Vec::with_capacity(len * d);
    for mut r in 0..len {
        for k in 0..d {
            points.push(lo[k] + (r % ext[k]) as i64);
            r /= ext[k];
        }
    }
    Window { points, len }
}

fn eliminate_at(
    g: &LabeledGraph,
    integrand: Integrand,
    phi: &DiscretePhi,
    x: &[i64],
    d0: &[Option<usize>],
    de: &[Option<usize>],
    cell: f64,
) -> Result<f64> {
    let n = g.order();
    let end = g.end_vertex();
    let d = x.len();
    let s = phi.support_cells();
    let origin = vec![0i64; d];
    let windows: Vec<Window> = (0..=end)
        .map(|v| {
            if v == 0 || v == end {
                Window { points: vec![], len: 1 }
            } else {
                window(x, d0[v].unwrap(), de[v].unwrap(), s)
            }
        })
        .collect();
    if windows.iter().any(|w| w.len == 0) {
        return Ok(0.0);
    }
    let pos = |v: usize, i: usize| -> &[i64] {
        if v == 0 {
            &origin
        } else if v == end {
            x
        } else {
            &windows[v].points[i * d..(i + 1) * d]
        }
    };
    let weight = |u: usize, iu: usize, w: usize, iw: usize, edge: bool| -> f64 {
        let (a, b) = (pos(u, iu), pos(w, iw));
        let mut diff = [0i64; 8];
        for k in 0..d {
            diff[k] = a[k] - b[k];
        }
        let p = phi.value(&diff[..d]);
        if edge {
            p
        } else {
            1.0 - p
        }
    };
    let mut constant = 1.0;
    let mut factors: Vec<Factor> = Vec::new();
    let mut pairs: Vec<(usize, usize, bool)> = g.edges().into_iter().map(|(i, j)| (i, j, true)).collect();
    if integrand == Integrand::I {
        pairs.extend(g.non_edges().into_iter().map(|(i, j)| (i, j, false)));
    }
    let pinned = |v: usize| v == 0 || v == end;
    for (i, j, edge) in pairs {
        match (pinned(i), pinned(j)) {
            (true, true) => constant *= weight(i, 0, j, 0, edge),
            (true, false) | (false, true) => {
                let (p, f) = if pinned(i) { (i, j) } else { (j, i) };
                let table = (0..windows[f].len).map(|k| weight(p, 0, f, k, edge)).collect();
                factors.push(Factor { vars: vec![f], table });
            }
            (false, false) => {
                let (lb, la) = (windows[j].len, windows[i].len);
                if la * lb > ELIMINATION_BUDGET {
                    return Err(Error::EliminationInfeasible(format!("pair table of {} cells exceeds the budget", la * lb)));
                }
                let mut table = Vec::with_capacity(la * lb);
                for a in 0..la {
                    for b in 0..lb {
                        table.push(weight(i, a, j, b, edge));
                    }
                }
                factors.push(Factor { vars: vec![i, j], table });
            }
        }
        if constant == 0.0 {
            return Ok(0.0);
        }
    }
    let mut free: Vec<usize> = (1..=n).collect();
    while !free.is_empty() {
        // greedy: smallest resulting scope, then smallest table
        let scope_of = |v: usize| -> Vec<usize> {
            let mut s: Vec<usize> = factors
                .iter()
                .filter(|f| f.vars.contains(&v))
                .flat_map(|f| f.vars.iter().copied())
                .filter(|&u| u != v)
                .collect();
            s.sort_unstable();
            s.dedup();
            s
        };
        let (slot, v, scope) = free
            .iter()
            .enumerate()
            .map(|(k, &v)| (k, v, scope_of(v)))
            .min_by_key(|(_, v, s)| (s.len(), s.iter().map(|&u| windows[u].len).product::<usize>() * windows[*v].len))
            .unwrap();
        free.swap_remove(slot);
        if scope.len() > 2 {
            return Err(Error::EliminationInfeasible(format!(
                "eliminating vertex {v} of {g} couples {} vertices",
                scope.len()
            )));
        }
        let size: usize = scope.iter().map(|&u| windows[u].len).product();
        if size > ELIMINATION_BUDGET {
            return Err(Error::EliminationInfeasible(format!("intermediate table of {size} cells exceeds the budget")));
        }
        let (gathered, rest): (Vec<Factor>, Vec<Factor>) = factors.into_iter().partition(|f| f.vars.contains(&v));
        factors = rest;
        let la = scope.first().map_or(1, |&u| windows[u].len);
        let lb = scope.get(1).map_or(1, |&u| windows[u].len);
        let lv = windows[v].len;
        // strides of (v, a, b) into each gathered table
        let strides: Vec<[usize; 3]> = gathered
            .iter()
            .map(|f| {
                let mut st = [0usize; 3];
                let len_of = |u: usize| windows[u].len;
                let slot_of = |u: usize| if u == v { 0 } else if Some(&u) == scope.first() { 1 } else { 2 };
                match f.vars.as_slice() {
                    [p] => st[slot_of(*p)] = 1,
                    [p, q] => {
                        st[slot_of(*p)] = len_of(*q);
                        st[slot_of(*q)] = 1;
                    }
                    _ => unreachable!("factors have one or two variables"),
                }
                st
            })
            .collect();
        let mut table = vec![0.0; la * lb];
        for a in 0..la {
            for b in 0..lb {
                let mut acc = 0.0;
                for iv in 0..lv {
                    let mut prod = 1.0;
                    for (f, st) in gathered.iter().zip(&strides) {
                        prod *= f.table[st[0] * iv + st[1] * a + st[2] * b];
                        if prod == 0.0 {
                            break;
                        }
                    }
                    acc += prod;
                }
                table[a * lb + b] = acc * cell;
            }
        }
        if scope.is_empty() {
            constant *= table[0];
        } else {
            factors.push(Factor { vars: scope, table });
        }
    }
    for f in factors {
        debug_assert!(f.vars.is_empty());
        constant *= f.table[0];
    }
    Ok(constant)
}

/// Spanning-tree proposal: a BFS tree from 0; each free vertex is drawn
/// from `phi / m` around its parent, the end-vertex stays pinned.
struct TreeSampler {
    order: Vec<usize>,
    parent: Vec<usize>,
    /// Pairs whose factor enters the weight: non-tree edges plus the
    /// end-vertex's tree edge.
    weight_edges: Vec<(usize, usize)>,
    non_edges: Vec<(usize, usize)>,
    offsets: Vec<i64>,
    index: WeightedIndex<f64>,
    scale: f64,
    phi: DiscretePhi,
    end: usize,
}

impl TreeSampler {
    fn new(g: &LabeledGraph, phi: &DiscretePhi) -> Result<Self> {
        let adj = g.adjacency();
        let v = g.vertex_count();
        let end = g.end_vertex();
        let mut parent = vec![usize::MAX; v];
        let mut order = Vec::new();
        let mut queue = std::collections::VecDeque::from([0usize]);
        parent[0] = 0;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            let mut m = adj[u];
            while m != 0 {
                let w = m.trailing_zeros() as usize;
                m &= m - 1;
                if parent[w] == usize::MAX {
                    parent[w] = u;
                    queue.push_back(w);
                }
            }
        }
        // sampling edges: tree edges whose child is a free vertex
        let tree = |i: usize, j: usize| (parent[j] == i && j != end && j != 0) || (parent[i] == j && i != end && i != 0);
        let weight_edges = g.edges().into_iter().filter(|&(i, j)| !tree(i, j)).collect();
        let d = phi.geometry().dimension;
        let s = phi.support_cells();
        let side = (2 * s + 1) as usize;
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        for k in 0..side.pow(d as u32) {
            let mut r = k;
            let off: Vec<i64> = (0..d)
                .map(|_| {
                    let c = (r % side) as i64 - s;
                    r /= side;
                    c
                })
                .collect();
            let w = phi.value(&off);
            if w > 0.0 {
                offsets.extend_from_slice(&off);
                weights.push(w);
            }
        }
        let index = WeightedIndex::new(&weights)
            .map_err(|e| Error::InvalidParameter(format!("cannot sample from the connection function: {e}")))?;
        Ok(Self {
            order: order.into_iter().filter(|&u| u != 0 && u != end).collect(),
            parent,
            weight_edges,
            non_edges: g.non_edges(),
            offsets,
            index,
            scale: phi.mass().powi(g.order() as i32),
            phi: phi.clone(),
            end,
        })
    }

    fn estimate<R: rand::Rng>(&self, integrand: Integrand, x: &[i64], samples: u64, rng: &mut R) -> (f64, f64) {
        let d = x.len();
        let v = self.end + 1;
        let mut pos = vec![0i64; v * d];
        pos[self.end * d..].copy_from_slice(x);
        let mut diff = vec![0i64; d];
        let mut factor = |pos: &[i64], i: usize, j: usize| {
            for k in 0..d {
                diff[k] = pos[i * d + k] - pos[j * d + k];
            }
            self.phi.value(&diff)
        };
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..samples {
            for &u in &self.order {
                let p = self.parent[u];
                let k = self.index.sample(rng);
                for c in 0..d {
                    pos[u * d + c] = pos[p * d + c] + self.offsets[k * d + c];
                }
            }
            let mut w = self.scale;
            for &(i, j) in &self.weight_edges {
                w *= factor(&pos, i, j);
                if w == 0.0 {
                    break;
                }
            }
            if integrand == Integrand::I && w != 0.0 {
                for &(i, j) in &self.non_edges {
                    w *= 1.0 - factor(&pos, i, j);
                }
            }
            sum += w;
            sum2 += w * w;
        }
        let m = samples as f64;
        let mean = sum / m;
        let var = ((sum2 / m - mean * mean) * m / (m - 1.0)).max(0.0);
        (mean, (var / m).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::graph::enum_connected_graphs;
    use crate::oze::convolve;

    fn desk() -> DiscretePhi {
        let phi = ConnectionFunction::gilbert(1, 1.0).unwrap();
        DiscretePhi::new(&phi, GridGeometry::new(1, 256, 1.0 / 16.0).unwrap()).unwrap()
    }

    fn g(n: usize, e: &[(usize, usize)]) -> LabeledGraph {
        LabeledGraph::from_edges(n, e).unwrap()
    }

    #[test]
    fn order_zero_is_phi() {
        let phi = desk();
        for m in [IntegrationMethod::Elimination, IntegrationMethod::MonteCarlo { samples: 10, seed: 1 }] {
            let j = eval_j(&LabeledGraph::single_edge(), &phi, m).unwrap();
            assert_eq!(j.values, *phi.grid());
            let i = eval_i(&LabeledGraph::single_edge(), &phi, m).unwrap();
            assert_eq!(i.values, *phi.grid());
        }
    }

    #[test]
    fn path_is_convolution() {
        let phi = desk();
        let j = eval_j(&g(1, &[(0, 1), (1, 2)]), &phi, IntegrationMethod::Elimination).unwrap();
        let c = convolve(phi.grid(), phi.grid()).unwrap();
        assert!(j.values.max_abs_diff(&c).unwrap() < 1e-12);
    }

    #[test]
    fn triangle_at_origin() {
        let phi = desk();
        let j = eval_j(&g(1, &[(0, 1), (1, 2), (0, 2)]), &phi, IntegrationMethod::Elimination).unwrap();
        // cell averages: 31 full cells and two half cells
        let want = (31.0 + 2.0 * 0.25) / 16.0;
        assert!((j.values.values()[0] - want).abs() < 1e-13);
        assert!((want - 2.0).abs() < 1.0 / 16.0);
    }

    #[test]
    fn j_dominates_i() {
        let phi = desk();
        for h in enum_connected_graphs(2).unwrap() {
            let j = eval_j(&h, &phi, IntegrationMethod::Elimination).unwrap();
            let i = eval_i(&h, &phi, IntegrationMethod::Elimination).unwrap();
            for (a, b) in j.values.values().iter().zip(i.values.values()) {
                assert!(*b >= -1e-15 && *a >= *b - 1e-13);
            }
        }
    }

    #[test]
    fn monte_carlo_matches_elimination() {
        let phi = desk();
        let h = g(2, &[(0, 1), (1, 2), (2, 3), (0, 2), (1, 3)]);
        let exact = eval_j(&h, &phi, IntegrationMethod::Elimination).unwrap();
        let mc = eval_j(&h, &phi, IntegrationMethod::MonteCarlo { samples: 4000, seed: 7 }).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..exact.values.values().len() {
            let e = mc.std_errors.values()[k];
            let diff = (mc.values.values()[k] - exact.values.values()[k]).abs();
            if e > 0.0 {
                worst = worst.max(diff / e);
            } else {
                // no hits at all: only plausible where the integral is tiny
                assert!(diff < 0.01 * exact.values.sup_norm(), "cell {k}: {diff}");
            }
        }
        assert!(worst < 5.0, "worst z {worst}");
    }

    #[test]
    fn i_elimination_refused_above_order_two() {
        let phi = desk();
        let h = g(3, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        assert!(matches!(
            eval_i(&h, &phi, IntegrationMethod::Elimination),
            Err(Error::EliminationInfeasible(_))
        ));
    }

    #[test]
    fn wraparound_guard() {
        let phi = ConnectionFunction::gilbert(1, 1.0).unwrap();
        let small = DiscretePhi::new(&phi, GridGeometry::new(1, 64, 1.0 / 16.0).unwrap()).unwrap();
        assert!(matches!(small.check_order(1), Err(Error::WraparoundGuard { .. })));
    }
}
