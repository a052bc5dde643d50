use rayon::prelude::*;

use super::graph::{mask_connected, pair_count, reachable, LabeledGraph, N_MAX};
use crate::error::{Error, Result};

/// Default cap on `|E(H)|` for the per-graph subset sum in [`kappa_n`].
pub const KAPPA_EDGE_LIMIT: u32 = 14;

fn sign(k: u32) -> i64 {
    if k % 2 == 0 {
        1
    } else {
        -1
    }
}

fn pi_of_mask(n: usize, mask: u64) -> i64 {
    let adj = super::graph::adjacency_of(n + 2, mask);
    let ends = 1u32 | 1 << (n + 1);
    let mut total = 0;
    for subset in 0u32..1 << n {
        let allowed = ends | subset << 1;
        if reachable(&adj, allowed, 0) >> (n + 1) & 1 == 1 {
            total += sign(n as u32 - subset.count_ones());
        }
    }
    total
}

/// `sum_{I subset [n]} (-1)^{n-|I|} 1{0 <-> n+1 in G restricted to I}`.
pub fn pi_n(g: &LabeledGraph) -> i64 {
    pi_of_mask(g.order(), g.mask())
}

/// Signed sum of `pi_n` over the connected spanning subgraphs of `h`.
pub fn kappa_n(h: &LabeledGraph) -> Result<i64> {
    kappa_n_with_limit(h, KAPPA_EDGE_LIMIT)
}

pub fn kappa_n_with_limit(h: &LabeledGraph, limit: u32) -> Result<i64> {
    let edges = h.edge_count();
    if edges > limit {
        return Err(Error::TooManyEdges { edges, limit });
    }
    let (n, full) = (h.order(), h.mask());
    let mut total = 0;
    let mut sub = full;
    loop {
        if mask_connected(n + 2, sub) {
            total += pi_of_mask(n, sub) * sign(edges - sub.count_ones());
        }
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & full;
    }
    Ok(total)
}

/// `g(H) = sum_{G subset H, G connected} (-1)^{|E(H)|-|E(G)|} f(G)` for every
/// edge mask `H` over `n + 2` vertices, by an in-place subset transform.
pub fn subgraph_mobius<F>(n: usize, f: F) -> Result<Vec<i64>>
where
    F: Fn(usize, u64) -> i64 + Sync,
{
    if n > N_MAX {
        return Err(Error::OrderTooLarge { n, max: N_MAX });
    }
    let bits = pair_count(n + 2);
    let mut a: Vec<i64> = (0..1u64 << bits)
        .into_par_iter()
        .map(|m| if mask_connected(n + 2, m) { f(n, m) } else { 0 })
        .collect();
    for b in 0..bits {
        let bit = 1usize << b;
        for m in 0..a.len() {
            if m & bit != 0 {
                a[m] -= a[m ^ bit];
            }
        }
    }
    Ok(a)
}

/// `kappa_n` for every graph of one order at once.
#[derive(Debug, Clone)]
pub struct KappaTable {
    n: usize,
    values: Vec<i64>,
}

impl KappaTable {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self {
            n,
            values: subgraph_mobius(n, pi_of_mask)?,
        })
    }

    pub fn get(&self, g: &LabeledGraph) -> i64 {
        assert_eq!(g.order(), self.n, "graph order does not match the table");
        self.values[g.mask() as usize]
    }
}

/// Coefficients `c(H)` with `1{Gamma connected} = sum_H c(H) prod_{E(H)} phi`
/// after integrating out the non-edges, i.e. the subset transform of the
/// connectivity indicator.
pub fn connectivity_coefficients(n: usize) -> Result<Vec<i64>> {
    subgraph_mobius(n, |_, _| 1)
}

/// Internal vertices lying on every path from 0 to `n+1`.
pub fn pivotal_vertices(g: &LabeledGraph) -> Vec<usize> {
    let adj = g.adjacency();
    let end = g.end_vertex();
    (1..end)
        .filter(|&i| reachable(&adj, g.all_vertices() & !(1 << i), 0) >> end & 1 == 0)
        .collect()
}

pub fn pivotal_free(g: &LabeledGraph) -> bool {
    pivotal_vertices(g).is_empty()
}

/// Internal vertices on no simple path from 0 to `n+1`. Such a vertex makes
/// both `pi_n` and `kappa_n` vanish.
pub fn dead_end_vertices(g: &LabeledGraph) -> Vec<usize> {
    fn walk(adj: &[u32], end: usize, v: usize, visited: u32, on_path: &mut u32) -> bool {
        if v == end {
            *on_path |= visited;
            return true;
        }
        let mut found = false;
        let mut m = adj[v] & !visited;
        while m != 0 {
            let w = m.trailing_zeros() as usize;
            m &= m - 1;
            found |= walk(adj, end, w, visited | 1 << w, on_path);
        }
        found
    }
    let adj = g.adjacency();
    let end = g.end_vertex();
    let mut on_path = 0u32;
    walk(&adj, end, 0, 1, &mut on_path);
    (1..end).filter(|&i| on_path >> i & 1 == 0).collect()
}

/// Graph with vertex `v` renamed to `map[v]`; `map` must be a permutation.
pub fn relabel(g: &LabeledGraph, map: &[usize]) -> Result<LabeledGraph> {
    if map.len() != g.vertex_count() {
        return Err(Error::InvalidParameter("relabelling map has the wrong length".into()));
    }
    let edges: Vec<(usize, usize)> = g.edges().into_iter().map(|(i, j)| (map[i], map[j])).collect();
    LabeledGraph::from_edges(g.order(), &edges)
}

/// `G1 ⊙ G2`: the end-vertex of `g1` is glued to the start-vertex of `g2`,
/// whose vertices are shifted to follow those of `g1`.
pub fn concat(g1: &LabeledGraph, g2: &LabeledGraph) -> Result<LabeledGraph> {
    let shift = g1.end_vertex();
    let mut edges = g1.edges();
    edges.extend(g2.edges().into_iter().map(|(i, j)| (i + shift, j + shift)));
    LabeledGraph::from_edges(g1.order() + g2.order() + 1, &edges)
}

/// Split of a graph at its last pivotal vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PivotalDecomposition {
    pub pivot: usize,
    /// Left factor on `front_labels`, in that order.
    pub front: LabeledGraph,
    /// Pivotal-free right factor on `back_labels`, in that order.
    pub back: LabeledGraph,
    /// `[0, sorted front vertices, pivot]`.
    pub front_labels: Vec<usize>,
    /// `[pivot, sorted remaining vertices, n+1]`.
    pub back_labels: Vec<usize>,
}

impl PivotalDecomposition {
    /// Rebuilds the original graph as a relabelled concatenation.
    pub fn recompose(&self) -> Result<LabeledGraph> {
        let joined = concat(&self.front, &self.back)?;
        let mut map = self.front_labels.clone();
        map.extend_from_slice(&self.back_labels[1..]);
        relabel(&joined, &map)
    }
}

fn induced(g: &LabeledGraph, labels: &[usize]) -> Result<LabeledGraph> {
    let mut edges = Vec::new();
    for (a, &i) in labels.iter().enumerate() {
        for (b, &j) in labels.iter().enumerate().skip(a + 1) {
            if g.has_edge(i, j) {
                edges.push((a, b));
            }
        }
    }
    LabeledGraph::from_edges(labels.len() - 2, &edges)
}

/// Splits `g` at the pivotal vertex closest to the end-vertex. The front part
/// is the pivot plus the component of 0 once the pivot is removed; everything
/// else goes behind. `None` when `g` is pivotal-free.
pub fn decompose_last_pivotal(g: &LabeledGraph) -> Option<PivotalDecomposition> {
    let adj = g.adjacency();
    let all = g.all_vertices();
    let end = g.end_vertex();
    // the component of 0 grows along the chain of pivots, so the last pivot
    // has the largest one
    let (pivot, front_set) = pivotal_vertices(g)
        .into_iter()
        .map(|v| (v, reachable(&adj, all & !(1 << v), 0)))
        .max_by_key(|&(_, s)| s.count_ones())?;
    let mut front_labels: Vec<usize> = (0..end).filter(|&i| front_set >> i & 1 == 1).collect();
    front_labels.push(pivot);
    let mut back_labels = vec![pivot];
    back_labels.extend((1..end).filter(|&i| i != pivot && front_set >> i & 1 == 0));
    back_labels.push(end);
    let front = induced(g, &front_labels).expect("front factor is connected");
    let back = induced(g, &back_labels).expect("back factor is connected");
    Some(PivotalDecomposition {
        pivot,
        front,
        back,
        front_labels,
        back_labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::graph::enum_connected_graphs;

    fn g(n: usize, e: &[(usize, usize)]) -> LabeledGraph {
        LabeledGraph::from_edges(n, e).unwrap()
    }

    #[test]
    fn small_pi_values() {
        assert_eq!(pi_n(&LabeledGraph::single_edge()), 1);
        assert_eq!(pi_n(&g(1, &[(0, 1), (1, 2)])), 1);
        assert_eq!(pi_n(&g(1, &[(0, 1), (1, 2), (0, 2)])), 0);
        assert_eq!(pi_n(&g(1, &[(0, 1), (0, 2)])), 0);
        assert_eq!(pi_n(&g(1, &[(0, 2), (1, 2)])), 0);
    }

    #[test]
    fn small_kappa_values() {
        assert_eq!(kappa_n(&LabeledGraph::single_edge()).unwrap(), 1);
        assert_eq!(kappa_n(&g(1, &[(0, 1), (1, 2)])).unwrap(), 1);
        assert_eq!(kappa_n(&g(1, &[(0, 1), (1, 2), (0, 2)])).unwrap(), -1);
    }

    #[test]
    fn table_matches_per_graph_kappa() {
        for n in 0..=3 {
            let table = KappaTable::new(n).unwrap();
            for h in enum_connected_graphs(n).unwrap() {
                assert_eq!(table.get(&h), kappa_n(&h).unwrap(), "{h}");
            }
        }
    }

    #[test]
    fn edge_limit_enforced() {
        let tri = g(1, &[(0, 1), (1, 2), (0, 2)]);
        assert!(matches!(kappa_n_with_limit(&tri, 2), Err(Error::TooManyEdges { edges: 3, limit: 2 })));
    }

    #[test]
    fn pivotal_examples() {
        assert!(pivotal_free(&LabeledGraph::single_edge()));
        assert!(!pivotal_free(&g(1, &[(0, 1), (1, 2)])));
        assert!(pivotal_free(&g(1, &[(0, 1), (1, 2), (0, 2)])));
    }

    #[test]
    fn concat_of_edges_is_path() {
        let e = LabeledGraph::single_edge();
        assert_eq!(concat(&e, &e).unwrap(), g(1, &[(0, 1), (1, 2)]));
    }

    #[test]
    fn dead_ends_kill_pi_and_kappa() {
        for n in 1..=3 {
            let table = KappaTable::new(n).unwrap();
            for h in enum_connected_graphs(n).unwrap() {
                if !dead_end_vertices(&h).is_empty() {
                    assert_eq!(pi_n(&h), 0, "{h}");
                    assert_eq!(table.get(&h), 0, "{h}");
                }
            }
        }
        // vertex 2 hangs off vertex 1
        assert_eq!(dead_end_vertices(&g(2, &[(0, 1), (1, 3), (1, 2)])), vec![2]);
    }

    #[test]
    fn decomposition_round_trips() {
        for n in 1..=4 {
            for h in enum_connected_graphs(n).unwrap() {
                match decompose_last_pivotal(&h) {
                    None => assert!(pivotal_free(&h)),
                    Some(d) => {
                        assert!(pivotal_free(&d.back), "{h}");
                        assert_eq!(d.recompose().unwrap(), h);
                    }
                }
            }
        }
    }

    #[test]
    fn connectivity_coefficients_of_order_one() {
        // 1{connected} on 3 vertices = ab + ac + bc - 2abc
        let c = connectivity_coefficients(1).unwrap();
        for h in enum_connected_graphs(1).unwrap() {
            let want = if h.edge_count() == 3 { -2 } else { 1 };
            assert_eq!(c[h.mask() as usize], want);
        }
    }
}
