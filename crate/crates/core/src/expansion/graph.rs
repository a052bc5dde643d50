use std::fmt;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest order accepted by [`enum_connected_graphs`].
pub const N_MAX: usize = 5;

/// Largest vertex count whose pairs fit in a `u64` mask.
const MAX_VERTICES: usize = 11;

pub fn pair_count(vertices: usize) -> usize {
    vertices * vertices.saturating_sub(1) / 2
}

/// Position of the pair `{i, j}` in lexicographic order `(0,1), (0,2), ...,
/// (1,2), ...` over `vertices` vertices.
pub fn pair_index(vertices: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i < j { (i, j) } else { (j, i) };
    debug_assert!(j < vertices && i != j);
    i * (2 * vertices - i - 1) / 2 + (j - i - 1)
}

/// All pairs over `vertices` vertices in lexicographic order.
pub fn pairs(vertices: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(pair_count(vertices));
    for i in 0..vertices {
        for j in i + 1..vertices {
            out.push((i, j));
        }
    }
    out
}

/// Vertices reachable from `from` using only vertices in `allowed`, as a
/// bitmask. `adj[v]` is the neighbour mask of `v`.
pub fn reachable(adj: &[u32], allowed: u32, from: usize) -> u32 {
    if allowed & (1 << from) == 0 {
        return 0;
    }
    let mut seen = 1u32 << from;
    let mut frontier = seen;
    while frontier != 0 {
        let v = frontier.trailing_zeros() as usize;
        frontier &= frontier - 1;
        let new = adj[v] & allowed & !seen;
        seen |= new;
        frontier |= new;
    }
    seen
}

pub(crate) fn adjacency_of(vertices: usize, mask: u64) -> Vec<u32> {
    let mut adj = vec![0u32; vertices];
    let mut m = mask;
    let all = pairs(vertices);
    while m != 0 {
        let k = m.trailing_zeros() as usize;
        m &= m - 1;
        let (i, j) = all[k];
        adj[i] |= 1 << j;
        adj[j] |= 1 << i;
    }
    adj
}

pub(crate) fn mask_connected(vertices: usize, mask: u64) -> bool {
    let adj = adjacency_of(vertices, mask);
    reachable(&adj, (1u32 << vertices) - 1, 0).count_ones() as usize == vertices
}

/// A connected graph on `{0, ..., n+1}` with start-vertex 0 and end-vertex
/// `n+1`. Bit `k` of the mask is the `k`-th pair in lexicographic order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledGraph {
    n: usize,
    mask: u64,
}

impl LabeledGraph {
    pub fn new(n: usize, mask: u64) -> Result<Self> {
        let v = n + 2;
        if v > MAX_VERTICES {
            return Err(Error::OrderTooLarge { n, max: MAX_VERTICES - 2 });
        }
        if pair_count(v) < 64 && mask >> pair_count(v) != 0 {
            return Err(Error::InvalidParameter(format!("edge mask {mask:#x} has bits beyond the {} pairs", pair_count(v))));
        }
        if !mask_connected(v, mask) {
            return Err(Error::InvalidParameter(format!("graph of order {n} with mask {mask:#x} is not connected")));
        }
        Ok(Self { n, mask })
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let v = n + 2;
        let mut mask = 0u64;
        for &(i, j) in edges {
            if i == j || i >= v || j >= v {
                return Err(Error::InvalidParameter(format!("bad edge ({i},{j}) for {v} vertices")));
            }
            mask |= 1 << pair_index(v, i, j);
        }
        Self::new(n, mask)
    }

    /// Single edge `{0, 1}`, the only member of order 0.
    pub fn single_edge() -> Self {
        Self { n: 0, mask: 1 }
    }

    pub(crate) fn from_mask_unchecked(n: usize, mask: u64) -> Self {
        Self { n, mask }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn vertex_count(&self) -> usize {
        self.n + 2
    }

    pub fn end_vertex(&self) -> usize {
        self.n + 1
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn edge_count(&self) -> u32 {
        self.mask.count_ones()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.mask >> pair_index(self.vertex_count(), i, j) & 1 == 1
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        pairs(self.vertex_count())
            .into_iter()
            .enumerate()
            .filter(|(k, _)| self.mask >> k & 1 == 1)
            .map(|(_, p)| p)
            .collect()
    }

    /// Pairs that are not edges, in lexicographic order.
    pub fn non_edges(&self) -> Vec<(usize, usize)> {
        pairs(self.vertex_count())
            .into_iter()
            .enumerate()
            .filter(|(k, _)| self.mask >> k & 1 == 0)
            .map(|(_, p)| p)
            .collect()
    }

    /// Neighbour bitmask of every vertex.
    pub fn adjacency(&self) -> Vec<u32> {
        adjacency_of(self.vertex_count(), self.mask)
    }

    pub fn all_vertices(&self) -> u32 {
        (1u32 << self.vertex_count()) - 1
    }

    /// Breadth-first distances from `from`; `None` for unreachable vertices.
    pub fn distances_from(&self, from: usize) -> Vec<Option<usize>> {
        let adj = self.adjacency();
        let mut dist = vec![None; self.vertex_count()];
        dist[from] = Some(0);
        let mut queue = std::collections::VecDeque::from([from]);
        while let Some(v) = queue.pop_front() {
            let mut m = adj[v];
            while m != 0 {
                let w = m.trailing_zeros() as usize;
                m &= m - 1;
                if dist[w].is_none() {
                    dist[w] = Some(dist[v].unwrap() + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Edge-list line: the order, then `i-j` for each edge.
    pub fn to_line(&self) -> String {
        let mut s = self.n.to_string();
        for (i, j) in self.edges() {
            s.push_str(&format!(" {i}-{j}"));
        }
        s
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let mut it = line.split_whitespace();
        let n: usize = it
            .next()
            .ok_or_else(|| Error::Parse("empty graph line".into()))?
            .parse()
            .map_err(|_| Error::Parse(format!("bad graph order in {line:?}")))?;
        let mut edges = Vec::new();
        for tok in it {
            let (a, b) = tok
                .split_once('-')
                .ok_or_else(|| Error::Parse(format!("bad edge {tok:?}")))?;
            let p = |s: &str| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad edge {tok:?}")));
            edges.push((p(a)?, p(b)?));
        }
        Self::from_edges(n, &edges)
    }
}

impl fmt::Display for LabeledGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

/// Every connected graph on `{0, ..., n+1}` in increasing mask order.
pub fn enum_connected_graphs(n: usize) -> Result<Vec<LabeledGraph>> {
    if n > N_MAX {
        return Err(Error::OrderTooLarge { n, max: N_MAX });
    }
    let v = n + 2;
    let total = 1u64 << pair_count(v);
    // a connected graph needs at least v - 1 edges
    Ok((0..total)
        .into_par_iter()
        .filter(|&m| m.count_ones() as usize + 1 >= v && mask_connected(v, m))
        .map(|m| LabeledGraph::from_mask_unchecked(n, m))
        .collect())
}

pub fn write_graph_list<W: Write>(graphs: &[LabeledGraph], mut w: W) -> Result<()> {
    for g in graphs {
        writeln!(w, "{}", g.to_line())?;
    }
    Ok(())
}

pub fn read_graph_list<R: BufRead>(r: R) -> Result<Vec<LabeledGraph>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(LabeledGraph::from_line(&line)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_order_is_lexicographic() {
        for v in 2..8 {
            for (k, (i, j)) in pairs(v).into_iter().enumerate() {
                assert_eq!(pair_index(v, i, j), k);
                assert_eq!(pair_index(v, j, i), k);
            }
        }
    }

    #[test]
    fn counts_of_connected_labeled_graphs() {
        let want = [1usize, 4, 38, 728, 26704];
        for (n, &c) in want.iter().enumerate() {
            assert_eq!(enum_connected_graphs(n).unwrap().len(), c, "n={n}");
        }
    }

    #[test]
    fn enumeration_is_sorted_and_rejects_large_orders() {
        let g = enum_connected_graphs(2).unwrap();
        assert!(g.windows(2).all(|w| w[0].mask() < w[1].mask()));
        assert_eq!(enum_connected_graphs(0).unwrap(), vec![LabeledGraph::single_edge()]);
        assert!(matches!(enum_connected_graphs(N_MAX + 1), Err(Error::OrderTooLarge { .. })));
    }

    #[test]
    fn line_round_trip_and_validation() {
        let g = LabeledGraph::from_edges(2, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        assert_eq!(g.to_line(), "2 0-1 0-3 1-2 2-3");
        assert_eq!(LabeledGraph::from_line(&g.to_line()).unwrap(), g);
        assert!(LabeledGraph::from_edges(1, &[(0, 1)]).is_err());
        let mut buf = Vec::new();
        let all = enum_connected_graphs(1).unwrap();
        write_graph_list(&all, &mut buf).unwrap();
        assert_eq!(read_graph_list(buf.as_slice()).unwrap(), all);
    }

    #[test]
    fn distances() {
        let path = LabeledGraph::from_edges(2, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(path.distances_from(0), vec![Some(0), Some(1), Some(2), Some(3)]);
        assert_eq!(path.distances_from(3)[1], Some(2));
    }
}
