//! Graph combinatorics and numerical integration for the low-intensity
//! coefficients `p_n(., 0)` and `q_n(., 0)`.

mod coefficients;
mod combinatorics;
mod graph;
mod integrals;

pub use combinatorics::{
    concat, connectivity_coefficients, dead_end_vertices, decompose_last_pivotal, kappa_n, kappa_n_with_limit,
    pi_n, pivotal_free, pivotal_vertices, relabel, subgraph_mobius, KappaTable, PivotalDecomposition,
    KAPPA_EDGE_LIMIT,
};
pub use graph::{
    enum_connected_graphs, pair_count, pair_index, pairs, reachable, read_graph_list, write_graph_list,
    LabeledGraph, N_MAX,
};
pub use integrals::{
    eval_i, eval_integral, eval_j, DiscretePhi, IntegralEstimate, Integrand, IntegrationMethod, ELIMINATION_BUDGET,
};
pub use coefficients::{
    assemble_order, assemble_p, assemble_q, assemble_up_to, bound_check_integral, coefficient_bound, fit_geometric,
    recursion_check, series, series_p, series_q, BoundReport, CoefficientGrid, CoefficientKind, OrderCoefficients,
    RecursionCheck, SeriesResult,
};
