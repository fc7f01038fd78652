//! Checks of the two conditions the rank certificates rely on: full column
//! rank of single-parent tables, and every edge actually mattering.

use alloc::vec::Vec;

use super::{BipartiteGraph, CardinalitySpec, Cpt};
use crate::index;
use crate::linalg::{numerical_rank, RankReport, DEFAULT_TOL_REL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative rank threshold (`tau_rank`).
    pub rank_tol_rel: f64,
    /// Equality tolerance for conditional vectors (`tau_eq`), L-infinity.
    pub eq_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rank_tol_rel: DEFAULT_TOL_REL, eq_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureTableCheck {
    pub observed: usize,
    pub rank: RankReport,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption1Report {
    /// One entry per single-parent variable.
    pub variables: Vec<PureTableCheck>,
    pub levels_ok: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCheck {
    pub observed: usize,
    pub latent: usize,
    /// Largest pairwise L-infinity distance among the `H` conditional
    /// vectors, maximized over the other parents' configurations.
    pub max_distance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption2Report {
    pub edges: Vec<EdgeCheck>,
    pub passed: bool,
}

/// Every single-parent variable must have a `V x H` table of rank `H`.
pub fn check_assumption_1(
    cpts: &[Cpt],
    cards: &CardinalitySpec,
    graph: &BipartiteGraph,
    rank_tol_rel: f64,
) -> Assumption1Report {
    let h = cards.latent_levels;
    let variables: Vec<PureTableCheck> = (0..graph.num_observed())
        .filter(|&j| graph.parents(j).len() == 1)
        .map(|j| {
            let rank = numerical_rank(&cpts[j].table, rank_tol_rel)
                .expect("compiled tables are finite and the tolerance was validated");
            let passed = rank.numerical_rank == h;
            PureTableCheck { observed: j, rank, passed }
        })
        .collect();
    let levels_ok = cards.observed_levels >= h;
    let passed = levels_ok && variables.iter().all(|v| v.passed);
    Assumption1Report { variables, levels_ok, passed }
}

/// For each edge `(j, k)`, some configuration of the other parents must make
/// the `H` vectors `P(Y_j | a_rest, A_k = h)` differ by more than `eq_tol`.
pub fn check_assumption_2(
    cpts: &[Cpt],
    graph: &BipartiteGraph,
    cards: &CardinalitySpec,
    eq_tol: f64,
) -> Assumption2Report {
    let h = cards.latent_levels;
    let mut edges = Vec::with_capacity(graph.num_edges());
    for j in 0..graph.num_observed() {
        let cpt = &cpts[j];
        let parents = graph.parents(j);
        let strides = index::strides(parents.len(), h);
        for (pos, &k) in parents.iter().enumerate() {
            let mut max_distance: f64 = 0.0;
            let others = index::pow(h, parents.len() - 1);
            let mut rest = alloc::vec![0usize; parents.len() - 1];
            for code in 0..others {
                index::decode_into(code, h, &mut rest);
                // Column code with position `pos` held at zero.
                let base: usize = (0..parents.len())
                    .filter(|&p| p != pos)
                    .zip(&rest)
                    .map(|(p, &d)| d * strides[p])
                    .sum();
                for h1 in 0..h {
                    for h2 in h1 + 1..h {
                        let (c1, c2) = (base + h1 * strides[pos], base + h2 * strides[pos]);
                        let d = (0..cpt.levels())
                            .map(|v| (cpt.prob(v, c1) - cpt.prob(v, c2)).abs())
                            .fold(0.0, f64::max);
                        max_distance = max_distance.max(d);
                    }
                }
            }
            edges.push(EdgeCheck { observed: j, latent: k, max_distance, passed: max_distance > eq_tol });
        }
    }
    let passed = edges.iter().all(|e| e.passed);
    Assumption2Report { edges, passed }
}
