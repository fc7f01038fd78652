//! Latent bipartite graphical models.
//!
//! A [`ModelSpec`] is the full generative description (graph, level
//! counts, family parameters, latent distribution). [`compile_model`] turns
//! it into the unified form the rest of the crate consumes: the joint latent
//! pmf [`LatentJoint`] and one conditional table [`Cpt`] per observed
//! variable.

mod assumptions;
mod compile;
mod family;
mod generate;

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::index;
use crate::matrix::Matrix;

pub use assumptions::{
    check_assumption_1, check_assumption_2, Assumption1Report, Assumption2Report, EdgeCheck,
    PureTableCheck, Tolerances,
};
pub use compile::{compile_model, CompiledModel};
pub use family::{FamilyParams, Link};
pub use generate::{
    random_model, random_parameters, FamilyKind, GenerateOptions, GeneratedModel,
};

/// The `J x K` binary loading matrix `G` and the derived parent sets
/// `co(j)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BipartiteGraph {
    num_observed: usize,
    num_latent: usize,
    edges: Vec<bool>,
    parents: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    /// `edges` is row-major `J x K`. Every observed variable needs at least
    /// one latent parent.
    pub fn new(num_observed: usize, num_latent: usize, edges: Vec<bool>) -> Result<Self> {
        if num_observed == 0 || num_latent == 0 {
            bail!(Argument, "graph needs J >= 1 and K >= 1, got J={num_observed} K={num_latent}");
        }
        if edges.len() != num_observed * num_latent {
            bail!(Argument, "edge matrix has {} entries, expected {}x{}", edges.len(), num_observed, num_latent);
        }
        let parents: Vec<Vec<usize>> = (0..num_observed)
            .map(|j| (0..num_latent).filter(|&k| edges[j * num_latent + k]).collect())
            .collect();
        if let Some(j) = parents.iter().position(Vec::is_empty) {
            bail!(Argument, "observed variable {j} has no latent parent");
        }
        Ok(Self { num_observed, num_latent, edges, parents })
    }

    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let k = rows.first().map_or(0, |r| r.as_ref().len());
        let mut edges = Vec::with_capacity(rows.len() * k);
        for (j, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != k {
                bail!(Argument, "graph row {j} has {} entries, expected {k}", r.len());
            }
            for &g in r {
                match g {
                    0 => edges.push(false),
                    1 => edges.push(true),
                    other => bail!(Argument, "graph entry {other} in row {j} is not 0/1"),
                }
            }
        }
        Self::new(rows.len(), k, edges)
    }

    pub fn num_observed(&self) -> usize {
        self.num_observed
    }

    pub fn num_latent(&self) -> usize {
        self.num_latent
    }

    pub fn has_edge(&self, j: usize, k: usize) -> bool {
        self.edges[j * self.num_latent + k]
    }

    /// `co(j)`, sorted ascending.
    pub fn parents(&self, j: usize) -> &[usize] {
        &self.parents[j]
    }

    pub fn num_edges(&self) -> usize {
        self.edges.iter().filter(|&&e| e).count()
    }

    /// `co(M)`: union of the parent sets of `observed`, sorted.
    pub fn parents_of_set(&self, observed: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> =
            observed.iter().flat_map(|&j| self.parents[j].iter().copied()).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn rows(&self) -> Vec<Vec<u8>> {
        (0..self.num_observed)
            .map(|j| (0..self.num_latent).map(|k| self.has_edge(j, k) as u8).collect())
            .collect()
    }

    /// Row `i` of the result is row `order[i]` of `self`.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        if index::sorted(order) != (0..self.num_observed).collect::<Vec<_>>() {
            bail!(Argument, "row order is not a permutation of 0..{}", self.num_observed);
        }
        let rows = self.rows();
        let permuted: Vec<Vec<u8>> = order.iter().map(|&i| rows[i].clone()).collect();
        Self::from_rows(&permuted)
    }
}

/// Number of levels of the observed (`V`) and latent (`H`) variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CardinalitySpec {
    pub observed_levels: usize,
    pub latent_levels: usize,
}

impl CardinalitySpec {
    pub fn new(observed_levels: usize, latent_levels: usize) -> Result<Self> {
        if observed_levels < 2 || latent_levels < 2 {
            bail!(Argument, "need V >= 2 and H >= 2, got V={observed_levels} H={latent_levels}");
        }
        if observed_levels < latent_levels {
            bail!(Argument, "need V >= H, got V={observed_levels} H={latent_levels}");
        }
        Ok(Self { observed_levels, latent_levels })
    }
}

/// How the latent layer is distributed.
#[derive(Debug, Clone, PartialEq)]
pub enum LatentSpec {
    /// Independent latents: one length-`H` pmf per latent variable.
    Independent(Vec<Vec<f64>>),
    /// An explicit joint pmf of length `H^K`, mixed-radix indexed.
    Joint(Vec<f64>),
    /// Induced by the energies of a general RBM.
    RbmInduced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub graph: BipartiteGraph,
    pub cards: CardinalitySpec,
    pub family: FamilyParams,
    pub latent: LatentSpec,
}

impl ModelSpec {
    /// Checks that every parameter block matches the graph and level counts.
    pub fn validate(&self) -> Result<()> {
        self.family.validate(&self.graph, &self.cards)?;
        let (k, h) = (self.graph.num_latent(), self.cards.latent_levels);
        match (&self.family, &self.latent) {
            (FamilyParams::GeneralRbm { .. }, LatentSpec::RbmInduced) => Ok(()),
            (FamilyParams::GeneralRbm { .. }, _) => {
                bail!(Argument, "a general RBM takes its latent distribution from its energies (rbm-induced)")
            }
            (_, LatentSpec::RbmInduced) => {
                bail!(Argument, "rbm-induced latent distribution needs the general-rbm family")
            }
            (_, LatentSpec::Independent(marginals)) => {
                if marginals.len() != k {
                    bail!(Argument, "expected {k} latent marginals, got {}", marginals.len());
                }
                for (i, m) in marginals.iter().enumerate() {
                    check_pmf(m, h, "latent marginal", i)?;
                }
                Ok(())
            }
            (_, LatentSpec::Joint(joint)) => {
                let cells = index::checked_pow(h, k).unwrap_or(usize::MAX);
                check_pmf(joint, cells, "latent joint", 0)
            }
        }
    }
}

pub(crate) const PMF_TOL: f64 = 1e-12;

fn check_pmf(p: &[f64], len: usize, what: &str, which: usize) -> Result<()> {
    if p.len() != len {
        bail!(Argument, "{what} {which} has {} entries, expected {len}", p.len());
    }
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        bail!(ParameterDomain, "{what} {which} has a negative or non-finite entry");
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PMF_TOL {
        bail!(ParameterDomain, "{what} {which} sums to {total}, not 1");
    }
    Ok(())
}

/// Joint pmf `nu_a = P(A = a)` over `{0..H-1}^K`, mixed-radix indexed.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentJoint {
    pub num_latent: usize,
    pub levels: usize,
    pub probs: Vec<f64>,
}

impl LatentJoint {
    pub fn new(num_latent: usize, levels: usize, probs: Vec<f64>) -> Result<Self> {
        let cells = index::checked_pow(levels, num_latent)
            .ok_or_else(|| crate::Error::Size(alloc::format!("H^K overflows for H={levels} K={num_latent}")))?;
        check_pmf(&probs, cells, "latent joint", 0)?;
        Ok(Self { num_latent, levels, probs })
    }

    /// Product of independent per-variable pmfs, in ascending code order.
    pub fn from_marginals(levels: usize, marginals: &[Vec<f64>]) -> Self {
        let k = marginals.len();
        let cells = index::pow(levels, k);
        let mut digits = alloc::vec![0; k];
        let probs = (0..cells)
            .map(|code| {
                index::decode_into(code, levels, &mut digits);
                digits.iter().zip(marginals).fold(1.0, |acc, (&d, m)| acc * m[d])
            })
            .collect();
        Self { num_latent: k, levels, probs }
    }

    /// `P(A_k = h)` for each `h`.
    pub fn marginal(&self, k: usize) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.levels];
        let stride = index::pow(self.levels, self.num_latent - 1 - k);
        for (code, p) in self.probs.iter().enumerate() {
            out[(code / stride) % self.levels] += p;
        }
        out
    }
}

/// `P(Y_j | A_co(j))`: a `V x H^{|co(j)|}` column-stochastic table whose
/// columns are indexed by the mixed-radix code of `a_co(j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cpt {
    pub observed: usize,
    pub parents: Vec<usize>,
    pub table: Matrix,
}

impl Cpt {
    pub fn levels(&self) -> usize {
        self.table.rows()
    }

    /// Column code for a full latent configuration `a` (length `K`).
    pub fn column_for(&self, a: &[usize], latent_levels: usize) -> usize {
        self.parents.iter().fold(0, |acc, &k| acc * latent_levels + a[k])
    }

    pub fn prob(&self, v: usize, column: usize) -> f64 {
        self.table[(v, column)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_rejects_empty_rows_and_bad_entries() {
        assert!(BipartiteGraph::from_rows(&[[1u8, 0], [0, 0]]).is_err());
        assert!(BipartiteGraph::from_rows(&[[1u8, 2]]).is_err());
        assert!(BipartiteGraph::from_rows(&[alloc::vec![1u8, 0], alloc::vec![1u8]]).is_err());
    }

    #[test]
    fn parent_sets_follow_edges() {
        let g = BipartiteGraph::from_rows(&[[1u8, 0], [1, 0], [0, 1], [0, 1], [1, 1]]).unwrap();
        assert_eq!(g.parents(0), &[0]);
        assert_eq!(g.parents(4), &[0, 1]);
        assert_eq!(g.parents_of_set(&[0, 2]), alloc::vec![0, 1]);
        assert_eq!(g.num_edges(), 6);
        let p = g.permute_rows(&[4, 0, 1, 2, 3]).unwrap();
        assert_eq!(p.parents(0), &[0, 1]);
        assert!(g.permute_rows(&[0, 0, 1, 2, 3]).is_err());
    }

    #[test]
    fn cardinalities_need_v_at_least_h() {
        assert!(CardinalitySpec::new(2, 3).is_err());
        assert!(CardinalitySpec::new(1, 1).is_err());
        assert!(CardinalitySpec::new(3, 2).is_ok());
    }

    #[test]
    fn independent_joint_is_outer_product() {
        let nu = LatentJoint::from_marginals(2, &[alloc::vec![0.3, 0.7], alloc::vec![0.6, 0.4]]);
        assert_eq!(nu.probs.len(), 4);
        // code 1 = (a_1, a_2) = (0, 1)
        assert!((nu.probs[1] - 0.3 * 0.4).abs() < 1e-15);
        assert!((nu.marginal(0)[1] - 0.7).abs() < 1e-15);
        assert!((nu.marginal(1)[0] - 0.6).abs() < 1e-15);
    }
}
