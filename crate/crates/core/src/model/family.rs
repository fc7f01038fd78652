use alloc::vec::Vec;

use super::{BipartiteGraph, CardinalitySpec};
use crate::error::{bail, Result};
use crate::index;
use crate::matrix::Matrix;

/// Monotone link mapping a linear predictor to a probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Link {
    Identity,
    Logistic,
    Probit,
}

impl Link {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Link::Identity => x,
            Link::Logistic => 1.0 / (1.0 + libm::exp(-x)),
            Link::Probit => 0.5 * libm::erfc(-x / core::f64::consts::SQRT_2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Link::Identity => "identity",
            Link::Logistic => "logistic",
            Link::Probit => "probit",
        }
    }
}

/// Family-specific parameters. Per-edge blocks are stored per observed
/// variable `j`, aligned with the sorted parent list `co(j)`.
///
/// The binary families (all but `GeneralRbm` and `ExplicitCpts`) need
/// `V = 2`. `NoisyOr` and `MainEffect` specify `P(Y_j = 0 | a)`;
/// `AllEffect` and `MainInteraction` specify `P(Y_j = 1 | a)`.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyParams {
    /// `P(Y_j = 0 | a) = exp(-(leak_j + sum_k w_jk a_k))`.
    NoisyOr { weights: Vec<Vec<f64>>, leak: Vec<f64> },
    /// `P(Y_j = 0 | a) = f(sum_k w_jk a_k)`.
    MainEffect { link: Link, weights: Vec<Vec<f64>> },
    /// `P(Y_j = 1 | a) = f(sum_{S ⊆ co(j)} beta_jS prod_{k in S} a_k)`.
    ///
    /// `coefficients[j][mask]`: bit `p` of `mask` selects the `p`-th parent
    /// of `j`, so `mask = 0` is the intercept.
    AllEffect { link: Link, coefficients: Vec<Vec<f64>> },
    /// `P(Y_j = 1 | a) = f(beta_j0 + sum_k beta_jk a_k + beta_j,all prod_k a_k)`.
    MainInteraction { link: Link, intercept: Vec<f64>, main: Vec<Vec<f64>>, interaction: Vec<f64> },
    /// Energy `sum_edges beta_{j,k}[y_j][a_k] + sum_j b_j[y_j] + sum_k c_k[a_k]`.
    ///
    /// `pair[j][p]` is the `V x H` table for the `p`-th parent of `j`.
    GeneralRbm { pair: Vec<Vec<Matrix>>, observed_bias: Vec<Vec<f64>>, latent_bias: Vec<Vec<f64>> },
    /// Raw `V x H^{|co(j)|}` tables.
    ExplicitCpts { tables: Vec<Matrix> },
}

impl FamilyParams {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyParams::NoisyOr { .. } => "noisy-or",
            FamilyParams::MainEffect { .. } => "main-effect",
            FamilyParams::AllEffect { .. } => "all-effect",
            FamilyParams::MainInteraction { .. } => "main-interaction",
            FamilyParams::GeneralRbm { .. } => "general-rbm",
            FamilyParams::ExplicitCpts { .. } => "explicit-cpts",
        }
    }

    pub fn is_directed(&self) -> bool {
        !matches!(self, FamilyParams::GeneralRbm { .. })
    }

    fn is_binary(&self) -> bool {
        !matches!(self, FamilyParams::GeneralRbm { .. } | FamilyParams::ExplicitCpts { .. })
    }

    pub(crate) fn validate(&self, graph: &BipartiteGraph, cards: &CardinalitySpec) -> Result<()> {
        let (j_count, k_count) = (graph.num_observed(), graph.num_latent());
        let (v, h) = (cards.observed_levels, cards.latent_levels);
        if self.is_binary() && v != 2 {
            bail!(Argument, "family {} models a binary response and needs V = 2, got V = {v}", self.name());
        }
        let per_edge = |name: &str, blocks: &Vec<Vec<f64>>| -> Result<()> {
            if blocks.len() != j_count {
                bail!(Argument, "{name}: expected {j_count} rows, got {}", blocks.len());
            }
            for (j, b) in blocks.iter().enumerate() {
                if b.len() != graph.parents(j).len() {
                    bail!(Argument, "{name}: variable {j} has {} parents but {} parameters", graph.parents(j).len(), b.len());
                }
            }
            Ok(())
        };
        let per_var = |name: &str, values: &Vec<f64>| -> Result<()> {
            if values.len() != j_count {
                bail!(Argument, "{name}: expected {j_count} entries, got {}", values.len());
            }
            Ok(())
        };
        match self {
            FamilyParams::NoisyOr { weights, leak } => {
                per_edge("noisy-or weights", weights)?;
                per_var("noisy-or leak", leak)?;
            }
            FamilyParams::MainEffect { weights, .. } => per_edge("main-effect weights", weights)?,
            FamilyParams::AllEffect { coefficients, .. } => {
                if coefficients.len() != j_count {
                    bail!(Argument, "all-effect: expected {j_count} rows, got {}", coefficients.len());
                }
                for (j, c) in coefficients.iter().enumerate() {
                    let want = 1usize << graph.parents(j).len();
                    if c.len() != want {
                        bail!(Argument, "all-effect: variable {j} needs {want} coefficients, got {}", c.len());
                    }
                }
            }
            FamilyParams::MainInteraction { intercept, main, interaction, .. } => {
                per_var("main-interaction intercept", intercept)?;
                per_edge("main-interaction main effects", main)?;
                per_var("main-interaction interaction", interaction)?;
            }
            FamilyParams::GeneralRbm { pair, observed_bias, latent_bias } => {
                if pair.len() != j_count || observed_bias.len() != j_count || latent_bias.len() != k_count {
                    bail!(Argument, "general-rbm: parameter blocks do not match J={j_count}, K={k_count}");
                }
                for (j, blocks) in pair.iter().enumerate() {
                    if blocks.len() != graph.parents(j).len() {
                        bail!(Argument, "general-rbm: variable {j} needs {} pair tables, got {}", graph.parents(j).len(), blocks.len());
                    }
                    if blocks.iter().any(|m| m.rows() != v || m.cols() != h) {
                        bail!(Argument, "general-rbm: pair tables of variable {j} must be {v}x{h}");
                    }
                }
                if observed_bias.iter().any(|b| b.len() != v) || latent_bias.iter().any(|c| c.len() != h) {
                    bail!(Argument, "general-rbm: bias vectors must have lengths V={v} / H={h}");
                }
            }
            FamilyParams::ExplicitCpts { tables } => {
                if tables.len() != j_count {
                    bail!(Argument, "explicit-cpts: expected {j_count} tables, got {}", tables.len());
                }
                for (j, t) in tables.iter().enumerate() {
                    let cols = index::checked_pow(h, graph.parents(j).len()).unwrap_or(usize::MAX);
                    if t.rows() != v || t.cols() != cols {
                        bail!(Argument, "explicit-cpts: table {j} must be {v}x{cols}, got {}x{}", t.rows(), t.cols());
                    }
                }
            }
        }
        Ok(())
    }

    /// Conditional table of observed variable `j` for a directed family.
    pub(crate) fn directed_table(&self, j: usize, graph: &BipartiteGraph, cards: &CardinalitySpec) -> Result<Matrix> {
        let parents = graph.parents(j);
        let h = cards.latent_levels;
        let cols = index::pow(h, parents.len());
        if let FamilyParams::ExplicitCpts { tables } = self {
            let t = &tables[j];
            for c in 0..cols {
                let col = t.column(c);
                if col.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    bail!(ParameterDomain, "explicit table {j}, column {c} has a negative or non-finite entry");
                }
                let s: f64 = col.iter().sum();
                if (s - 1.0).abs() > super::PMF_TOL {
                    bail!(ParameterDomain, "explicit table {j}, column {c} sums to {s}");
                }
            }
            return Ok(t.clone());
        }

        let mut table = Matrix::zeros(2, cols);
        let mut a = alloc::vec![0usize; parents.len()];
        for c in 0..cols {
            index::decode_into(c, h, &mut a);
            let (p, link, what_for_zero) = self.binary_probability(j, &a)?;
            if !p.is_finite() || !(0.0..=1.0).contains(&p) {
                bail!(
                    ParameterDomain,
                    "{} ({}) gives P(Y_{j} = {}) = {p} at parent configuration {a:?}",
                    self.name(),
                    link,
                    if what_for_zero { 0 } else { 1 }
                );
            }
            let (p0, p1) = if what_for_zero { (p, 1.0 - p) } else { (1.0 - p, p) };
            table[(0, c)] = p0;
            table[(1, c)] = p1;
        }
        Ok(table)
    }

    /// Returns `(probability, link name, whether it is P(Y = 0))`.
    fn binary_probability(&self, j: usize, a: &[usize]) -> Result<(f64, &'static str, bool)> {
        let af = |p: usize| a[p] as f64;
        Ok(match self {
            FamilyParams::NoisyOr { weights, leak } => {
                let s: f64 = leak[j] + weights[j].iter().enumerate().map(|(p, w)| w * af(p)).sum::<f64>();
                (libm::exp(-s), "exp", true)
            }
            FamilyParams::MainEffect { link, weights } => {
                let s: f64 = weights[j].iter().enumerate().map(|(p, w)| w * af(p)).sum();
                (link.apply(s), link.name(), true)
            }
            FamilyParams::AllEffect { link, coefficients } => {
                let s: f64 = coefficients[j]
                    .iter()
                    .enumerate()
                    .map(|(mask, beta)| {
                        let prod: f64 = (0..a.len()).filter(|p| mask >> p & 1 == 1).map(af).product();
                        beta * prod
                    })
                    .sum();
                (link.apply(s), link.name(), false)
            }
            FamilyParams::MainInteraction { link, intercept, main, interaction } => {
                let all: f64 = (0..a.len()).map(af).product();
                let s = intercept[j]
                    + main[j].iter().enumerate().map(|(p, w)| w * af(p)).sum::<f64>()
                    + interaction[j] * all;
                (link.apply(s), link.name(), false)
            }
            FamilyParams::GeneralRbm { .. } | FamilyParams::ExplicitCpts { .. } => {
                unreachable!("not a binary family")
            }
        })
    }
}
