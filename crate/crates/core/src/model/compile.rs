use alloc::vec::Vec;

use super::{BipartiteGraph, CardinalitySpec, Cpt, FamilyParams, LatentJoint, LatentSpec, ModelSpec};
use crate::error::{bail, Result};
use crate::index;
use crate::matrix::Matrix;

/// A model reduced to `(nu, CPTs)`, the form shared by directed models and
/// RBMs.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledModel {
    pub graph: BipartiteGraph,
    pub cards: CardinalitySpec,
    pub latent: LatentJoint,
    pub cpts: Vec<Cpt>,
}

/// Compiles a spec into its latent pmf and per-variable conditional tables.
///
/// For a general RBM the conditional of `Y_j` given `A = a` is the softmax
/// over `v` of `E_j(v) + sum_{k in co(j)} E_jk(v, a_k)`, and
///
/// ```text
/// nu_a ∝ exp(sum_k E_k(a_k)) * prod_j sum_v exp(E_j(v) + sum_{k in co(j)} E_jk(v, a_k))
/// ```
///
/// which follows from summing `y` out of the joint energy one coordinate at
/// a time. All of it is evaluated in log space.
pub fn compile_model(spec: &ModelSpec) -> Result<CompiledModel> {
    spec.validate()?;
    let (graph, cards) = (&spec.graph, &spec.cards);
    let h = cards.latent_levels;
    let k = graph.num_latent();
    if index::checked_pow(h, k).is_none() {
        bail!(Size, "H^K overflows for H={h} K={k}");
    }

    let (latent, cpts) = match &spec.family {
        FamilyParams::GeneralRbm { pair, observed_bias, latent_bias } => {
            compile_rbm(graph, cards, pair, observed_bias, latent_bias)?
        }
        family => {
            let cpts = (0..graph.num_observed())
                .map(|j| {
                    Ok(Cpt {
                        observed: j,
                        parents: graph.parents(j).to_vec(),
                        table: family.directed_table(j, graph, cards)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let latent = match &spec.latent {
                LatentSpec::Independent(marginals) => LatentJoint::from_marginals(h, marginals),
                LatentSpec::Joint(probs) => LatentJoint::new(k, h, probs.clone())?,
                LatentSpec::RbmInduced => unreachable!("rejected by validate"),
            };
            (latent, cpts)
        }
    };
    Ok(CompiledModel { graph: graph.clone(), cards: *cards, latent, cpts })
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    if !max.is_finite() {
        return max;
    }
    max + libm::log(values.iter().map(|&x| libm::exp(x - max)).sum::<f64>())
}

fn compile_rbm(
    graph: &BipartiteGraph,
    cards: &CardinalitySpec,
    pair: &[Vec<Matrix>],
    observed_bias: &[Vec<f64>],
    latent_bias: &[Vec<f64>],
) -> Result<(LatentJoint, Vec<Cpt>)> {
    let (v, h) = (cards.observed_levels, cards.latent_levels);
    let overflow = |what: &str| {
        crate::Error::NumericOverflow(alloc::format!(
            "{what} is not finite; recenter the RBM energies"
        ))
    };

    let mut cpts = Vec::with_capacity(graph.num_observed());
    // log sum_v exp(...) per variable and parent configuration.
    let mut log_partials: Vec<Vec<f64>> = Vec::with_capacity(graph.num_observed());
    for j in 0..graph.num_observed() {
        let parents = graph.parents(j);
        let cols = index::pow(h, parents.len());
        let mut table = Matrix::zeros(v, cols);
        let mut partial = Vec::with_capacity(cols);
        let mut a = alloc::vec![0usize; parents.len()];
        let mut logits = alloc::vec![0.0; v];
        for c in 0..cols {
            index::decode_into(c, h, &mut a);
            for (y, logit) in logits.iter_mut().enumerate() {
                *logit = observed_bias[j][y]
                    + pair[j].iter().zip(&a).map(|(m, &ak)| m[(y, ak)]).sum::<f64>();
            }
            let lse = log_sum_exp(&logits);
            if !lse.is_finite() {
                return Err(overflow("a conditional normalizer"));
            }
            for (y, logit) in logits.iter().enumerate() {
                table[(y, c)] = libm::exp(logit - lse);
            }
            partial.push(lse);
        }
        cpts.push(Cpt { observed: j, parents: parents.to_vec(), table });
        log_partials.push(partial);
    }

    let k = graph.num_latent();
    let cells = index::pow(h, k);
    let mut digits = alloc::vec![0usize; k];
    let log_weights: Vec<f64> = (0..cells)
        .map(|code| {
            index::decode_into(code, h, &mut digits);
            let latent: f64 = digits.iter().enumerate().map(|(kk, &ak)| latent_bias[kk][ak]).sum();
            let observed: f64 = cpts
                .iter()
                .zip(&log_partials)
                .map(|(cpt, lp)| lp[cpt.column_for(&digits, h)])
                .sum();
            latent + observed
        })
        .collect();
    let log_norm = log_sum_exp(&log_weights);
    if !log_norm.is_finite() {
        return Err(overflow("the latent normalizer"));
    }
    let probs: Vec<f64> = log_weights.iter().map(|w| libm::exp(w - log_norm)).collect();
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(overflow("a latent probability"));
    }
    Ok((LatentJoint { num_latent: k, levels: h, probs }, cpts))
}
