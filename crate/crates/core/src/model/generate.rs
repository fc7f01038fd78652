//! Random models satisfying the identifiability condition: the graph is
//! `(I_K; I_K; G*)` up to a row permutation (canonically stacked as
//! `e_1, e_1, e_2, e_2, ..., e_K, e_K, G*`, pure children grouped), and parameters are drawn from
//! continuous distributions bounded away from the degenerate sets.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    check_assumption_1, check_assumption_2, compile_model, BipartiteGraph, CardinalitySpec,
    FamilyParams, LatentSpec, Link, ModelSpec, Tolerances,
};
use crate::error::{bail, Result};
use crate::index;
use crate::matrix::Matrix;

/// Family to draw parameters for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    NoisyOr,
    MainEffect(Link),
    AllEffect(Link),
    MainInteraction(Link),
    GeneralRbm,
    /// Generic categorical tables, each column drawn from a flat Dirichlet.
    ExplicitCpts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateOptions {
    pub family: FamilyKind,
    /// Pins `G*` (the rows after the `2K` pure children). When absent, each
    /// extra row is drawn with at least two parents.
    pub extra_rows: Option<Vec<Vec<u8>>>,
    /// Shuffle the canonical rows; the order is recorded.
    pub shuffle_rows: bool,
    pub max_attempts: usize,
    pub tolerances: Tolerances,
}

impl GenerateOptions {
    pub fn new(family: FamilyKind) -> Self {
        Self { family, extra_rows: None, shuffle_rows: true, max_attempts: 100, tolerances: Tolerances::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedModel {
    pub spec: ModelSpec,
    /// Row `i` of `spec.graph` is row `row_order[i]` of the canonical stack.
    pub row_order: Vec<usize>,
    pub attempts: usize,
}

/// Draws a model with `J` observed and `K` latent variables whose compiled
/// form passes both assumption checks, retrying up to
/// `opts.max_attempts` times. Deterministic in `seed`.
pub fn random_model(
    num_observed: usize,
    num_latent: usize,
    observed_levels: usize,
    latent_levels: usize,
    opts: &GenerateOptions,
    seed: u64,
) -> Result<GeneratedModel> {
    let (jn, kn) = (num_observed, num_latent);
    if kn == 0 || jn < 2 * kn {
        bail!(Argument, "need K >= 1 and J >= 2K, got J={jn} K={kn}");
    }
    let cards = CardinalitySpec::new(observed_levels, latent_levels)?;
    if let Some(rows) = &opts.extra_rows {
        if rows.len() != jn - 2 * kn {
            bail!(Argument, "{} pinned extra rows given, J - 2K = {}", rows.len(), jn - 2 * kn);
        }
        if rows.iter().any(|r| r.len() != kn || r.iter().any(|&g| g > 1) || r.iter().all(|&g| g == 0)) {
            bail!(Argument, "pinned extra rows must be nonzero 0/1 rows of length K={kn}");
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=opts.max_attempts {
        let extra: Vec<Vec<u8>> = match &opts.extra_rows {
            Some(rows) => rows.clone(),
            None => (0..jn - 2 * kn).map(|_| draw_multi_parent_row(&mut rng, kn)).collect(),
        };
        let mut canonical: Vec<Vec<u8>> = Vec::with_capacity(jn);
        for k in 0..2 * kn {
            canonical.push((0..kn).map(|i| (i == k / 2) as u8).collect());
        }
        canonical.extend(extra);

        let mut order: Vec<usize> = (0..jn).collect();
        if opts.shuffle_rows {
            for i in (1..jn).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
        }
        let rows: Vec<Vec<u8>> = order.iter().map(|&i| canonical[i].clone()).collect();
        let graph = BipartiteGraph::from_rows(&rows)?;

        let spec = random_parameters(&graph, &cards, opts.family, &mut rng)?;
        let compiled = match compile_model(&spec) {
            Ok(c) => c,
            Err(crate::Error::ParameterDomain(_)) | Err(crate::Error::NumericOverflow(_)) => continue,
            Err(e) => return Err(e),
        };
        let a1 = check_assumption_1(&compiled.cpts, &cards, &graph, opts.tolerances.rank_tol_rel);
        let a2 = check_assumption_2(&compiled.cpts, &graph, &cards, opts.tolerances.eq_tol);
        if a1.passed && a2.passed {
            return Ok(GeneratedModel { spec, row_order: order, attempts: attempt });
        }
    }
    bail!(Generation, "no draw passed the assumption checks in {} attempts", opts.max_attempts)
}

fn draw_multi_parent_row(rng: &mut impl Rng, k: usize) -> Vec<u8> {
    if k == 1 {
        return alloc::vec![1];
    }
    loop {
        let row: Vec<u8> = (0..k).map(|_| rng.gen_bool(0.5) as u8).collect();
        if row.iter().filter(|&&g| g == 1).count() >= 2 {
            return row;
        }
    }
}

/// `Uniform[-2, -0.5] ∪ [0.5, 2]`.
fn signed_effect(rng: &mut impl Rng) -> f64 {
    let m = rng.gen_range(0.5..=2.0);
    if rng.gen_bool(0.5) {
        m
    } else {
        -m
    }
}

fn energy(rng: &mut impl Rng) -> f64 {
    rng.gen_range(-1.5..=1.5)
}

/// Flat Dirichlet via normalized unit exponentials.
fn dirichlet(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..len).map(|_| -libm::log(1.0 - rng.gen::<f64>())).collect();
    let total: f64 = draws.iter().sum();
    draws.iter().map(|x| x / total).collect()
}

/// Flat Dirichlet conditioned on every entry being at least `floor`.
fn bounded_dirichlet(rng: &mut impl Rng, len: usize, floor: f64) -> Vec<f64> {
    loop {
        let p = dirichlet(rng, len);
        if p.iter().all(|&x| x >= floor) {
            return p;
        }
    }
}

const LATENT_FLOOR: f64 = 0.05;
const IDENTITY_RESAMPLES: usize = 1000;

/// One parameter draw for a fixed graph. No assumption checks.
pub fn random_parameters(
    graph: &BipartiteGraph,
    cards: &CardinalitySpec,
    family: FamilyKind,
    rng: &mut impl Rng,
) -> Result<ModelSpec> {
    let (v, h) = (cards.observed_levels, cards.latent_levels);
    let binary = !matches!(family, FamilyKind::GeneralRbm | FamilyKind::ExplicitCpts);
    if binary && v != 2 {
        bail!(Argument, "{family:?} models a binary response and needs V = 2, got V = {v}");
    }
    let jn = graph.num_observed();
    let sizes: Vec<usize> = (0..jn).map(|j| graph.parents(j).len()).collect();

    let family_params = match family {
        FamilyKind::NoisyOr => FamilyParams::NoisyOr {
            weights: sizes.iter().map(|&n| (0..n).map(|_| rng.gen_range(0.5..=2.5)).collect()).collect(),
            leak: alloc::vec![0.0; jn],
        },
        FamilyKind::MainEffect(link) => {
            let weights = sizes
                .iter()
                .map(|&n| {
                    if link == Link::Identity {
                        // Keeps sum_k w_jk a_k inside [0, 1].
                        let s = 1.0 / (2.0 * n as f64 * (h - 1) as f64);
                        (0..n).map(|_| rng.gen_range(0.5..=2.0) * s).collect()
                    } else {
                        (0..n).map(|_| signed_effect(rng)).collect()
                    }
                })
                .collect();
            FamilyParams::MainEffect { link, weights }
        }
        FamilyKind::AllEffect(link) => {
            let coefficients = sizes
                .iter()
                .map(|&n| {
                    if link == Link::Identity {
                        identity_draw(rng, n, h, 0.25 / (1u64 << n) as f64, |beta, a| {
                            subset_predictor(beta, a)
                        }, 1usize << n)
                    } else {
                        (0..1usize << n).map(|_| signed_effect(rng)).collect()
                    }
                })
                .collect();
            FamilyParams::AllEffect { link, coefficients }
        }
        FamilyKind::MainInteraction(link) => {
            let mut intercept = Vec::with_capacity(jn);
            let mut main = Vec::with_capacity(jn);
            let mut interaction = Vec::with_capacity(jn);
            for &n in &sizes {
                // Layout of the draw: [intercept, main_1..main_n, interaction].
                let draw = if link == Link::Identity {
                    identity_draw(rng, n, h, 0.25 / (n + 1) as f64, main_interaction_predictor, n + 2)
                } else {
                    (0..n + 2).map(|_| signed_effect(rng)).collect()
                };
                intercept.push(draw[0]);
                main.push(draw[1..=n].to_vec());
                interaction.push(draw[n + 1]);
            }
            FamilyParams::MainInteraction { link, intercept, main, interaction }
        }
        FamilyKind::GeneralRbm => {
            let pair = sizes
                .iter()
                .map(|&n| (0..n).map(|_| Matrix::from_fn(v, h, |_, _| energy(rng))).collect())
                .collect();
            let observed_bias = (0..jn).map(|_| (0..v).map(|_| energy(rng)).collect()).collect();
            let latent_bias =
                (0..graph.num_latent()).map(|_| (0..h).map(|_| energy(rng)).collect()).collect();
            FamilyParams::GeneralRbm { pair, observed_bias, latent_bias }
        }
        FamilyKind::ExplicitCpts => {
            let tables = sizes
                .iter()
                .map(|&n| {
                    let cols = index::pow(h, n);
                    let columns: Vec<Vec<f64>> = (0..cols).map(|_| dirichlet(rng, v)).collect();
                    Matrix::from_fn(v, cols, |r, c| columns[c][r])
                })
                .collect();
            FamilyParams::ExplicitCpts { tables }
        }
    };

    let latent = match family {
        FamilyKind::GeneralRbm => LatentSpec::RbmInduced,
        _ => LatentSpec::Independent(
            (0..graph.num_latent()).map(|_| bounded_dirichlet(rng, h, LATENT_FLOOR)).collect(),
        ),
    };
    let spec = ModelSpec { graph: graph.clone(), cards: *cards, family: family_params, latent };
    spec.validate()?;
    Ok(spec)
}

fn subset_predictor(beta: &[f64], a: &[usize]) -> f64 {
    beta.iter()
        .enumerate()
        .map(|(mask, b)| {
            let prod: f64 = (0..a.len()).filter(|p| mask >> p & 1 == 1).map(|p| a[p] as f64).product();
            b * prod
        })
        .sum()
}

fn main_interaction_predictor(beta: &[f64], a: &[usize]) -> f64 {
    let n = a.len();
    let all: f64 = a.iter().map(|&x| x as f64).product();
    beta[0] + a.iter().zip(&beta[1..=n]).map(|(&x, w)| w * x as f64).sum::<f64>() + beta[n + 1] * all
}

/// Draws an intercept in `[0.25, 0.75]` followed by `len - 1` signed effects
/// scaled by `scale`, resampling until the predictor is a probability for
/// every parent configuration. Falls through with the last draw if none
/// fits; compilation then rejects it and the caller retries.
fn identity_draw(
    rng: &mut impl Rng,
    parents: usize,
    h: usize,
    scale: f64,
    predictor: impl Fn(&[f64], &[usize]) -> f64,
    len: usize,
) -> Vec<f64> {
    let configs = index::pow(h, parents);
    let mut a = alloc::vec![0usize; parents];
    let mut beta = Vec::new();
    for _ in 0..IDENTITY_RESAMPLES {
        beta.clear();
        beta.push(rng.gen_range(0.25..=0.75));
        beta.extend((1..len).map(|_| signed_effect(rng) * scale));
        let valid = (0..configs).all(|c| {
            index::decode_into(c, h, &mut a);
            (0.0..=1.0).contains(&predictor(&beta, &a))
        });
        if valid {
            break;
        }
    }
    beta
}
