//! Finite-sample pipeline: forward sampling, empirical tensors and a
//! gap-based rank rule that plugs into the recovery stages.
//!
//! Sampling is split into blocks of [`SAMPLE_BLOCK`] rows. Block `b` draws
//! from `ChaCha8Rng::seed_from_u64(seed)` on stream `b`, so the output does
//! not depend on how many workers process the blocks.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Result};
use crate::exec::Executor;
use crate::index;
use crate::linalg::RankReport;
use crate::model::CompiledModel;
use crate::recover::{recover_with, RankRule, RecoveryConfig, RecoveryResult};
use crate::tensor::{PopTensor, TensorBudget, UnfoldedMatrix};

pub const SAMPLE_BLOCK: usize = 4096;

/// `n` observations of `J` variables, flat row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleSet {
    pub n: usize,
    pub seed: u64,
    pub num_observed: usize,
    pub levels: usize,
    pub data: Vec<u8>,
}

impl SampleSet {
    pub fn new(num_observed: usize, levels: usize, seed: u64, data: Vec<u8>) -> Result<Self> {
        if num_observed == 0 || !(2..=256).contains(&levels) {
            bail!(Argument, "samples need J >= 1 and 2 <= V <= 256, got J={num_observed} V={levels}");
        }
        if data.len() % num_observed != 0 {
            bail!(Argument, "{} values do not split into rows of length {num_observed}", data.len());
        }
        if let Some(bad) = data.iter().find(|&&v| v as usize >= levels) {
            bail!(Argument, "sample value {bad} is out of range for V = {levels}");
        }
        Ok(Self { n: data.len() / num_observed, seed, num_observed, levels, data })
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.num_observed..(i + 1) * self.num_observed]
    }
}

fn cumulative(p: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    p.map(|x| {
        acc += x;
        acc
    })
    .collect()
}

/// Smallest `i` with `cdf[i] > u`, falling back to the last index that
/// carries mass when rounding leaves `cdf` short of 1.
fn inverse_cdf(cdf: &[f64], u: f64) -> usize {
    let i = cdf.partition_point(|&c| c <= u);
    if i < cdf.len() {
        return i;
    }
    let mut last = cdf.len() - 1;
    while last > 0 && cdf[last] == cdf[last - 1] {
        last -= 1;
    }
    last
}

/// Draws `n` i.i.d. rows: `a` from the latent joint, then every `Y_j` from
/// its CPT column.
pub fn sample<E: Executor>(model: &CompiledModel, n: usize, seed: u64, exec: &E) -> Result<SampleSet> {
    let jn = model.cpts.len();
    let v = model.cards.observed_levels;
    let h = model.cards.latent_levels;
    let kn = model.latent.num_latent;
    if v > 256 {
        bail!(Argument, "sampling stores values as bytes; V = {v} is too large");
    }
    let latent_cdf = cumulative(model.latent.probs.iter().copied());
    let cpt_cdfs: Vec<Vec<Vec<f64>>> = model
        .cpts
        .iter()
        .map(|c| (0..c.table.cols()).map(|col| cumulative((0..v).map(|y| c.prob(y, col)))).collect())
        .collect();

    let blocks = n.div_ceil(SAMPLE_BLOCK);
    let parts = exec.map_indexed(blocks, |b| {
        let rows = SAMPLE_BLOCK.min(n - b * SAMPLE_BLOCK);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b as u64);
        let mut a = alloc::vec![0usize; kn];
        let mut out = Vec::with_capacity(rows * jn);
        for _ in 0..rows {
            let code = inverse_cdf(&latent_cdf, rng.gen::<f64>());
            index::decode_into(code, h, &mut a);
            for (cpt, cdfs) in model.cpts.iter().zip(&cpt_cdfs) {
                let col = cpt.column_for(&a, h);
                out.push(inverse_cdf(&cdfs[col], rng.gen::<f64>()) as u8);
            }
        }
        out
    });
    let data = parts.concat();
    Ok(SampleSet { n, seed, num_observed: jn, levels: v, data })
}

/// Integer cell counts in the population-tensor layout.
pub fn cell_counts(s: &SampleSet, budget: &TensorBudget) -> Result<Vec<u64>> {
    let cells = index::checked_pow(s.levels, s.num_observed).filter(|&c| c <= budget.max_observed_cells);
    let Some(cells) = cells else {
        bail!(Size, "V^J for V={} J={} exceeds the budget of {} cells", s.levels, s.num_observed, budget.max_observed_cells);
    };
    let mut counts = alloc::vec![0u64; cells];
    for i in 0..s.n {
        let code = s.row(i).iter().fold(0usize, |acc, &y| acc * s.levels + y as usize);
        counts[code] += 1;
    }
    Ok(counts)
}

/// Relative frequencies `count / n`.
pub fn empirical_tensor(s: &SampleSet, budget: &TensorBudget) -> Result<PopTensor> {
    if s.n == 0 {
        bail!(Argument, "empirical tensor needs at least one observation");
    }
    let counts = cell_counts(s, budget)?;
    let n = s.n as f64;
    PopTensor::new(s.num_observed, s.levels, counts.into_iter().map(|c| c as f64 / n).collect())
}

/// Largest relative gap: `argmax_{1 <= r <= max_rank} sigma_r / sigma_{r+1}`,
/// ties toward the smaller `r`. A zero successor counts as an infinite gap;
/// `0 / 0` counts as no gap. `max_rank` is clamped to one less than the
/// number of singular values.
pub fn estimate_rank_gap(report: &RankReport, max_rank: usize) -> usize {
    let sv = &report.singular_values;
    let top = max_rank.min(sv.len().saturating_sub(1));
    let mut best = (0usize, 0.0);
    for r in 1..=top {
        let (a, b) = (sv[r - 1], sv[r]);
        let ratio = if b > 0.0 {
            a / b
        } else if a > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if ratio > best.1 {
            best = (r, ratio);
        }
    }
    best.0
}

/// Sampling-noise scale of an empirical unfolding from `n` samples:
/// `(sqrt(max row sum) + sqrt(max column sum)) / sqrt(n)`, a rough bound on
/// the spectral norm of multinomial noise.
pub fn sampling_noise(m: &crate::Matrix, n: u64) -> f64 {
    let row_max = (0..m.rows()).map(|i| m.row(i).iter().sum::<f64>()).fold(0.0, f64::max);
    let col_max = (0..m.cols()).map(|j| (0..m.rows()).map(|i| m[(i, j)]).sum::<f64>()).fold(0.0, f64::max);
    (libm::sqrt(row_max) + libm::sqrt(col_max)) / libm::sqrt(n as f64)
}

pub const DEFAULT_FLOOR_SCALE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmpiricalRule {
    /// Counts singular values above `scale * sampling_noise`, never below
    /// `tol_rel * sigma_1`.
    NoiseFloor { scale: f64 },
    /// Largest-gap rule on the spectrum clamped from below at the same
    /// floor, with the floor appended so a full-rank matrix can still win.
    /// Signal spectra often have internal gaps wider than the gap to the
    /// noise, so this undercounts on weak-signal models.
    Gap { floor_scale: f64 },
    /// Counts singular values above a fixed absolute threshold.
    Absolute { threshold: f64 },
}

impl Default for EmpiricalRule {
    fn default() -> Self {
        EmpiricalRule::NoiseFloor { scale: DEFAULT_FLOOR_SCALE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalConfig {
    pub recovery: RecoveryConfig,
    pub rule: EmpiricalRule,
    pub budget: TensorBudget,
}

impl EmpiricalConfig {
    pub fn new(latent_levels: usize) -> Self {
        Self { recovery: RecoveryConfig::new(latent_levels), rule: EmpiricalRule::default(), budget: TensorBudget::default() }
    }
}

/// [`RankRule`] for tensors estimated from `n` samples; `n = None` means
/// the tensor is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleRankRule {
    pub rule: EmpiricalRule,
    pub n: Option<u64>,
    pub tol_rel: f64,
}

impl SampleRankRule {
    /// Floor for floor-based rules; `tol_rel * sigma_1` when the tensor is exact.
    pub fn noise_floor(&self, m: &crate::Matrix, sigma_1: f64) -> f64 {
        let rel = self.tol_rel * sigma_1;
        let scale = match self.rule {
            EmpiricalRule::NoiseFloor { scale } => scale,
            EmpiricalRule::Gap { floor_scale } => floor_scale,
            EmpiricalRule::Absolute { .. } => return rel,
        };
        match self.n {
            Some(n) => (scale * sampling_noise(m, n)).max(rel),
            None => rel,
        }
    }
}

impl RankRule for SampleRankRule {
    fn decide(&self, unfolded: &UnfoldedMatrix, report: &RankReport) -> usize {
        let sv = &report.singular_values;
        let top = sv.first().copied().unwrap_or(0.0);
        if top == 0.0 {
            return 0;
        }
        match self.rule {
            EmpiricalRule::Absolute { threshold } => sv.iter().take_while(|&&s| s > threshold).count(),
            EmpiricalRule::NoiseFloor { .. } => {
                let floor = self.noise_floor(&unfolded.matrix, top);
                sv.iter().take_while(|&&s| s > floor).count()
            }
            EmpiricalRule::Gap { .. } => {
                let floor = self.noise_floor(&unfolded.matrix, top);
                let mut clamped: Vec<f64> = sv.iter().map(|&s| s.max(floor)).collect();
                clamped.push(floor);
                let augmented = RankReport { singular_values: clamped, ..report.clone() };
                estimate_rank_gap(&augmented, sv.len())
            }
        }
    }
}

/// Recovery on an empirical tensor built from `n` samples (`None` when the
/// tensor is exact).
pub fn recover_tensor_empirical<E: Executor>(t: &PopTensor, n: Option<u64>, cfg: &EmpiricalConfig, exec: &E) -> Result<RecoveryResult> {
    if let EmpiricalRule::Absolute { threshold } = cfg.rule {
        if !(threshold > 0.0 && threshold.is_finite()) {
            bail!(Argument, "absolute rank threshold must be positive, got {threshold}");
        }
    }
    if let EmpiricalRule::NoiseFloor { scale: f } | EmpiricalRule::Gap { floor_scale: f } = cfg.rule {
        if !(f >= 0.0 && f.is_finite()) {
            bail!(Argument, "noise floor scale must be nonnegative, got {f}");
        }
    }
    let rule = SampleRankRule { rule: cfg.rule, n, tol_rel: cfg.recovery.tol_rel };
    recover_with(t, &cfg.recovery, &rule, exec)
}

pub fn recover_graph_empirical<E: Executor>(s: &SampleSet, cfg: &EmpiricalConfig, exec: &E) -> Result<RecoveryResult> {
    let t = empirical_tensor(s, &cfg.budget)?;
    recover_tensor_empirical(&t, Some(s.n as u64), cfg, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Serial;
    use crate::matrix::Matrix;
    use crate::model::{compile_model, random_model, BipartiteGraph, CardinalitySpec, Cpt, FamilyKind, GenerateOptions, LatentJoint};
    use crate::recover::{canonical_columns, recover_graph};
    use crate::tensor::population_tensor;

    fn report(sv: &[f64]) -> RankReport {
        RankReport::with_threshold(sv.to_vec(), 1e-8)
    }

    fn toy(seed: u64) -> CompiledModel {
        let mut opts = GenerateOptions::new(FamilyKind::NoisyOr);
        opts.extra_rows = Some(alloc::vec![alloc::vec![1, 1]]);
        opts.shuffle_rows = false;
        let g = random_model(5, 2, 2, 2, &opts, seed).unwrap();
        compile_model(&g.spec).unwrap()
    }

    fn population(m: &CompiledModel) -> PopTensor {
        population_tensor(&m.latent, &m.cpts, &TensorBudget::default(), &Serial).unwrap()
    }

    #[test]
    fn gap_examples() {
        assert_eq!(estimate_rank_gap(&report(&[1.0, 1e-9, 1e-10]), 2), 1);
        assert_eq!(estimate_rank_gap(&report(&[1.0, 1.0, 1.0, 1.0]), 3), 1);
        assert_eq!(estimate_rank_gap(&report(&[3.0, 2.0, 1e-6, 1e-7]), 3), 2);
        assert_eq!(estimate_rank_gap(&report(&[3.0, 2.0, 0.0]), 2), 2);
        assert_eq!(estimate_rank_gap(&report(&[3.0, 2.0, 0.0]), 1), 1);
        assert_eq!(estimate_rank_gap(&report(&[0.0, 0.0]), 1), 0);
    }

    #[test]
    fn gap_matches_exact_rank_on_population_unfoldings() {
        for seed in 0..5 {
            let t = population(&toy(seed));
            for (pair, expected) in [([0usize, 1], 2usize), ([2, 3], 2), ([0, 2], 4)] {
                let u = crate::tensor::unfold_against_rest(&t, &pair).unwrap();
                let r = crate::linalg::numerical_rank(&u.matrix, 1e-8).unwrap();
                assert_eq!(r.numerical_rank, expected);
                for rule in [EmpiricalRule::default(), EmpiricalRule::Gap { floor_scale: 1.0 }] {
                    let rule = SampleRankRule { rule, n: None, tol_rel: 1e-8 };
                    assert_eq!(rule.decide(&u, &r), expected);
                }
            }
        }
    }

    fn point_mass_model() -> CompiledModel {
        let graph = BipartiteGraph::from_rows(&[[1u8], [1], [1]]).unwrap();
        let cards = CardinalitySpec::new(3, 2).unwrap();
        let one_hot = |v: usize| Matrix::from_fn(3, 2, |r, c| if r == (v + c) % 3 { 1.0 } else { 0.0 });
        let cpts = (0..3).map(|j| Cpt { observed: j, parents: alloc::vec![0], table: one_hot(j) }).collect();
        CompiledModel { graph, cards, latent: LatentJoint::new(1, 2, alloc::vec![0.0, 1.0]).unwrap(), cpts }
    }

    #[test]
    fn deterministic_model_repeats_forced_outcome() {
        let s = sample(&point_mass_model(), 5000, 3, &Serial).unwrap();
        assert_eq!(s.n, 5000);
        for i in 0..s.n {
            assert_eq!(s.row(i), &[1, 2, 0]);
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let m = toy(1);
        let a = sample(&m, 10_000, 8, &Serial).unwrap();
        let b = sample(&m, 10_000, 8, &Serial).unwrap();
        assert_eq!(a, b);
        let c = sample(&m, 10_000, 9, &Serial).unwrap();
        assert_ne!(a.data, c.data);
        // A prefix of blocks does not depend on n.
        let d = sample(&m, SAMPLE_BLOCK, 8, &Serial).unwrap();
        assert_eq!(&a.data[..d.data.len()], &d.data[..]);
    }

    #[test]
    fn single_observation_is_one_hot() {
        let s = SampleSet::new(3, 2, 0, alloc::vec![1, 0, 1]).unwrap();
        let t = empirical_tensor(&s, &TensorBudget::default()).unwrap();
        let mut expected = alloc::vec![0.0; 8];
        expected[0b101] = 1.0;
        assert_eq!(t.as_slice(), &expected[..]);
    }

    #[test]
    fn merged_halves_average() {
        let m = toy(2);
        let s = sample(&m, 6000, 4, &Serial).unwrap();
        let (lo, hi) = s.data.split_at(3000 * 5);
        let ta = empirical_tensor(&SampleSet::new(5, 2, 0, lo.to_vec()).unwrap(), &TensorBudget::default()).unwrap();
        let tb = empirical_tensor(&SampleSet::new(5, 2, 0, hi.to_vec()).unwrap(), &TensorBudget::default()).unwrap();
        let t = empirical_tensor(&s, &TensorBudget::default()).unwrap();
        for i in 0..t.as_slice().len() {
            assert!((t.as_slice()[i] - 0.5 * (ta.as_slice()[i] + tb.as_slice()[i])).abs() < 1e-15);
        }
        let counts = cell_counts(&s, &TensorBudget::default()).unwrap();
        assert_eq!(counts.iter().sum::<u64>(), 6000);
    }

    #[test]
    fn empty_sample_rejected() {
        let s = SampleSet::new(2, 2, 0, Vec::new()).unwrap();
        assert!(empirical_tensor(&s, &TensorBudget::default()).is_err());
        assert!(SampleSet::new(2, 2, 0, alloc::vec![0, 2]).is_err());
        assert!(SampleSet::new(2, 2, 0, alloc::vec![0]).is_err());
    }

    #[test]
    fn frequencies_within_binomial_band() {
        let m = toy(3);
        let n = 200_000;
        let t = population(&m);
        let e = empirical_tensor(&sample(&m, n, 11, &Serial).unwrap(), &TensorBudget::default()).unwrap();
        let inside = t
            .as_slice()
            .iter()
            .zip(e.as_slice())
            .filter(|(&p, &f)| (p - f).abs() <= 5.0 * libm::sqrt(p * (1.0 - p) / n as f64))
            .count();
        assert!(inside * 100 >= 99 * t.as_slice().len(), "{inside} of {}", t.as_slice().len());
    }

    #[test]
    fn population_pass_through_matches() {
        for seed in 0..5 {
            let t = population(&toy(seed));
            let exact = recover_graph(&t, 2, 1e-8).unwrap();
            for rule in [EmpiricalRule::default(), EmpiricalRule::Gap { floor_scale: 1.0 }] {
                let cfg = EmpiricalConfig { rule, ..EmpiricalConfig::new(2) };
                assert_eq!(exact, recover_tensor_empirical(&t, None, &cfg, &Serial).unwrap());
            }
        }
    }

    #[test]
    fn gap_rule_undercounts_internal_signal_gap() {
        // Two strong and two weak signal directions, all far above the floor.
        let u = UnfoldedMatrix {
            row_group: alloc::vec![0, 1],
            col_group: alloc::vec![2, 3],
            matrix: Matrix::from_fn(4, 4, |i, j| if i == j { [0.4, 0.33, 0.017, 0.005][i] } else { 0.0 }),
        };
        let r = crate::linalg::numerical_rank(&u.matrix, 1e-8).unwrap();
        let floor = SampleRankRule { rule: EmpiricalRule::default(), n: Some(1_000_000), tol_rel: 1e-8 };
        let gap = SampleRankRule { rule: EmpiricalRule::Gap { floor_scale: 0.5 }, ..floor };
        assert_eq!(floor.decide(&u, &r), 4);
        assert_eq!(gap.decide(&u, &r), 2);
    }

    #[test]
    fn tiny_sample_does_not_crash() {
        let m = toy(0);
        let s = sample(&m, 10, 42, &Serial).unwrap();
        let r = recover_graph_empirical(&s, &EmpiricalConfig::new(2), &Serial).unwrap();
        assert_eq!(r.g_hat.len(), 5);
    }

    #[test]
    fn toy_recovered_from_samples() {
        let m = toy(0);
        let s = sample(&m, 1_000_000, 42, &Serial).unwrap();
        let r = recover_graph_empirical(&s, &EmpiricalConfig::new(2), &Serial).unwrap();
        assert_eq!(r.k_hat, 2);
        assert_eq!(canonical_columns(&r.g_hat), canonical_columns(&m.graph.rows()));
    }

    #[test]
    fn absolute_rule() {
        let m = toy(0);
        let t = population(&m);
        let cfg = EmpiricalConfig { rule: EmpiricalRule::Absolute { threshold: 1e-9 }, ..EmpiricalConfig::new(2) };
        let r = recover_tensor_empirical(&t, Some(1), &cfg, &Serial).unwrap();
        assert_eq!(r.g_hat, m.graph.rows());
        let bad = EmpiricalConfig { rule: EmpiricalRule::Absolute { threshold: 0.0 }, ..EmpiricalConfig::new(2) };
        assert!(recover_tensor_empirical(&t, None, &bad, &Serial).is_err());
    }
}
