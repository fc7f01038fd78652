//! Recovery of `K` and `G` from the population tensor.
//!
//! Stage 1 unfolds `T` with every pair `{j1, j2}` as the row group; the pair
//! has rank at most `H` exactly when both variables are pure children of the
//! same latent. Connected components of the passing pairs are the pure
//! groups and their count is `K`.
//!
//! Stage 2 picks two representatives from each group, `B = {b_1..b_K}` and
//! `C = {c_1..c_K}`, and for each remaining variable `j` and latent `k`
//! checks whether `[T]_{(B \ {b_k}) ∪ {j}, C}` has rank above `H^(K-1)`;
//! that happens exactly when `k ∈ co(j)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::exec::{Executor, Serial};
use crate::index;
use crate::linalg::{for_each_subset, gap_at, numerical_rank, RankReport};
use crate::matrix::Matrix;
use crate::tensor::{unfold, PopTensor, UnfoldedMatrix};

/// Turns the spectrum of an unfolding into a rank decision.
pub trait RankRule: Sync {
    fn decide(&self, unfolded: &UnfoldedMatrix, report: &RankReport) -> usize;
}

/// Counts singular values above `tol_rel * sigma_1`; exact-arithmetic
/// ranks of population tensors.
#[derive(Debug, Clone, Copy, Default)]
pub struct RelativeThreshold;

impl RankRule for RelativeThreshold {
    fn decide(&self, _unfolded: &UnfoldedMatrix, report: &RankReport) -> usize {
        report.numerical_rank
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryConfig {
    pub latent_levels: usize,
    pub tol_rel: f64,
    /// Stage 1 from marginals of this order instead of the full tensor.
    pub marginal_order: Option<usize>,
    /// Refuse stage-2 unfoldings with more than this many rows (`V^K`).
    pub max_unfold_side: usize,
}

impl RecoveryConfig {
    pub fn new(latent_levels: usize) -> Self {
        Self {
            latent_levels,
            tol_rel: crate::linalg::DEFAULT_TOL_REL,
            marginal_order: None,
            max_unfold_side: 1 << 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestKind {
    /// Stage 1: is `{first, second}` a pure pair?
    Pair { first: usize, second: usize },
    /// Stage 2: is `latent ∈ co(observed)`?
    Membership { observed: usize, latent: usize },
}

/// One rank certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct TestRecord {
    pub kind: TestKind,
    pub row_group: Vec<usize>,
    pub col_group: Vec<usize>,
    pub singular_values: Vec<f64>,
    /// The decided rank.
    pub rank: usize,
    /// `sigma_r / sigma_{r+1}` at the decided rank.
    pub gap_ratio: f64,
    /// `H` for pair tests, `H^(K-1)` for membership tests.
    pub bound: usize,
    /// Pair tests: `rank <= bound`. Membership tests: `rank > bound`.
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage1 {
    pub k_hat: usize,
    pub pure_groups: Vec<Vec<usize>>,
    pub records: Vec<TestRecord>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage2 {
    /// `(j, row)` for each variable outside the pure groups.
    pub rows: Vec<(usize, Vec<u8>)>,
    pub records: Vec<TestRecord>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    pub k_hat: usize,
    /// `J x k_hat`, columns ordered like `pure_groups`.
    pub g_hat: Vec<Vec<u8>>,
    pub pure_groups: Vec<Vec<usize>>,
    pub stage1_records: Vec<TestRecord>,
    pub stage2_records: Vec<TestRecord>,
    pub warnings: Vec<String>,
}

fn certify<R: RankRule>(
    t: &PopTensor,
    kind: TestKind,
    rows: &[usize],
    cols: &[usize],
    bound: usize,
    tol_rel: f64,
    rule: &R,
) -> Result<TestRecord> {
    let unfolded = if cols.is_empty() {
        // Only possible for J = 2: the pair covers the whole tensor.
        let v = t.levels();
        let m = Matrix::from_vec(index::pow(v, rows.len()), 1, t.as_slice().to_vec())?;
        UnfoldedMatrix { row_group: rows.to_vec(), col_group: Vec::new(), matrix: m }
    } else {
        unfold(t, rows, cols)?
    };
    let report = numerical_rank(&unfolded.matrix, tol_rel)?;
    let rank = rule.decide(&unfolded, &report);
    let passed = match kind {
        TestKind::Pair { .. } => rank <= bound,
        TestKind::Membership { .. } => rank > bound,
    };
    Ok(TestRecord {
        kind,
        gap_ratio: gap_at(&report.singular_values, rank),
        row_group: unfolded.row_group,
        col_group: unfolded.col_group,
        singular_values: report.singular_values,
        rank,
        bound,
        passed,
    })
}

fn check_common(t: &PopTensor, cfg: &RecoveryConfig) -> Result<()> {
    if t.num_observed() < 2 {
        bail!(Argument, "recovery needs J >= 2, got J = {}", t.num_observed());
    }
    if cfg.latent_levels < 2 {
        bail!(Argument, "H must be at least 2, got {}", cfg.latent_levels);
    }
    if !(cfg.tol_rel > 0.0 && cfg.tol_rel < 1.0) {
        bail!(Argument, "tol_rel must lie in (0, 1), got {}", cfg.tol_rel);
    }
    Ok(())
}

/// Rank of `[T]_{{j1,j2}, S}`: the pair against a subset of the remaining
/// variables, read off the marginal over `{j1, j2} ∪ S`.
pub fn pair_rank_marginal(t: &PopTensor, j1: usize, j2: usize, others: &[usize], tol_rel: f64) -> Result<RankReport> {
    if j1 == j2 {
        bail!(Argument, "pair needs two distinct variables, got {j1} twice");
    }
    if others.len() < 2 {
        bail!(Argument, "column set needs at least two variables, got {}", others.len());
    }
    if others.contains(&j1) || others.contains(&j2) {
        bail!(Argument, "column set {others:?} must exclude the pair ({j1}, {j2})");
    }
    let u = unfold(t, &[j1, j2], others)?;
    numerical_rank(&u.matrix, tol_rel)
}

/// Stage 1 with the relative-threshold rule over the full tensor.
pub fn stage1_pure_children(t: &PopTensor, latent_levels: usize, tol_rel: f64) -> Result<Stage1> {
    let cfg = RecoveryConfig { tol_rel, ..RecoveryConfig::new(latent_levels) };
    stage1_with(t, &cfg, &RelativeThreshold, &Serial)
}

pub fn stage1_with<R: RankRule, E: Executor>(t: &PopTensor, cfg: &RecoveryConfig, rule: &R, exec: &E) -> Result<Stage1> {
    check_common(t, cfg)?;
    let jn = t.num_observed();
    let h = cfg.latent_levels;
    if let Some(m) = cfg.marginal_order {
        if m < 4 {
            bail!(Argument, "marginal order must be at least 4 (a pair plus two columns), got {m}");
        }
    }

    let pairs: Vec<(usize, usize)> = (0..jn).flat_map(|a| (a + 1..jn).map(move |b| (a, b))).collect();
    let records = exec
        .map_indexed(pairs.len(), |i| {
            let (a, b) = pairs[i];
            let kind = TestKind::Pair { first: a, second: b };
            let rest: Vec<usize> = (0..jn).filter(|&x| x != a && x != b).collect();
            match cfg.marginal_order {
                Some(m) if m - 2 < rest.len() => {
                    // Pure iff every column subset of size m - 2 keeps rank <= H.
                    // Keep the first failing certificate, else the largest rank.
                    let mut kept: Option<Result<TestRecord>> = None;
                    for_each_subset(rest.len(), m - 2, &mut |pick| {
                        if matches!(kept, Some(Ok(ref r)) if !r.passed) || matches!(kept, Some(Err(_))) {
                            return;
                        }
                        let cols: Vec<usize> = pick.iter().map(|&p| rest[p]).collect();
                        let rec = certify(t, kind, &[a, b], &cols, h, cfg.tol_rel, rule);
                        let replace = match (&kept, &rec) {
                            (None, _) | (_, Err(_)) => true,
                            (Some(Ok(old)), Ok(new)) => !new.passed || new.rank > old.rank,
                            (Some(Err(_)), _) => false,
                        };
                        if replace {
                            kept = Some(rec);
                        }
                    });
                    kept.expect("at least one column subset")
                }
                _ => certify(t, kind, &[a, b], &rest, h, cfg.tol_rel, rule),
            }
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    // Components of the pass graph.
    let mut parent: Vec<usize> = (0..jn).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        let mut y = x;
        while parent[y] != r {
            let next = parent[y];
            parent[y] = r;
            y = next;
        }
        r
    }
    for rec in &records {
        if let (TestKind::Pair { first, second }, true) = (rec.kind, rec.passed) {
            let (ra, rb) = (find(&mut parent, first), find(&mut parent, second));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for j in 0..jn {
        let root = find(&mut parent, j);
        match groups.iter_mut().find(|g| find(&mut parent, g[0]) == root) {
            Some(g) => g.push(j),
            None => groups.push(alloc::vec![j]),
        }
    }
    groups.retain(|g| g.len() >= 2);
    // Members are pushed in ascending order, so sorting by first member
    // orders groups by smallest index.
    groups.sort_by_key(|g| g[0]);

    let mut warnings = Vec::new();
    for g in &groups {
        let clique = records.iter().all(|rec| match rec.kind {
            TestKind::Pair { first, second } if g.contains(&first) && g.contains(&second) => rec.passed,
            _ => true,
        });
        if !clique {
            warnings.push(format!(
                "pure group {g:?} is connected but not a clique of passing pairs; assumption violation suspected"
            ));
        }
    }
    Ok(Stage1 { k_hat: groups.len(), pure_groups: groups, records, warnings })
}

/// Stage 2 with the relative-threshold rule.
pub fn stage2_multi_parent(t: &PopTensor, pure_groups: &[Vec<usize>], latent_levels: usize, tol_rel: f64) -> Result<Stage2> {
    let cfg = RecoveryConfig { tol_rel, ..RecoveryConfig::new(latent_levels) };
    stage2_with(t, pure_groups, &cfg, &RelativeThreshold, &Serial)
}

pub fn stage2_with<R: RankRule, E: Executor>(
    t: &PopTensor,
    pure_groups: &[Vec<usize>],
    cfg: &RecoveryConfig,
    rule: &R,
    exec: &E,
) -> Result<Stage2> {
    check_common(t, cfg)?;
    let k_hat = pure_groups.len();
    if k_hat == 0 {
        bail!(Precondition, "stage 2 needs at least one pure group");
    }
    if let Some(g) = pure_groups.iter().find(|g| g.len() < 2) {
        bail!(Precondition, "pure group {g:?} has fewer than two members");
    }
    let jn = t.num_observed();
    let mut seen = alloc::vec![false; jn];
    for g in pure_groups {
        for &j in g {
            if j >= jn || seen[j] {
                bail!(Precondition, "pure groups must be disjoint subsets of 0..{jn}");
            }
            seen[j] = true;
        }
    }
    let side = index::checked_pow(t.levels(), k_hat);
    if side.map_or(true, |s| s > cfg.max_unfold_side) {
        bail!(Size, "stage-2 unfoldings would have V^K = {}^{k_hat} rows, above the limit of {}", t.levels(), cfg.max_unfold_side);
    }

    let base: Vec<usize> = pure_groups.iter().map(|g| g[0]).collect();
    let cols: Vec<usize> = index::sorted(&pure_groups.iter().map(|g| g[1]).collect::<Vec<_>>());
    let bound = index::pow(cfg.latent_levels, k_hat - 1);
    let unassigned: Vec<usize> = (0..jn).filter(|&j| !seen[j]).collect();
    let jobs: Vec<(usize, usize)> = unassigned.iter().flat_map(|&j| (0..k_hat).map(move |k| (j, k))).collect();

    let records = exec
        .map_indexed(jobs.len(), |i| {
            let (j, k) = jobs[i];
            let mut rows: Vec<usize> = base.iter().enumerate().filter(|&(kk, _)| kk != k).map(|(_, &b)| b).collect();
            rows.push(j);
            certify(t, TestKind::Membership { observed: j, latent: k }, &rows, &cols, bound, cfg.tol_rel, rule)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(unassigned.len());
    let mut warnings = Vec::new();
    for (n, &j) in unassigned.iter().enumerate() {
        let row: Vec<u8> = records[n * k_hat..(n + 1) * k_hat].iter().map(|r| r.passed as u8).collect();
        match row.iter().filter(|&&g| g == 1).count() {
            0 => warnings.push(format!("variable {j} was assigned no latent parent (co = ∅)")),
            1 => warnings.push(format!(
                "variable {j} was recovered with a single parent but is in no pure group; the membership certificate assumes at least two parents"
            )),
            _ => {}
        }
        rows.push((j, row));
    }
    Ok(Stage2 { rows, records, warnings })
}

/// Full recovery with the relative-threshold rule on one thread.
pub fn recover_graph(t: &PopTensor, latent_levels: usize, tol_rel: f64) -> Result<RecoveryResult> {
    let cfg = RecoveryConfig { tol_rel, ..RecoveryConfig::new(latent_levels) };
    recover_with(t, &cfg, &RelativeThreshold, &Serial)
}

/// Stage 1 then stage 2 under an arbitrary rank rule and executor.
pub fn recover_with<R: RankRule, E: Executor>(t: &PopTensor, cfg: &RecoveryConfig, rule: &R, exec: &E) -> Result<RecoveryResult> {
    let s1 = stage1_with(t, cfg, rule, exec)?;
    let jn = t.num_observed();
    let k_hat = s1.k_hat;
    let mut g_hat = alloc::vec![alloc::vec![0u8; k_hat]; jn];
    for (k, g) in s1.pure_groups.iter().enumerate() {
        for &j in g {
            g_hat[j][k] = 1;
        }
    }
    let mut warnings = s1.warnings;
    let mut stage2_records = Vec::new();
    if k_hat == 0 {
        warnings.push(String::from("no pure pairs found; K could not be determined"));
    } else {
        let s2 = stage2_with(t, &s1.pure_groups, cfg, rule, exec)?;
        for (j, row) in s2.rows {
            g_hat[j] = row;
        }
        warnings.extend(s2.warnings);
        stage2_records = s2.records;
    }
    Ok(RecoveryResult {
        k_hat,
        g_hat,
        pure_groups: s1.pure_groups,
        stage1_records: s1.records,
        stage2_records,
        warnings,
    })
}

/// Sorts columns into a canonical order so that two matrices agree up to a
/// column permutation exactly when their canonical forms are equal.
pub fn canonical_columns(rows: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let k = rows.first().map_or(0, Vec::len);
    let mut columns: Vec<Vec<u8>> = (0..k).map(|c| rows.iter().map(|r| r[c]).collect()).collect();
    columns.sort_unstable_by(|a, b| b.cmp(a));
    (0..rows.len()).map(|i| columns.iter().map(|c| c[i]).collect()).collect()
}

/// Agreement between a planted and a recovered graph, up to relabeling
/// the latents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphComparison {
    pub exact_match: bool,
    /// `column_map[k]`: recovered column matched to planted column `k`.
    pub column_map: Vec<Option<usize>>,
    /// Per-row Hamming distance under the best matching (missing columns
    /// count as zeros).
    pub row_hamming: Vec<usize>,
}

/// Matches recovered columns to planted ones by exhaustive search over
/// assignments, minimizing total Hamming error (ties go to the
/// lexicographically first assignment).
pub fn compare_graphs(planted: &[Vec<u8>], recovered: &[Vec<u8>]) -> Result<GraphComparison> {
    if planted.len() != recovered.len() {
        bail!(Argument, "graphs have {} and {} rows", planted.len(), recovered.len());
    }
    let kp = planted.first().map_or(0, Vec::len);
    let kr = recovered.first().map_or(0, Vec::len);
    let width = kp.max(kr);
    if width > 9 {
        bail!(Size, "graph comparison searches column permutations; {width} columns is too many");
    }
    let col = |g: &[Vec<u8>], k: usize, cols: usize| -> Vec<u8> {
        g.iter().map(|r| if k < cols { r[k] } else { 0 }).collect()
    };
    let pc: Vec<Vec<u8>> = (0..width).map(|k| col(planted, k, kp)).collect();
    let rc: Vec<Vec<u8>> = (0..width).map(|k| col(recovered, k, kr)).collect();

    let mut perm: Vec<usize> = (0..width).collect();
    let mut best: Option<(usize, Vec<usize>)> = None;
    loop {
        let cost: usize = (0..width)
            .map(|k| pc[k].iter().zip(&rc[perm[k]]).filter(|(a, b)| a != b).count())
            .sum();
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            best = Some((cost, perm.clone()));
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    let (total, perm) = best.expect("at least one permutation");
    let row_hamming = (0..planted.len())
        .map(|i| (0..width).filter(|&k| pc[k][i] != rc[perm[k]][i]).count())
        .collect();
    let column_map = (0..kp).map(|k| if perm[k] < kr { Some(perm[k]) } else { None }).collect();
    Ok(GraphComparison { exact_match: kp == kr && total == 0, column_map, row_hamming })
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{compile_model, random_model, FamilyKind, GenerateOptions, Link};
    use crate::tensor::{population_tensor, TensorBudget};

    fn tensor_for(family: FamilyKind, j: usize, k: usize, extra: Option<Vec<Vec<u8>>>, shuffle: bool, seed: u64) -> (PopTensor, Vec<Vec<u8>>) {
        let mut opts = GenerateOptions::new(family);
        opts.extra_rows = extra;
        opts.shuffle_rows = shuffle;
        let g = random_model(j, k, 2, 2, &opts, seed).unwrap();
        let m = compile_model(&g.spec).unwrap();
        let t = population_tensor(&m.latent, &m.cpts, &TensorBudget::default(), &Serial).unwrap();
        (t, g.spec.graph.rows())
    }

    fn toy_rows() -> Vec<Vec<u8>> {
        alloc::vec![alloc::vec![1, 0], alloc::vec![1, 0], alloc::vec![0, 1], alloc::vec![0, 1], alloc::vec![1, 1]]
    }

    fn toy_tensor(family: FamilyKind, seed: u64) -> PopTensor {
        // Rows 0,1 -> A_0; rows 2,3 -> A_1; row 4 -> both.
        let (t, rows) = tensor_for(family, 5, 2, Some(alloc::vec![alloc::vec![1, 1]]), false, seed);
        assert_eq!(rows, toy_rows());
        t
    }

    #[test]
    fn toy_pair_ranks() {
        let t = toy_tensor(FamilyKind::NoisyOr, 5);
        let s1 = stage1_pure_children(&t, 2, 1e-8).unwrap();
        let passing: Vec<(usize, usize)> = s1
            .records
            .iter()
            .filter(|r| r.passed)
            .map(|r| match r.kind {
                TestKind::Pair { first, second } => (first, second),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(passing, alloc::vec![(0, 1), (2, 3)]);
        assert_eq!(s1.k_hat, 2);
        assert_eq!(s1.pure_groups, alloc::vec![alloc::vec![0, 1], alloc::vec![2, 3]]);
        for r in &s1.records {
            if let TestKind::Pair { first, second } = r.kind {
                if first < 4 && second < 4 && !r.passed {
                    assert_eq!(r.rank, 4);
                }
                if second == 4 {
                    assert!(r.rank > 2);
                }
            }
        }
    }

    #[test]
    fn toy_full_recovery() {
        for family in [FamilyKind::NoisyOr, FamilyKind::AllEffect(Link::Logistic), FamilyKind::GeneralRbm] {
            let t = toy_tensor(family, 9);
            let r = recover_graph(&t, 2, 1e-8).unwrap();
            assert_eq!(r.k_hat, 2);
            assert_eq!(r.g_hat, toy_rows());
            assert!(r.warnings.is_empty(), "{:?}", r.warnings);
        }
    }

    #[test]
    fn non_member_certificate_bounded() {
        // j = 4 with co = {0, 1}; drop the edge to latent 1 by using a
        // graph whose row 4 is (1, 0): rank must stay <= H^(K-1).
        let rows = alloc::vec![alloc::vec![1u8, 0], alloc::vec![1, 0], alloc::vec![0, 1], alloc::vec![0, 1], alloc::vec![1, 0]];
        let (t, _) = tensor_for(FamilyKind::NoisyOr, 5, 2, None, false, 0);
        let _ = t;
        let graph = crate::model::BipartiteGraph::from_rows(&rows).unwrap();
        let cards = crate::model::CardinalitySpec::new(2, 2).unwrap();
        let spec = crate::model::random_parameters(
            &graph,
            &cards,
            FamilyKind::NoisyOr,
            &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3),
        )
        .unwrap();
        let m = compile_model(&spec).unwrap();
        let t = population_tensor(&m.latent, &m.cpts, &TensorBudget::default(), &Serial).unwrap();
        let s2 = stage2_multi_parent(&t, &[alloc::vec![0, 1], alloc::vec![2, 3]], 2, 1e-8).unwrap();
        let rec = s2.records.iter().find(|r| r.kind == TestKind::Membership { observed: 4, latent: 1 }).unwrap();
        assert!(rec.rank <= 2);
        assert!(!rec.passed);
        // Recovered as a single-parent variable outside the pure groups.
        assert_eq!(s2.rows, alloc::vec![(4, alloc::vec![1, 0])]);
        assert_eq!(s2.warnings.len(), 1);
    }

    #[test]
    fn single_latent_all_pure() {
        let (t, rows) = tensor_for(FamilyKind::NoisyOr, 4, 1, None, false, 1);
        assert!(rows.iter().all(|r| r == &alloc::vec![1u8]));
        let r = recover_graph(&t, 2, 1e-8).unwrap();
        assert_eq!(r.k_hat, 1);
        assert_eq!(r.pure_groups, alloc::vec![alloc::vec![0, 1, 2, 3]]);
        assert!(r.stage2_records.is_empty());
    }

    #[test]
    fn two_variables_single_latent() {
        let (t, _) = tensor_for(FamilyKind::NoisyOr, 2, 1, None, false, 1);
        let r = recover_graph(&t, 2, 1e-8).unwrap();
        assert_eq!(r.k_hat, 1);
        assert_eq!(r.g_hat, alloc::vec![alloc::vec![1u8], alloc::vec![1]]);
    }

    #[test]
    fn random_models_recovered_up_to_permutation() {
        for seed in 0..10 {
            let (t, rows) = tensor_for(FamilyKind::MainEffect(Link::Probit), 7, 3, None, true, seed);
            let r = recover_graph(&t, 2, 1e-8).unwrap();
            assert_eq!(r.k_hat, 3, "seed {seed}");
            assert_eq!(canonical_columns(&r.g_hat), canonical_columns(&rows), "seed {seed}");
        }
    }

    #[test]
    fn planted_pair_membership() {
        // co(6) = {0, 2} with K = 3.
        let extra = Some(alloc::vec![alloc::vec![1u8, 0, 1]]);
        let (t, _) = tensor_for(FamilyKind::GeneralRbm, 7, 3, extra, false, 4);
        let r = recover_graph(&t, 2, 1e-8).unwrap();
        assert_eq!(r.g_hat[6], alloc::vec![1, 0, 1]);
    }

    #[test]
    fn marginal_pair_ranks() {
        let t = toy_tensor(FamilyKind::NoisyOr, 2);
        for s in [[2usize, 3], [2, 4], [3, 4]] {
            assert!(pair_rank_marginal(&t, 0, 1, &s, 1e-8).unwrap().numerical_rank <= 2);
        }
        assert!(pair_rank_marginal(&t, 0, 2, &[1, 3], 1e-8).unwrap().numerical_rank > 2);
        let full = crate::tensor::unfold_against_rest(&t, &[0, 2]).unwrap();
        let full_rank = numerical_rank(&full.matrix, 1e-8).unwrap().numerical_rank;
        for s in [[1usize, 3], [1, 4], [3, 4]] {
            assert!(pair_rank_marginal(&t, 0, 2, &s, 1e-8).unwrap().numerical_rank <= full_rank);
        }
        assert!(pair_rank_marginal(&t, 0, 1, &[2], 1e-8).is_err());
        assert!(pair_rank_marginal(&t, 0, 1, &[1, 2], 1e-8).is_err());
    }

    #[test]
    fn marginal_mode_matches_full_mode() {
        for seed in 0..5 {
            let (t, _) = tensor_for(FamilyKind::NoisyOr, 7, 2, None, true, seed);
            let full = recover_graph(&t, 2, 1e-8).unwrap();
            let cfg = RecoveryConfig { marginal_order: Some(4), ..RecoveryConfig::new(2) };
            let marg = recover_with(&t, &cfg, &RelativeThreshold, &Serial).unwrap();
            assert_eq!(full.g_hat, marg.g_hat);
            assert_eq!(full.pure_groups, marg.pure_groups);
        }
        let (t, _) = tensor_for(FamilyKind::NoisyOr, 5, 2, None, true, 0);
        let cfg = RecoveryConfig { marginal_order: Some(3), ..RecoveryConfig::new(2) };
        assert!(recover_with(&t, &cfg, &RelativeThreshold, &Serial).is_err());
    }

    #[test]
    fn stage2_preconditions() {
        let t = toy_tensor(FamilyKind::NoisyOr, 1);
        assert!(matches!(stage2_multi_parent(&t, &[alloc::vec![0]], 2, 1e-8), Err(crate::Error::Precondition(_))));
        assert!(matches!(stage2_multi_parent(&t, &[], 2, 1e-8), Err(crate::Error::Precondition(_))));
        assert!(matches!(
            stage2_multi_parent(&t, &[alloc::vec![0, 1], alloc::vec![1, 2]], 2, 1e-8),
            Err(crate::Error::Precondition(_))
        ));
    }

    #[test]
    fn compare_graphs_finds_relabeling() {
        let planted = toy_rows();
        let swapped: Vec<Vec<u8>> = planted.iter().map(|r| alloc::vec![r[1], r[0]]).collect();
        let c = compare_graphs(&planted, &swapped).unwrap();
        assert!(c.exact_match);
        assert_eq!(c.column_map, alloc::vec![Some(1), Some(0)]);
        assert!(c.row_hamming.iter().all(|&h| h == 0));

        let mut wrong = swapped.clone();
        wrong[4] = alloc::vec![0, 1];
        let c = compare_graphs(&planted, &wrong).unwrap();
        assert!(!c.exact_match);
        assert_eq!(c.row_hamming, alloc::vec![0, 0, 0, 0, 1]);

        let narrower: Vec<Vec<u8>> = planted.iter().map(|r| alloc::vec![r[0]]).collect();
        let c = compare_graphs(&planted, &narrower).unwrap();
        assert!(!c.exact_match);
        assert_eq!(c.column_map, alloc::vec![Some(0), None]);
    }
}
