//! The population tensor of the observed layer, its marginals and matrix
//! unfoldings, and joint tables of latent subvectors.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::exec::Executor;
use crate::index;
use crate::matrix::Matrix;
use crate::model::{BipartiteGraph, Cpt, LatentJoint};

/// Size limits for [`population_tensor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorBudget {
    /// Upper bound on `V^J`.
    pub max_observed_cells: usize,
    /// Upper bound on `H^K`.
    pub max_latent_cells: usize,
}

impl Default for TensorBudget {
    fn default() -> Self {
        Self { max_observed_cells: 1 << 24, max_latent_cells: 1 << 20 }
    }
}

/// `T[i_1, ..., i_J] = P(Y_1 = i_1, ..., Y_J = i_J)`, stored flat with the
/// first mode most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct PopTensor {
    num_observed: usize,
    levels: usize,
    data: Vec<f64>,
}

impl PopTensor {
    pub fn new(num_observed: usize, levels: usize, data: Vec<f64>) -> Result<Self> {
        if num_observed == 0 || levels < 2 {
            bail!(Argument, "tensor needs J >= 1 and V >= 2, got J={num_observed} V={levels}");
        }
        let cells = index::checked_pow(levels, num_observed)
            .ok_or_else(|| crate::Error::Size(alloc::format!("V^J overflows for V={levels} J={num_observed}")))?;
        if data.len() != cells {
            bail!(Argument, "tensor has {} entries, expected V^J = {cells}", data.len());
        }
        if data.iter().any(|x| !x.is_finite() || *x < 0.0) {
            bail!(Argument, "tensor entries must be finite and nonnegative");
        }
        Ok(Self { num_observed, levels, data })
    }

    pub fn num_observed(&self) -> usize {
        self.num_observed
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, config: &[usize]) -> f64 {
        self.data[index::encode(config, self.levels)]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Sum of absolute entrywise differences.
    pub fn l1_distance(&self, other: &PopTensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).sum()
    }
}

const CHUNK: usize = 1024;

/// Exact tensor `T[y] = sum_a nu_a prod_j Cpt_j[y_j, a_co(j)]`.
///
/// Every entry is accumulated over `a` in ascending code order with the
/// product taken over `j` ascending, so the result is bit-identical for any
/// executor.
pub fn population_tensor<E: Executor>(
    latent: &LatentJoint,
    cpts: &[Cpt],
    budget: &TensorBudget,
    exec: &E,
) -> Result<PopTensor> {
    let jn = cpts.len();
    if jn == 0 {
        bail!(Argument, "need at least one observed variable");
    }
    let v = cpts[0].levels();
    let h = latent.levels;
    for (j, cpt) in cpts.iter().enumerate() {
        if cpt.observed != j || cpt.levels() != v {
            bail!(Argument, "table {j} is out of order or has a different number of levels");
        }
        if cpt.parents.iter().any(|&k| k >= latent.num_latent)
            || cpt.table.cols() != index::checked_pow(h, cpt.parents.len()).unwrap_or(0)
        {
            bail!(Argument, "table {j} does not match the latent layer");
        }
    }
    let cells = index::checked_pow(v, jn).filter(|&c| c <= budget.max_observed_cells).ok_or_else(|| {
        crate::Error::Size(alloc::format!("V^J = {v}^{jn} exceeds the budget of {} cells", budget.max_observed_cells))
    })?;
    if latent.probs.len() > budget.max_latent_cells {
        bail!(Size, "H^K = {} exceeds the budget of {} cells", latent.probs.len(), budget.max_latent_cells);
    }

    // Column of every table for every latent configuration with nonzero mass.
    let mut digits = alloc::vec![0usize; latent.num_latent];
    let mut active: Vec<(f64, Vec<usize>)> = Vec::new();
    for (code, &p) in latent.probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        index::decode_into(code, h, &mut digits);
        active.push((p, cpts.iter().map(|c| c.column_for(&digits, h)).collect()));
    }

    let chunks = cells.div_ceil(CHUNK);
    let parts = exec.map_indexed(chunks, |chunk| {
        let lo = chunk * CHUNK;
        let hi = (lo + CHUNK).min(cells);
        let mut y = alloc::vec![0usize; jn];
        (lo..hi)
            .map(|flat| {
                index::decode_into(flat, v, &mut y);
                let mut acc = 0.0;
                for (p, cols) in &active {
                    let mut term = *p;
                    for (j, cpt) in cpts.iter().enumerate() {
                        term *= cpt.table[(y[j], cols[j])];
                    }
                    acc += term;
                }
                acc
            })
            .collect::<Vec<f64>>()
    });
    let data: Vec<f64> = parts.into_iter().flatten().collect();
    Ok(PopTensor { num_observed: jn, levels: v, data })
}

fn validate_modes(set: &[usize], bound: usize, what: &str) -> Result<Vec<usize>> {
    if set.is_empty() {
        bail!(Argument, "{what} must be nonempty");
    }
    let sorted = index::sorted(set);
    if sorted.len() != set.len() {
        bail!(Argument, "{what} has repeated indices: {set:?}");
    }
    if let Some(&bad) = sorted.iter().find(|&&x| x >= bound) {
        bail!(Argument, "{what} index {bad} is out of range (< {bound})");
    }
    Ok(sorted)
}

/// Marginal tensor over the modes in `modes` (sorted before use).
pub fn marginal(t: &PopTensor, modes: &[usize]) -> Result<PopTensor> {
    let modes = validate_modes(modes, t.num_observed, "marginal mode set")?;
    let v = t.levels;
    let mut data = alloc::vec![0.0; index::pow(v, modes.len())];
    let mut y = alloc::vec![0usize; t.num_observed];
    for (flat, &p) in t.data.iter().enumerate() {
        index::decode_into(flat, v, &mut y);
        data[index::encode_selected(&y, &modes, v)] += p;
    }
    Ok(PopTensor { num_observed: modes.len(), levels: v, data })
}

/// `[T]_{S1,S2}`: rows indexed by `y_{S1}`, columns by `y_{S2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldedMatrix {
    pub row_group: Vec<usize>,
    pub col_group: Vec<usize>,
    pub matrix: Matrix,
}

/// Unfolds the marginal over `S1 ∪ S2` into a `V^{|S1|} x V^{|S2|}` matrix.
/// Both groups are sorted ascending before encoding.
pub fn unfold(t: &PopTensor, row_group: &[usize], col_group: &[usize]) -> Result<UnfoldedMatrix> {
    let rows = validate_modes(row_group, t.num_observed, "row group")?;
    let cols = validate_modes(col_group, t.num_observed, "column group")?;
    if rows.iter().any(|r| cols.contains(r)) {
        bail!(Argument, "row group {rows:?} and column group {cols:?} overlap");
    }
    let v = t.levels;
    let (nr, nc) = (index::pow(v, rows.len()), index::pow(v, cols.len()));
    let mut data = alloc::vec![0.0; nr * nc];
    let mut y = alloc::vec![0usize; t.num_observed];
    for (flat, &p) in t.data.iter().enumerate() {
        index::decode_into(flat, v, &mut y);
        let r = index::encode_selected(&y, &rows, v);
        let c = index::encode_selected(&y, &cols, v);
        data[r * nc + c] += p;
    }
    let matrix = Matrix::from_vec(nr, nc, data)?;
    Ok(UnfoldedMatrix { row_group: rows, col_group: cols, matrix })
}

/// `[T]_{S,:}`: unfolding against all remaining modes.
pub fn unfold_against_rest(t: &PopTensor, row_group: &[usize]) -> Result<UnfoldedMatrix> {
    let rest: Vec<usize> = (0..t.num_observed).filter(|j| !row_group.contains(j)).collect();
    if rest.is_empty() {
        bail!(Argument, "row group covers every mode; nothing left for the columns");
    }
    unfold(t, row_group, &rest)
}

/// `P(A_{S1}, A_{S2})` for possibly overlapping latent index sets.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentJointTable {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub matrix: Matrix,
}

/// Entries pair configurations of `A_{S1}` and `A_{S2}`; pairs that disagree
/// on `S1 ∩ S2` are zero.
pub fn latent_joint_table(latent: &LatentJoint, s1: &[usize], s2: &[usize]) -> Result<LatentJointTable> {
    let rows = validate_modes(s1, latent.num_latent, "latent row set")?;
    let cols = validate_modes(s2, latent.num_latent, "latent column set")?;
    let h = latent.levels;
    let (nr, nc) = (index::pow(h, rows.len()), index::pow(h, cols.len()));
    let mut m = Matrix::zeros(nr, nc);
    let mut a = alloc::vec![0usize; latent.num_latent];
    for (code, &p) in latent.probs.iter().enumerate() {
        index::decode_into(code, h, &mut a);
        m[(index::encode_selected(&a, &rows, h), index::encode_selected(&a, &cols, h))] += p;
    }
    Ok(LatentJointTable { rows, cols, matrix: m })
}

/// `P(Y_M | A_S)`, a `V^{|M|} x H^{|S|}` matrix, for `co(M) ⊆ S`.
///
/// Materialized explicitly; meant for checking factorization identities on
/// small models, not for the recovery path.
pub fn conditional_matrix(
    cpts: &[Cpt],
    graph: &BipartiteGraph,
    observed: &[usize],
    latent: &[usize],
    latent_levels: usize,
) -> Result<Matrix> {
    let m = validate_modes(observed, graph.num_observed(), "observed set")?;
    let s = validate_modes(latent, graph.num_latent(), "latent set")?;
    let co = graph.parents_of_set(&m);
    if let Some(k) = co.iter().find(|k| !s.contains(k)) {
        bail!(Argument, "latent set {s:?} misses parent {k} of the observed set {m:?}");
    }
    let v = cpts[m[0]].levels();
    let h = latent_levels;
    let (nr, nc) = (index::pow(v, m.len()), index::pow(h, s.len()));
    let mut out = Matrix::zeros(nr, nc);
    let mut full = alloc::vec![0usize; graph.num_latent()];
    let mut a_s = alloc::vec![0usize; s.len()];
    let mut y = alloc::vec![0usize; m.len()];
    for c in 0..nc {
        index::decode_into(c, h, &mut a_s);
        for (&k, &ak) in s.iter().zip(&a_s) {
            full[k] = ak;
        }
        for r in 0..nr {
            index::decode_into(r, v, &mut y);
            out[(r, c)] = m
                .iter()
                .zip(&y)
                .map(|(&j, &yj)| cpts[j].prob(yj, cpts[j].column_for(&full, h)))
                .product();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Serial;
    use crate::model::{compile_model, random_model, FamilyKind, GenerateOptions};

    fn toy(seed: u64) -> crate::model::CompiledModel {
        let mut opts = GenerateOptions::new(FamilyKind::NoisyOr);
        opts.extra_rows = Some(alloc::vec![alloc::vec![1, 1]]);
        opts.shuffle_rows = false;
        compile_model(&random_model(5, 2, 2, 2, &opts, seed).unwrap().spec).unwrap()
    }

    /// Independent route: sum over latent configurations of products of
    /// table entries, written as explicit nested loops over (y, a).
    fn naive_tensor(m: &crate::model::CompiledModel) -> Vec<f64> {
        let (v, h) = (m.cards.observed_levels, m.cards.latent_levels);
        let (jn, kn) = (m.graph.num_observed(), m.graph.num_latent());
        let mut out = alloc::vec![0.0; v.pow(jn as u32)];
        for a in 0..h.pow(kn as u32) {
            let ad = index::decode(a, h, kn);
            for (y, slot) in out.iter_mut().enumerate() {
                let yd = index::decode(y, v, jn);
                let mut p = m.latent.probs[a];
                for j in 0..jn {
                    let col = m.graph.parents(j).iter().fold(0, |c, &k| c * h + ad[k]);
                    p *= m.cpts[j].table[(yd[j], col)];
                }
                *slot += p;
            }
        }
        out
    }

    #[test]
    fn single_variable_is_matrix_vector_product() {
        let cpt = Cpt { observed: 0, parents: alloc::vec![0], table: Matrix::from_rows(&[[0.9, 0.2], [0.1, 0.8]]) };
        let nu = LatentJoint::new(1, 2, alloc::vec![0.3, 0.7]).unwrap();
        let t = population_tensor(&nu, &[cpt], &TensorBudget::default(), &Serial).unwrap();
        assert!((t.as_slice()[0] - (0.9 * 0.3 + 0.2 * 0.7)).abs() < 1e-15);
        assert!((t.as_slice()[1] - (0.1 * 0.3 + 0.8 * 0.7)).abs() < 1e-15);
    }

    #[test]
    fn toy_tensor_matches_naive_sum() {
        for seed in 0..5 {
            let m = toy(seed);
            let t = population_tensor(&m.latent, &m.cpts, &TensorBudget::default(), &Serial).unwrap();
            assert_eq!(t.as_slice().len(), 32);
            for (a, b) in t.as_slice().iter().zip(naive_tensor(&m)) {
                assert!((a - b).abs() < 1e-15);
            }
            assert!((t.sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_everything_gives_uniform_tensor() {
        let graph = BipartiteGraph::from_rows(&[[1u8, 0], [0, 1], [1, 1]]).unwrap();
        let cpts: Vec<Cpt> = (0..3)
            .map(|j| {
                let cols = 3usize.pow(graph.parents(j).len() as u32);
                Cpt { observed: j, parents: graph.parents(j).to_vec(), table: Matrix::from_fn(4, cols, |_, _| 0.25) }
            })
            .collect();
        let nu = LatentJoint::new(2, 3, alloc::vec![1.0 / 9.0; 9]).unwrap();
        let t = population_tensor(&nu, &cpts, &TensorBudget::default(), &Serial).unwrap();
        assert!(t.as_slice().iter().all(|&x| (x - 1.0 / 64.0).abs() < 1e-15));
    }

    #[test]
    fn budget_enforced() {
        let m = toy(0);
        let budget = TensorBudget { max_observed_cells: 16, ..TensorBudget::default() };
        assert!(matches!(population_tensor(&m.latent, &m.cpts, &budget, &Serial), Err(crate::Error::Size(_))));
        let budget = TensorBudget { max_latent_cells: 2, ..TensorBudget::default() };
        assert!(matches!(population_tensor(&m.latent, &m.cpts, &budget, &Serial), Err(crate::Error::Size(_))));
    }

    fn cube() -> PopTensor {
        let data: Vec<f64> = (0..8).map(|i| (i + 1) as f64 / 36.0).collect();
        PopTensor::new(3, 2, data).unwrap()
    }

    #[test]
    fn marginal_sums_out_last_mode() {
        let t = cube();
        let m = marginal(&t, &[0, 1]).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let expect: f64 = (0..2).map(|c| t.get(&[a, b, c])).sum();
                assert!((m.get(&[a, b]) - expect).abs() < 1e-15);
            }
        }
        assert_eq!(marginal(&t, &[0, 1, 2]).unwrap(), t);
        assert!(marginal(&t, &[]).is_err());
        assert!(marginal(&t, &[3]).is_err());
    }

    #[test]
    fn marginal_tower_property() {
        let m = toy(2);
        let t = population_tensor(&m.latent, &m.cpts, &TensorBudget::default(), &Serial).unwrap();
        let direct = marginal(&t, &[1, 3]).unwrap();
        let staged = marginal(&marginal(&t, &[1, 2, 3]).unwrap(), &[0, 2]).unwrap();
        for (a, b) in direct.as_slice().iter().zip(staged.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn unfold_index_arithmetic() {
        let t = cube();
        let u = unfold(&t, &[0], &[1, 2]).unwrap();
        assert_eq!((u.matrix.rows(), u.matrix.cols()), (2, 4));
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    assert_eq!(u.matrix[(i, 2 * j + k)], t.get(&[i, j, k]));
                }
            }
        }
        assert!(unfold(&t, &[0, 1], &[1, 2]).is_err());
        assert!(unfold(&t, &[], &[1]).is_err());
    }

    #[test]
    fn unfold_transpose_and_marginal_agree() {
        let m = toy(3);
        let t = population_tensor(&m.latent, &m.cpts, &TensorBudget::default(), &Serial).unwrap();
        let a = unfold(&t, &[0, 4], &[1, 3]).unwrap();
        let b = unfold(&t, &[1, 3], &[0, 4]).unwrap();
        assert_eq!(a.matrix, b.matrix.transpose());
        // Same bits as going through the marginal tensor explicitly.
        let marg = marginal(&t, &[0, 1, 3, 4]).unwrap();
        let c = unfold(&marg, &[0, 3], &[1, 2]).unwrap();
        assert_eq!(a.matrix, c.matrix);
        let full = unfold_against_rest(&t, &[0, 1]).unwrap();
        assert!((full.matrix.sum() - 1.0).abs() < 1e-12);
        assert!(full.matrix.as_slice().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn latent_table_diagonal_when_sets_match() {
        let nu = LatentJoint::new(2, 2, alloc::vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let t = latent_joint_table(&nu, &[0, 1], &[0, 1]).unwrap();
        assert_eq!(t.matrix, Matrix::from_fn(4, 4, |i, j| if i == j { nu.probs[i] } else { 0.0 }));
    }

    #[test]
    fn latent_table_overlap_pattern() {
        // P(A_1, A_{1,2}) for H = 2 has the checkerboard support.
        let nu = LatentJoint::new(2, 2, alloc::vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let t = latent_joint_table(&nu, &[0], &[0, 1]).unwrap();
        let expect = Matrix::from_rows(&[[0.1, 0.2, 0.0, 0.0], [0.0, 0.0, 0.3, 0.4]]);
        assert_eq!(t.matrix, expect);
    }

    #[test]
    fn latent_table_disjoint_independent_is_outer_product() {
        let nu = LatentJoint::from_marginals(3, &[alloc::vec![0.2, 0.3, 0.5], alloc::vec![0.6, 0.1, 0.3]]);
        let t = latent_joint_table(&nu, &[0], &[1]).unwrap();
        let expect = Matrix::from_fn(3, 3, |i, j| [0.2, 0.3, 0.5][i] * [0.6, 0.1, 0.3][j]);
        assert!(t.matrix.max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn conditional_matrix_needs_parent_cover() {
        let m = toy(0);
        assert!(conditional_matrix(&m.cpts, &m.graph, &[4], &[0], 2).is_err());
        let c = conditional_matrix(&m.cpts, &m.graph, &[0], &[0], 2).unwrap();
        assert_eq!(c, m.cpts[0].table);
    }
}
