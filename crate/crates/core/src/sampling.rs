//! Sample matrices, empirical distributions and dependency diagnostics.
//!
//! A [`SampleMatrix`] holds M samples for each of N constituents together
//! with the generating uniforms and one permutation per column recording
//! the current arrangement relative to the initial draw. Rearrangement
//! operations permute column entries in place; the multiset of every
//! column is invariant under any sequence of them, which is what keeps the
//! marginals intact while the index distribution moves.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, stream};
use crate::smile::MarginalLaw;

/// M x N rearrangeable sample set for one maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMatrix {
    pub maturity: f64,
    /// Column-major sample values in the current arrangement.
    pub columns: Vec<Vec<f64>>,
    /// Column-major generating uniforms in the original draw order.
    pub uniforms: Vec<Vec<f64>>,
    /// Per column: `perms[n][m]` is the draw index of the sample currently
    /// sitting in row `m` of column `n`.
    pub perms: Vec<Vec<u32>>,
    /// Index weights, one per column.
    pub weights: Vec<f64>,
}

impl SampleMatrix {
    /// Number of rows (samples).
    pub fn n_samples(&self) -> usize {
        self.columns.first().map_or(0, |c| c.len())
    }

    /// Number of columns (constituents).
    pub fn n_assets(&self) -> usize {
        self.columns.len()
    }

    /// Build a matrix directly from column values; uniforms default to the
    /// values themselves (exact for uniform `[0,1]` marginals) and
    /// permutations to the identity. Test and toy-data constructor.
    pub fn from_columns(maturity: f64, columns: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::EmptySubset);
        }
        let m = columns[0].len();
        if columns.iter().any(|c| c.len() != m) {
            return Err(Error::State("ragged sample columns".into()));
        }
        if weights.len() != columns.len() {
            return Err(Error::State("weights do not match columns".into()));
        }
        let perms = vec![(0..m as u32).collect::<Vec<u32>>(); columns.len()];
        Ok(SampleMatrix {
            maturity,
            uniforms: columns.clone(),
            columns,
            perms,
            weights,
        })
    }

    /// Weighted sum over a subset of columns: the basket sample vector.
    /// The full column set yields the index vector.
    pub fn aggregate(&self, subset: &[usize]) -> Result<Vec<f64>> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        for &n in subset {
            if n >= self.n_assets() {
                return Err(Error::State(format!("column {n} out of range")));
            }
        }
        let m = self.n_samples();
        let mut out = vec![0.0; m];
        for &n in subset {
            let w = self.weights[n];
            let col = &self.columns[n];
            for (o, &v) in out.iter_mut().zip(col.iter()) {
                *o += w * v;
            }
        }
        Ok(out)
    }

    /// Index sample vector (all columns).
    pub fn index_vector(&self) -> Vec<f64> {
        let all: Vec<usize> = (0..self.n_assets()).collect();
        self.aggregate(&all).expect("non-empty")
    }

    /// Sort every column ascending (the "sort" arrangement). Ties resolve
    /// by draw index so the result is fully deterministic.
    pub fn sort_columns(&mut self) {
        for (col, perm) in self.columns.iter_mut().zip(self.perms.iter_mut()) {
            let mut paired: Vec<(f64, u32)> =
                col.iter().copied().zip(perm.iter().copied()).collect();
            paired.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (i, (v, p)) in paired.into_iter().enumerate() {
                col[i] = v;
                perm[i] = p;
            }
        }
    }

    /// Shuffle every column independently (the "mix" arrangement) using
    /// one sub-stream per column.
    pub fn shuffle_columns(&mut self, master_seed: u64, pass_tag: u64) {
        for n in 0..self.n_assets() {
            let mut rng: ChaCha8Rng =
                rng::substream(master_seed, &[stream::ISM_MIX, pass_tag, n as u64]);
            let m = self.n_samples();
            let mut order: Vec<usize> = (0..m).collect();
            order.shuffle(&mut rng);
            apply_row_order(&mut self.columns[n], &mut self.perms[n], &order);
        }
    }

    /// Remove the given rows (same positions in every column) and return
    /// them as row-major records `(values, draw_indices)`.
    pub(crate) fn take_rows(&mut self, rows: &[usize]) -> Vec<(Vec<f64>, Vec<u32>)> {
        let n = self.n_assets();
        let mut taken: Vec<(Vec<f64>, Vec<u32>)> = rows
            .iter()
            .map(|&r| {
                (
                    (0..n).map(|c| self.columns[c][r]).collect(),
                    (0..n).map(|c| self.perms[c][r]).collect(),
                )
            })
            .collect();
        let mut remove = vec![false; self.n_samples()];
        for &r in rows {
            remove[r] = true;
        }
        for c in 0..n {
            let mut keep_v = Vec::with_capacity(self.columns[c].len() - rows.len());
            let mut keep_p = Vec::with_capacity(self.columns[c].len() - rows.len());
            for (i, (&v, &p)) in self.columns[c].iter().zip(&self.perms[c]).enumerate() {
                if !remove[i] {
                    keep_v.push(v);
                    keep_p.push(p);
                }
            }
            self.columns[c] = keep_v;
            self.perms[c] = keep_p;
        }
        taken.shrink_to_fit();
        taken
    }

    /// Sorted copy of one column; multiset fingerprint for invariant tests.
    pub fn column_sorted(&self, n: usize) -> Vec<f64> {
        let mut c = self.columns[n].clone();
        c.sort_by(|a, b| a.partial_cmp(b).unwrap());
        c
    }

    /// Replace column `n` with the quantiles of a new law evaluated at the
    /// stored uniforms, laid out in the stored permutation order. All other
    /// columns are untouched; ranks within the column are preserved because
    /// the quantile map is monotone.
    pub fn remap_column(&mut self, n: usize, law: &MarginalLaw) -> Result<()> {
        if n >= self.n_assets() {
            return Err(Error::State(format!("column {n} out of range")));
        }
        if self.uniforms[n].len() != self.columns[n].len() {
            return Err(Error::State(
                "stored uniforms missing for remap".to_string(),
            ));
        }
        for (row, &draw) in self.perms[n].clone().iter().enumerate() {
            let u = self.uniforms[n][draw as usize];
            self.columns[n][row] = law.quantile(u);
        }
        Ok(())
    }
}

fn apply_row_order(col: &mut [f64], perm: &mut [u32], order: &[usize]) {
    let old_col: Vec<f64> = col.to_vec();
    let old_perm: Vec<u32> = perm.to_vec();
    for (i, &src) in order.iter().enumerate() {
        col[i] = old_col[src];
        perm[i] = old_perm[src];
    }
}

/// Independent inverse-transform initialization: one uniform stream per
/// column, quantiles of the per-column law, identity permutations.
pub fn draw_independent(
    laws: &[MarginalLaw],
    weights: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<SampleMatrix> {
    if laws.is_empty() {
        return Err(Error::EmptySubset);
    }
    if n_samples < 2 {
        return Err(Error::Config(format!("need M >= 2, got {n_samples}")));
    }
    if weights.len() != laws.len() {
        return Err(Error::State("weights do not match laws".into()));
    }
    let maturity = laws[0].maturity;
    for law in laws {
        if (law.maturity - maturity).abs() > 1e-9 {
            return Err(Error::Law("laws span multiple maturities".into()));
        }
    }
    let mut columns = Vec::with_capacity(laws.len());
    let mut uniforms = Vec::with_capacity(laws.len());
    for (n, law) in laws.iter().enumerate() {
        let mut rng = rng::substream(seed, &[stream::DRAW_UNIFORMS, n as u64]);
        let mut us = Vec::with_capacity(n_samples);
        let mut vs = Vec::with_capacity(n_samples);
        for _ in 0..n_samples {
            let mut u: f64 = rng.random();
            while u <= 0.0 {
                u = rng.random();
            }
            us.push(u);
            vs.push(law.quantile(u));
        }
        uniforms.push(us);
        columns.push(vs);
    }
    let perms = vec![(0..n_samples as u32).collect::<Vec<u32>>(); laws.len()];
    Ok(SampleMatrix {
        maturity,
        columns,
        uniforms,
        perms,
        weights: weights.to_vec(),
    })
}

/// Right-continuous empirical CDF.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(samples: &[f64]) -> Self {
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        EmpiricalCdf { sorted }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }

    /// `F_hat(x)` = (# samples <= x) / M.
    pub fn eval(&self, x: f64) -> f64 {
        let count = self.sorted.partition_point(|&s| s <= x);
        count as f64 / self.sorted.len() as f64
    }
}

/// Sup-norm distance between an empirical CDF and a target law.
///
/// The sup of a step-vs-continuous difference is attained at the sample
/// jumps (from both sides) or at the law's grid kinks; all of them are
/// evaluated.
pub fn ks_distance(ecdf: &EmpiricalCdf, law: &MarginalLaw) -> f64 {
    let m = ecdf.len() as f64;
    let mut worst: f64 = 0.0;
    for (i, &x) in ecdf.sorted_samples().iter().enumerate() {
        let f = law.cdf(x);
        worst = worst.max(((i + 1) as f64 / m - f).abs());
        worst = worst.max((f - i as f64 / m).abs());
    }
    for &g in &law.grid {
        worst = worst.max((ecdf.eval(g) - law.cdf(g)).abs());
    }
    worst
}

/// Sup-norm distance between two empirical CDFs (two-sample KS statistic).
pub fn ks_distance_between(a: &EmpiricalCdf, b: &EmpiricalCdf) -> f64 {
    let mut worst: f64 = 0.0;
    for &x in a.sorted_samples().iter().chain(b.sorted_samples()) {
        worst = worst.max((a.eval(x) - b.eval(x)).abs());
    }
    worst
}

/// Rank matrix of a sample set: per column, the normalized rank of every
/// current row in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCopula {
    /// Column-major normalized ranks aligned with the matrix rows.
    pub rank_columns: Vec<Vec<f64>>,
}

impl EmpiricalCopula {
    pub fn from_matrix(matrix: &SampleMatrix) -> Self {
        let rank_columns = matrix.columns.iter().map(|c| normalized_ranks(c)).collect();
        EmpiricalCopula { rank_columns }
    }

    /// Rank matrix through the marginal laws, `F_n(s_n^m)` per entry;
    /// equals the empirical ranks up to law-evaluation rounding.
    pub fn from_matrix_with_laws(matrix: &SampleMatrix, laws: &[MarginalLaw]) -> Self {
        let rank_columns = matrix
            .columns
            .iter()
            .zip(laws)
            .map(|(col, law)| col.iter().map(|&v| law.cdf(v)).collect())
            .collect();
        EmpiricalCopula { rank_columns }
    }

    /// Empirical copula evaluated at a point `u` in `[0,1]^N`: the fraction
    /// of rows whose rank vector is componentwise below `u`.
    pub fn eval(&self, u: &[f64]) -> f64 {
        let n_rows = self.rank_columns[0].len();
        let mut count = 0usize;
        for row in 0..n_rows {
            if self
                .rank_columns
                .iter()
                .zip(u)
                .all(|(col, &ui)| col[row] <= ui)
            {
                count += 1;
            }
        }
        count as f64 / n_rows as f64
    }
}

fn normalized_ranks(values: &[f64]) -> Vec<f64> {
    let m = values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; m];
    for (rank, &row) in order.iter().enumerate() {
        ranks[row] = (rank + 1) as f64 / m as f64;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Exchangeability diagnostic in `[0, 1]`.
///
/// Computes the rank correlation of every column pair and returns one
/// minus the largest deviation of a pairwise correlation from the pairwise
/// mean. Exchangeable matrices score 1 (all pairs look alike); a matrix
/// with one strongly coupled pair among independent columns scores low.
/// With a single pair (N = 2) the dispersion is zero by construction.
pub fn symmetry_measure(matrix: &SampleMatrix) -> f64 {
    let n = matrix.n_assets();
    assert!(n >= 2, "symmetry needs at least two columns");
    let ranks: Vec<Vec<f64>> = matrix.columns.iter().map(|c| normalized_ranks(c)).collect();
    let mut rhos = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            rhos.push(pearson(&ranks[i], &ranks[j]));
        }
    }
    let mean = rhos.iter().sum::<f64>() / rhos.len() as f64;
    let max_dev = rhos
        .iter()
        .map(|r| (r - mean).abs())
        .fold(0.0f64, f64::max);
    1.0 - max_dev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn uniform_laws(n: usize) -> Vec<MarginalLaw> {
        (0..n).map(|_| MarginalLaw::uniform(0.0, 1.0, 1.0)).collect()
    }

    #[test]
    fn lognormal_draw_mean_within_three_standard_errors() {
        let law = MarginalLaw::lognormal(100.0, 0.25, 1.0, 2001);
        let m = 10_000;
        let matrix = draw_independent(&[law], &[1.0], m, 77).unwrap();
        let samples = &matrix.columns[0];
        let mean = crate::math::mean(samples);
        let se = (crate::math::sample_variance(samples) / m as f64).sqrt();
        assert!(
            (mean - 100.0).abs() < 3.0 * se,
            "mean {mean}, se {se}"
        );
    }

    #[test]
    fn toy_shape_and_range() {
        let matrix = draw_independent(&uniform_laws(2), &[1.0, 1.0], 10, 5).unwrap();
        assert_eq!(matrix.n_samples(), 10);
        assert_eq!(matrix.n_assets(), 2);
        for col in &matrix.columns {
            assert!(col.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn draw_is_deterministic() {
        let laws = uniform_laws(3);
        let w = [1.0, 1.0, 1.0];
        let a = draw_independent(&laws, &w, 100, 42).unwrap();
        let b = draw_independent(&laws, &w, 100, 42).unwrap();
        assert_eq!(a, b);
        let c = draw_independent(&laws, &w, 100, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn arranged_toy_columns_give_golden_index_vector() {
        // Ten pre-arranged toy rows and their published column sums.
        let s1 = vec![0.04, 0.05, 0.14, 0.26, 0.29, 0.31, 0.44, 0.72, 0.76, 1.00];
        let s2 = vec![0.01, 0.07, 0.17, 0.31, 0.41, 0.47, 0.69, 0.76, 0.83, 0.76];
        let m = SampleMatrix::from_columns(1.0, vec![s1, s2], vec![1.0, 1.0]).unwrap();
        let index = m.index_vector();
        let golden = [0.05, 0.12, 0.31, 0.57, 0.70, 0.78, 1.13, 1.48, 1.59, 1.76];
        for (got, want) in index.iter().zip(&golden) {
            assert_relative_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn singleton_aggregate_is_scaled_column() {
        let m = draw_independent(&uniform_laws(3), &[0.5, 0.3, 0.2], 50, 9).unwrap();
        let b = m.aggregate(&[1]).unwrap();
        for (got, v) in b.iter().zip(&m.columns[1]) {
            assert_relative_eq!(got, &(0.3 * v), epsilon = 1e-15);
        }
    }

    #[test]
    fn subset_plus_complement_is_index() {
        let m = draw_independent(&uniform_laws(4), &[0.4, 0.3, 0.2, 0.1], 64, 3).unwrap();
        let a = m.aggregate(&[0, 2]).unwrap();
        let b = m.aggregate(&[1, 3]).unwrap();
        let index = m.index_vector();
        for i in 0..m.n_samples() {
            assert_relative_eq!(a[i] + b[i], index[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_subset_rejected() {
        let m = draw_independent(&uniform_laws(2), &[1.0, 1.0], 10, 3).unwrap();
        assert!(matches!(m.aggregate(&[]), Err(Error::EmptySubset)));
    }

    #[test]
    fn empirical_cdf_basics() {
        let e = EmpiricalCdf::new(&[1.0, 2.0, 3.0]);
        assert_relative_eq!(e.eval(2.0), 2.0 / 3.0);
        assert_relative_eq!(e.eval(0.5), 0.0);
        assert_relative_eq!(e.eval(3.0), 1.0);
        assert_relative_eq!(e.eval(10.0), 1.0);
    }

    #[test]
    fn empirical_cdf_of_many_draws_is_close_to_law() {
        let law = MarginalLaw::lognormal(100.0, 0.3, 1.0, 2001);
        let m = draw_independent(std::slice::from_ref(&law), &[1.0], 20_000, 17).unwrap();
        let e = EmpiricalCdf::new(&m.columns[0]);
        assert!(ks_distance(&e, &law) < 0.015);
    }

    #[test]
    fn ks_distance_stratified_identity() {
        let law = MarginalLaw::lognormal(100.0, 0.3, 1.0, 4001);
        let m = 500;
        let samples: Vec<f64> = (0..m)
            .map(|i| law.quantile((i as f64 + 0.5) / m as f64))
            .collect();
        let d = ks_distance(&EmpiricalCdf::new(&samples), &law);
        assert!(d <= 0.5 / m as f64 + 1e-3, "d = {d}");
    }

    #[test]
    fn ks_distance_single_sample_at_median() {
        let law = MarginalLaw::lognormal(100.0, 0.3, 1.0, 2001);
        let median = law.quantile(0.5);
        let d = ks_distance(&EmpiricalCdf::new(&[median]), &law);
        assert_relative_eq!(d, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn rearrangement_preserves_column_multisets_and_marginal_distance() {
        let law = MarginalLaw::lognormal(100.0, 0.3, 1.0, 2001);
        let laws = vec![law.clone(), law.clone(), law];
        let mut m = draw_independent(&laws, &[1.0, 1.0, 1.0], 500, 21).unwrap();
        let before: Vec<Vec<f64>> = (0..3).map(|n| m.column_sorted(n)).collect();
        let d_before: Vec<f64> = (0..3)
            .map(|n| ks_distance(&EmpiricalCdf::new(&m.columns[n]), &laws[n]))
            .collect();
        m.sort_columns();
        m.shuffle_columns(99, 0);
        m.sort_columns();
        m.shuffle_columns(99, 1);
        let after: Vec<Vec<f64>> = (0..3).map(|n| m.column_sorted(n)).collect();
        assert_eq!(before, after, "column multisets changed");
        for n in 0..3 {
            let d = ks_distance(&EmpiricalCdf::new(&m.columns[n]), &laws[n]);
            assert_eq!(d.to_bits(), d_before[n].to_bits(), "marginal distance moved");
        }
    }

    #[test]
    fn comonotone_matrix_is_fully_symmetric() {
        let base: Vec<f64> = (0..200).map(|i| (i as f64).sin().abs() + 0.1).collect();
        let mut cols = Vec::new();
        for scale in [1.0, 2.0, 5.0] {
            cols.push(base.iter().map(|v| v * scale).collect());
        }
        let m = SampleMatrix::from_columns(1.0, cols, vec![1.0; 3]).unwrap();
        assert_relative_eq!(symmetry_measure(&m), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lopsided_dependence_scores_below_exchangeable() {
        // Columns 1,2 comonotone, column 3 independent.
        let m_rows = 10_000;
        let mut rng = substream(4, &[1]);
        let u: Vec<f64> = (0..m_rows).map(|_| rng.random()).collect();
        let v: Vec<f64> = (0..m_rows).map(|_| rng.random()).collect();
        let lopsided =
            SampleMatrix::from_columns(1.0, vec![u.clone(), u.clone(), v], vec![1.0; 3]).unwrap();
        let s_lop = symmetry_measure(&lopsided);

        // Exchangeable Gaussian copula at matched mean pairwise rank
        // correlation (pairwise mean of {1, 0, 0} is 1/3).
        let rho: f64 = 1.0 / 3.0;
        let mut cols = vec![Vec::new(); 3];
        for _ in 0..m_rows {
            let f: f64 = rng.sample(StandardNormal);
            for col in cols.iter_mut() {
                let e: f64 = rng.sample(StandardNormal);
                col.push(rho.sqrt() * f + (1.0 - rho).sqrt() * e);
            }
        }
        let gauss = SampleMatrix::from_columns(1.0, cols, vec![1.0; 3]).unwrap();
        let s_gauss = symmetry_measure(&gauss);

        assert!(s_lop < 1.0);
        assert!(
            s_lop < s_gauss,
            "lopsided {s_lop} should be below exchangeable {s_gauss}"
        );
    }

    #[test]
    fn two_columns_always_score_one() {
        let m = draw_independent(&uniform_laws(2), &[1.0, 1.0], 100, 8).unwrap();
        assert_relative_eq!(symmetry_measure(&m), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn copula_rank_columns_are_permutations() {
        let m = draw_independent(&uniform_laws(3), &[1.0; 3], 50, 12).unwrap();
        let cop = EmpiricalCopula::from_matrix(&m);
        for col in &cop.rank_columns {
            let mut sorted = col.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (i, r) in sorted.iter().enumerate() {
                assert_relative_eq!(r, &((i + 1) as f64 / 50.0), epsilon = 1e-12);
            }
        }
        assert_relative_eq!(cop.eval(&[1.0, 1.0, 1.0]), 1.0);

        // law-evaluated ranks agree with empirical ranks up to rounding
        let laws = uniform_laws(3);
        let law_cop = EmpiricalCopula::from_matrix_with_laws(&m, &laws);
        for (law_col, emp_col) in law_cop.rank_columns.iter().zip(&cop.rank_columns) {
            let mut order_a: Vec<usize> = (0..law_col.len()).collect();
            order_a.sort_by(|&x, &y| law_col[x].partial_cmp(&law_col[y]).unwrap());
            let mut order_b: Vec<usize> = (0..emp_col.len()).collect();
            order_b.sort_by(|&x, &y| emp_col[x].partial_cmp(&emp_col[y]).unwrap());
            assert_eq!(order_a, order_b, "rank order preserved through the law");
        }
    }

    #[test]
    fn remap_with_same_law_is_identity() {
        let law = MarginalLaw::lognormal(100.0, 0.3, 1.0, 1001);
        let mut m = draw_independent(&[law.clone(), law.clone()], &[1.0, 1.0], 200, 31).unwrap();
        m.sort_columns();
        m.shuffle_columns(7, 0);
        let before = m.columns[0].clone();
        m.remap_column(0, &law).unwrap();
        let after = &m.columns[0];
        for (b, a) in before.iter().zip(after) {
            assert_eq!(b.to_bits(), a.to_bits());
        }
    }
}
