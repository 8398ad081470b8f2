//! Independent verifiers for the rearrangement machinery.
//!
//! Everything here is deliberately brute-force or constructive: exhaustive
//! search over all column arrangements at tiny scale, the rank-matching
//! construction behind the convergence argument, a direct check of the
//! price-error bound, and the three-asset demonstration that an index
//! distribution does not pin down sub-basket prices.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, stream};
use crate::sampling::{
    ks_distance, ks_distance_between, symmetry_measure, EmpiricalCdf, SampleMatrix,
};
use crate::smile::MarginalLaw;

/// Outcome of the exhaustive arrangement search.
#[derive(Debug, Clone)]
pub struct EnumerationResult {
    /// Global minimum of the sup-norm index error over all arrangements.
    pub best_error: f64,
    pub best_matrix: SampleMatrix,
    pub arrangements_tested: u64,
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

fn all_permutations(m: usize) -> Vec<Vec<u32>> {
    // Heap's algorithm, deterministic order.
    let mut items: Vec<u32> = (0..m as u32).collect();
    let mut out = Vec::with_capacity(factorial(m) as usize);
    let mut c = vec![0usize; m];
    out.push(items.clone());
    let mut i = 0;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            out.push(items.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Exhaustive minimization of the index sup-norm error over all column
/// arrangements, first column held fixed (global row relabeling does not
/// change the sum multiset).
pub fn brute_force_rearrange(
    matrix: &SampleMatrix,
    index_law: &MarginalLaw,
) -> Result<EnumerationResult> {
    let m = matrix.n_samples();
    let n = matrix.n_assets();
    if !(2..=3).contains(&n) || m > 6 {
        return Err(Error::Size(format!(
            "enumeration supports M <= 6, N in {{2,3}}, got M={m}, N={n}"
        )));
    }
    let space = factorial(m).pow(n as u32 - 1);
    if space > 1_000_000 {
        return Err(Error::Size(format!("{space} arrangements exceed the cap")));
    }

    let perms = all_permutations(m);
    let weights = &matrix.weights;
    let base: Vec<f64> = (0..m).map(|r| weights[0] * matrix.columns[0][r]).collect();

    let mut best_error = f64::INFINITY;
    let mut best_perm: Vec<&Vec<u32>> = Vec::new();
    let mut tested = 0u64;
    let mut sums = vec![0.0f64; m];

    let mut evaluate = |chosen: &[&Vec<u32>]| -> f64 {
        for (r, s) in sums.iter_mut().enumerate() {
            *s = base[r];
        }
        for (c, perm) in chosen.iter().enumerate() {
            let col = &matrix.columns[c + 1];
            let w = weights[c + 1];
            for (r, s) in sums.iter_mut().enumerate() {
                *s += w * col[perm[r] as usize];
            }
        }
        ks_distance(&EmpiricalCdf::new(&sums), index_law)
    };

    if n == 2 {
        for p1 in &perms {
            let err = evaluate(&[p1]);
            tested += 1;
            if err < best_error {
                best_error = err;
                best_perm = vec![p1];
            }
        }
    } else {
        for p1 in &perms {
            for p2 in &perms {
                let err = evaluate(&[p1, p2]);
                tested += 1;
                if err < best_error {
                    best_error = err;
                    best_perm = vec![p1, p2];
                }
            }
        }
    }

    let mut best_matrix = matrix.clone();
    for (c, perm) in best_perm.iter().enumerate() {
        let col = matrix.columns[c + 1].clone();
        let draw = matrix.perms[c + 1].clone();
        for r in 0..m {
            best_matrix.columns[c + 1][r] = col[perm[r] as usize];
            best_matrix.perms[c + 1][r] = draw[perm[r] as usize];
        }
    }
    Ok(EnumerationResult {
        best_error,
        best_matrix,
        arrangements_tested: tested,
    })
}

/// Piecewise-linear law through the midpoint ranks of a sample set; the
/// empirical target used by tiny-instance experiments.
pub fn law_from_samples(samples: &[f64], maturity: f64) -> MarginalLaw {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = sorted.len();
    let span = (sorted[m - 1] - sorted[0]).max(1e-9);
    let pad = 0.05 * span;
    let mut grid = vec![sorted[0] - pad];
    let mut cdf = vec![0.0];
    for (i, &x) in sorted.iter().enumerate() {
        let p = (i as f64 + 0.5) / m as f64;
        if x > *grid.last().unwrap() {
            grid.push(x);
            cdf.push(p);
        } else {
            // tie: keep the higher rank at the shared grid point
            *cdf.last_mut().unwrap() = p;
        }
    }
    grid.push(sorted[m - 1] + pad);
    cdf.push(1.0);
    let pdf = vec![0.0; grid.len()];
    let forward = crate::math::mean(samples);
    MarginalLaw {
        maturity,
        grid,
        cdf,
        pdf,
        forward,
    }
}

/// Rearrange `independent` so its ranks match `reference` elementwise:
/// position `i` receives the independent order statistic with the same
/// rank that `reference[i]` has among the reference samples.
pub fn rank_match(reference: &[f64], independent: &[f64]) -> Vec<f64> {
    let m = reference.len();
    assert_eq!(m, independent.len());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| reference[a].partial_cmp(&reference[b]).unwrap());
    let mut rank_of = vec![0usize; m];
    for (rank, &row) in order.iter().enumerate() {
        rank_of[row] = rank;
    }
    let mut sorted_ind = independent.to_vec();
    sorted_ind.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (0..m).map(|i| sorted_ind[rank_of[i]]).collect()
}

/// A bivariate joint law with a Gaussian copula; the known-copula fixture
/// for the convergence experiment.
#[derive(Debug, Clone)]
pub struct GaussianCopulaPair {
    pub rho: f64,
    pub law1: MarginalLaw,
    pub law2: MarginalLaw,
}

impl GaussianCopulaPair {
    /// Draw joint samples of both marginals under the copula.
    pub fn sample(&self, m: usize, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
        let mut a = Vec::with_capacity(m);
        let mut b = Vec::with_capacity(m);
        let load = self.rho;
        let resid = (1.0 - self.rho * self.rho).sqrt();
        for _ in 0..m {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let u1 = crate::math::norm_cdf(z1).clamp(1e-12, 1.0 - 1e-12);
            let u2 =
                crate::math::norm_cdf(load * z1 + resid * z2).clamp(1e-12, 1.0 - 1e-12);
            a.push(self.law1.quantile(u1));
            b.push(self.law2.quantile(u2));
        }
        (a, b)
    }
}

/// One point of the rank-matching error curve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LemmaPoint {
    pub m: usize,
    pub mean_error: f64,
}

/// Rank-matching convergence experiment for a known bivariate copula.
///
/// Per trial: draw reference samples from the true joint law, draw fresh
/// independent marginals, rank-match each independent column to the
/// reference column, and record the sup-norm distance between the two
/// empirical sum distributions. Returns the per-size mean over trials.
pub fn verify_lemma1(
    joint: &GaussianCopulaPair,
    m_grid: &[usize],
    trials: usize,
    seed: u64,
) -> Vec<LemmaPoint> {
    m_grid
        .iter()
        .map(|&m| {
            let mut acc = 0.0;
            for trial in 0..trials {
                let mut rng =
                    rng::substream(seed, &[stream::ORACLE, m as u64, trial as u64]);
                let (ref1, ref2) = joint.sample(m, &mut rng);
                let ind1: Vec<f64> = (0..m)
                    .map(|_| joint.law1.quantile(open_uniform(&mut rng)))
                    .collect();
                let ind2: Vec<f64> = (0..m)
                    .map(|_| joint.law2.quantile(open_uniform(&mut rng)))
                    .collect();
                let matched1 = rank_match(&ref1, &ind1);
                let matched2 = rank_match(&ref2, &ind2);
                let ref_sum: Vec<f64> = ref1.iter().zip(&ref2).map(|(a, b)| a + b).collect();
                let matched_sum: Vec<f64> =
                    matched1.iter().zip(&matched2).map(|(a, b)| a + b).collect();
                acc += ks_distance_between(
                    &EmpiricalCdf::new(&ref_sum),
                    &EmpiricalCdf::new(&matched_sum),
                );
            }
            LemmaPoint {
                m,
                mean_error: acc / trials as f64,
            }
        })
        .collect()
}

fn open_uniform(rng: &mut impl Rng) -> f64 {
    let mut u: f64 = rng.random();
    while u <= 0.0 {
        u = rng.random();
    }
    u
}

/// Bound check at one strike.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StrikeCheck {
    pub strike: f64,
    pub mc_price: f64,
    pub law_price: f64,
    pub deviation: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Price-error bound report for one sample set against its target law.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem1Report {
    /// Sup-norm distance between empirical and target CDF.
    pub epsilon: f64,
    /// Interval outside which the CDFs agree to 1e-9.
    pub support_lo: f64,
    pub support_hi: f64,
    pub rows: Vec<StrikeCheck>,
}

impl Theorem1Report {
    pub fn all_hold(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }
}

/// Check `|MC call - law call| <= epsilon * (b - a)` at every strike.
///
/// Undiscounted prices on both sides: the Monte Carlo call is the exact
/// sample average, the law call integrates the piecewise-linear CDF
/// exactly, and the disagreement interval `[a, b]` is the hull of the
/// evaluation points (samples, their left limits, law grid) where the two
/// CDFs differ by at least 1e-9, widened by one point on each side.
pub fn verify_theorem1(
    samples: &[f64],
    index_law: &MarginalLaw,
    strikes: &[f64],
) -> Theorem1Report {
    let ecdf = EmpiricalCdf::new(samples);
    let m = samples.len() as f64;
    let epsilon = ks_distance(&ecdf, index_law);

    let mut points: Vec<f64> = ecdf
        .sorted_samples()
        .iter()
        .chain(index_law.grid.iter())
        .copied()
        .collect();
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
    points.dedup();
    let diff_at = |x: f64| -> f64 {
        let right = (ecdf.eval(x) - index_law.cdf(x)).abs();
        let left_count = ecdf.sorted_samples().partition_point(|&s| s < x);
        let left = (left_count as f64 / m - index_law.cdf(x)).abs();
        right.max(left)
    };
    let flagged: Vec<usize> = (0..points.len())
        .filter(|&i| diff_at(points[i]) >= 1e-9)
        .collect();
    let (support_lo, support_hi) = match (flagged.first(), flagged.last()) {
        (Some(&first), Some(&last)) => (
            points[first.saturating_sub(1)],
            points[(last + 1).min(points.len() - 1)],
        ),
        _ => (points[0], points[0]),
    };

    let bound = epsilon * (support_hi - support_lo);
    let rows = strikes
        .iter()
        .map(|&k| {
            let mc_price = samples.iter().map(|&s| (s - k).max(0.0)).sum::<f64>() / m;
            let law_price = index_law.call_undisc(k);
            let deviation = (mc_price - law_price).abs();
            StrikeCheck {
                strike: k,
                mc_price,
                law_price,
                deviation,
                bound,
                holds: deviation <= bound + 1e-12 * (1.0 + bound.abs()),
            }
        })
        .collect();
    Theorem1Report {
        epsilon,
        support_lo,
        support_hi,
        rows,
    }
}

/// Underdetermination demonstration report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnderdeterminationReport {
    /// Two-sample sup distance between the index distributions.
    pub index_ks: f64,
    /// Distance between the {1,2} sub-basket distributions.
    pub basket_ks: f64,
    /// ATM (K=1) call on the sub-basket in each world.
    pub basket_price_world1: f64,
    pub basket_price_world2: f64,
    pub symmetry_world1: f64,
    pub symmetry_world2: f64,
    pub symmetry_exchangeable: f64,
}

/// Build the two three-asset uniform worlds that share an index law but
/// disagree on the {1,2} sub-basket: world 1 couples assets 1 and 2,
/// world 2 couples assets 1 and 3.
pub fn demo_underdetermination(m: usize, seed: u64) -> UnderdeterminationReport {
    let mut rng1 = rng::substream(seed, &[stream::ORACLE, 1]);
    let u: Vec<f64> = (0..m).map(|_| rng1.random()).collect();
    let v: Vec<f64> = (0..m).map(|_| rng1.random()).collect();
    let world1 =
        SampleMatrix::from_columns(1.0, vec![u.clone(), u.clone(), v], vec![1.0; 3]).unwrap();

    let mut rng2 = rng::substream(seed, &[stream::ORACLE, 2]);
    let x: Vec<f64> = (0..m).map(|_| rng2.random()).collect();
    let y: Vec<f64> = (0..m).map(|_| rng2.random()).collect();
    let world2 =
        SampleMatrix::from_columns(1.0, vec![x.clone(), y, x], vec![1.0; 3]).unwrap();

    let index_ks = ks_distance_between(
        &EmpiricalCdf::new(&world1.index_vector()),
        &EmpiricalCdf::new(&world2.index_vector()),
    );
    let basket1 = world1.aggregate(&[0, 1]).unwrap();
    let basket2 = world2.aggregate(&[0, 1]).unwrap();
    let basket_ks = ks_distance_between(&EmpiricalCdf::new(&basket1), &EmpiricalCdf::new(&basket2));

    let atm_call = |b: &[f64]| b.iter().map(|&x| (x - 1.0).max(0.0)).sum::<f64>() / m as f64;

    // Exchangeable Gaussian reference at the matched mean pairwise rank
    // correlation (pairwise ranks {1, 0, 0} average to 1/3; the Pearson
    // rho reproducing that Spearman value is 2 sin(pi/18)).
    let rho: f64 = 2.0 * (std::f64::consts::PI / 18.0).sin();
    let mut rng3 = rng::substream(seed, &[stream::ORACLE, 3]);
    let mut cols = vec![Vec::new(); 3];
    for _ in 0..m {
        let f: f64 = rng3.sample(StandardNormal);
        for col in cols.iter_mut() {
            let e: f64 = rng3.sample(StandardNormal);
            col.push(rho.sqrt() * f + (1.0 - rho).sqrt() * e);
        }
    }
    let exchangeable = SampleMatrix::from_columns(1.0, cols, vec![1.0; 3]).unwrap();

    UnderdeterminationReport {
        index_ks,
        basket_ks,
        basket_price_world1: atm_call(&basket1),
        basket_price_world2: atm_call(&basket2),
        symmetry_world1: symmetry_measure(&world1),
        symmetry_world2: symmetry_measure(&world2),
        symmetry_exchangeable: symmetry_measure(&exchangeable),
    }
}
