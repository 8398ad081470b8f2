//! Iterative sort-mix rearrangement.
//!
//! The index law is discretized into a target vector of per-bin expected
//! sample counts. The engine then alternates two arrangements of the
//! remaining sample matrix (all columns sorted ascending, then all
//! columns independently shuffled) and after each arrangement harvests
//! the rows whose index value still fits under the target histogram. Harvested rows
//! accumulate in arrival order; the loop ends when the remaining fraction
//! drops below the stop threshold or the iteration budget is spent, and
//! whatever is left is appended as-is. Column multisets are preserved
//! exactly throughout, so the constituent marginals never move.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, stream};
use crate::sampling::{draw_independent, SampleMatrix};
use crate::smile::MarginalLaw;

/// Discretized index PDF: expected sample counts per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetVector {
    /// Equidistant bin edges `g_0 < g_1 < ... < g_K`.
    pub bin_edges: Vec<f64>,
    /// Expected counts per bin, `counts[k-1]` for bin `(g_{k-1}, g_k]`
    /// (the first bin includes its left edge).
    pub counts: Vec<u32>,
    pub total_mass: u64,
}

impl TargetVector {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    /// Bin index (0-based) for a value, or `None` when out of range.
    /// A value exactly on an interior edge belongs to the left bin.
    pub fn bin_of(&self, value: f64) -> Option<usize> {
        let k = self.bin_edges.len() - 1;
        if value < self.bin_edges[0] || value > self.bin_edges[k] {
            return None;
        }
        if value == self.bin_edges[0] {
            return Some(0);
        }
        Some(self.bin_edges[1..].partition_point(|&e| e < value))
    }

    /// Build a target from explicit counts; test fixture path.
    pub fn from_counts(bin_edges: Vec<f64>, counts: Vec<u32>) -> Result<Self> {
        validate_edges(&bin_edges, counts.len())?;
        let total_mass = counts.iter().map(|&c| c as u64).sum();
        Ok(TargetVector {
            bin_edges,
            counts,
            total_mass,
        })
    }
}

fn validate_edges(edges: &[f64], n_bins: usize) -> Result<()> {
    if edges.len() != n_bins + 1 || n_bins < 1 {
        return Err(Error::Config(format!(
            "need {} edges for {} bins, got {}",
            n_bins + 1,
            n_bins,
            edges.len()
        )));
    }
    let h = (edges[n_bins] - edges[0]) / n_bins as f64;
    if !(h > 0.0) {
        return Err(Error::Config("bin edges not increasing".into()));
    }
    for (i, pair) in edges.windows(2).enumerate() {
        let step = pair[1] - pair[0];
        if (step - h).abs() > 1e-9 * h.max(1.0) {
            return Err(Error::Config(format!(
                "bin edges not equidistant at {}: step {step} vs {h}",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Rearrangement settings.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IsmConfig {
    /// Number of bins K for target construction.
    pub bins: usize,
    /// Hard cap on sort+mix iterations.
    pub max_iterations: usize,
    /// Stop once the remaining sample fraction falls below this.
    pub stop_fraction: f64,
    pub seed: u64,
}

impl Default for IsmConfig {
    fn default() -> Self {
        IsmConfig {
            bins: 1400,
            max_iterations: 10,
            stop_fraction: 1e-3,
            seed: 0,
        }
    }
}

impl IsmConfig {
    fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::Config(format!("bins {} < 2", self.bins)));
        }
        if self.max_iterations < 1 {
            return Err(Error::Config("max_iterations < 1".into()));
        }
        if !(0.0..1.0).contains(&self.stop_fraction) {
            return Err(Error::Config(format!(
                "stop_fraction {} outside [0,1)",
                self.stop_fraction
            )));
        }
        Ok(())
    }
}

/// Arrangement used in one harvest pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arrangement {
    Sort,
    Mix,
}

/// Diagnostics of one harvest pass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HarvestPass {
    pub pass: usize,
    pub arrangement: Arrangement,
    /// Bin occupation of the remaining samples before harvesting.
    pub bin_counts: Vec<u32>,
    /// Samples stored away per bin, `min(c_k, target_k)` each.
    pub harvested_per_bin: Vec<u32>,
    pub out_of_range: u32,
    pub harvested: usize,
    pub remaining: usize,
    /// Remaining fraction of the original M after this pass.
    pub stage_loss: f64,
}

/// Output of one rearrangement run.
#[derive(Debug, Clone)]
pub struct IsmResult {
    /// Rearranged matrix: harvested rows in arrival order, leftovers last.
    pub matrix: SampleMatrix,
    /// Normalized L1 bin mismatch of the final full matrix.
    pub discrete_error: f64,
    pub iterations_used: usize,
    pub trace: Vec<HarvestPass>,
}

/// Discretize an index law into a target vector.
///
/// The range covers the `1/M` and `(M-1)/M` quantiles (one expected sample
/// outside each end), split into K equidistant bins; expected counts are
/// `M * (F(g_k) - F(g_{k-1}))` rounded half-to-even.
pub fn build_target(index_law: &MarginalLaw, n_samples: usize, bins: usize) -> Result<TargetVector> {
    if n_samples < bins || bins < 2 {
        return Err(Error::Config(format!(
            "need M >= K >= 2, got M={n_samples}, K={bins}"
        )));
    }
    let m = n_samples as f64;
    let g0 = index_law.quantile(1.0 / m);
    let gk = index_law.quantile((m - 1.0) / m);
    if !(gk > g0) {
        return Err(Error::Law(format!(
            "degenerate quantile range [{g0}, {gk}] for target"
        )));
    }
    let edges: Vec<f64> = (0..=bins)
        .map(|k| g0 + (gk - g0) * k as f64 / bins as f64)
        .collect();
    build_target_with_edges(index_law, n_samples, edges)
}

/// Discretize with explicit equidistant edges (toy/golden path).
///
/// Expected counts are rounded cumulatively (half-to-even on the running
/// `M * F(g_k)`), so thin tail bins keep their collective mass instead of
/// each rounding to zero; every prefix of the target stays within half a
/// sample of the law.
pub fn build_target_with_edges(
    index_law: &MarginalLaw,
    n_samples: usize,
    bin_edges: Vec<f64>,
) -> Result<TargetVector> {
    validate_edges(&bin_edges, bin_edges.len() - 1)?;
    let m = n_samples as f64;
    let mut counts = Vec::with_capacity(bin_edges.len() - 1);
    let mut prev = (m * index_law.cdf(bin_edges[0])).round_ties_even();
    for &edge in &bin_edges[1..] {
        let cum = (m * index_law.cdf(edge)).round_ties_even();
        counts.push((cum - prev).max(0.0) as u32);
        prev = cum;
    }
    let total_mass = counts.iter().map(|&c| c as u64).sum();
    Ok(TargetVector {
        bin_edges,
        counts,
        total_mass,
    })
}

/// Per-bin occupation counts of an index vector, plus the out-of-range count.
pub fn bin_counts(index_vector: &[f64], target: &TargetVector) -> (Vec<u32>, u32) {
    let mut counts = vec![0u32; target.n_bins()];
    let mut out = 0u32;
    for &v in index_vector {
        match target.bin_of(v) {
            Some(k) => counts[k] += 1,
            None => out += 1,
        }
    }
    (counts, out)
}

/// Normalized L1 mismatch between achieved and expected bin counts, halved
/// so one unplaced sample counts once. Out-of-range samples enter through
/// the bins they leave unfilled.
pub fn discrete_error(matrix: &SampleMatrix, target: &TargetVector) -> f64 {
    let (counts, _) = bin_counts(&matrix.index_vector(), target);
    discrete_error_from_counts(&counts, &target.counts, matrix.n_samples())
}

fn discrete_error_from_counts(counts: &[u32], expected: &[u32], n_samples: usize) -> f64 {
    let l1: u64 = counts
        .iter()
        .zip(expected)
        .map(|(&c, &e)| (c as i64 - e as i64).unsigned_abs())
        .sum();
    l1 as f64 / (2.0 * n_samples as f64)
}

/// Run the iterative sort-mix rearrangement on an initialized matrix.
pub fn run_ism(matrix: SampleMatrix, target: &TargetVector, config: &IsmConfig) -> Result<IsmResult> {
    config.validate()?;
    let m_total = matrix.n_samples();
    if m_total == 0 {
        return Err(Error::Config("empty sample matrix".into()));
    }
    let slack = (target.n_bins() as u64) / 2 + 1;
    if target.total_mass.abs_diff(m_total as u64) > slack {
        return Err(Error::Config(format!(
            "target mass {} inconsistent with M={m_total}",
            target.total_mass
        )));
    }

    let maturity = matrix.maturity;
    let weights = matrix.weights.clone();
    let uniforms = matrix.uniforms.clone();
    let n_assets = matrix.n_assets();

    let mut remaining = matrix;
    let mut stored: Vec<(Vec<f64>, Vec<u32>)> = Vec::with_capacity(m_total);
    let mut open = target.counts.clone();
    let mut trace = Vec::new();
    let mut iterations_used = 0;
    let mut pass_tag = 0u64;

    'iterations: for _ in 0..config.max_iterations {
        if remaining.n_samples() == 0
            || (remaining.n_samples() as f64) < config.stop_fraction * m_total as f64
        {
            break;
        }
        iterations_used += 1;
        for arrangement in [Arrangement::Sort, Arrangement::Mix] {
            if remaining.n_samples() == 0 {
                break 'iterations;
            }
            match arrangement {
                Arrangement::Sort => remaining.sort_columns(),
                Arrangement::Mix => remaining.shuffle_columns(config.seed, pass_tag),
            }
            let pass = harvest(
                &mut remaining,
                &mut open,
                target,
                config.seed,
                pass_tag,
                &mut stored,
                m_total,
                arrangement,
            );
            trace.push(pass);
            pass_tag += 1;
        }
    }

    // Leftovers keep their final (last-arrangement) order.
    let leftover_rows: Vec<usize> = (0..remaining.n_samples()).collect();
    let leftovers = remaining.take_rows(&leftover_rows);
    stored.extend(leftovers);
    debug_assert_eq!(stored.len(), m_total);

    let mut columns = vec![Vec::with_capacity(m_total); n_assets];
    let mut perms = vec![Vec::with_capacity(m_total); n_assets];
    for (vals, draw_idx) in &stored {
        for c in 0..n_assets {
            columns[c].push(vals[c]);
            perms[c].push(draw_idx[c]);
        }
    }
    let final_matrix = SampleMatrix {
        maturity,
        columns,
        uniforms,
        perms,
        weights,
    };
    let error = discrete_error(&final_matrix, target);
    Ok(IsmResult {
        matrix: final_matrix,
        discrete_error: error,
        iterations_used,
        trace,
    })
}

#[allow(clippy::too_many_arguments)]
fn harvest(
    remaining: &mut SampleMatrix,
    open: &mut [u32],
    target: &TargetVector,
    seed: u64,
    pass_tag: u64,
    stored: &mut Vec<(Vec<f64>, Vec<u32>)>,
    m_total: usize,
    arrangement: Arrangement,
) -> HarvestPass {
    let index = remaining.index_vector();
    let k_bins = target.n_bins();
    let mut rows_in_bin: Vec<Vec<usize>> = vec![Vec::new(); k_bins];
    let mut out_of_range = 0u32;
    for (row, &v) in index.iter().enumerate() {
        match target.bin_of(v) {
            Some(k) => rows_in_bin[k].push(row),
            None => out_of_range += 1,
        }
    }
    let counts: Vec<u32> = rows_in_bin.iter().map(|r| r.len() as u32).collect();

    let mut rng = rng::substream(seed, &[stream::ISM_HARVEST, pass_tag]);
    let mut picked: Vec<usize> = Vec::new();
    let mut harvested_per_bin = vec![0u32; k_bins];
    for (k, rows) in rows_in_bin.iter_mut().enumerate() {
        let take = (open[k] as usize).min(rows.len());
        if take == 0 {
            continue;
        }
        if take < rows.len() {
            // Seeded partial Fisher-Yates: uniform random subset.
            for i in 0..take {
                let j = rng.random_range(i..rows.len());
                rows.swap(i, j);
            }
        }
        picked.extend_from_slice(&rows[..take]);
        harvested_per_bin[k] = take as u32;
        open[k] -= take as u32;
    }
    picked.sort_unstable();
    let taken = remaining.take_rows(&picked);
    let harvested = taken.len();
    stored.extend(taken);

    HarvestPass {
        pass: pass_tag as usize + 1,
        arrangement,
        bin_counts: counts,
        harvested_per_bin,
        out_of_range,
        harvested,
        remaining: remaining.n_samples(),
        stage_loss: remaining.n_samples() as f64 / m_total as f64,
    }
}

/// Laws needed for one per-maturity rearrangement.
#[derive(Debug, Clone)]
pub struct MaturityLaws {
    pub maturity: f64,
    pub constituent_laws: Vec<MarginalLaw>,
    pub index_law: MarginalLaw,
    pub weights: Vec<f64>,
}

/// Deterministic per-maturity seed derivation; exposed so single-maturity
/// runs can be reproduced in isolation.
pub fn per_maturity_seed(master: u64, maturity_index: usize) -> u64 {
    rng::derive_seed(master, &[stream::DRAW_UNIFORMS, 0xa7, maturity_index as u64])
}

/// Run draw + target + rearrangement independently for every maturity.
/// Parallel across maturities; output identical to the serial order
/// because every maturity owns a derived seed.
pub fn run_per_maturity(
    inputs: &[MaturityLaws],
    n_samples: usize,
    config: &IsmConfig,
) -> Result<Vec<IsmResult>> {
    use rayon::prelude::*;
    inputs
        .par_iter()
        .enumerate()
        .map(|(i, input)| run_one_maturity(input, i, n_samples, config))
        .collect()
}

/// Serial twin of [`run_per_maturity`]; same output by construction.
pub fn run_per_maturity_serial(
    inputs: &[MaturityLaws],
    n_samples: usize,
    config: &IsmConfig,
) -> Result<Vec<IsmResult>> {
    inputs
        .iter()
        .enumerate()
        .map(|(i, input)| run_one_maturity(input, i, n_samples, config))
        .collect()
}

fn run_one_maturity(
    input: &MaturityLaws,
    maturity_index: usize,
    n_samples: usize,
    config: &IsmConfig,
) -> Result<IsmResult> {
    let seed = per_maturity_seed(config.seed, maturity_index);
    let matrix = draw_independent(&input.constituent_laws, &input.weights, n_samples, seed)
        .map_err(|e| Error::State(format!("maturity {}: {e}", input.maturity)))?;
    let target = build_target(&input.index_law, n_samples, config.bins)
        .map_err(|e| Error::Law(format!("maturity {}: {e}", input.maturity)))?;
    let cfg = IsmConfig { seed, ..*config };
    run_ism(matrix, &target, &cfg)
        .map_err(|e| Error::State(format!("maturity {}: {e}", input.maturity)))
}
