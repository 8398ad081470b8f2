//! Basket density estimation and local-volatility calibration.
//!
//! Per maturity, the rearranged basket samples are smoothed into a
//! [`BasketDensity`] with a Gaussian kernel (the local-vol ratio divides by
//! the density, so smoothness matters). The densities are then turned into
//! a [`LocalVolSurface`]: node `j` carries the forward volatility of the
//! interval `(t_{j-1}, t_j]`, computed from calendar differences of
//! undiscounted call prices against time-averaged densities. The first
//! interval has no earlier information and uses the repricing-equivalent
//! Black vol of the first maturity instead. Evaluating the surface applies
//! piecewise-constant forward variance in time (equivalently, linear
//! interpolation of total variance) and linear/flat interpolation in strike.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{implied_vol_black, sample_variance};
use crate::rng::{self, stream};

/// Density estimation settings.
#[derive(Debug, Clone, Copy)]
pub struct DensityConfig {
    /// Evaluation grid size.
    pub grid_points: usize,
    /// Multiplier on the Silverman bandwidth.
    pub bandwidth_factor: f64,
    /// Fixed bandwidth, bypassing Silverman's rule.
    pub bandwidth_override: Option<f64>,
    /// Soft floor under which a warning flag is raised.
    pub min_samples: usize,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig {
            grid_points: 512,
            bandwidth_factor: 1.0,
            bandwidth_override: None,
            min_samples: 1000,
        }
    }
}

/// Smoothed basket density and CDF at one maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasketDensity {
    pub maturity: f64,
    pub grid: Vec<f64>,
    pub pdf: Vec<f64>,
    pub cdf: Vec<f64>,
    /// Bandwidth used by the estimator (0 for analytic densities).
    pub bandwidth: f64,
    /// Raised when the sample count was below the production floor.
    pub low_sample_warning: bool,
}

impl BasketDensity {
    /// Wrap analytic grid data (oracle/test path).
    pub fn from_grid(maturity: f64, grid: Vec<f64>, pdf: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        if grid.len() < 3 || grid.len() != pdf.len() || grid.len() != cdf.len() {
            return Err(Error::DegenerateSamples("density grid inconsistent".into()));
        }
        Ok(BasketDensity {
            maturity,
            grid,
            pdf,
            cdf,
            bandwidth: 0.0,
            low_sample_warning: false,
        })
    }

    /// Density grid view of a marginal law.
    pub fn from_law(law: &crate::smile::MarginalLaw) -> Self {
        BasketDensity {
            maturity: law.maturity,
            grid: law.grid.clone(),
            pdf: law.pdf.clone(),
            cdf: law.cdf.clone(),
            bandwidth: 0.0,
            low_sample_warning: false,
        }
    }

    pub fn pdf_at(&self, x: f64) -> f64 {
        interp_clamped(&self.grid, &self.pdf, x, 0.0, 0.0)
    }

    pub fn cdf_at(&self, x: f64) -> f64 {
        interp_clamped(&self.grid, &self.cdf, x, 0.0, 1.0)
    }

    /// Inverse CDF on the grid.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.grid.len();
        if u <= self.cdf[0] {
            return self.grid[0];
        }
        if u >= self.cdf[n - 1] {
            return self.grid[n - 1];
        }
        let i = self.cdf.partition_point(|&c| c < u);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        if c1 - c0 <= f64::MIN_POSITIVE {
            return self.grid[i];
        }
        self.grid[i - 1] + (u - c0) / (c1 - c0) * (self.grid[i] - self.grid[i - 1])
    }

    /// Undiscounted call price, exact for the piecewise-linear CDF.
    pub fn call_undisc(&self, strike: f64) -> f64 {
        let n = self.grid.len();
        if strike >= self.grid[n - 1] {
            return 0.0;
        }
        let mut acc = 0.0;
        let start = if strike <= self.grid[0] {
            acc += (self.grid[0] - strike) * (1.0 - self.cdf[0]);
            1
        } else {
            self.grid.partition_point(|&g| g < strike)
        };
        if start > 0 && strike > self.grid[0] {
            let (x0, x1) = (self.grid[start - 1], self.grid[start]);
            let w = (strike - x0) / (x1 - x0);
            let f_at = self.cdf[start - 1] + w * (self.cdf[start] - self.cdf[start - 1]);
            acc += (x1 - strike) * (1.0 - 0.5 * (f_at + self.cdf[start]));
        }
        for i in start.max(1)..n - 1 {
            acc += (self.grid[i + 1] - self.grid[i]) * (1.0 - 0.5 * (self.cdf[i] + self.cdf[i + 1]));
        }
        acc
    }

    /// Mean of the density.
    pub fn mean(&self) -> f64 {
        // E[X] = grid[0] + integral of (1 - F) above grid[0], for X >= grid[0].
        self.grid[0] + self.call_undisc(self.grid[0])
    }
}

fn interp_clamped(grid: &[f64], values: &[f64], x: f64, below: f64, above: f64) -> f64 {
    let n = grid.len();
    if x < grid[0] {
        return below;
    }
    if x > grid[n - 1] {
        return above;
    }
    let i = grid.partition_point(|&g| g < x).clamp(1, n - 1);
    let w = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
    values[i - 1] + w * (values[i] - values[i - 1])
}

/// Gaussian kernel density estimate of basket samples.
///
/// Bandwidth is Silverman's rule `0.9 min(std, iqr/1.34) M^(-1/5)` scaled
/// by the config factor, the grid spans `[min - 3h, max + 3h]`, and the CDF
/// is the trapezoid integral of the normalized density.
pub fn estimate_density(
    samples: &[f64],
    maturity: f64,
    cfg: &DensityConfig,
) -> Result<BasketDensity> {
    if samples.is_empty() {
        return Err(Error::DegenerateSamples("no samples".into()));
    }
    let m = samples.len();
    let variance = sample_variance(samples);
    let bandwidth = match cfg.bandwidth_override {
        Some(h) if h > 0.0 => h,
        _ => {
            if variance <= 0.0 {
                return Err(Error::DegenerateSamples(format!(
                    "zero variance across {m} samples at T={maturity}"
                )));
            }
            let mut sorted = samples.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let iqr = sorted[(0.75 * (m - 1) as f64).round() as usize]
                - sorted[(0.25 * (m - 1) as f64).round() as usize];
            let spread = variance.sqrt().min((iqr / 1.34).max(f64::MIN_POSITIVE));
            cfg.bandwidth_factor * 0.9 * spread * (m as f64).powf(-0.2)
        }
    };

    let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * bandwidth;
    let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bandwidth;
    let n = cfg.grid_points.max(16);
    let step = (hi - lo) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|i| lo + i as f64 * step).collect();

    let norm = 1.0 / (m as f64 * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let pdf: Vec<f64> = grid
        .par_iter()
        .map(|&x| {
            let mut acc = 0.0;
            for &s in samples {
                let z = (x - s) / bandwidth;
                if z.abs() < 8.0 {
                    acc += (-0.5 * z * z).exp();
                }
            }
            acc * norm
        })
        .collect();

    let mut cdf = vec![0.0; n];
    for i in 1..n {
        cdf[i] = cdf[i - 1] + 0.5 * (pdf[i] + pdf[i - 1]) * step;
    }
    let total = cdf[n - 1];
    if total <= 0.0 {
        return Err(Error::DegenerateSamples("density has no mass".into()));
    }
    let mut pdf = pdf;
    for v in pdf.iter_mut() {
        *v /= total;
    }
    for v in cdf.iter_mut() {
        *v /= total;
    }

    Ok(BasketDensity {
        maturity,
        grid,
        pdf,
        cdf,
        bandwidth,
        low_sample_warning: m < cfg.min_samples,
    })
}

/// Local-vol calibration settings.
#[derive(Debug, Clone, Copy)]
pub struct LvConfig {
    /// Strike grid size of the surface.
    pub strikes: usize,
    /// Per-maturity quantile window inside which the ratio is trusted.
    pub quantile_window: (f64, f64),
    /// Lower clamp on local variance.
    pub var_floor: f64,
    /// Upper clamp on local volatility.
    pub vol_cap: f64,
    /// Calibration fails above this fraction of floored in-window nodes.
    pub max_floored_frac: f64,
}

impl Default for LvConfig {
    fn default() -> Self {
        LvConfig {
            strikes: 201,
            quantile_window: (0.005, 0.995),
            var_floor: 1e-6,
            vol_cap: 5.0,
            max_floored_frac: 0.10,
        }
    }
}

/// Calibrated basket local-vol surface.
///
/// `values[j]` holds the forward vol of the interval `(t_{j-1}, t_j]` per
/// strike node; evaluation is piecewise-constant in time and linear with
/// flat extrapolation in strike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalVolSurface {
    pub maturities: Vec<f64>,
    pub strikes: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub interpolation: String,
}

impl LocalVolSurface {
    /// Local vol at `(t, k)`.
    pub fn vol(&self, t: f64, strike: f64) -> f64 {
        let j = self
            .maturities
            .partition_point(|&tj| tj < t)
            .min(self.maturities.len() - 1);
        interp_flat(&self.strikes, &self.values[j], strike)
    }

    pub fn max_maturity(&self) -> f64 {
        *self.maturities.last().unwrap()
    }
}

fn interp_flat(grid: &[f64], values: &[f64], x: f64) -> f64 {
    let n = grid.len();
    if x <= grid[0] {
        return values[0];
    }
    if x >= grid[n - 1] {
        return values[n - 1];
    }
    let i = grid.partition_point(|&g| g < x).clamp(1, n - 1);
    let w = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
    values[i - 1] + w * (values[i] - values[i - 1])
}

/// Calibration telemetry.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LvDiagnostics {
    pub floored_nodes: usize,
    pub capped_nodes: usize,
    pub window_nodes: usize,
}

/// Calibrate the local-vol surface from a basket density term structure.
///
/// Interval `j >= 2` uses the calendar difference of undiscounted calls
/// against trapezoid-averaged density and CDF:
/// `var = [dC/dt - r*Cbar + r*k*(Fbar - 1)] / (k^2 fbar / 2)`;
/// the first interval uses the Black vol repricing the first maturity.
/// Local variance is floored and capped with telemetry; nodes outside a
/// maturity's quantile window are filled by flat strike extrapolation.
pub fn calibrate_local_vol(
    densities: &[BasketDensity],
    rate: f64,
    spot: f64,
    cfg: &LvConfig,
) -> Result<(LocalVolSurface, LvDiagnostics)> {
    if densities.len() < 2 {
        return Err(Error::Calibration(format!(
            "need at least 2 maturities, got {}",
            densities.len()
        )));
    }
    let mut ds: Vec<&BasketDensity> = densities.iter().collect();
    ds.sort_by(|a, b| a.maturity.partial_cmp(&b.maturity).unwrap());
    for w in ds.windows(2) {
        if w[1].maturity - w[0].maturity <= 0.0 {
            return Err(Error::Calibration("duplicate maturities".into()));
        }
    }
    if !(spot > 0.0) {
        return Err(Error::Calibration(format!("non-positive spot {spot}")));
    }

    let (q_lo, q_hi) = cfg.quantile_window;
    let lo = ds
        .iter()
        .map(|d| d.quantile(q_lo))
        .fold(f64::INFINITY, f64::min);
    let hi = ds
        .iter()
        .map(|d| d.quantile(q_hi))
        .fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::Calibration("degenerate strike span".into()));
    }
    let n_k = cfg.strikes.max(11);
    let strikes: Vec<f64> = (0..n_k)
        .map(|i| lo + (hi - lo) * i as f64 / (n_k - 1) as f64)
        .collect();

    let mut diag = LvDiagnostics::default();
    let mut values: Vec<Vec<f64>> = Vec::with_capacity(ds.len());

    for j in 0..ds.len() {
        let t_j = ds[j].maturity;
        let (win_lo, win_hi) = (ds[j].quantile(q_lo), ds[j].quantile(q_hi));
        let mut node_vals: Vec<Option<f64>> = vec![None; n_k];

        for (ki, &k) in strikes.iter().enumerate() {
            if k < win_lo || k > win_hi || k <= 0.0 {
                continue;
            }
            diag.window_nodes += 1;
            let var = if j == 0 {
                // Short end: Black vol that reprices the first maturity.
                let c = ds[0].call_undisc(k);
                let fwd = ds[0].mean();
                match implied_vol_black(c, fwd, k, t_j) {
                    Ok(v) => v * v,
                    Err(_) => {
                        diag.floored_nodes += 1;
                        cfg.var_floor
                    }
                }
            } else {
                let t_prev = ds[j - 1].maturity;
                let dt = t_j - t_prev;
                let dc = (ds[j].call_undisc(k) - ds[j - 1].call_undisc(k)) / dt;
                let c_bar = 0.5 * (ds[j].call_undisc(k) + ds[j - 1].call_undisc(k));
                let f_bar = 0.5 * (ds[j].cdf_at(k) + ds[j - 1].cdf_at(k));
                let pdf_bar = 0.5 * (ds[j].pdf_at(k) + ds[j - 1].pdf_at(k));
                let numerator = dc - rate * c_bar + rate * k * (f_bar - 1.0);
                let denominator = 0.5 * k * k * pdf_bar;
                if denominator <= 0.0 {
                    diag.floored_nodes += 1;
                    cfg.var_floor
                } else {
                    let raw = numerator / denominator;
                    if raw < cfg.var_floor {
                        diag.floored_nodes += 1;
                        cfg.var_floor
                    } else {
                        raw
                    }
                }
            };
            let mut vol = var.sqrt();
            if vol > cfg.vol_cap {
                diag.capped_nodes += 1;
                vol = cfg.vol_cap;
            }
            node_vals[ki] = Some(vol);
        }

        // Flat strike extrapolation outside the window.
        let first_valid = node_vals.iter().position(|v| v.is_some());
        let last_valid = node_vals.iter().rposition(|v| v.is_some());
        let (first_valid, last_valid) = match (first_valid, last_valid) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::Calibration(format!(
                    "no usable strikes inside the window at T={t_j}"
                )))
            }
        };
        let mut filled = Vec::with_capacity(n_k);
        for (ki, v) in node_vals.iter().enumerate() {
            let v = match v {
                Some(v) => *v,
                None if ki < first_valid => node_vals[first_valid].unwrap(),
                None if ki > last_valid => node_vals[last_valid].unwrap(),
                // interior gap: linear fill between neighbors
                None => {
                    let left = node_vals[..ki].iter().rposition(|v| v.is_some()).unwrap();
                    let right = ki + node_vals[ki..].iter().position(|v| v.is_some()).unwrap();
                    let w = (ki - left) as f64 / (right - left) as f64;
                    node_vals[left].unwrap() * (1.0 - w) + node_vals[right].unwrap() * w
                }
            };
            filled.push(v);
        }
        values.push(filled);
    }

    if diag.window_nodes > 0
        && (diag.floored_nodes as f64) > cfg.max_floored_frac * diag.window_nodes as f64
    {
        return Err(Error::Calibration(format!(
            "{} of {} nodes floored: density term structure inconsistent",
            diag.floored_nodes, diag.window_nodes
        )));
    }

    Ok((
        LocalVolSurface {
            maturities: ds.iter().map(|d| d.maturity).collect(),
            strikes,
            values,
            interpolation: "piecewise-forward-variance-time/linear-strike".to_string(),
        },
        diag,
    ))
}

/// Simulated paths on a fixed time grid, row per path.
#[derive(Debug, Clone)]
pub struct PathSet {
    pub times: Vec<f64>,
    pub paths: Vec<Vec<f64>>,
}

/// Log-Euler simulation of the basket under the local-vol surface.
///
/// Positivity-preserving by construction; deterministic under the seed with
/// per-path-block sub-streams; optional antithetic pairing.
pub fn simulate_paths(
    surface: &LocalVolSurface,
    spot: f64,
    rate: f64,
    time_grid: &[f64],
    n_paths: usize,
    seed: u64,
    antithetic: bool,
) -> PathSet {
    let paths: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .chunks(4096)
        .flat_map(|chunk| {
            let block = chunk[0] / 4096;
            let mut rng = rng::substream(seed, &[stream::PATHS, block as u64]);
            let mut out = Vec::with_capacity(chunk.len());
            let mut noise = vec![0.0f64; time_grid.len().saturating_sub(1)];
            for &p in &chunk {
                let flip = antithetic && p % 2 == 1;
                if !flip {
                    for z in noise.iter_mut() {
                        *z = rng.sample(StandardNormal);
                    }
                }
                let mut path = Vec::with_capacity(time_grid.len());
                let mut b = spot;
                path.push(b);
                for i in 1..time_grid.len() {
                    let dt = time_grid[i] - time_grid[i - 1];
                    let t_mid = 0.5 * (time_grid[i] + time_grid[i - 1]);
                    let sigma = surface.vol(t_mid, b);
                    let z = if flip { -noise[i - 1] } else { noise[i - 1] };
                    b *= ((rate - 0.5 * sigma * sigma) * dt + sigma * dt.sqrt() * z).exp();
                    path.push(b);
                }
                out.push(path);
            }
            out
        })
        .collect();
    PathSet {
        times: time_grid.to_vec(),
        paths,
    }
}

/// Simulate and keep only the requested observation dates.
///
/// The grid between observations is refined to at least `steps_per_year`
/// steps per year; everything else matches [`simulate_paths`], including
/// the per-block sub-streams, so results are reproducible across thread
/// layouts.
#[allow(clippy::too_many_arguments)]
pub fn simulate_observations(
    surface: &LocalVolSurface,
    spot: f64,
    rate: f64,
    obs_times: &[f64],
    steps_per_year: usize,
    n_paths: usize,
    seed: u64,
    antithetic: bool,
) -> PathSet {
    let mut grid = vec![0.0f64];
    let mut obs_idx = Vec::with_capacity(obs_times.len());
    for &t in obs_times {
        let prev = *grid.last().unwrap();
        let steps = (((t - prev) * steps_per_year as f64).ceil() as usize).max(1);
        for s in 1..=steps {
            grid.push(prev + (t - prev) * s as f64 / steps as f64);
        }
        obs_idx.push(grid.len() - 1);
    }

    let paths: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .chunks(4096)
        .flat_map(|chunk| {
            let block = chunk[0] / 4096;
            let mut rng = rng::substream(seed, &[stream::PATHS, block as u64]);
            let mut out = Vec::with_capacity(chunk.len());
            let mut noise = vec![0.0f64; grid.len() - 1];
            for &p in &chunk {
                let flip = antithetic && p % 2 == 1;
                if !flip {
                    for z in noise.iter_mut() {
                        *z = rng.sample(StandardNormal);
                    }
                }
                let mut b = spot;
                let mut obs_vals = Vec::with_capacity(obs_idx.len());
                let mut next_obs = 0;
                if obs_idx.first() == Some(&0) {
                    obs_vals.push(b);
                    next_obs += 1;
                }
                for i in 1..grid.len() {
                    let dt = grid[i] - grid[i - 1];
                    let t_mid = 0.5 * (grid[i] + grid[i - 1]);
                    let sigma = surface.vol(t_mid, b);
                    let z = if flip { -noise[i - 1] } else { noise[i - 1] };
                    b *= ((rate - 0.5 * sigma * sigma) * dt + sigma * dt.sqrt() * z).exp();
                    if next_obs < obs_idx.len() && obs_idx[next_obs] == i {
                        obs_vals.push(b);
                        next_obs += 1;
                    }
                }
                out.push(obs_vals);
            }
            out
        })
        .collect();

    PathSet {
        times: obs_times.to_vec(),
        paths,
    }
}
