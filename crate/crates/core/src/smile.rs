//! SABR smile calibration and risk-neutral marginal laws.
//!
//! Each (asset, maturity) pair gets a SABR smile with fixed CEV exponent,
//! fitted to the implied-vol quotes by derivative-free least squares. The
//! calibrated smile is then converted into a [`MarginalLaw`], a gridded
//! CDF/PDF/quantile triple, by differentiating undiscounted call prices
//! twice in strike.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::OptionQuote;
use crate::math::{black_call, nelder_mead, norm_inv, trapezoid};

/// SABR parameters with the usual admissibility ranges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SabrParams {
    /// Level parameter (vol of the ATM region).
    pub alpha: f64,
    /// CEV exponent, fixed during calibration.
    pub beta: f64,
    /// Spot/vol correlation.
    pub rho: f64,
    /// Vol-of-vol.
    pub gamma: f64,
}

impl SabrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha {} must be > 0", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta {} outside [0,1]", self.beta)));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::Config(format!("|rho| {} must be < 1", self.rho)));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::Config(format!("gamma {} must be >= 0", self.gamma)));
        }
        Ok(())
    }
}

/// Hagan lognormal implied-vol expansion.
///
/// Continuous in strike; the `z/x(z)` ratio switches to its series for
/// small `z` so the ATM limit is exact. A non-positive expansion value is
/// reported as an error rather than clamped.
pub fn sabr_implied_vol(p: &SabrParams, forward: f64, strike: f64, maturity: f64) -> Result<f64> {
    if !(forward > 0.0 && strike > 0.0 && maturity > 0.0) {
        return Err(Error::Numerical(format!(
            "sabr inputs out of range: F={forward}, K={strike}, T={maturity}"
        )));
    }
    let one_m_beta = 1.0 - p.beta;
    let log_fk = (forward / strike).ln();
    let fk_pow = (forward * strike).powf(0.5 * one_m_beta);

    let bracket = 1.0
        + one_m_beta.powi(2) / 24.0 * log_fk.powi(2)
        + one_m_beta.powi(4) / 1920.0 * log_fk.powi(4);

    let z = p.gamma / p.alpha * fk_pow * log_fk;
    let z_over_x = if z.abs() < 1e-7 {
        1.0 - 0.5 * p.rho * z
    } else {
        let x = (((1.0 - 2.0 * p.rho * z + z * z).sqrt() + z - p.rho) / (1.0 - p.rho)).ln();
        z / x
    };

    let correction = 1.0
        + (one_m_beta.powi(2) / 24.0 * p.alpha * p.alpha / fk_pow.powi(2)
            + 0.25 * p.rho * p.beta * p.gamma * p.alpha / fk_pow
            + (2.0 - 3.0 * p.rho * p.rho) / 24.0 * p.gamma * p.gamma)
            * maturity;

    let vol = p.alpha / (fk_pow * bracket) * z_over_x * correction;
    if !(vol > 0.0 && vol.is_finite()) {
        return Err(Error::Numerical(format!(
            "hagan expansion produced vol {vol} at K={strike}, T={maturity}"
        )));
    }
    Ok(vol)
}

/// Per-quote calibration residual.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuoteFit {
    pub moneyness: f64,
    pub market_vol: f64,
    pub model_vol: f64,
}

/// Calibration fit quality.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub rmse: f64,
    pub residuals: Vec<QuoteFit>,
}

/// Calibration settings.
#[derive(Debug, Clone, Copy)]
pub struct CalibConfig {
    /// Fail the fit if the final RMSE exceeds this (vol units).
    pub rmse_cap: f64,
    pub max_iter: usize,
}

impl Default for CalibConfig {
    fn default() -> Self {
        CalibConfig {
            rmse_cap: 0.02,
            max_iter: 600,
        }
    }
}

/// Fit SABR (beta fixed) to one asset + maturity quote grid.
///
/// The search runs over `(sqrt(alpha), atanh(rho), sqrt(gamma))` so all
/// constraints hold unconditionally, from a deterministic starting point
/// (ATM vol level, rho -0.3, gamma 1), with one refinement restart.
pub fn calibrate_sabr(
    quotes: &[OptionQuote],
    spot: f64,
    rate: f64,
    beta_fixed: f64,
    initial: Option<SabrParams>,
    cfg: &CalibConfig,
) -> Result<(SabrParams, FitReport)> {
    if quotes.len() < 3 {
        return Err(Error::Calibration(format!(
            "need at least 3 quotes, got {}",
            quotes.len()
        )));
    }
    let maturity = quotes[0].maturity;
    let mut moneyness_seen = std::collections::BTreeSet::new();
    for q in quotes {
        if (q.maturity - maturity).abs() > 1e-9 {
            return Err(Error::Calibration(
                "quotes span multiple maturities".to_string(),
            ));
        }
        if !moneyness_seen.insert(q.moneyness.to_bits()) {
            return Err(Error::Calibration(format!(
                "duplicate moneyness {} in calibration input",
                q.moneyness
            )));
        }
    }
    let forward = spot * (rate * maturity).exp();

    // ATM-ish vol for the initial alpha level.
    let atm_vol = quotes
        .iter()
        .min_by(|a, b| {
            (a.moneyness - 1.0)
                .abs()
                .partial_cmp(&(b.moneyness - 1.0).abs())
                .unwrap()
        })
        .unwrap()
        .implied_vol;

    let start = initial.unwrap_or(SabrParams {
        alpha: atm_vol * forward.powf(1.0 - beta_fixed),
        beta: beta_fixed,
        rho: -0.3,
        gamma: 1.0,
    });
    start.validate()?;

    let strikes: Vec<f64> = quotes.iter().map(|q| q.moneyness * spot).collect();
    let targets: Vec<f64> = quotes.iter().map(|q| q.implied_vol).collect();

    let objective = |x: &[f64]| -> f64 {
        let p = SabrParams {
            alpha: x[0] * x[0],
            beta: beta_fixed,
            rho: x[1].tanh(),
            gamma: x[2] * x[2],
        };
        if p.alpha <= 0.0 {
            return 1e10;
        }
        let mut sse = 0.0;
        for (k, target) in strikes.iter().zip(&targets) {
            match sabr_implied_vol(&p, forward, *k, maturity) {
                Ok(v) => sse += (v - target) * (v - target),
                Err(_) => return 1e10,
            }
        }
        sse
    };

    let x0 = [
        start.alpha.sqrt(),
        start.rho.clamp(-0.999, 0.999).atanh(),
        start.gamma.max(0.0).sqrt(),
    ];
    let run = nelder_mead(objective, &x0, &[0.1, 0.3, 0.3], cfg.max_iter, 1e-16);
    // Refinement restart with a tight simplex around the first optimum.
    let run = nelder_mead(objective, &run.x, &[1e-3, 1e-3, 1e-3], cfg.max_iter, 0.0);

    let fitted = SabrParams {
        alpha: run.x[0] * run.x[0],
        beta: beta_fixed,
        rho: run.x[1].tanh(),
        gamma: run.x[2] * run.x[2],
    };
    let mut residuals = Vec::with_capacity(quotes.len());
    let mut sse = 0.0;
    for (q, k) in quotes.iter().zip(&strikes) {
        let model = sabr_implied_vol(&fitted, forward, *k, maturity)?;
        sse += (model - q.implied_vol).powi(2);
        residuals.push(QuoteFit {
            moneyness: q.moneyness,
            market_vol: q.implied_vol,
            model_vol: model,
        });
    }
    let rmse = (sse / quotes.len() as f64).sqrt();
    if rmse > cfg.rmse_cap {
        return Err(Error::Calibration(format!(
            "fit rmse {rmse:.5} above cap {:.5} at T={maturity}",
            cfg.rmse_cap
        )));
    }
    Ok((fitted, FitReport { rmse, residuals }))
}

/// Grid settings for law extraction.
#[derive(Debug, Clone, Copy)]
pub struct LawGridConfig {
    /// Number of strike grid points.
    pub points: usize,
    /// Tail probability defining the grid span on a lognormal proxy.
    pub tail: f64,
    /// Clipped-mass fraction above which the law is rejected.
    pub max_clipped: f64,
    /// Freeze the smile beyond this many ATM standard deviations of
    /// log-moneyness; the expansion wings are not trusted out there.
    pub freeze_stdev: f64,
}

impl Default for LawGridConfig {
    fn default() -> Self {
        LawGridConfig {
            points: 2001,
            tail: 1e-5,
            max_clipped: 0.01,
            freeze_stdev: 3.5,
        }
    }
}

/// Risk-neutral marginal law of one asset at one maturity.
///
/// The CDF is the exact running integral of the gridded PDF, so the two
/// representations never drift apart; the quantile function inverts the
/// piecewise-linear CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalLaw {
    pub maturity: f64,
    /// Strictly increasing strike abscissae.
    pub grid: Vec<f64>,
    /// Non-decreasing CDF values in `[0,1]`.
    pub cdf: Vec<f64>,
    /// Non-negative density values.
    pub pdf: Vec<f64>,
    pub forward: f64,
}

impl MarginalLaw {
    pub fn new(
        maturity: f64,
        grid: Vec<f64>,
        cdf: Vec<f64>,
        pdf: Vec<f64>,
        forward: f64,
    ) -> Result<Self> {
        if grid.len() < 2 || grid.len() != cdf.len() || grid.len() != pdf.len() {
            return Err(Error::Law("law grid arrays inconsistent".into()));
        }
        for i in 1..grid.len() {
            if !(grid[i] > grid[i - 1]) {
                return Err(Error::Law(format!("grid not increasing at {i}")));
            }
            if cdf[i] < cdf[i - 1] - 1e-12 {
                return Err(Error::Law(format!("cdf decreases at {i}")));
            }
        }
        if cdf[0] > 1e-6 || cdf[grid.len() - 1] < 1.0 - 1e-6 {
            return Err(Error::Law(format!(
                "cdf range [{}, {}] does not cover (0,1)",
                cdf[0],
                cdf[grid.len() - 1]
            )));
        }
        if pdf.iter().any(|&p| p < 0.0) {
            return Err(Error::Law("negative pdf value".into()));
        }
        Ok(MarginalLaw {
            maturity,
            grid,
            cdf,
            pdf,
            forward,
        })
    }

    /// Exact lognormal law on a gridded support, for oracles and proxies.
    pub fn lognormal(forward: f64, vol: f64, maturity: f64, points: usize) -> Self {
        let st = vol * maturity.sqrt();
        let q = |u: f64| forward * (st * norm_inv(u) - 0.5 * st * st).exp();
        let (lo, hi) = (q(1e-7), q(1.0 - 1e-7));
        let n = points.max(3);
        let h = (hi - lo) / (n - 1) as f64;
        let grid: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();
        let cdf: Vec<f64> = grid
            .iter()
            .map(|&k| crate::math::norm_cdf(((k / forward).ln() + 0.5 * st * st) / st))
            .collect();
        let pdf: Vec<f64> = grid
            .iter()
            .map(|&k| {
                crate::math::norm_pdf(((k / forward).ln() + 0.5 * st * st) / st) / (k * st)
            })
            .collect();
        MarginalLaw {
            maturity,
            grid,
            cdf,
            pdf,
            forward,
        }
    }

    /// Uniform law on `[a, b]`, exact; used by toy fixtures.
    pub fn uniform(a: f64, b: f64, maturity: f64) -> Self {
        let mid = 0.5 * (a + b);
        MarginalLaw {
            maturity,
            grid: vec![a, mid, b],
            cdf: vec![0.0, 0.5, 1.0],
            pdf: vec![1.0 / (b - a); 3],
            forward: mid,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if x <= self.grid[0] {
            return if x < self.grid[0] { 0.0 } else { self.cdf[0] };
        }
        if x >= self.grid[n - 1] {
            return if x > self.grid[n - 1] {
                1.0
            } else {
                self.cdf[n - 1]
            };
        }
        let i = self.grid.partition_point(|&g| g < x);
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        let w = (x - x0) / (x1 - x0);
        self.cdf[i - 1] + w * (self.cdf[i] - self.cdf[i - 1])
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let n = self.grid.len();
        if x < self.grid[0] || x > self.grid[n - 1] {
            return 0.0;
        }
        let i = self.grid.partition_point(|&g| g < x).clamp(1, n - 1);
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        let w = (x - x0) / (x1 - x0);
        self.pdf[i - 1] + w * (self.pdf[i] - self.pdf[i - 1])
    }

    /// Inverse CDF. Callers must pass `u` in the open interval (0,1);
    /// monotone by construction of the piecewise-linear CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        debug_assert!(u > 0.0 && u < 1.0, "quantile needs open-interval u");
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
        let w = (u - c0) / (c1 - c0);
        self.grid[i - 1] + w * (self.grid[i] - self.grid[i - 1])
    }

    /// Law mean by quadrature.
    pub fn mean(&self) -> f64 {
        let integrand: Vec<f64> = self
            .grid
            .iter()
            .zip(&self.pdf)
            .map(|(&x, &p)| x * p)
            .collect();
        trapezoid(&self.grid, &integrand) + self.grid[0] * self.cdf[0]
    }

    /// Undiscounted call price `E[(S - k)+]` computed exactly against the
    /// piecewise-linear CDF: `integral over [k, inf) of (1 - F)`.
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
        // Partial first cell.
        if start > 0 && strike > self.grid[0] {
            let (x0, x1) = (self.grid[start - 1], self.grid[start]);
            let w = (strike - x0) / (x1 - x0);
            let f_at = self.cdf[start - 1] + w * (self.cdf[start] - self.cdf[start - 1]);
            acc += (x1 - strike) * (1.0 - 0.5 * (f_at + self.cdf[start]));
        }
        for i in start.max(1)..n - 1 {
            acc += (self.grid[i + 1] - self.grid[i])
                * (1.0 - 0.5 * (self.cdf[i] + self.cdf[i + 1]));
        }
        acc
    }

    /// `sup` norm consistency between cdf and the running pdf integral.
    pub fn cdf_pdf_consistency(&self) -> f64 {
        let mut acc = self.cdf[0];
        let mut worst: f64 = 0.0;
        for i in 1..self.grid.len() {
            acc += 0.5 * (self.pdf[i] + self.pdf[i - 1]) * (self.grid[i] - self.grid[i - 1]);
            worst = worst.max((acc - self.cdf[i]).abs());
        }
        worst
    }
}

/// Law extraction output: the law plus how much negative density mass had
/// to be clipped from the expansion wings.
#[derive(Debug, Clone)]
pub struct LawExtraction {
    pub law: MarginalLaw,
    pub clipped_mass: f64,
}

/// Convert a calibrated smile into a marginal law.
///
/// Undiscounted call prices on a uniform strike grid spanning the
/// `[tail, 1-tail]` quantiles of a lognormal proxy, differentiated twice
/// by central differences. The smile is frozen (flat vol) beyond
/// `freeze_stdev` ATM standard deviations of log-moneyness, where the
/// expansion wings would otherwise assign implausible tail mass and wreck
/// the law's mean. Negative densities are floored at zero and the law
/// renormalized; the clipped mass is reported and the extraction fails if
/// it exceeds `max_clipped`.
pub fn extract_law(
    p: &SabrParams,
    forward: f64,
    rate: f64,
    maturity: f64,
    grid: &LawGridConfig,
) -> Result<LawExtraction> {
    let _ = rate; // quotes are undiscounted forward prices throughout
    p.validate()?;
    let atm_vol = sabr_implied_vol(p, forward, forward, maturity)?;
    let band = grid.freeze_stdev * atm_vol * maturity.sqrt();
    let taper = 0.5 * band;

    // Smoothly tapered wing extrapolation: inside the band the expansion
    // is used as-is; outside, the vol approaches a bounded asymptote with
    // slope matched at the band edge, keeping the density kink-free.
    let edge = |sign: f64| -> Result<(f64, f64)> {
        let x_b = sign * band;
        let dx = 1e-5;
        let v_b = sabr_implied_vol(p, forward, forward * x_b.exp(), maturity)?;
        let v_in = sabr_implied_vol(p, forward, forward * (x_b - sign * dx).exp(), maturity)?;
        let slope = ((v_b - v_in) / dx).clamp(0.0, (3.0 - v_b).max(0.0) / taper);
        Ok((v_b, slope))
    };
    let left_edge = edge(-1.0)?;
    let right_edge = edge(1.0)?;
    let smile_vol = |k: f64| -> Result<f64> {
        let x = (k / forward).ln();
        if x.abs() <= band {
            return sabr_implied_vol(p, forward, k, maturity);
        }
        let (v_b, slope) = if x < 0.0 { left_edge } else { right_edge };
        Ok(v_b + slope * taper * (1.0 - (-(x.abs() - band) / taper).exp()))
    };

    // Grid span from the smile's own implied tail quantiles.
    let tail_cdf = |k: f64| -> Result<f64> {
        let v = smile_vol(k)?;
        let st = v * maturity.sqrt();
        Ok(crate::math::norm_cdf(((k / forward).ln() + 0.5 * st * st) / st))
    };
    let bisect = |target: f64, mut lo: f64, mut hi: f64| -> Result<f64> {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if tail_cdf(mid)? < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };
    let lo = bisect(grid.tail, 1e-9 * forward, forward)?;
    let hi = bisect(1.0 - grid.tail, forward, 1e4 * forward)?;
    let n = grid.points.max(5);
    let h = (hi - lo) / (n - 1) as f64;
    let strikes: Vec<f64> = (0..n).map(|i| lo + i as f64 * h).collect();

    let mut calls = Vec::with_capacity(n);
    for &k in &strikes {
        calls.push(black_call(forward, k, smile_vol(k)?, maturity));
    }

    let mut pdf = vec![0.0; n];
    let mut clipped = 0.0;
    for i in 1..n - 1 {
        let raw = (calls[i + 1] - 2.0 * calls[i] + calls[i - 1]) / (h * h);
        if raw < 0.0 {
            clipped += -raw * h;
        } else {
            pdf[i] = raw;
        }
    }
    let total = trapezoid(&strikes, &pdf);
    if total <= 0.0 {
        return Err(Error::Numerical("extracted density has no mass".to_string()));
    }
    let clipped_frac = clipped / (total + clipped);
    if clipped_frac > grid.max_clipped {
        return Err(Error::Arbitrage(format!(
            "clipped density mass {:.4}% exceeds {:.2}% at T={maturity}",
            clipped_frac * 100.0,
            grid.max_clipped * 100.0
        )));
    }
    for v in pdf.iter_mut() {
        *v /= total;
    }
    let mut cdf = vec![0.0; n];
    for i in 1..n {
        cdf[i] = cdf[i - 1] + 0.5 * (pdf[i] + pdf[i - 1]) * h;
    }
    // Guard against rounding drift at the top.
    let top = cdf[n - 1];
    for v in cdf.iter_mut() {
        *v /= top;
    }

    let law = MarginalLaw::new(maturity, strikes, cdf, pdf, forward)?;
    Ok(LawExtraction {
        law,
        clipped_mass: clipped_frac,
    })
}
