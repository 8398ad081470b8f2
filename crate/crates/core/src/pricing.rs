//! Pricing and risk off the calibrated state.
//!
//! European payoffs at quoted maturities are priced directly as discounted
//! averages over the rearranged static samples. Path-dependent payoffs run
//! through the basket local-vol model. Spot Greeks bump the basket forward
//! additively under common random numbers; constituent vegas bump one
//! name's quote curve, recalibrate its smile and remap only that column
//! through the stored uniforms and permutation, leaving the calibrated
//! dependency structure untouched.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::localvol::{simulate_observations, LocalVolSurface};
use crate::market::OptionQuote;
use crate::math::{mean, sample_variance};
use crate::pipeline::EngineState;
use crate::sampling::SampleMatrix;
use crate::smile::{calibrate_sabr, extract_law, MarginalLaw};

/// Path functional signature: `(observation times, basket values)`.
pub type PathFunctional = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Price with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceEstimate {
    pub price: f64,
    pub std_error: f64,
}

/// Terminal payoff side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Call,
    Put,
}

/// Payoff of a basket derivative.
#[derive(Clone)]
pub enum Payoff {
    EuropeanCall { strike: f64 },
    EuropeanPut { strike: f64 },
    /// Arithmetic-average call over the observation schedule.
    AsianCall { strike: f64, observation_dates: Vec<f64> },
    /// Registered terminal-value functional.
    CustomTerminal {
        name: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
    /// Registered path functional over (times, basket values), evaluated
    /// on its own observation schedule.
    CustomPath {
        name: String,
        observation_dates: Vec<f64>,
        f: PathFunctional,
    },
}

impl std::fmt::Debug for Payoff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Payoff::EuropeanCall { strike } => write!(f, "EuropeanCall(K={strike})"),
            Payoff::EuropeanPut { strike } => write!(f, "EuropeanPut(K={strike})"),
            Payoff::AsianCall { strike, observation_dates } => {
                write!(f, "AsianCall(K={strike}, obs={observation_dates:?})")
            }
            Payoff::CustomTerminal { name, .. } => write!(f, "CustomTerminal({name})"),
            Payoff::CustomPath { name, observation_dates, .. } => {
                write!(f, "CustomPath({name}, obs={observation_dates:?})")
            }
        }
    }
}

impl Payoff {
    /// Forward contract on the basket, a linear test payoff.
    pub fn forward(strike: f64) -> Payoff {
        Payoff::CustomTerminal {
            name: format!("forward(K={strike})"),
            f: Arc::new(move |b| b - strike),
        }
    }

    /// Terminal functional if the payoff depends only on the final value.
    fn terminal(&self) -> Option<Box<dyn Fn(f64) -> f64 + '_>> {
        match self {
            Payoff::EuropeanCall { strike } => {
                let k = *strike;
                Some(Box::new(move |b| (b - k).max(0.0)))
            }
            Payoff::EuropeanPut { strike } => {
                let k = *strike;
                Some(Box::new(move |b| (k - b).max(0.0)))
            }
            Payoff::CustomTerminal { f, .. } => Some(Box::new(move |b| f(b))),
            _ => None,
        }
    }

    /// Observation dates needed on a path, ending at the payoff maturity.
    fn observation_dates(&self, maturity: f64) -> Result<Vec<f64>> {
        let schedule = match self {
            Payoff::AsianCall { observation_dates, .. }
            | Payoff::CustomPath { observation_dates, .. } => observation_dates,
            _ => return Ok(vec![maturity]),
        };
        if schedule.is_empty() {
            return Err(Error::UnsupportedPayoff("path payoff with no dates".into()));
        }
        let mut dates = schedule.clone();
        dates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if dates[0] <= 0.0 || dates[dates.len() - 1] > maturity + 1e-12 {
            return Err(Error::UnsupportedPayoff(format!(
                "observation dates outside (0, {maturity}]"
            )));
        }
        if (dates[dates.len() - 1] - maturity).abs() > 1e-12 {
            dates.push(maturity);
        }
        Ok(dates)
    }

    fn path_value(&self, times: &[f64], values: &[f64]) -> f64 {
        match self {
            Payoff::AsianCall { strike, observation_dates } => {
                let n = observation_dates.len() as f64;
                let avg: f64 = values.iter().take(observation_dates.len()).sum::<f64>() / n;
                (avg - strike).max(0.0)
            }
            Payoff::CustomPath { f, .. } => f(times, values),
            other => other
                .terminal()
                .map(|f| f(*values.last().unwrap()))
                .unwrap_or(0.0),
        }
    }
}

/// A basket derivative request.
#[derive(Debug, Clone)]
pub struct PricingRequest {
    /// Constituent indices of the basket.
    pub basket: Vec<usize>,
    pub payoff: Payoff,
    pub maturity: f64,
    pub notional: f64,
}

/// Monte Carlo settings for the path engine.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub steps_per_year: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: 100_000,
            steps_per_year: 100,
            seed: 1,
            antithetic: true,
        }
    }
}

/// Discounted European price from static basket samples.
pub fn price_european_static(
    basket_samples: &[f64],
    strike: f64,
    rate: f64,
    maturity: f64,
    kind: OptionKind,
) -> PriceEstimate {
    let payoff = |b: f64| match kind {
        OptionKind::Call => (b - strike).max(0.0),
        OptionKind::Put => (strike - b).max(0.0),
    };
    price_static_terminal(basket_samples, rate, maturity, payoff)
}

/// Discounted terminal-functional price from static basket samples.
pub fn price_static_terminal<F: Fn(f64) -> f64>(
    basket_samples: &[f64],
    rate: f64,
    maturity: f64,
    payoff: F,
) -> PriceEstimate {
    let disc = (-rate * maturity).exp();
    let values: Vec<f64> = basket_samples.iter().map(|&b| payoff(b)).collect();
    let m = values.len() as f64;
    PriceEstimate {
        price: disc * mean(&values),
        std_error: disc * (sample_variance(&values) / m).sqrt(),
    }
}

/// Price a request off the static samples of its maturity.
///
/// The basket samples may be shifted additively (common-random-number spot
/// bumps propagate as forward shifts of the terminal distribution).
pub fn price_request_static(
    state: &EngineState,
    request: &PricingRequest,
    terminal_shift: f64,
) -> Result<PriceEstimate> {
    let terminal = request.payoff.terminal().ok_or_else(|| {
        Error::UnsupportedPayoff(format!("{:?} needs the path engine", request.payoff))
    })?;
    let idx = state.maturity_index(request.maturity)?;
    let basket = state.ism[idx].matrix.aggregate(&request.basket)?;
    let rate = state.snapshot.rate;
    let shift = terminal_shift * (rate * request.maturity).exp();
    let est = price_static_terminal(&basket, rate, request.maturity, |b| terminal(b + shift));
    Ok(PriceEstimate {
        price: est.price * request.notional,
        std_error: est.std_error * request.notional,
    })
}

/// Price a path-dependent request under the basket local-vol model.
pub fn price_path_dependent(
    surface: &LocalVolSurface,
    basket_spot: f64,
    rate: f64,
    request: &PricingRequest,
    mc: &McConfig,
) -> Result<PriceEstimate> {
    if request.maturity > surface.max_maturity() + 1e-9 {
        return Err(Error::UnsupportedPayoff(format!(
            "maturity {} beyond calibrated surface {}",
            request.maturity,
            surface.max_maturity()
        )));
    }
    let obs = request.payoff.observation_dates(request.maturity)?;
    let paths = simulate_observations(
        surface,
        basket_spot,
        rate,
        &obs,
        mc.steps_per_year,
        mc.n_paths,
        mc.seed,
        mc.antithetic,
    );
    let disc = (-rate * request.maturity).exp();
    let values: Vec<f64> = paths
        .paths
        .iter()
        .map(|p| request.payoff.path_value(&paths.times, p))
        .collect();
    let m = values.len() as f64;
    Ok(PriceEstimate {
        price: request.notional * disc * mean(&values),
        std_error: request.notional * disc * (sample_variance(&values) / m).sqrt(),
    })
}

/// Finite-difference spot risk under common random numbers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GreeksReport {
    /// dV/dB(0), forward difference.
    pub delta: f64,
    /// d2V/dB(0)^2, central second difference.
    pub gamma: f64,
    /// Chain-rule per-constituent deltas, `weight_n * delta`.
    pub constituent_deltas: Vec<f64>,
    /// Per-constituent vegas when computed (per unit vol bump).
    pub vegas: Option<Vec<f64>>,
    /// Absolute spot bump used.
    pub bump_size: f64,
}

/// Delta and gamma of a static-engine request by bump-and-reprice.
///
/// The spot bump size is `bump_frac * basket spot`; all three valuations
/// share the same samples, so linear payoffs differentiate exactly.
pub fn greeks_spot(
    state: &EngineState,
    request: &PricingRequest,
    bump_frac: f64,
) -> Result<GreeksReport> {
    let spot = state.basket_spot(&request.basket)?;
    let eps = bump_frac * spot;
    if !(eps > 0.0) {
        return Err(Error::Config(format!("bump {bump_frac} must be positive")));
    }
    let base = price_request_static(state, request, 0.0)?.price;
    let up = price_request_static(state, request, eps)?.price;
    let down = price_request_static(state, request, -eps)?.price;
    let delta = (up - base) / eps;
    let gamma = (up - 2.0 * base + down) / (eps * eps);
    let constituent_deltas = request
        .basket
        .iter()
        .map(|&n| state.snapshot.constituents[n].weight * delta)
        .collect();
    Ok(GreeksReport {
        delta,
        gamma,
        constituent_deltas,
        vegas: None,
        bump_size: eps,
    })
}

fn bumped_quotes(quotes: &[OptionQuote], bump: f64) -> Vec<OptionQuote> {
    quotes
        .iter()
        .map(|q| OptionQuote {
            implied_vol: q.implied_vol + bump,
            ..*q
        })
        .collect()
}

/// Remap one constituent column at one maturity under a vol-bumped smile.
///
/// Recalibrates the name's SABR fit on the bumped quotes, re-extracts its
/// law and replaces the column with the new quantiles of the stored
/// uniforms in the stored permutation order. No rearrangement is rerun.
pub fn remap_bumped_column(
    state: &EngineState,
    matrix: &mut SampleMatrix,
    maturity_idx: usize,
    constituent: usize,
    bump: f64,
) -> Result<()> {
    let snapshot = &state.snapshot;
    let slice = &state.slices[maturity_idx];
    let t = slice.maturity;
    let quotes = bumped_quotes(
        &snapshot.constituent_quotes(constituent, t, state.quote_side),
        bump,
    );
    // Same deterministic starting point as the base calibration: a zero
    // bump then reproduces the base law bit-for-bit and the remap is the
    // exact identity.
    let spot = snapshot.constituents[constituent].spot;
    let (params, _fit) = calibrate_sabr(
        &quotes,
        spot,
        snapshot.rate,
        state.beta_fixed,
        None,
        &state.calib_config(),
    )?;
    let forward = snapshot.forward(constituent, t);
    let law = extract_law(&params, forward, snapshot.rate, t, &state.law_grid_config())?.law;
    matrix.remap_column(constituent, &law)
}

/// Vega of one constituent: bump its implied-vol curve, remap its column
/// at every quoted maturity and reprice. `(V' - V) / bump`.
pub fn vega_constituent(
    state: &EngineState,
    constituent: usize,
    bump: f64,
    request: &PricingRequest,
) -> Result<f64> {
    if constituent >= state.snapshot.n_assets() {
        return Err(Error::State(format!(
            "constituent {constituent} out of range"
        )));
    }
    let base = price_request_static(state, request, 0.0)?.price;
    let mut bumped = state.clone_for_bump();
    for idx in 0..bumped.slices.len() {
        let mut matrix = bumped.ism[idx].matrix.clone();
        remap_bumped_column(state, &mut matrix, idx, constituent, bump)?;
        bumped.ism[idx].matrix = matrix;
    }
    let shifted = price_request_static(&bumped, request, 0.0)?.price;
    if bump == 0.0 {
        // Identity remap: the numerator must be exactly zero.
        return Ok(shifted - base);
    }
    Ok((shifted - base) / bump)
}

/// Per-constituent vega ladder.
pub fn vega_all(state: &EngineState, bump: f64, request: &PricingRequest) -> Result<Vec<f64>> {
    (0..state.snapshot.n_assets())
        .map(|n| vega_constituent(state, n, bump, request))
        .collect()
}

/// Total vega from bumping every constituent curve at once.
pub fn vega_parallel_total(
    state: &EngineState,
    bump: f64,
    request: &PricingRequest,
) -> Result<f64> {
    let base = price_request_static(state, request, 0.0)?.price;
    let mut bumped = state.clone_for_bump();
    for idx in 0..bumped.slices.len() {
        let mut matrix = bumped.ism[idx].matrix.clone();
        for n in 0..state.snapshot.n_assets() {
            remap_bumped_column(state, &mut matrix, idx, n, bump)?;
        }
        bumped.ism[idx].matrix = matrix;
    }
    let shifted = price_request_static(&bumped, request, 0.0)?.price;
    Ok((shifted - base) / bump)
}

/// Extend a basket with an asset outside the index by recycling a donor
/// column's dependency slot.
///
/// The donor's stored uniforms (in the rearranged order) are pushed through
/// the external law's quantile, so the external samples inherit the donor's
/// ranks exactly; the donor itself must not be part of the basket.
pub fn extend_basket_external(
    matrix: &SampleMatrix,
    basket: &[usize],
    donor: usize,
    external_law: &MarginalLaw,
    external_weight: f64,
) -> Result<Vec<f64>> {
    if basket.contains(&donor) {
        return Err(Error::DonorInBasket(donor));
    }
    if donor >= matrix.n_assets() {
        return Err(Error::State(format!("donor {donor} out of range")));
    }
    if matrix.uniforms[donor].len() != matrix.n_samples() {
        return Err(Error::State("donor uniforms missing".into()));
    }
    let mut out = matrix.aggregate(basket)?;
    for (row, &draw) in matrix.perms[donor].iter().enumerate() {
        let u = matrix.uniforms[donor][draw as usize];
        out[row] += external_weight * external_law.quantile(u);
    }
    Ok(out)
}
