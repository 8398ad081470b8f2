//! Desk-run orchestration: calibrate smiles, extract laws, rearrange
//! samples per maturity, reprice the index and assemble the run report.
//!
//! All randomness is derived from one master seed; each maturity owns a
//! sub-stream, so runs are reproducible for any parallelism degree.

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ism::{build_target, per_maturity_seed, run_ism, IsmConfig, IsmResult};
use crate::localvol::{
    calibrate_local_vol, estimate_density, BasketDensity, DensityConfig, LocalVolSurface,
    LvConfig, LvDiagnostics,
};
use crate::market::{load_snapshot, MarketSnapshot, QuoteSide, SnapshotFormat};
use crate::math::implied_vol_black;
use crate::pricing::{greeks_spot, vega_all, Payoff, PricingRequest};
use crate::report::{
    DeltaGammaRow, GreeksTables, MaturityReport, RepricingRow, RunReport, StageTimings, VegaRow,
};
use crate::sampling::draw_independent;
use crate::smile::{
    calibrate_sabr, extract_law, CalibConfig, FitReport, LawGridConfig, MarginalLaw, SabrParams,
};

fn default_samples() -> usize {
    20_000
}
fn default_bins() -> usize {
    1_400
}
fn default_iterations() -> usize {
    10
}
fn default_stop_fraction() -> f64 {
    1e-3
}
fn default_seed() -> u64 {
    42
}
fn default_beta() -> f64 {
    0.9
}
fn default_quote_side() -> QuoteSide {
    QuoteSide::Mid
}
fn default_rmse_cap() -> f64 {
    0.02
}
fn default_law_points() -> usize {
    2_001
}
fn default_law_tail() -> f64 {
    1e-5
}
fn default_max_clipped() -> f64 {
    0.01
}
fn default_density_points() -> usize {
    512
}
fn default_bandwidth_factor() -> f64 {
    1.0
}
fn default_spot_bump_frac() -> f64 {
    0.001
}
fn default_vega_bump() -> f64 {
    0.01
}
fn default_true() -> bool {
    true
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Full run configuration. Every hyperparameter of the reference desk
/// setup is a key with its standard value as default, so a config file
/// only needs to override what changes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// Snapshot file; formats: `.json` or csv otherwise.
    #[serde(default)]
    pub snapshot_path: Option<PathBuf>,
    /// Monte Carlo sample count M per maturity.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Target vector bin count K.
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Sort-mix iteration budget.
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_stop_fraction")]
    pub stop_fraction: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Fixed SABR CEV exponent.
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_quote_side")]
    pub quote_side: QuoteSide,
    #[serde(default = "default_rmse_cap")]
    pub rmse_cap: f64,
    #[serde(default = "default_law_points")]
    pub law_points: usize,
    #[serde(default = "default_law_tail")]
    pub law_tail: f64,
    #[serde(default = "default_max_clipped")]
    pub max_clipped: f64,
    #[serde(default = "default_density_points")]
    pub density_points: usize,
    #[serde(default = "default_bandwidth_factor")]
    pub bandwidth_factor: f64,
    /// Spot bump as a fraction of spot.
    #[serde(default = "default_spot_bump_frac")]
    pub spot_bump_frac: f64,
    /// Vega bump in absolute vol (0.01 = one vol point).
    #[serde(default = "default_vega_bump")]
    pub vega_bump: f64,
    #[serde(default = "default_true")]
    pub compute_greeks: bool,
    /// Worker threads; 0 uses the global default.
    #[serde(default)]
    pub parallelism: usize,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            snapshot_path: None,
            samples: default_samples(),
            bins: default_bins(),
            iterations: default_iterations(),
            stop_fraction: default_stop_fraction(),
            seed: default_seed(),
            beta: default_beta(),
            quote_side: default_quote_side(),
            rmse_cap: default_rmse_cap(),
            law_points: default_law_points(),
            law_tail: default_law_tail(),
            max_clipped: default_max_clipped(),
            density_points: default_density_points(),
            bandwidth_factor: default_bandwidth_factor(),
            spot_bump_frac: default_spot_bump_frac(),
            vega_bump: default_vega_bump(),
            compute_greeks: default_true(),
            parallelism: 0,
            out_dir: default_out_dir(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 2 {
            return Err(Error::Config("samples must be >= 2".into()));
        }
        if self.bins < 2 {
            return Err(Error::Config("bins must be >= 2".into()));
        }
        if self.iterations < 1 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        Ok(())
    }

    pub fn ism_config(&self) -> IsmConfig {
        IsmConfig {
            bins: self.bins,
            max_iterations: self.iterations,
            stop_fraction: self.stop_fraction,
            seed: self.seed,
        }
    }

    pub fn calib_config(&self) -> CalibConfig {
        CalibConfig {
            rmse_cap: self.rmse_cap,
            ..CalibConfig::default()
        }
    }

    pub fn law_grid_config(&self) -> LawGridConfig {
        LawGridConfig {
            points: self.law_points,
            tail: self.law_tail,
            max_clipped: self.max_clipped,
            ..LawGridConfig::default()
        }
    }

    pub fn density_config(&self) -> DensityConfig {
        DensityConfig {
            grid_points: self.density_points,
            bandwidth_factor: self.bandwidth_factor,
            ..DensityConfig::default()
        }
    }
}

/// Calibrated smiles and laws for one maturity.
#[derive(Debug, Clone)]
pub struct MaturitySlice {
    pub maturity: f64,
    pub constituent_params: Vec<SabrParams>,
    pub constituent_fits: Vec<FitReport>,
    pub constituent_laws: Vec<MarginalLaw>,
    pub index_params: SabrParams,
    pub index_fit: FitReport,
    pub index_law: MarginalLaw,
    /// Density mass clipped from the index law wings.
    pub index_clipped_mass: f64,
}

/// Everything pricing needs: the snapshot, per-maturity calibrations and
/// the rearranged sample matrices.
#[derive(Debug, Clone)]
pub struct EngineState {
    pub snapshot: MarketSnapshot,
    pub slices: Vec<MaturitySlice>,
    pub ism: Vec<IsmResult>,
    pub quote_side: QuoteSide,
    pub beta_fixed: f64,
    rmse_cap: f64,
    law_points: usize,
    law_tail: f64,
    max_clipped: f64,
}

impl EngineState {
    pub fn calib_config(&self) -> CalibConfig {
        CalibConfig {
            rmse_cap: self.rmse_cap,
            ..CalibConfig::default()
        }
    }

    pub fn law_grid_config(&self) -> LawGridConfig {
        LawGridConfig {
            points: self.law_points,
            tail: self.law_tail,
            max_clipped: self.max_clipped,
            ..LawGridConfig::default()
        }
    }

    /// Index of a quoted maturity; static pricing only exists there.
    pub fn maturity_index(&self, t: f64) -> Result<usize> {
        self.slices
            .iter()
            .position(|s| (s.maturity - t).abs() < 1e-9)
            .ok_or_else(|| {
                Error::State(format!(
                    "maturity {t} not in the quoted set {:?}",
                    self.snapshot.maturities
                ))
            })
    }

    /// Weighted basket spot.
    pub fn basket_spot(&self, basket: &[usize]) -> Result<f64> {
        if basket.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut acc = 0.0;
        for &n in basket {
            let c = self
                .snapshot
                .constituents
                .get(n)
                .ok_or_else(|| Error::State(format!("constituent {n} out of range")))?;
            acc += c.weight * c.spot;
        }
        Ok(acc)
    }

    /// Cheap deep copy for bump-and-reprice workflows.
    pub fn clone_for_bump(&self) -> EngineState {
        self.clone()
    }

    /// Basket density term structure from the rearranged samples.
    pub fn basket_densities(
        &self,
        basket: &[usize],
        cfg: &DensityConfig,
    ) -> Result<Vec<BasketDensity>> {
        self.ism
            .iter()
            .map(|r| {
                let samples = r.matrix.aggregate(basket)?;
                estimate_density(&samples, r.matrix.maturity, cfg)
            })
            .collect()
    }

    /// Calibrate the basket local-vol surface for a sub-basket.
    pub fn basket_surface(
        &self,
        basket: &[usize],
        density_cfg: &DensityConfig,
        lv_cfg: &LvConfig,
    ) -> Result<(LocalVolSurface, Vec<BasketDensity>, LvDiagnostics)> {
        let densities = self.basket_densities(basket, density_cfg)?;
        let spot = self.basket_spot(basket)?;
        let (surface, diag) = calibrate_local_vol(&densities, self.snapshot.rate, spot, lv_cfg)?;
        Ok((surface, densities, diag))
    }

    /// All constituent indices.
    pub fn full_basket(&self) -> Vec<usize> {
        (0..self.snapshot.n_assets()).collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn calibrate_asset(
    quotes: &[crate::market::OptionQuote],
    spot: f64,
    rate: f64,
    t: f64,
    beta: f64,
    calib: &CalibConfig,
    law_grid: &LawGridConfig,
    label: &str,
) -> Result<(SabrParams, FitReport, MarginalLaw, f64)> {
    let (params, fit) = calibrate_sabr(quotes, spot, rate, beta, None, calib)
        .map_err(|e| Error::Calibration(format!("{label} at T={t}: {e}")))?;
    let forward = spot * (rate * t).exp();
    let extraction = extract_law(&params, forward, rate, t, law_grid)
        .map_err(|e| Error::Law(format!("{label} at T={t}: {e}")))?;
    Ok((params, fit, extraction.law, extraction.clipped_mass))
}

/// Calibrate one maturity slice and rearrange its samples.
fn build_maturity(
    snapshot: &MarketSnapshot,
    config: &RunConfig,
    ti: usize,
) -> Result<(MaturitySlice, IsmResult, StageTimings)> {
    let t = snapshot.maturities[ti];
    let calib = config.calib_config();
    let law_grid = config.law_grid_config();
    let mut timings = StageTimings::default();

    let clock = Instant::now();
    let mut constituent_params = Vec::with_capacity(snapshot.n_assets());
    let mut constituent_fits = Vec::with_capacity(snapshot.n_assets());
    let mut constituent_laws = Vec::with_capacity(snapshot.n_assets());
    for n in 0..snapshot.n_assets() {
        let quotes = snapshot.constituent_quotes(n, t, config.quote_side);
        let spot = snapshot.constituents[n].spot;
        let name = snapshot.constituents[n].name.clone();
        let (params, fit, law, _clip) = calibrate_asset(
            &quotes,
            spot,
            snapshot.rate,
            t,
            config.beta,
            &calib,
            &law_grid,
            &name,
        )?;
        constituent_params.push(params);
        constituent_fits.push(fit);
        constituent_laws.push(law);
    }
    timings.calibrate_constituents = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let index_quotes = snapshot.index_quotes_at(t, config.quote_side);
    let (index_params, index_fit, index_law, index_clipped_mass) = calibrate_asset(
        &index_quotes,
        snapshot.index_spot,
        snapshot.rate,
        t,
        config.beta,
        &calib,
        &law_grid,
        "index",
    )?;
    timings.calibrate_index = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let weights: Vec<f64> = snapshot.constituents.iter().map(|c| c.weight).collect();
    let seed = per_maturity_seed(config.seed, ti);
    let matrix = draw_independent(&constituent_laws, &weights, config.samples, seed)?;
    timings.sampling = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let target = build_target(&index_law, config.samples, config.bins)?;
    timings.target = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let ism_config = IsmConfig {
        seed,
        ..config.ism_config()
    };
    let result = run_ism(matrix, &target, &ism_config)?;
    timings.arranging = clock.elapsed().as_secs_f64();

    Ok((
        MaturitySlice {
            maturity: t,
            constituent_params,
            constituent_fits,
            constituent_laws,
            index_params,
            index_fit,
            index_law,
            index_clipped_mass,
        },
        result,
        timings,
    ))
}

/// Calibrate every maturity (in parallel) and return the engine state
/// plus per-maturity stage timings.
pub fn build_state(
    snapshot: MarketSnapshot,
    config: &RunConfig,
) -> Result<(EngineState, Vec<StageTimings>)> {
    config.validate()?;
    let built: Vec<(MaturitySlice, IsmResult, StageTimings)> = (0..snapshot.maturities.len())
        .into_par_iter()
        .map(|ti| build_maturity(&snapshot, config, ti))
        .collect::<Result<_>>()?;

    let mut slices = Vec::with_capacity(built.len());
    let mut ism = Vec::with_capacity(built.len());
    let mut timings = Vec::with_capacity(built.len());
    for (slice, result, timing) in built {
        slices.push(slice);
        ism.push(result);
        timings.push(timing);
    }
    Ok((
        EngineState {
            snapshot,
            slices,
            ism,
            quote_side: config.quote_side,
            beta_fixed: config.beta,
            rmse_cap: config.rmse_cap,
            law_points: config.law_points,
            law_tail: config.law_tail,
            max_clipped: config.max_clipped,
        },
        timings,
    ))
}

/// Market-vs-model implied vol rows for one maturity.
fn repricing_rows(state: &EngineState, ti: usize) -> Vec<RepricingRow> {
    let snapshot = &state.snapshot;
    let t = snapshot.maturities[ti];
    let index = state.ism[ti].matrix.index_vector();
    let m_count = index.len() as f64;
    let forward = snapshot.index_forward(t);
    snapshot
        .index_quotes_at(t, state.quote_side)
        .iter()
        .map(|q| {
            let strike = q.moneyness * snapshot.index_spot;
            // OTM side + parity against the exact forward.
            let undisc = if strike >= forward {
                index.iter().map(|&x| (x - strike).max(0.0)).sum::<f64>() / m_count
            } else {
                let put = index.iter().map(|&x| (strike - x).max(0.0)).sum::<f64>() / m_count;
                put + forward - strike
            };
            let model_vol = implied_vol_black(undisc, forward, strike, t).ok();
            RepricingRow {
                moneyness: q.moneyness,
                strike,
                market_vol: q.implied_vol,
                model_vol,
            }
        })
        .collect()
}

fn greeks_tables(state: &EngineState, config: &RunConfig) -> Result<GreeksTables> {
    let t = state.snapshot.maturities[0];
    let basket = state.full_basket();
    let spot = state.basket_spot(&basket)?;
    let mut ladder = Vec::new();
    for strike_rel in [0.8, 0.9, 1.0, 1.1, 1.2] {
        let request = PricingRequest {
            basket: basket.clone(),
            payoff: Payoff::EuropeanCall {
                strike: strike_rel * spot,
            },
            maturity: t,
            notional: 1.0,
        };
        let g = greeks_spot(state, &request, config.spot_bump_frac)?;
        ladder.push(DeltaGammaRow {
            strike_rel,
            strike: strike_rel * spot,
            delta: g.delta,
            gamma: g.gamma,
        });
    }
    let atm_request = PricingRequest {
        basket: basket.clone(),
        payoff: Payoff::EuropeanCall { strike: spot },
        maturity: t,
        notional: 1.0,
    };
    let vegas = vega_all(state, config.vega_bump, &atm_request)?
        .into_iter()
        .zip(&state.snapshot.constituents)
        .map(|(vega, c)| VegaRow {
            name: c.name.clone(),
            vega,
        })
        .collect();
    Ok(GreeksTables {
        maturity: t,
        ladder,
        vegas,
        spot_bump: config.spot_bump_frac * spot,
        vega_bump: config.vega_bump,
    })
}

/// Run the full pipeline on an in-memory snapshot.
pub fn run_pipeline_on(
    snapshot: MarketSnapshot,
    config: &RunConfig,
) -> Result<(RunReport, EngineState)> {
    let run = |snapshot: MarketSnapshot, config: &RunConfig| -> Result<(RunReport, EngineState)> {
        let wall = Instant::now();
        let (state, timings) = build_state(snapshot, config)?;
        let maturities = state
            .snapshot
            .maturities
            .iter()
            .enumerate()
            .map(|(ti, &t)| MaturityReport {
                maturity: t,
                discrete_error: state.ism[ti].discrete_error,
                iterations_used: state.ism[ti].iterations_used,
                timings: timings[ti].clone(),
                repricing: repricing_rows(&state, ti),
            })
            .collect();
        let greeks = if config.compute_greeks {
            Some(greeks_tables(&state, config)?)
        } else {
            None
        };
        let report = RunReport {
            as_of: state.snapshot.as_of.clone(),
            seed: config.seed,
            n_assets: state.snapshot.n_assets(),
            samples: config.samples,
            bins: config.bins,
            iterations: config.iterations,
            maturities,
            greeks,
            total_wall_seconds: wall.elapsed().as_secs_f64(),
        };
        Ok((report, state))
    };

    if config.parallelism > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallelism)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| run(snapshot, config))
    } else {
        run(snapshot, config)
    }
}

/// Run the full pipeline from the configured snapshot file.
pub fn run_pipeline(config: &RunConfig) -> Result<(RunReport, EngineState)> {
    let path = config
        .snapshot_path
        .as_ref()
        .ok_or_else(|| Error::Config("snapshot_path missing".into()))?;
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => SnapshotFormat::Json,
        _ => SnapshotFormat::Csv,
    };
    let snapshot = load_snapshot(path, format)?;
    run_pipeline_on(snapshot, config)
}
