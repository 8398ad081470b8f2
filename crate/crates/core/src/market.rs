//! Market snapshot ingestion, validation and synthesis.
//!
//! A snapshot holds implied-vol quote grids for every index constituent and
//! for the index itself, plus spots, weights and a flat rate. Quotes are
//! stored as implied vols on a moneyness (strike/spot) grid, which keeps the
//! file format free of discounting conventions.
//!
//! File formats: a flat CSV `asset,maturity_yf,moneyness,side,implied_vol`
//! where asset-level data travels in tagged meta rows (`side` one of
//! `spot|weight|rate|asof` with `maturity_yf = moneyness = 0`), index rows
//! use the reserved asset name `__INDEX__` and market-level rows use
//! `__MARKET__`; or a JSON mirror of the whole snapshot.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{implied_vol_black, norm_cdf};
use crate::rng::{self, stream};
use crate::smile::{self, LawGridConfig, SabrParams};

/// Reserved asset name for index quote rows.
pub const INDEX_ASSET: &str = "__INDEX__";
/// Reserved asset name for market-level meta rows.
pub const MARKET_ASSET: &str = "__MARKET__";

/// Quote side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuoteSide {
    Bid,
    Ask,
    Mid,
}

impl fmt::Display for QuoteSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuoteSide::Bid => write!(f, "bid"),
            QuoteSide::Ask => write!(f, "ask"),
            QuoteSide::Mid => write!(f, "mid"),
        }
    }
}

impl std::str::FromStr for QuoteSide {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bid" => Ok(QuoteSide::Bid),
            "ask" => Ok(QuoteSide::Ask),
            "mid" => Ok(QuoteSide::Mid),
            other => Err(Error::Parse(format!("unknown quote side `{other}`"))),
        }
    }
}

/// One implied-vol quote on the moneyness grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionQuote {
    /// Year fraction to expiry.
    pub maturity: f64,
    /// Strike over spot.
    pub moneyness: f64,
    /// Annualized implied volatility.
    pub implied_vol: f64,
    pub side: QuoteSide,
}

impl OptionQuote {
    fn validate(&self, asset: &str) -> Result<()> {
        if !(self.maturity > 0.0) {
            return Err(Error::Validation(format!(
                "{asset}: non-positive maturity {}",
                self.maturity
            )));
        }
        if !(self.moneyness > 0.0) {
            return Err(Error::Validation(format!(
                "{asset}: non-positive moneyness {}",
                self.moneyness
            )));
        }
        if !(self.implied_vol > 0.0) {
            return Err(Error::Validation(format!(
                "{asset}: non-positive implied vol {} at T={} m={}",
                self.implied_vol, self.maturity, self.moneyness
            )));
        }
        Ok(())
    }
}

/// A constituent with its spot, index weight and quote grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstituentSpec {
    pub name: String,
    pub spot: f64,
    pub weight: f64,
    pub quotes: Vec<OptionQuote>,
}

/// All market inputs for one valuation date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSnapshot {
    pub as_of: String,
    /// Continuously compounded flat rate.
    pub rate: f64,
    pub constituents: Vec<ConstituentSpec>,
    pub index_spot: f64,
    pub index_quotes: Vec<OptionQuote>,
    /// Strictly increasing quoted maturities.
    pub maturities: Vec<f64>,
}

/// Snapshot file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotFormat {
    Csv,
    Json,
}

impl MarketSnapshot {
    /// Number of constituents.
    pub fn n_assets(&self) -> usize {
        self.constituents.len()
    }

    /// Forward of constituent `n` at maturity `t`.
    pub fn forward(&self, n: usize, t: f64) -> f64 {
        self.constituents[n].spot * (self.rate * t).exp()
    }

    /// Forward of the index at maturity `t`.
    pub fn index_forward(&self, t: f64) -> f64 {
        self.index_spot * (self.rate * t).exp()
    }

    /// Quotes of one constituent at one maturity, filtered by side,
    /// sorted by moneyness.
    pub fn constituent_quotes(&self, n: usize, t: f64, side: QuoteSide) -> Vec<OptionQuote> {
        Self::filter_quotes(&self.constituents[n].quotes, t, side)
    }

    /// Index quotes at one maturity, filtered by side, sorted by moneyness.
    pub fn index_quotes_at(&self, t: f64, side: QuoteSide) -> Vec<OptionQuote> {
        Self::filter_quotes(&self.index_quotes, t, side)
    }

    fn filter_quotes(quotes: &[OptionQuote], t: f64, side: QuoteSide) -> Vec<OptionQuote> {
        let mut out: Vec<OptionQuote> = quotes
            .iter()
            .filter(|q| maturity_key(q.maturity) == maturity_key(t) && q.side == side)
            .copied()
            .collect();
        out.sort_by(|a, b| a.moneyness.partial_cmp(&b.moneyness).unwrap());
        out
    }

    /// Validate all snapshot invariants and normalize weights so that
    /// `sum(w_n * spot_n)` reproduces the index spot exactly. A mismatch
    /// beyond 0.1% is a validation error.
    pub fn validate_and_normalize(&mut self) -> Result<()> {
        if self.constituents.is_empty() {
            return Err(Error::Validation("snapshot has no constituents".into()));
        }
        if !(self.index_spot > 0.0) {
            return Err(Error::Validation(format!(
                "non-positive index spot {}",
                self.index_spot
            )));
        }
        if !self.rate.is_finite() {
            return Err(Error::Validation("non-finite rate".into()));
        }

        // Maturity set: union over all quotes, must match per asset.
        let mut mats: std::collections::BTreeMap<u64, f64> = Default::default();
        for q in self
            .index_quotes
            .iter()
            .chain(self.constituents.iter().flat_map(|c| c.quotes.iter()))
        {
            mats.entry(maturity_key(q.maturity)).or_insert(q.maturity);
        }
        if mats.is_empty() {
            return Err(Error::Validation("snapshot has no quotes".into()));
        }
        self.maturities = mats.values().copied().collect();

        let mut names: BTreeSet<&str> = BTreeSet::new();
        for c in &self.constituents {
            if !names.insert(c.name.as_str()) {
                return Err(Error::Validation(format!("duplicate asset `{}`", c.name)));
            }
            if !(c.spot > 0.0) {
                return Err(Error::Validation(format!(
                    "{}: non-positive spot {}",
                    c.name, c.spot
                )));
            }
            if !(c.weight > 0.0) {
                return Err(Error::Validation(format!(
                    "{}: non-positive weight {}",
                    c.name, c.weight
                )));
            }
            Self::check_quote_grid(&c.name, &c.quotes, &self.maturities)?;
        }
        Self::check_quote_grid(INDEX_ASSET, &self.index_quotes, &self.maturities)?;

        // Weight normalization against the quoted index spot.
        let implied: f64 = self.constituents.iter().map(|c| c.weight * c.spot).sum();
        let scale = self.index_spot / implied;
        if (scale - 1.0).abs() > 1e-3 {
            return Err(Error::Validation(format!(
                "weights inconsistent with index spot: sum(w*s)={implied} vs {} ({:.3}% off)",
                self.index_spot,
                (scale - 1.0).abs() * 100.0
            )));
        }
        for c in &mut self.constituents {
            c.weight *= scale;
        }

        // Canonical quote order.
        for c in &mut self.constituents {
            sort_quotes(&mut c.quotes);
        }
        sort_quotes(&mut self.index_quotes);
        Ok(())
    }

    fn check_quote_grid(asset: &str, quotes: &[OptionQuote], maturities: &[f64]) -> Result<()> {
        let mut seen: BTreeSet<(u64, u64, QuoteSide)> = BTreeSet::new();
        for q in quotes {
            q.validate(asset)?;
            if !seen.insert((maturity_key(q.maturity), q.moneyness.to_bits(), q.side)) {
                return Err(Error::Validation(format!(
                    "{asset}: duplicate grid point T={} m={} side={}",
                    q.maturity, q.moneyness, q.side
                )));
            }
        }
        for &t in maturities {
            let key = maturity_key(t);
            if !quotes.iter().any(|q| maturity_key(q.maturity) == key) {
                return Err(Error::Validation(format!(
                    "{asset}: missing quotes at maturity {t}"
                )));
            }
        }
        Ok(())
    }

    /// Serialize to the flat CSV format.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("asset,maturity_yf,moneyness,side,implied_vol\n");
        out.push_str(&format!("{MARKET_ASSET},0,0,asof,{}\n", self.as_of));
        out.push_str(&format!("{MARKET_ASSET},0,0,rate,{}\n", self.rate));
        out.push_str(&format!("{INDEX_ASSET},0,0,spot,{}\n", self.index_spot));
        for c in &self.constituents {
            out.push_str(&format!("{},0,0,spot,{}\n", c.name, c.spot));
            out.push_str(&format!("{},0,0,weight,{}\n", c.name, c.weight));
        }
        for c in &self.constituents {
            for q in &c.quotes {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    c.name, q.maturity, q.moneyness, q.side, q.implied_vol
                ));
            }
        }
        for q in &self.index_quotes {
            out.push_str(&format!(
                "{INDEX_ASSET},{},{},{},{}\n",
                q.maturity, q.moneyness, q.side, q.implied_vol
            ));
        }
        out
    }

    /// Parse the flat CSV format. The result is validated and weight
    /// normalized; quotes come out sorted by (asset, maturity, moneyness).
    pub fn from_csv_str(data: &str) -> Result<MarketSnapshot> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(data.as_bytes());
        {
            let headers = reader
                .headers()
                .map_err(|e| Error::Parse(format!("bad header: {e}")))?;
            if headers.len() != 5 {
                return Err(Error::Parse(format!(
                    "expected 5 columns, found {}",
                    headers.len()
                )));
            }
        }

        let mut as_of: Option<String> = None;
        let mut rate: Option<f64> = None;
        let mut index_spot: Option<f64> = None;
        let mut order: Vec<String> = Vec::new();
        type PartialSpec = (Option<f64>, Option<f64>, Vec<OptionQuote>);
        let mut specs: std::collections::BTreeMap<String, PartialSpec> = Default::default();
        let mut index_quotes: Vec<OptionQuote> = Vec::new();

        for (i, row) in reader.records().enumerate() {
            let row = row.map_err(|e| Error::Parse(format!("row {}: {e}", i + 2)))?;
            if row.len() != 5 {
                return Err(Error::Parse(format!(
                    "row {}: expected 5 fields, found {}",
                    i + 2,
                    row.len()
                )));
            }
            let asset = row[0].to_string();
            let parse_f = |s: &str, what: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: bad {what} `{s}`", i + 2)))
            };
            let side = &row[3];
            match side {
                "asof" => as_of = Some(row[4].to_string()),
                "rate" => rate = Some(parse_f(&row[4], "rate")?),
                "spot" => {
                    let v = parse_f(&row[4], "spot")?;
                    if asset == INDEX_ASSET {
                        index_spot = Some(v);
                    } else {
                        let entry = specs.entry(asset.clone()).or_default();
                        if entry.0.is_none() && entry.1.is_none() && entry.2.is_empty() {
                            order.push(asset);
                        }
                        entry.0 = Some(v);
                    }
                }
                "weight" => {
                    let entry = specs.entry(asset.clone()).or_default();
                    if entry.0.is_none() && entry.1.is_none() && entry.2.is_empty() {
                        order.push(asset);
                    }
                    entry.1 = Some(parse_f(&row[4], "weight")?);
                }
                _ => {
                    let quote = OptionQuote {
                        maturity: parse_f(&row[1], "maturity")?,
                        moneyness: parse_f(&row[2], "moneyness")?,
                        side: side.parse()?,
                        implied_vol: parse_f(&row[4], "implied_vol")?,
                    };
                    if asset == MARKET_ASSET {
                        return Err(Error::Parse(format!(
                            "row {}: unexpected quote on {MARKET_ASSET}",
                            i + 2
                        )));
                    } else if asset == INDEX_ASSET {
                        index_quotes.push(quote);
                    } else {
                        let entry = specs.entry(asset.clone()).or_default();
                        if entry.0.is_none() && entry.1.is_none() && entry.2.is_empty() {
                            order.push(asset);
                        }
                        entry.2.push(quote);
                    }
                }
            }
        }

        if order.is_empty() && index_quotes.is_empty() {
            return Err(Error::Parse("empty snapshot file".into()));
        }

        let mut constituents = Vec::with_capacity(order.len());
        for name in order {
            let (spot, weight, quotes) = specs.remove(&name).expect("tracked");
            let spot =
                spot.ok_or_else(|| Error::Validation(format!("{name}: missing spot row")))?;
            let weight =
                weight.ok_or_else(|| Error::Validation(format!("{name}: missing weight row")))?;
            constituents.push(ConstituentSpec {
                name,
                spot,
                weight,
                quotes,
            });
        }

        let mut snapshot = MarketSnapshot {
            as_of: as_of.ok_or_else(|| Error::Validation("missing asof row".into()))?,
            rate: rate.ok_or_else(|| Error::Validation("missing rate row".into()))?,
            constituents,
            index_spot: index_spot
                .ok_or_else(|| Error::Validation("missing index spot row".into()))?,
            index_quotes,
            maturities: Vec::new(),
        };
        snapshot.validate_and_normalize()?;
        Ok(snapshot)
    }
}

fn sort_quotes(quotes: &mut [OptionQuote]) {
    quotes.sort_by(|a, b| {
        (a.maturity, a.moneyness, a.side)
            .partial_cmp(&(b.maturity, b.moneyness, b.side))
            .unwrap()
    });
}

/// Quotes at maturities differing by less than a minute are the same pillar.
fn maturity_key(t: f64) -> u64 {
    (t * 525_600.0).round() as u64
}

/// Load a snapshot from disk.
pub fn load_snapshot<P: AsRef<Path>>(path: P, format: SnapshotFormat) -> Result<MarketSnapshot> {
    let data = std::fs::read_to_string(path)?;
    match format {
        SnapshotFormat::Csv => MarketSnapshot::from_csv_str(&data),
        SnapshotFormat::Json => {
            let mut snapshot: MarketSnapshot =
                serde_json::from_str(&data).map_err(|e| Error::Parse(e.to_string()))?;
            snapshot.validate_and_normalize()?;
            Ok(snapshot)
        }
    }
}

/// Write a snapshot to disk.
pub fn save_snapshot<P: AsRef<Path>>(
    snapshot: &MarketSnapshot,
    path: P,
    format: SnapshotFormat,
) -> Result<()> {
    let data = match format {
        SnapshotFormat::Csv => snapshot.to_csv_string(),
        SnapshotFormat::Json => {
            serde_json::to_string_pretty(snapshot).map_err(|e| Error::Io(e.into()))?
        }
    };
    std::fs::write(path, data)?;
    Ok(())
}

/// One correlation regime of the reference dependency.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Regime {
    /// Mixture probability.
    pub weight: f64,
    /// One-factor Gaussian correlation inside the regime.
    pub rho: f64,
}

/// Reference dependency used to manufacture index quotes.
///
/// A mixture of exchangeable one-factor Gaussian copulas: each joint draw
/// picks a regime, then correlates all constituents with loading
/// `sqrt(rho)`. The mixture keeps every marginal exactly uniform, so the
/// generated index quotes are consistent with the constituent quotes by
/// construction and an admissible copula exists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DependencyConfig {
    pub regimes: Vec<Regime>,
    /// Joint Monte Carlo draws per maturity (antithetic pairs included).
    pub mc_samples: usize,
}

impl DependencyConfig {
    fn validate(&self) -> Result<()> {
        if self.regimes.is_empty() {
            return Err(Error::Config("dependency needs at least one regime".into()));
        }
        for r in &self.regimes {
            if !(r.weight > 0.0) {
                return Err(Error::Config(format!("regime weight {} <= 0", r.weight)));
            }
            if !(0.0..=1.0).contains(&r.rho) {
                return Err(Error::Config(format!("regime rho {} outside [0,1]", r.rho)));
            }
        }
        if self.mc_samples < 1_000 {
            return Err(Error::Config("dependency mc_samples below 1000".into()));
        }
        Ok(())
    }

    fn is_comonotone(&self) -> bool {
        self.regimes.iter().all(|r| (r.rho - 1.0).abs() < 1e-12)
    }
}

/// Synthetic market generator settings. Defaults produce a DJIA-shaped
/// desk: 11-point moneyness grid, five maturities out to 2y, SABR smiles
/// with equity-like negative skew.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub as_of: String,
    pub rate: f64,
    /// Flat per-constituent index weight.
    pub weight: f64,
    pub moneyness: Vec<f64>,
    pub beta: f64,
    pub spot_range: (f64, f64),
    pub alpha_range: (f64, f64),
    pub rho_range: (f64, f64),
    pub gamma_range: (f64, f64),
    pub dependency: DependencyConfig,
    /// Grid points used when extracting generator laws.
    pub law_points: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            as_of: "2024-06-28".to_string(),
            rate: 0.01,
            weight: 0.066,
            moneyness: vec![0.8, 0.85, 0.9, 0.95, 0.975, 1.0, 1.025, 1.05, 1.1, 1.15, 1.2],
            beta: 0.9,
            spot_range: (60.0, 480.0),
            alpha_range: (0.43, 0.50),
            rho_range: (-0.52, -0.28),
            gamma_range: (1.2, 1.5),
            dependency: DependencyConfig {
                regimes: vec![
                    Regime {
                        weight: 0.6,
                        rho: 0.2,
                    },
                    Regime {
                        weight: 0.4,
                        rho: 0.7,
                    },
                ],
                mc_samples: 400_000,
            },
            law_points: 2001,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.moneyness.is_empty() {
            return Err(Error::Config("empty moneyness grid".into()));
        }
        if !(self.beta >= 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta {} outside [0,1]", self.beta)));
        }
        if !(self.alpha_range.0 > 0.0 && self.alpha_range.1 >= self.alpha_range.0) {
            return Err(Error::Config("alpha range implies non-positive vol".into()));
        }
        if !(self.gamma_range.0 >= 0.0 && self.gamma_range.1 >= self.gamma_range.0) {
            return Err(Error::Config("gamma range implies negative vol-of-vol".into()));
        }
        if !(self.rho_range.0 > -1.0 && self.rho_range.1 < 1.0 && self.rho_range.1 >= self.rho_range.0)
        {
            return Err(Error::Config("rho range outside (-1,1)".into()));
        }
        if !(self.spot_range.0 > 0.0 && self.spot_range.1 >= self.spot_range.0) {
            return Err(Error::Config("spot range non-positive".into()));
        }
        if !(self.weight > 0.0) {
            return Err(Error::Config("weight must be positive".into()));
        }
        self.dependency.validate()
    }
}

fn uniform_in(rng: &mut impl Rng, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..range.1)
    } else {
        range.0
    }
}

/// Smile parameters at one maturity: vol-of-vol scales like `sqrt(3m / t)`
/// beyond the 3m anchor, matching the flattening of equity smiles in tenor.
fn maturity_params(base: &SabrParams, t: f64) -> SabrParams {
    SabrParams {
        gamma: base.gamma * (0.25 / t).sqrt().min(1.0),
        ..*base
    }
}

/// Generate a synthetic market snapshot with known ground truth.
///
/// Constituent quotes are the exact Hagan implied vols of per-asset SABR
/// smiles at the grid points. Index quotes come from a joint Monte Carlo of
/// the constituents under [`DependencyConfig`], so the index smile is
/// consistent with the marginals. Deterministic for a fixed seed.
pub fn generate_synthetic_market(
    n_assets: usize,
    maturities: &[f64],
    config: &SynthConfig,
    seed: u64,
) -> Result<MarketSnapshot> {
    if n_assets < 2 {
        return Err(Error::Config(format!("n_assets {n_assets} < 2")));
    }
    if maturities.is_empty() {
        return Err(Error::Config("empty maturity list".into()));
    }
    let mut mats = maturities.to_vec();
    mats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if mats[0] <= 0.0 {
        return Err(Error::Config("maturities must be positive".into()));
    }
    config.validate()?;

    // Per-asset smile parameters and spots. Vol-of-vol decays with tenor
    // (anchored at 3m) so long maturities stay free of wing arbitrage.
    let mut constituents = Vec::with_capacity(n_assets);
    let mut params = Vec::with_capacity(n_assets);
    for i in 0..n_assets {
        let mut rng = rng::substream(seed, &[stream::SYNTH_SMILES, i as u64]);
        let spot = uniform_in(&mut rng, config.spot_range);
        let p = SabrParams {
            alpha: uniform_in(&mut rng, config.alpha_range),
            beta: config.beta,
            rho: uniform_in(&mut rng, config.rho_range),
            gamma: uniform_in(&mut rng, config.gamma_range),
        };
        p.validate()?;
        let mut quotes = Vec::with_capacity(mats.len() * config.moneyness.len());
        for &t in &mats {
            let p_t = maturity_params(&p, t);
            let forward = spot * (config.rate * t).exp();
            for &m in &config.moneyness {
                let vol = smile::sabr_implied_vol(&p_t, forward, m * spot, t)?;
                quotes.push(OptionQuote {
                    maturity: t,
                    moneyness: m,
                    implied_vol: vol,
                    side: QuoteSide::Mid,
                });
            }
        }
        constituents.push(ConstituentSpec {
            name: format!("SYN{i:02}"),
            spot,
            weight: config.weight,
            quotes,
        });
        params.push(p);
    }
    let index_spot: f64 = constituents.iter().map(|c| c.weight * c.spot).sum();

    // Index quotes from the reference dependency.
    let mut index_quotes = Vec::with_capacity(mats.len() * config.moneyness.len());
    let law_grid = LawGridConfig {
        points: config.law_points,
        ..LawGridConfig::default()
    };
    for (ti, &t) in mats.iter().enumerate() {
        let laws: Vec<smile::MarginalLaw> = (0..n_assets)
            .map(|i| {
                let forward = constituents[i].spot * (config.rate * t).exp();
                smile::extract_law(&maturity_params(&params[i], t), forward, config.rate, t, &law_grid)
                    .map(|e| e.law)
            })
            .collect::<Result<_>>()?;
        let weights: Vec<f64> = constituents.iter().map(|c| c.weight).collect();
        let index_forward = index_spot * (config.rate * t).exp();

        let index_samples = if config.dependency.is_comonotone() {
            comonotone_index_samples(&laws, &weights, 100_001)
        } else {
            joint_index_samples(&laws, &weights, &config.dependency, seed, ti as u64)
        };

        for &m in &config.moneyness {
            let strike = m * index_spot;
            let vol = index_vol_from_samples(&index_samples, index_forward, strike, t)?;
            index_quotes.push(OptionQuote {
                maturity: t,
                moneyness: m,
                implied_vol: vol,
                side: QuoteSide::Mid,
            });
        }
    }

    let mut snapshot = MarketSnapshot {
        as_of: config.as_of.clone(),
        rate: config.rate,
        constituents,
        index_spot,
        index_quotes,
        maturities: Vec::new(),
    };
    snapshot.validate_and_normalize()?;
    Ok(snapshot)
}

/// Stratified comonotone index samples: all constituents share one uniform.
fn comonotone_index_samples(
    laws: &[smile::MarginalLaw],
    weights: &[f64],
    n: usize,
) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let u = (i as f64 + 0.5) / n as f64;
            laws.iter()
                .zip(weights)
                .map(|(law, w)| w * law.quantile(u))
                .sum()
        })
        .collect()
}

/// Joint antithetic Monte Carlo of the index under the regime mixture.
fn joint_index_samples(
    laws: &[smile::MarginalLaw],
    weights: &[f64],
    dep: &DependencyConfig,
    seed: u64,
    maturity_tag: u64,
) -> Vec<f64> {
    let n_assets = laws.len();
    let pairs = (dep.mc_samples / 2).max(1);
    let total_weight: f64 = dep.regimes.iter().map(|r| r.weight).sum();
    let mut rng = rng::substream(seed, &[stream::SYNTH_INDEX, maturity_tag]);
    let mut out = Vec::with_capacity(pairs * 2);
    let mut eps = vec![0.0f64; n_assets];
    for _ in 0..pairs {
        let mut pick = rng.random_range(0.0..total_weight);
        let mut rho = dep.regimes[0].rho;
        for r in &dep.regimes {
            if pick < r.weight {
                rho = r.rho;
                break;
            }
            pick -= r.weight;
        }
        let load = rho.sqrt();
        let resid = (1.0 - rho).sqrt();
        let factor: f64 = rng.sample(StandardNormal);
        for e in eps.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        for sign in [1.0, -1.0] {
            let mut acc = 0.0;
            for ((law, &w), &e) in laws.iter().zip(weights).zip(eps.iter()) {
                let z = sign * (load * factor + resid * e);
                acc += w * law.quantile(norm_cdf(z).clamp(1e-12, 1.0 - 1e-12));
            }
            out.push(acc);
        }
    }
    out
}

/// Implied vol of the index from raw joint samples. Prices the
/// out-of-the-money side and converts through parity with the exact
/// forward, which keeps wing quotes usable.
fn index_vol_from_samples(samples: &[f64], forward: f64, strike: f64, t: f64) -> Result<f64> {
    let m = samples.len() as f64;
    let call = if strike >= forward {
        samples.iter().map(|&x| (x - strike).max(0.0)).sum::<f64>() / m
    } else {
        let put = samples.iter().map(|&x| (strike - x).max(0.0)).sum::<f64>() / m;
        put + forward - strike
    };
    implied_vol_black(call, forward, strike, t)
}
