//! `basketlv` command line: synth -> calibrate -> rearrange -> localvol ->
//! price/greeks -> report, all driven by one master seed.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use basketlv::error::{Error, Result};
use basketlv::localvol::LvConfig;
use basketlv::market::{
    self, generate_synthetic_market, MarketSnapshot, SnapshotFormat, SynthConfig,
};
use basketlv::oracle;
use basketlv::pipeline::{build_state, run_pipeline, EngineState, RunConfig};
use basketlv::pricing::{self, McConfig, Payoff, PricingRequest};
use basketlv::report::{self, ReportFormat};
use basketlv::sampling::SampleMatrix;
use basketlv::smile::MarginalLaw;

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "BASKETLV_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "basketlv",
    version,
    about = "Basket option pricing from market-implied dependency structures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// Market snapshot file (.json or csv).
    #[arg(long)]
    snapshot: PathBuf,
    /// Monte Carlo samples per maturity.
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    /// Target vector bins.
    #[arg(long, default_value_t = 1_400)]
    bins: usize,
    /// Sort-mix iteration budget.
    #[arg(long, default_value_t = 10)]
    iters: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Fixed SABR CEV exponent.
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    /// Quote side used for calibration.
    #[arg(long, default_value = "mid")]
    side: String,
}

impl EngineArgs {
    fn run_config(&self) -> Result<RunConfig> {
        Ok(RunConfig {
            snapshot_path: Some(self.snapshot.clone()),
            samples: self.samples,
            bins: self.bins,
            iterations: self.iters,
            seed: self.seed,
            beta: self.beta,
            quote_side: self.side.parse()?,
            compute_greeks: false,
            ..RunConfig::default()
        })
    }

    fn load_snapshot(&self) -> Result<MarketSnapshot> {
        market::load_snapshot(&self.snapshot, detect_format(&self.snapshot))
    }

    fn build_state(&self) -> Result<(EngineState, RunConfig)> {
        let config = self.run_config()?;
        let snapshot = self.load_snapshot()?;
        let (state, _timings) = build_state(snapshot, &config)?;
        Ok((state, config))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic market snapshot with a known joint model.
    Synth {
        #[arg(long)]
        assets: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated year fractions.
        #[arg(long, default_value = "0.25,0.5,1.0,1.25,2.0")]
        maturities: String,
        #[arg(long, default_value_t = 0.01)]
        rate: f64,
        /// Joint Monte Carlo draws per maturity for the index quotes.
        #[arg(long, default_value_t = 400_000)]
        mc_samples: usize,
        /// Use a comonotone reference dependency instead of the regime mix.
        #[arg(long, default_value_t = false)]
        comonotone: bool,
    },
    /// Calibrate SABR smiles and export the parameter table.
    Calibrate {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rearrange samples per maturity and dump matrices plus traces.
    Rearrange {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Calibrate the basket local-vol surface and export it.
    Localvol {
        #[command(flatten)]
        engine: EngineArgs,
        /// Basket as comma-separated constituent names or indices
        /// (defaults to the full index).
        #[arg(long)]
        basket: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Price one basket derivative.
    Price {
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long)]
        basket: Option<String>,
        /// call | put | asian-call
        #[arg(long, default_value = "call")]
        payoff: String,
        #[arg(long)]
        strike: f64,
        #[arg(long)]
        maturity: f64,
        /// Price through the local-vol path engine.
        #[arg(long, default_value_t = false)]
        path: bool,
        /// Asian observation dates (comma-separated year fractions).
        #[arg(long)]
        obs: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 1.0)]
        notional: f64,
    },
    /// Delta/gamma ladder and optional per-constituent vegas.
    Greeks {
        #[command(flatten)]
        engine: EngineArgs,
        /// Maturity (defaults to the shortest quoted one).
        #[arg(long)]
        maturity: Option<f64>,
        #[arg(long, default_value_t = false)]
        all_vegas: bool,
        #[arg(long, default_value_t = 0.001)]
        spot_bump: f64,
        #[arg(long, default_value_t = 0.01)]
        vega_bump: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Independent verifiers.
    Oracle {
        #[command(subcommand)]
        check: OracleCommand,
    },
    /// Run the full pipeline from a config file and render the report.
    Report {
        /// TOML run configuration; missing keys use the standard desk
        /// defaults.
        #[arg(long)]
        config: PathBuf,
        /// csv | json | markdown | all
        #[arg(long, default_value = "all")]
        format: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Rank-matching convergence curve for a known bivariate copula.
    Lemma1 {
        /// Sample sizes, comma separated.
        #[arg(long = "M", alias = "m-grid", default_value = "50,100,200,400,800")]
        m_grid: String,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.6)]
        rho: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustive arrangement search on a tiny matrix dump.
    Enumerate {
        #[arg(long)]
        file: PathBuf,
    },
    /// Same index law, different sub-basket prices.
    Underdet {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn detect_format(path: &Path) -> SnapshotFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => SnapshotFormat::Json,
        _ => SnapshotFormat::Csv,
    }
}

fn out_dir(flag: Option<PathBuf>, fallback: &Path) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| fallback.to_path_buf())
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad {what} entry `{tok}`")))
        })
        .collect()
}

fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad {what} entry `{tok}`")))
        })
        .collect()
}

/// Basket as names or zero-based indices; `None` means the full index.
fn parse_basket(spec: Option<&str>, snapshot: &MarketSnapshot) -> Result<Vec<usize>> {
    let Some(spec) = spec else {
        return Ok((0..snapshot.n_assets()).collect());
    };
    spec.split(',')
        .map(|tok| {
            let tok = tok.trim();
            if let Ok(idx) = tok.parse::<usize>() {
                if idx < snapshot.n_assets() {
                    return Ok(idx);
                }
                return Err(Error::Config(format!("constituent index {idx} out of range")));
            }
            snapshot
                .constituents
                .iter()
                .position(|c| c.name == tok)
                .ok_or_else(|| Error::Config(format!("unknown constituent `{tok}`")))
        })
        .collect()
}

fn cmd_synth(
    assets: usize,
    seed: u64,
    out: PathBuf,
    maturities: &str,
    rate: f64,
    mc_samples: usize,
    comonotone: bool,
) -> Result<()> {
    let maturities = parse_f64_list(maturities, "maturity")?;
    let mut config = SynthConfig {
        rate,
        ..SynthConfig::default()
    };
    config.dependency.mc_samples = mc_samples;
    if comonotone {
        config.dependency.regimes = vec![market::Regime {
            weight: 1.0,
            rho: 1.0,
        }];
    }
    let snapshot = generate_synthetic_market(assets, &maturities, &config, seed)?;
    market::save_snapshot(&snapshot, &out, detect_format(&out))?;
    println!(
        "wrote {} ({} assets, {} maturities, seed {seed})",
        out.display(),
        snapshot.n_assets(),
        snapshot.maturities.len()
    );
    Ok(())
}

fn cmd_calibrate(engine: &EngineArgs, out: Option<PathBuf>) -> Result<()> {
    let (state, config) = engine.build_state()?;
    let dir = out_dir(out, &config.out_dir);
    std::fs::create_dir_all(&dir)?;
    let mut csv = String::from("asset,maturity,alpha,beta,rho,gamma,rmse\n");
    for slice in &state.slices {
        for (n, params) in slice.constituent_params.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                state.snapshot.constituents[n].name,
                slice.maturity,
                params.alpha,
                params.beta,
                params.rho,
                params.gamma,
                slice.constituent_fits[n].rmse
            ));
        }
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            market::INDEX_ASSET,
            slice.maturity,
            slice.index_params.alpha,
            slice.index_params.beta,
            slice.index_params.rho,
            slice.index_params.gamma,
            slice.index_fit.rmse
        ));
    }
    let path = dir.join("sabr_params.csv");
    std::fs::write(&path, csv)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn dump_matrix(matrix: &SampleMatrix, names: &[String], path: &Path) -> Result<()> {
    let mut csv = String::from("row,asset,uniform,value\n");
    for (n, name) in names.iter().enumerate() {
        for row in 0..matrix.n_samples() {
            let draw = matrix.perms[n][row] as usize;
            csv.push_str(&format!(
                "{row},{name},{},{}\n",
                matrix.uniforms[n][draw], matrix.columns[n][row]
            ));
        }
    }
    std::fs::write(path, csv)?;
    Ok(())
}

fn cmd_rearrange(engine: &EngineArgs, out: Option<PathBuf>) -> Result<()> {
    let (state, config) = engine.build_state()?;
    let dir = out_dir(out, &config.out_dir);
    std::fs::create_dir_all(&dir)?;
    let names: Vec<String> = state
        .snapshot
        .constituents
        .iter()
        .map(|c| c.name.clone())
        .collect();
    let mut summary = Vec::new();
    for (ti, result) in state.ism.iter().enumerate() {
        let t = state.snapshot.maturities[ti];
        let tag = format!("{t}").replace('.', "p");
        dump_matrix(&result.matrix, &names, &dir.join(format!("matrix_{tag}.csv")))?;
        let mut trace = String::new();
        for pass in &result.trace {
            trace.push_str(&serde_json::to_string(&serde_json::json!({
                "pass": pass.pass,
                "arrangement": pass.arrangement,
                "harvested": pass.harvested,
                "remaining": pass.remaining,
                "error": pass.stage_loss,
            })).expect("trace row"));
            trace.push('\n');
        }
        std::fs::write(dir.join(format!("trace_{tag}.jsonl")), trace)?;
        summary.push(serde_json::json!({
            "maturity": t,
            "discrete_error": result.discrete_error,
            "iterations_used": result.iterations_used,
        }));
        println!(
            "T={t}: discrete error {:.4}%, {} iterations",
            result.discrete_error * 100.0,
            result.iterations_used
        );
    }
    std::fs::write(
        dir.join("rearrange_summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary") + "\n",
    )?;
    println!("wrote matrices and traces to {}", dir.display());
    Ok(())
}

fn cmd_localvol(engine: &EngineArgs, basket: Option<String>, out: Option<PathBuf>) -> Result<()> {
    let (state, config) = engine.build_state()?;
    let basket = parse_basket(basket.as_deref(), &state.snapshot)?;
    let (surface, densities, diag) =
        state.basket_surface(&basket, &config.density_config(), &LvConfig::default())?;
    let dir = out_dir(out, &config.out_dir);
    std::fs::create_dir_all(&dir)?;

    let mut surf = String::from("maturity,strike,local_vol\n");
    for (j, &t) in surface.maturities.iter().enumerate() {
        for (ki, &k) in surface.strikes.iter().enumerate() {
            surf.push_str(&format!("{t},{k},{}\n", surface.values[j][ki]));
        }
    }
    std::fs::write(dir.join("surface.csv"), surf)?;

    let mut dens = String::from("maturity,strike,pdf\n");
    for d in &densities {
        for (x, p) in d.grid.iter().zip(&d.pdf) {
            dens.push_str(&format!("{},{x},{p}\n", d.maturity));
        }
    }
    std::fs::write(dir.join("density.csv"), dens)?;
    println!(
        "wrote surface.csv and density.csv to {} ({} floored / {} window nodes)",
        dir.display(),
        diag.floored_nodes,
        diag.window_nodes
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_price(
    engine: &EngineArgs,
    basket: Option<String>,
    payoff: &str,
    strike: f64,
    maturity: f64,
    path: bool,
    obs: Option<String>,
    n_paths: usize,
    notional: f64,
) -> Result<()> {
    let (state, config) = engine.build_state()?;
    let basket = parse_basket(basket.as_deref(), &state.snapshot)?;
    let payoff = match payoff {
        "call" => Payoff::EuropeanCall { strike },
        "put" => Payoff::EuropeanPut { strike },
        "asian-call" => {
            let dates = match obs {
                Some(s) => parse_f64_list(&s, "observation date")?,
                None => return Err(Error::Config("asian-call needs --obs".into())),
            };
            Payoff::AsianCall {
                strike,
                observation_dates: dates,
            }
        }
        other => return Err(Error::Config(format!("unknown payoff `{other}`"))),
    };
    let request = PricingRequest {
        basket: basket.clone(),
        payoff,
        maturity,
        notional,
    };
    let estimate = if path || matches!(request.payoff, Payoff::AsianCall { .. }) {
        let (surface, _, _) =
            state.basket_surface(&basket, &config.density_config(), &LvConfig::default())?;
        let spot = state.basket_spot(&basket)?;
        let mc = McConfig {
            n_paths,
            seed: config.seed,
            ..McConfig::default()
        };
        pricing::price_path_dependent(&surface, spot, state.snapshot.rate, &request, &mc)?
    } else {
        pricing::price_request_static(&state, &request, 0.0)?
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::json!({
            "price": estimate.price,
            "std_error": estimate.std_error,
            "maturity": maturity,
            "strike": strike,
            "basket_size": basket.len(),
        }))
        .expect("price json")
    );
    Ok(())
}

fn cmd_greeks(
    engine: &EngineArgs,
    maturity: Option<f64>,
    all_vegas: bool,
    spot_bump: f64,
    vega_bump: f64,
    out: Option<PathBuf>,
) -> Result<()> {
    let (state, config) = engine.build_state()?;
    let basket = state.full_basket();
    let spot = state.basket_spot(&basket)?;
    let t = maturity.unwrap_or(state.snapshot.maturities[0]);

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
        let g = pricing::greeks_spot(&state, &request, spot_bump)?;
        ladder.push(serde_json::json!({
            "strike_rel": strike_rel,
            "delta": g.delta,
            "gamma": g.gamma,
        }));
    }
    let vegas = if all_vegas {
        let request = PricingRequest {
            basket: basket.clone(),
            payoff: Payoff::EuropeanCall { strike: spot },
            maturity: t,
            notional: 1.0,
        };
        let values = pricing::vega_all(&state, vega_bump, &request)?;
        Some(
            values
                .iter()
                .zip(&state.snapshot.constituents)
                .map(|(v, c)| serde_json::json!({"name": c.name, "vega": v}))
                .collect::<Vec<_>>(),
        )
    } else {
        None
    };
    let doc = serde_json::json!({
        "maturity": t,
        "spot_bump": spot_bump * spot,
        "vega_bump": vega_bump,
        "ladder": ladder,
        "vegas": vegas,
    });
    let rendered = serde_json::to_string_pretty(&doc).expect("greeks json");
    println!("{rendered}");

    let dir = out_dir(out, &config.out_dir);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("greeks.json"), rendered + "\n")?;
    let mut csv = String::from("table,key,value1,value2\n");
    for row in &ladder {
        csv.push_str(&format!(
            "ladder,{},{},{}\n",
            row["strike_rel"], row["delta"], row["gamma"]
        ));
    }
    if let Some(vegas) = &vegas {
        for row in vegas {
            csv.push_str(&format!(
                "vega,{},{},\n",
                row["name"].as_str().unwrap_or("?"),
                row["vega"]
            ));
        }
    }
    std::fs::write(dir.join("greeks.csv"), csv)?;
    Ok(())
}

fn cmd_oracle(check: OracleCommand) -> Result<()> {
    match check {
        OracleCommand::Lemma1 {
            m_grid,
            trials,
            seed,
            rho,
            out,
        } => {
            let grid = parse_usize_list(&m_grid, "M")?;
            let joint = oracle::GaussianCopulaPair {
                rho,
                law1: MarginalLaw::lognormal(100.0, 0.30, 1.0, 1001),
                law2: MarginalLaw::lognormal(60.0, 0.45, 1.0, 1001),
            };
            let curve = oracle::verify_lemma1(&joint, &grid, trials, seed);
            let mut csv = String::from("m,mean_error\n");
            for p in &curve {
                csv.push_str(&format!("{},{}\n", p.m, p.mean_error));
            }
            match out {
                Some(path) => {
                    std::fs::write(&path, csv)?;
                    println!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
        }
        OracleCommand::Enumerate { file } => {
            let matrix = read_matrix_dump(&file)?;
            // score against the comonotone sum law of the file itself
            let mut sorted = matrix.clone();
            sorted.sort_columns();
            let law = oracle::law_from_samples(&sorted.index_vector(), matrix.maturity);
            let result = oracle::brute_force_rearrange(&matrix, &law)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&serde_json::json!({
                    "arrangements_tested": result.arrangements_tested,
                    "best_error": result.best_error,
                }))
                .expect("enumeration json")
            );
        }
        OracleCommand::Underdet { samples, seed } => {
            let report = oracle::demo_underdetermination(samples, seed);
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("underdetermination json")
            );
        }
    }
    Ok(())
}

/// Read the `row,asset,uniform,value` matrix dump format.
fn read_matrix_dump(path: &Path) -> Result<SampleMatrix> {
    let data = std::fs::read_to_string(path)?;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut names: Vec<String> = Vec::new();
    for (i, line) in data.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("line {}: need 4 fields", i + 1)));
        }
        let value: f64 = fields[3]
            .parse()
            .map_err(|_| Error::Parse(format!("line {}: bad value", i + 1)))?;
        let idx = match names.iter().position(|n| n == fields[1]) {
            Some(idx) => idx,
            None => {
                names.push(fields[1].to_string());
                columns.push(Vec::new());
                names.len() - 1
            }
        };
        columns[idx].push(value);
    }
    SampleMatrix::from_columns(0.0, columns, vec![1.0; names.len()])
}

fn cmd_report(config_path: &Path, format: &str, out: Option<PathBuf>) -> Result<()> {
    let text = std::fs::read_to_string(config_path)?;
    let mut config: RunConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("config: {e}")))?;
    config.validate()?;
    if let Some(dir) = out {
        config.out_dir = dir;
    } else if let Some(dir) = std::env::var_os(OUT_DIR_ENV) {
        config.out_dir = PathBuf::from(dir);
    }
    let (run_report, _state) = run_pipeline(&config)?;
    let formats: Vec<ReportFormat> = match format {
        "all" => vec![ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown],
        other => vec![other.parse()?],
    };
    for f in formats {
        for path in report::render(&run_report, f, &config.out_dir)? {
            println!("wrote {}", path.display());
        }
    }
    for m in &run_report.maturities {
        println!(
            "T={}: discrete error {:.4}%",
            m.maturity,
            m.discrete_error * 100.0
        );
    }
    println!("total wall time {:.2} s", run_report.total_wall_seconds);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            assets,
            seed,
            out,
            maturities,
            rate,
            mc_samples,
            comonotone,
        } => cmd_synth(assets, seed, out, &maturities, rate, mc_samples, comonotone),
        Command::Calibrate { engine, out } => cmd_calibrate(&engine, out),
        Command::Rearrange { engine, out } => cmd_rearrange(&engine, out),
        Command::Localvol {
            engine,
            basket,
            out,
        } => cmd_localvol(&engine, basket, out),
        Command::Price {
            engine,
            basket,
            payoff,
            strike,
            maturity,
            path,
            obs,
            paths,
            notional,
        } => cmd_price(
            &engine, basket, &payoff, strike, maturity, path, obs, paths, notional,
        ),
        Command::Greeks {
            engine,
            maturity,
            all_vegas,
            spot_bump,
            vega_bump,
            out,
        } => cmd_greeks(&engine, maturity, all_vegas, spot_bump, vega_bump, out),
        Command::Oracle { check } => cmd_oracle(check),
        Command::Report {
            config,
            format,
            out,
        } => cmd_report(&config, &format, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
