//! Run report assembly and rendering (JSON, CSV, Markdown).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Wall time per pipeline stage of one maturity, in seconds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub calibrate_constituents: f64,
    pub calibrate_index: f64,
    pub sampling: f64,
    pub target: f64,
    pub arranging: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.calibrate_constituents
            + self.calibrate_index
            + self.sampling
            + self.target
            + self.arranging
    }
}

/// Market vs model implied vol at one grid point. The model vol is absent
/// when the Monte Carlo price was not invertible (tiny sample counts in
/// far wings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepricingRow {
    pub moneyness: f64,
    pub strike: f64,
    pub market_vol: f64,
    pub model_vol: Option<f64>,
}

impl RepricingRow {
    pub fn error(&self) -> Option<f64> {
        self.model_vol.map(|v| v - self.market_vol)
    }
}

/// Per-maturity results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaturityReport {
    pub maturity: f64,
    pub discrete_error: f64,
    pub iterations_used: usize,
    pub timings: StageTimings,
    pub repricing: Vec<RepricingRow>,
}

/// One row of the delta/gamma strike ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaGammaRow {
    pub strike_rel: f64,
    pub strike: f64,
    pub delta: f64,
    pub gamma: f64,
}

/// One constituent vega.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VegaRow {
    pub name: String,
    pub vega: f64,
}

/// Greeks tables of the report (shortest maturity, full index basket).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreeksTables {
    pub maturity: f64,
    pub ladder: Vec<DeltaGammaRow>,
    pub vegas: Vec<VegaRow>,
    pub spot_bump: f64,
    pub vega_bump: f64,
}

/// Full desk-run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub as_of: String,
    pub seed: u64,
    pub n_assets: usize,
    pub samples: usize,
    pub bins: usize,
    pub iterations: usize,
    pub maturities: Vec<MaturityReport>,
    pub greeks: Option<GreeksTables>,
    pub total_wall_seconds: f64,
}

/// Output format of [`render`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(crate::error::Error::Config(format!(
                "unknown report format `{other}`"
            ))),
        }
    }
}

/// Deterministic JSON rendering; parse + render round-trips byte-exactly.
pub fn to_json_string(report: &RunReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report serializes");
    s.push('\n');
    s
}

/// Parse a report back from its JSON rendering.
pub fn from_json_str(data: &str) -> Result<RunReport> {
    serde_json::from_str(data).map_err(|e| crate::error::Error::Parse(e.to_string()))
}

/// Markdown rendering with one market-vs-model table per maturity.
pub fn to_markdown_string(report: &RunReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "# Basket engine run ({} assets, as of {})\n\n",
        report.n_assets, report.as_of
    ));
    out.push_str(&format!(
        "seed {} | samples {} | bins {} | iterations {}\n\n",
        report.seed, report.samples, report.bins, report.iterations
    ));

    out.push_str("## Rearrangement quality\n\n");
    out.push_str("| maturity | discrete error | iterations | stage total (s) |\n");
    out.push_str("|---:|---:|---:|---:|\n");
    for m in &report.maturities {
        out.push_str(&format!(
            "| {} | {:.4}% | {} | {:.3} |\n",
            m.maturity,
            m.discrete_error * 100.0,
            m.iterations_used,
            m.timings.total()
        ));
    }
    out.push('\n');

    out.push_str("## Timing breakdown (s)\n\n");
    out.push_str(
        "| maturity | calibrate constituents | calibrate index | sampling | target | arranging |\n",
    );
    out.push_str("|---:|---:|---:|---:|---:|---:|\n");
    for m in &report.maturities {
        let t = &m.timings;
        out.push_str(&format!(
            "| {} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} |\n",
            m.maturity,
            t.calibrate_constituents,
            t.calibrate_index,
            t.sampling,
            t.target,
            t.arranging
        ));
    }
    out.push('\n');

    for m in &report.maturities {
        out.push_str(&format!("## Index repricing, T = {}\n\n", m.maturity));
        out.push_str("| moneyness | market vol | model vol | error (vol pts) |\n");
        out.push_str("|---:|---:|---:|---:|\n");
        for row in &m.repricing {
            match (row.model_vol, row.error()) {
                (Some(model), Some(err)) => out.push_str(&format!(
                    "| {} | {:.4} | {:.4} | {:+.3} |\n",
                    row.moneyness,
                    row.market_vol,
                    model,
                    err * 100.0
                )),
                _ => out.push_str(&format!(
                    "| {} | {:.4} | n/a | n/a |\n",
                    row.moneyness, row.market_vol
                )),
            }
        }
        out.push('\n');
    }

    match &report.greeks {
        Some(g) => {
            out.push_str(&format!("## Greeks, T = {} (full index)\n\n", g.maturity));
            out.push_str("| strike/spot | delta | gamma |\n|---:|---:|---:|\n");
            for row in &g.ladder {
                out.push_str(&format!(
                    "| {} | {:.4} | {:.3e} |\n",
                    row.strike_rel, row.delta, row.gamma
                ));
            }
            out.push_str("\n| constituent | vega |\n|---|---:|\n");
            for row in &g.vegas {
                out.push_str(&format!("| {} | {:.6} |\n", row.name, row.vega));
            }
            out.push('\n');
        }
        None => {
            out.push_str("## Greeks\n\nnot computed\n\n");
        }
    }

    out.push_str(&format!(
        "total wall time: {:.3} s\n",
        report.total_wall_seconds
    ));
    out
}

fn csv_escape(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Render the report into `out_dir`; returns the written file paths.
pub fn render(report: &RunReport, format: ReportFormat, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    match format {
        ReportFormat::Json => {
            let path = out_dir.join("report.json");
            std::fs::write(&path, to_json_string(report))?;
            written.push(path);
        }
        ReportFormat::Markdown => {
            let path = out_dir.join("report.md");
            std::fs::write(&path, to_markdown_string(report))?;
            written.push(path);
        }
        ReportFormat::Csv => {
            let mut summary =
                String::from("maturity,discrete_error,iterations,calibrate_constituents,calibrate_index,sampling,target,arranging\n");
            for m in &report.maturities {
                let t = &m.timings;
                summary.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    m.maturity,
                    m.discrete_error,
                    m.iterations_used,
                    t.calibrate_constituents,
                    t.calibrate_index,
                    t.sampling,
                    t.target,
                    t.arranging
                ));
            }
            let path = out_dir.join("summary.csv");
            std::fs::write(&path, summary)?;
            written.push(path);

            let mut repricing = String::from("maturity,moneyness,strike,market_vol,model_vol\n");
            for m in &report.maturities {
                for row in &m.repricing {
                    let model = row
                        .model_vol
                        .map(|v| v.to_string())
                        .unwrap_or_else(|| "n/a".to_string());
                    repricing.push_str(&format!(
                        "{},{},{},{},{model}\n",
                        m.maturity, row.moneyness, row.strike, row.market_vol
                    ));
                }
            }
            let path = out_dir.join("repricing.csv");
            std::fs::write(&path, repricing)?;
            written.push(path);

            let path = out_dir.join("greeks.csv");
            match &report.greeks {
                Some(g) => {
                    let mut greeks = String::from("table,key,delta_or_vega,gamma\n");
                    for row in &g.ladder {
                        greeks.push_str(&format!(
                            "ladder,{},{},{}\n",
                            row.strike_rel, row.delta, row.gamma
                        ));
                    }
                    for row in &g.vegas {
                        greeks.push_str(&format!(
                            "vega,{},{},\n",
                            csv_escape(&row.name),
                            row.vega
                        ));
                    }
                    std::fs::write(&path, greeks)?;
                }
                None => {
                    std::fs::write(&path, "not computed\n")?;
                }
            }
            written.push(path);
        }
    }
    Ok(written)
}
