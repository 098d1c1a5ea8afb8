//! Command-line front end: configuration, the solve pipeline, and the
//! plot-ready reports it writes.

mod config;
mod pipeline;
mod validate;

use std::ffi::OsString;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

pub use config::{parse_number, Grid, RunConfig, KEYS};
pub use pipeline::{Model, WaitSummary, WaitingTimes};
pub use validate::{
    run_checks, Check, SimSummary, ValidationOutcome, BUY_LEVEL_PERTURBATION, KS_LIMIT, SE_WINDOW,
};

use crate::stopping::ValueFunction;

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "HOMESTOP_OUTPUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure in stage '{stage}': {source}")]
    Numerical {
        stage: &'static str,
        source: crate::Error,
    },
    #[error("validation failed: {}", .0.join(", "))]
    Validation(Vec<String>),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical { .. } | CliError::Io(_) => 3,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(io::Error::other(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DensityKind {
    Buy,
    Sell,
    Total,
}

#[derive(Debug, Parser)]
#[command(
    name = "homestop",
    version,
    about = "Optimal home buying and selling thresholds under CIR rates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve both thresholds and write curves, densities, and expectations.
    Solve { config: PathBuf },
    /// Cross-check the solution against Monte Carlo simulation.
    Validate { config: PathBuf },
    /// Write one waiting-time density.
    Density {
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: DensityKind,
    },
    /// Threshold sensitivity to one parameter.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long)]
        steps: usize,
    },
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|&x| fmt_f(x)))?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Output directory after the environment override.
pub fn output_dir(config: &RunConfig) -> PathBuf {
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => config.output_dir.clone(),
    }
}

fn prepare_dir(config: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = output_dir(config);
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn numerical<T>(stage: &'static str, r: crate::Result<T>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Numerical { stage, source })
}

fn value_rows(vf: &ValueFunction, rates: &[f64]) -> Result<Vec<Vec<f64>>, CliError> {
    let stage = "value curves";
    rates
        .iter()
        .map(|&r| {
            Ok(vec![
                r,
                numerical(stage, vf.evaluate(r))?,
                numerical(stage, vf.payoff().value(r))?,
            ])
        })
        .collect()
}

/// (q, h, ĥ) at q = g(r) for each grid rate.
fn h_rows(vf: &ValueFunction, rates: &[f64]) -> Result<Vec<Vec<f64>>, CliError> {
    let stage = "h curves";
    let pair = vf.pair();
    rates
        .iter()
        .map(|&r| {
            let v = numerical(stage, pair.eval(r))?;
            let q = v.g();
            let h = numerical(stage, vf.payoff().value(r))? / v.u_plus;
            let hat = if vf.continuation(r) {
                numerical(stage, vf.ncm(q))?
            } else {
                h
            };
            Ok(vec![q, h, hat])
        })
        .collect()
}

fn density_rows(waits: &WaitingTimes, kind: DensityKind, times: &[f64]) -> Vec<Vec<f64>> {
    let total = waits.total();
    times
        .iter()
        .map(|&t| {
            let p = match kind {
                DensityKind::Buy => waits.buy.evaluate(t),
                DensityKind::Sell => waits.sell.evaluate(t),
                DensityKind::Total => total.evaluate(t),
            };
            vec![t, p]
        })
        .collect()
}

fn density_file(kind: DensityKind) -> &'static str {
    match kind {
        DensityKind::Buy => "density_buy.csv",
        DensityKind::Sell => "density_sell.csv",
        DensityKind::Total => "density_total.csv",
    }
}

/// Summary written to thresholds.json.
pub fn thresholds_report(model: &Model) -> Result<serde_json::Value, CliError> {
    let (sell_l, sell_r) = numerical("smooth fit", model.sell.one_sided_derivs_at_threshold())?;
    let (buy_l, buy_r) = numerical("smooth fit", model.buy.one_sided_derivs_at_threshold())?;
    let (hb, hs) = model.hitting_levels();
    Ok(json!({
        "r_s": model.r_sell(),
        "r_b": model.r_buy(),
        "q_s": model.sell.threshold.q_star,
        "q_b": model.buy.threshold.q_star,
        "sell": model.sell.threshold,
        "buy": model.buy.threshold,
        "smooth_fit": {
            "sell": { "left": sell_l, "right": sell_r },
            "buy": { "left": buy_l, "right": buy_r },
        },
        "value_buy_at_r0": model.strategy_value()?,
        "hitting_levels": { "buy": hb, "sell": hs },
        "config": model.config,
    }))
}

/// Summary written to expectations.json.
pub fn expectations_report(
    model: &Model,
    waits: &WaitingTimes,
) -> Result<serde_json::Value, CliError> {
    let exact = model.waiting_times(model.r_buy(), model.r_sell())?;
    Ok(json!({
        "n_terms": model.config.n_terms,
        "hitting_levels": waits.summary(),
        "exact_levels": exact.summary(),
        "config": model.config,
    }))
}

/// `solve`: every curve and summary for one configuration.
pub fn run_solve(config: &RunConfig) -> Result<Model, CliError> {
    let dir = prepare_dir(config)?;
    let model = Model::solve(config)?;
    write_json(&dir.join("thresholds.json"), &thresholds_report(&model)?)?;
    let rates = config.grid.linear();
    write_csv(
        &dir.join("value_sell.csv"),
        &["r", "J", "f"],
        &value_rows(&model.sell, &rates)?,
    )?;
    write_csv(
        &dir.join("value_buy.csv"),
        &["r", "J", "f"],
        &value_rows(&model.buy, &rates)?,
    )?;
    write_csv(
        &dir.join("h_sell.csv"),
        &["q", "h", "h_hat"],
        &h_rows(&model.sell, &rates)?,
    )?;
    write_csv(
        &dir.join("h_buy.csv"),
        &["q", "h", "h_hat"],
        &h_rows(&model.buy, &rates)?,
    )?;
    let waits = model.default_waiting_times()?;
    let times = config.t_grid.linear();
    for kind in [DensityKind::Buy, DensityKind::Sell, DensityKind::Total] {
        write_csv(
            &dir.join(density_file(kind)),
            &["t", "p"],
            &density_rows(&waits, kind, &times),
        )?;
    }
    write_json(
        &dir.join("expectations.json"),
        &expectations_report(&model, &waits)?,
    )?;
    Ok(model)
}

/// `density`: a single density file.
pub fn run_density(config: &RunConfig, kind: DensityKind) -> Result<PathBuf, CliError> {
    let dir = prepare_dir(config)?;
    let model = Model::solve(config)?;
    let waits = model.default_waiting_times()?;
    let path = dir.join(density_file(kind));
    write_csv(
        &path,
        &["t", "p"],
        &density_rows(&waits, kind, &config.t_grid.linear()),
    )?;
    Ok(path)
}

/// `validate`: Monte Carlo checks, or an explicit skip when no simulation
/// settings are configured.
pub fn run_validate(config: &RunConfig) -> Result<Option<ValidationOutcome>, CliError> {
    let dir = prepare_dir(config)?;
    let path = dir.join("validation.json");
    let Some(sim) = config.mc else {
        config.validate()?;
        write_json(
            &path,
            &json!({ "status": "skipped", "reason": "no mc_* settings in the configuration", "config": config }),
        )?;
        return Ok(None);
    };
    let model = Model::solve(config)?;
    let outcome = run_checks(&model, &sim)?;
    let failed = outcome.failed();
    let status = if failed.is_empty() {
        "passed"
    } else {
        "failed"
    };
    write_json(
        &path,
        &json!({ "status": status, "failed": failed, "checks": outcome.checks,
                 "simulations": outcome.simulations, "config": config }),
    )?;
    if failed.is_empty() {
        Ok(Some(outcome))
    } else {
        Err(CliError::Validation(failed))
    }
}

/// `sweep`: thresholds as one parameter moves across a linear range.
pub fn run_sweep(
    config: &RunConfig,
    param: &str,
    from: f64,
    to: f64,
    steps: usize,
) -> Result<PathBuf, CliError> {
    if steps < 2 {
        return Err(CliError::Config("sweep needs at least 2 steps".into()));
    }
    if param == "output_dir" || !KEYS.contains(&param) {
        return Err(CliError::Config(format!("cannot sweep '{param}'")));
    }
    let dir = prepare_dir(config)?;
    let path = dir.join(format!("sweep_{param}.csv"));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([param, "r_s", "r_b", "status"])?;
    let grid = Grid {
        min: from,
        max: to,
        points: steps,
    };
    for x in grid.linear() {
        let mut cfg = config.clone();
        cfg.set(param, &fmt_f(x))?;
        let (rs, rb, status) = match Model::solve(&cfg) {
            Ok(m) => (fmt_f(m.r_sell()), fmt_f(m.r_buy()), "ok".to_string()),
            Err(e) => (String::new(), String::new(), e.to_string()),
        };
        w.write_record([fmt_f(x), rs, rb, status])?;
    }
    w.flush()?;
    Ok(path)
}

fn load(path: &Path) -> Result<RunConfig, CliError> {
    let cfg = RunConfig::load(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Solve { config } => {
            let cfg = load(&config)?;
            let m = run_solve(&cfg)?;
            println!(
                "r_s = {:.6}  r_b = {:.6}  ({})",
                m.r_sell(),
                m.r_buy(),
                output_dir(&cfg).display()
            );
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            match run_validate(&cfg)? {
                Some(out) => println!("{} checks passed", out.checks.len()),
                None => println!("validation skipped: no Monte Carlo settings"),
            }
        }
        Command::Density { config, kind } => {
            let path = run_density(&load(&config)?, kind)?;
            println!("{}", path.display());
        }
        Command::Sweep {
            config,
            param,
            from,
            to,
            steps,
        } => {
            let path = run_sweep(&load(&config)?, &param, from, to, steps)?;
            println!("{}", path.display());
        }
    }
    Ok(())
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
