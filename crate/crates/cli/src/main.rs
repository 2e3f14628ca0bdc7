//! `binlat`: fitting, score tests and simulation studies for binomial time
//! series with a latent Gaussian process.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod io;
mod output;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use binlat_core::glm::fit_glm;
use binlat_core::latent_test::{standard_latent_test, sup_latent_test};
use binlat_core::marginal::{fit_marginal_with, MarginalFit, MarginalOptions};
use binlat_core::numerics::{RandomSource, DEFAULT_NODES};
use binlat_core::serial_test::serial_dependence_test;
use binlat_core::simulation::{
    run_null_quantiles, run_power_curve, run_two_step_table, simulate_latent_null, simulate_series, DgpSpec,
    LatentScaling, LatentSpec, NullCell, NullQuantilesConfig, PowerConfig, TwoStepConfig,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use io::{read_csv, write_csv, DataError, Dataset};
use output::{f4, Report, Table};

const DEFAULT_SEED: u64 = 42;

#[derive(Parser, Debug)]
#[command(
    name = "binlat",
    version,
    about = "Score tests for latent processes in binomial time series"
)]
struct Cli {
    /// Print the JSON envelope instead of text tables.
    #[arg(long, global = true)]
    json: bool,

    /// Also write the JSON envelope to this file.
    #[arg(long, global = true, value_name = "PATH")]
    json_out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Logistic regression ignoring any latent process.
    FitGlm(FitGlmArgs),
    /// Marginal likelihood fit of (β, τ) with i.i.d. latent effects.
    FitMarginal(FitMarginalArgs),
    /// Standard and supremum score tests for a latent process.
    TestLatent(TestLatentArgs),
    /// Score test for serial dependence in the latent process.
    TestSerial(TestSerialArgs),
    /// Simulate a series and write it as CSV.
    Simulate(SimulateArgs),
    /// Theoretical and empirical null quantiles of the supremum test.
    Table1(Table1Args),
    /// Power of the standard and supremum tests.
    Power(PowerArgs),
    /// Simulated null tables for the two-step workflow on an observed series.
    TwoStepTable(TwoStepArgs),
}

#[derive(Args, Debug, Serialize)]
struct InputArgs {
    /// CSV with columns y, m and regressors.
    input: PathBuf,

    /// 0/1 responses: m_t = 1 when the file has no m column.
    #[arg(long)]
    binary: bool,
}

#[derive(Args, Debug, Serialize)]
struct SimArgs {
    /// Base seed [env: BINLAT_SEED, default 42].
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

impl SimArgs {
    fn seed(&self) -> Result<u64> {
        resolve_seed(self.seed)
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("BINLAT_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("BINLAT_SEED must be a nonnegative integer, got {v:?}")).into()),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

#[derive(Args, Debug, Serialize)]
struct FitGlmArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
}

#[derive(Args, Debug, Serialize)]
struct FitMarginalArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,

    /// Minimum number of quadrature nodes.
    #[arg(long, default_value_t = DEFAULT_NODES)]
    nodes: usize,
}

#[derive(Args, Debug, Serialize)]
struct TestLatentArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,

    /// Grid of ψ values as lo:hi:step.
    #[arg(long, default_value = "-0.9:0.9:0.1", value_parser = parse_grid, allow_hyphen_values = true)]
    grid: Grid,

    /// Also compute p-values from this many simulated null series.
    #[arg(long, value_name = "REPS")]
    simulated_null: Option<u32>,

    #[command(flatten)]
    #[serde(flatten)]
    sim: SimArgs,
}

#[derive(Args, Debug, Serialize)]
struct TestSerialArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,

    /// Number of lags L.
    #[arg(long, default_value_t = 2)]
    lags: usize,

    /// JSON written by `fit-marginal --json`; fitted inline when absent.
    #[arg(long, value_name = "PATH")]
    fit: Option<PathBuf>,

    /// Minimum number of quadrature nodes.
    #[arg(long, default_value_t = DEFAULT_NODES)]
    nodes: usize,
}

#[derive(Copy, Clone, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Scaling {
    /// Var(α_t) = τ.
    Marginal,
    /// α_t = √τ α̃_t with unit-variance innovations.
    Unit,
}

impl From<Scaling> for LatentScaling {
    fn from(s: Scaling) -> Self {
        match s {
            Scaling::Marginal => LatentScaling::MarginalVariance,
            Scaling::Unit => LatentScaling::UnitInnovation,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,

    /// Trials per time point.
    #[arg(long, default_value_t = 1)]
    m: u32,

    /// Regression coefficients for x_t = (1, t/n).
    #[arg(long, value_delimiter = ',', default_value = "1,2", allow_hyphen_values = true)]
    beta: Vec<f64>,

    /// Latent variance τ.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,

    /// Latent AR(1) coefficient.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    phi: f64,

    #[arg(long, value_enum, default_value_t = Scaling::Marginal)]
    scaling: Scaling,

    /// Base seed [env: BINLAT_SEED, default 42].
    #[arg(long)]
    seed: Option<u64>,

    /// Output CSV; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct Table1Args {
    /// Replicates per cell.
    #[arg(long, default_value_t = 10_000)]
    reps: u32,

    /// Cells as NxM, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "200x1,200x2,1000x1,1000x2", value_parser = parse_cell)]
    cells: Vec<Cell>,

    #[arg(long, default_value = "-0.9:0.9:0.1", value_parser = parse_grid, allow_hyphen_values = true)]
    grid: Grid,

    #[command(flatten)]
    #[serde(flatten)]
    sim: SimArgs,

    /// Write the table as CSV.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct PowerArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,

    #[arg(long, default_value_t = 1)]
    m: u32,

    #[arg(long, default_value_t = 0.9, allow_hyphen_values = true)]
    phi: f64,

    /// τ₀; alternatives are √τ = i·√τ₀ for i = 0, 0.1, …, 1.
    #[arg(long, default_value_t = 1.0)]
    tau0: f64,

    #[arg(long, value_enum, default_value_t = Scaling::Unit)]
    scaling: Scaling,

    #[arg(long, default_value_t = 10_000)]
    reps: u32,

    #[arg(long, default_value = "-0.9:0.9:0.1", value_parser = parse_grid, allow_hyphen_values = true)]
    grid: Grid,

    #[command(flatten)]
    #[serde(flatten)]
    sim: SimArgs,

    /// Write the power curves as CSV.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct TwoStepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,

    #[arg(long, default_value_t = 1000)]
    reps: u32,

    #[arg(long, default_value_t = 2)]
    lags: usize,

    #[arg(long, default_value = "-0.9:0.9:0.1", value_parser = parse_grid, allow_hyphen_values = true)]
    grid: Grid,

    #[arg(long, default_value_t = DEFAULT_NODES)]
    nodes: usize,

    #[command(flatten)]
    #[serde(flatten)]
    sim: SimArgs,

    /// Write the tables as CSV.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
}

/// ψ grid parsed from `lo:hi:step`.
#[derive(Clone, Debug, Serialize)]
#[serde(transparent)]
struct Grid(Vec<f64>);

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, step] = parts.as_slice() else {
        return Err(format!("expected lo:hi:step, got {s:?}"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("{t:?} is not a number"));
    let (lo, hi, step) = (num(lo)?, num(hi)?, num(step)?);
    if !(step > 0.0) || !(hi >= lo) {
        return Err("need step > 0 and hi ≥ lo".into());
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..count)
        .map(|k| ((lo + k as f64 * step) * 1e12).round() / 1e12)
        .collect();
    if grid.iter().any(|p| p.abs() >= 1.0) {
        return Err("grid values must satisfy |ψ| < 1".into());
    }
    Ok(Grid(grid))
}

#[derive(Clone, Copy, Debug, Serialize)]
struct Cell {
    n: usize,
    m: u32,
}

fn parse_cell(s: &str) -> std::result::Result<Cell, String> {
    let (n, m) = s.split_once('x').ok_or_else(|| format!("expected NxM, got {s:?}"))?;
    Ok(Cell {
        n: n.trim().parse().map_err(|_| format!("bad n in {s:?}"))?,
        m: m.trim().parse().map_err(|_| format!("bad m in {s:?}"))?,
    })
}

/// Invalid invocation; maps to exit status 1.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn config<T: Serialize>(command: &str, args: &T) -> Value {
    let mut v = serde_json::to_value(args).unwrap_or(Value::Null);
    if let Value::Object(map) = &mut v {
        map.insert("command".into(), Value::String(command.into()));
    }
    v
}

fn series_diagnostics(data: &Dataset) -> Value {
    let s = &data.series;
    json!({
        "n": s.n(),
        "r": s.r(),
        "max_trials": s.max_trials(),
        "regressors": data.names,
    })
}

fn coefficient_table(names: &[String], beta: &[f64], se: Option<&[f64]>) -> String {
    let mut t = Table::new(["coefficient", "estimate", "std. error"]);
    for (k, name) in names.iter().enumerate() {
        let s = se.and_then(|v| v.get(k)).copied().unwrap_or(f64::NAN);
        t.row([name.clone(), f4(beta[k]), f4(s)]);
    }
    t.render()
}

fn cmd_fit_glm(args: &FitGlmArgs) -> Result<Report> {
    let data = read_csv(&args.input.input, args.input.binary)?;
    let fit = fit_glm(&data.series)?;
    if !fit.converged {
        log::warn!("GLM fit did not converge (separated: {})", fit.separated);
    }
    let mut text = coefficient_table(&data.names, &fit.beta_hat, Some(&fit.std_errors));
    text.push_str(&format!(
        "\nlog-likelihood  {}\nconverged       {}\nseparated       {}\n",
        f4(fit.loglik),
        fit.converged,
        fit.separated
    ));
    Ok(Report {
        config: config("fit-glm", args),
        results: json!({
            "names": data.names,
            "beta_hat": fit.beta_hat,
            "std_errors": fit.std_errors,
            "loglik": fit.loglik,
            "converged": fit.converged,
            "separated": fit.separated,
            "iterations": fit.iterations,
        }),
        diagnostics: series_diagnostics(&data),
        seed: None,
        text,
    })
}

fn marginal_options(nodes: usize) -> Result<MarginalOptions> {
    if nodes < 2 {
        return Err(UsageError("--nodes must be at least 2".into()).into());
    }
    Ok(MarginalOptions {
        nodes,
        ..MarginalOptions::default()
    })
}

fn cmd_fit_marginal(args: &FitMarginalArgs) -> Result<Report> {
    let data = read_csv(&args.input.input, args.input.binary)?;
    let fit = fit_marginal_with(&data.series, &marginal_options(args.nodes)?)?;
    let r = data.series.r();
    let mut text = coefficient_table(&data.names, &fit.beta_hat, fit.std_errors.as_deref());
    let tau_se = fit
        .std_errors
        .as_ref()
        .and_then(|s| s.get(r))
        .copied()
        .unwrap_or(f64::NAN);
    text.push_str(&format!(
        "\ntau             {} (s.e. {})\npile-up         {}\nlog-likelihood  {}\nconverged       {}\n",
        f4(fit.tau_hat),
        f4(tau_se),
        fit.pile_up,
        f4(fit.loglik),
        fit.converged
    ));
    let mut results = serde_json::to_value(&fit)?;
    results["names"] = json!(data.names);
    Ok(Report {
        config: config("fit-marginal", args),
        results,
        diagnostics: series_diagnostics(&data),
        seed: None,
        text,
    })
}

fn cmd_test_latent(args: &TestLatentArgs) -> Result<Report> {
    let data = read_csv(&args.input.input, args.input.binary)?;
    let series = &data.series;
    let fit = fit_glm(series)?;
    let standard = standard_latent_test(series, &fit)?;
    let sup = sup_latent_test(series, &fit, &args.grid.0)?;
    let mut results = json!({
        "statistic": sup.statistic,
        "argmax_psi": sup.argmax_psi,
        "p_value_davies": sup.p_value_davies,
        "standard": standard,
        "sup": sup,
        "beta_glm": fit.beta_hat,
    });
    let mut t = Table::new(["test", "statistic", "p-value", "reference"]);
    t.row([
        "standard".into(),
        f4(standard.statistic),
        f4(standard.p_value),
        "chi2(1)".to_string(),
    ]);
    t.row([
        "supremum".into(),
        f4(sup.statistic),
        f4(sup.p_value_davies),
        "Davies bound".to_string(),
    ]);
    let mut seed = None;
    if let Some(reps) = args.simulated_null {
        let s = args.sim.seed()?;
        seed = Some(s);
        let sim_null = simulate_latent_null(&series.design(), &fit.beta_hat, &args.grid.0, reps, s, args.sim.workers)?;
        let (p_sup, p_std) = sim_null.p_values(sup.statistic, standard.statistic);
        t.row([
            "standard".into(),
            f4(standard.statistic),
            f4(p_std),
            format!("simulated ({reps})"),
        ]);
        t.row([
            "supremum".into(),
            f4(sup.statistic),
            f4(p_sup),
            format!("simulated ({reps})"),
        ]);
        results["simulated_null"] = json!({
            "reps": reps,
            "reps_used": sim_null.sup.len(),
            "failures": sim_null.failures,
            "p_value_sup": p_sup,
            "p_value_standard": p_std,
        });
    }
    let mut text = t.render();
    text.push_str(&format!("\nargmax psi  {}\n", f4(sup.argmax_psi)));
    if !sup.dropped.is_empty() {
        text.push_str(&format!("dropped psi {:?} (degenerate variance)\n", sup.dropped));
    }
    Ok(Report {
        config: config("test-latent", args),
        results,
        diagnostics: series_diagnostics(&data),
        seed,
        text,
    })
}

fn load_fit(path: &Path, n: usize) -> Result<MarginalFit> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| DataError(format!("{}: {e}", path.display())))?;
    let results = v.get("results").cloned().unwrap_or(v);
    let fit: MarginalFit = serde_json::from_value(results)
        .map_err(|e| DataError(format!("{} is not a marginal fit: {e}", path.display())))?;
    if fit.u.len() != n {
        return Err(DataError(format!(
            "{} was fitted to {} observations, the series has {n}",
            path.display(),
            fit.u.len()
        ))
        .into());
    }
    Ok(fit)
}

fn cmd_test_serial(args: &TestSerialArgs) -> Result<Report> {
    let data = read_csv(&args.input.input, args.input.binary)?;
    let series = &data.series;
    let fit = match &args.fit {
        Some(path) => load_fit(path, series.n())?,
        None => fit_marginal_with(series, &marginal_options(args.nodes)?)?,
    };
    let result = serial_dependence_test(series, &fit, args.lags).map_err(|e| {
        let diagnosis = if fit.pile_up {
            format!(
                "marginal fit piled up: tau_hat = 0 with log-likelihood {:.4} (the GLM fit); \
                 there is no latent variance to test for serial dependence",
                fit.loglik
            )
        } else {
            format!("marginal fit tau_hat = {:.4}", fit.tau_hat)
        };
        anyhow!(e).context(diagnosis)
    })?;
    let mut t = Table::new(["lag", "score", "omega"]);
    for a in 0..result.lags {
        t.row([(a + 1).to_string(), f4(result.scores[a]), f4(result.omegas[a])]);
    }
    let mut text = t.render();
    text.push_str(&format!(
        "\nQ({})        {}\np-value     {} (chi2({}))\ntau_hat     {}\n",
        result.lags,
        f4(result.statistic),
        f4(result.p_value),
        result.lags,
        f4(fit.tau_hat)
    ));
    Ok(Report {
        config: config("test-serial", args),
        results: json!({
            "statistic": result.statistic,
            "df": result.lags,
            "p_value": result.p_value,
            "method": "chi2",
            "scores": result.scores,
            "omegas": result.omegas,
            "tau_hat": fit.tau_hat,
            "beta_hat": fit.beta_hat,
        }),
        diagnostics: series_diagnostics(&data),
        seed: None,
        text,
    })
}

fn cmd_simulate(args: &SimulateArgs) -> Result<Report> {
    let seed = resolve_seed(args.seed)?;
    let latent = LatentSpec {
        tau: args.tau,
        phi: args.phi,
        scaling: args.scaling.into(),
    };
    let spec = DgpSpec::linear_trend(args.n, args.m, args.beta.clone(), latent, seed);
    spec.validate().map_err(|e| UsageError(e.to_string()))?;
    let series = simulate_series(&spec, &RandomSource::new(seed, 0))?;
    let data = Dataset {
        series,
        names: vec![io::INTERCEPT.into(), "x1".into()],
        implicit_intercept: true,
    };
    let mut buf = Vec::new();
    write_csv(&data, &mut buf)?;
    let text = match &args.output {
        Some(path) => {
            fs::write(path, &buf).with_context(|| format!("cannot write {}", path.display()))?;
            format!("wrote {} observations to {}\n", data.series.n(), path.display())
        }
        None => String::from_utf8(buf)?,
    };
    Ok(Report {
        config: config("simulate", args),
        results: json!({ "n": data.series.n(), "output": args.output }),
        diagnostics: Value::Null,
        seed: Some(seed),
        text,
    })
}

fn write_text(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| anyhow!("{e}"))?)?)
}

fn cmd_table1(args: &Table1Args) -> Result<Report> {
    let seed = args.sim.seed()?;
    let config_core = NullQuantilesConfig {
        cells: args.cells.iter().map(|c| NullCell { n: c.n, m: c.m }).collect(),
        reps: args.reps,
        grid: args.grid.0.clone(),
        seed,
        workers: args.sim.workers,
        ..NullQuantilesConfig::default()
    };
    let report = run_null_quantiles(&config_core).map_err(usage_if_config)?;
    let mut t = Table::new(["n", "m", "level", "davies", "empirical sup", "empirical standard"]);
    let mut rows = Vec::new();
    for c in &report.results {
        for (k, level) in c.levels.iter().enumerate() {
            t.row([
                c.n.to_string(),
                c.m.to_string(),
                format!("{level}"),
                f4(c.theoretical[k]),
                f4(c.empirical_sup[k]),
                f4(c.empirical_standard[k]),
            ]);
            rows.push(vec![
                c.n.to_string(),
                c.m.to_string(),
                level.to_string(),
                c.theoretical[k].to_string(),
                c.empirical_sup[k].to_string(),
                c.empirical_standard[k].to_string(),
                c.level_se[k].to_string(),
            ]);
        }
    }
    if let Some(path) = &args.csv {
        let header = [
            "n",
            "m",
            "level",
            "davies",
            "empirical_sup",
            "empirical_standard",
            "level_se",
        ];
        write_text(path, &csv_string(&header, &rows)?)?;
    }
    let flagged: Vec<Value> = report
        .results
        .iter()
        .map(|c| json!({"n": c.n, "m": c.m, "failures": c.failures, "flagged": c.flagged}))
        .collect();
    Ok(Report {
        config: config("table1", args),
        results: serde_json::to_value(&report.results)?,
        diagnostics: json!({ "wall_time_secs": report.wall_time_secs, "cells": flagged }),
        seed: Some(seed),
        text: t.render(),
    })
}

fn cmd_power(args: &PowerArgs) -> Result<Report> {
    let seed = args.sim.seed()?;
    let config_core = PowerConfig {
        n: args.n,
        m: args.m,
        phi: args.phi,
        tau0: args.tau0,
        scaling: args.scaling.into(),
        reps: args.reps,
        grid: args.grid.0.clone(),
        seed,
        workers: args.sim.workers,
        ..PowerConfig::default()
    };
    let report = run_power_curve(&config_core).map_err(usage_if_config)?;
    let curve = &report.results;
    let mut t = Table::new([
        "factor",
        "tau",
        "power sup",
        "power standard",
        "s.e. sup",
        "s.e. standard",
    ]);
    let mut rows = Vec::new();
    for p in &curve.points {
        t.row([
            format!("{:.1}", p.factor),
            f4(p.tau),
            f4(p.power_sup),
            f4(p.power_standard),
            f4(p.se_sup),
            f4(p.se_standard),
        ]);
        rows.push(
            [p.factor, p.tau, p.power_sup, p.power_standard, p.se_sup, p.se_standard]
                .iter()
                .map(|v| v.to_string())
                .collect(),
        );
    }
    if let Some(path) = &args.csv {
        let header = ["factor", "tau", "power_sup", "power_standard", "se_sup", "se_standard"];
        write_text(path, &csv_string(&header, &rows)?)?;
    }
    let mut text = t.render();
    text.push_str(&format!(
        "\ncritical values: sup {}, standard {}\n",
        f4(curve.critical_sup),
        f4(curve.critical_standard)
    ));
    Ok(Report {
        config: config("power", args),
        results: serde_json::to_value(curve)?,
        diagnostics: json!({ "wall_time_secs": report.wall_time_secs, "null_failures": curve.null_failures }),
        seed: Some(seed),
        text,
    })
}

fn cmd_two_step(args: &TwoStepArgs) -> Result<Report> {
    let seed = args.sim.seed()?;
    let data = read_csv(&args.input.input, args.input.binary)?;
    let config_core = TwoStepConfig {
        reps: args.reps,
        grid: args.grid.0.clone(),
        lags: args.lags,
        nodes: args.nodes,
        seed,
        workers: args.sim.workers,
        ..TwoStepConfig::default()
    };
    let report = run_two_step_table(&data.series, &config_core).map_err(usage_if_config)?;
    let tab = &report.results;
    let mut header = vec!["test".to_string()];
    header.extend(tab.levels.iter().map(|l| format!("{}%", l * 100.0)));
    header.push("observed".into());
    let mut t = Table::new(header.clone());
    let mark = |obs: f64, exceeds: &[bool]| {
        let star = if exceeds.get(2).copied().unwrap_or(false) {
            "*"
        } else {
            ""
        };
        format!("{}{star}", f4(obs))
    };
    let one = &tab.step_one;
    let two = &tab.step_two;
    let lines: Vec<(String, &[f64], String, Option<f64>)> = vec![
        (
            "latent (sup)".into(),
            &one.quantiles_sup,
            mark(one.observed_sup, &one.sup_exceeds),
            Some(one.observed_sup),
        ),
        (
            "latent (standard)".into(),
            &one.quantiles_standard,
            mark(one.observed_standard, &one.standard_exceeds),
            Some(one.observed_standard),
        ),
        (
            format!("serial (L = {})", args.lags),
            &two.quantiles,
            two.observed
                .map_or_else(|| "pile-up".to_string(), |o| mark(o, &two.exceeds)),
            two.observed,
        ),
    ];
    let mut rows = Vec::new();
    for (name, q, obs, raw) in &lines {
        let mut cells = vec![name.clone()];
        cells.extend(q.iter().map(|v| f4(*v)));
        cells.push(obs.clone());
        t.row(cells);
        let mut r = vec![name.clone()];
        r.extend(q.iter().map(|v| v.to_string()));
        r.push(raw.map_or_else(String::new, |v| v.to_string()));
        rows.push(r);
    }
    if let Some(path) = &args.csv {
        let h: Vec<&str> = header.iter().map(String::as_str).collect();
        write_text(path, &csv_string(&h, &rows)?)?;
    }
    let mut text = t.render();
    text.push_str(&format!(
        "\n* exceeds the simulated 5% quantile. Davies p-value (sup) {}.\n",
        f4(one.davies_p_value)
    ));
    Ok(Report {
        config: config("two-step-table", args),
        results: serde_json::to_value(tab)?,
        diagnostics: json!({
            "wall_time_secs": report.wall_time_secs,
            "step_one_failures": one.failures,
            "step_two_failures": two.failures,
            "step_two_pile_ups": two.pile_ups,
        }),
        seed: Some(seed),
        text,
    })
}

/// Core configuration errors are the caller's fault.
fn usage_if_config(e: binlat_core::Error) -> anyhow::Error {
    match e {
        binlat_core::Error::InvalidConfig(msg) => UsageError(msg).into(),
        other => other.into(),
    }
}

fn run(cli: &Cli) -> Result<Report> {
    match &cli.command {
        Command::FitGlm(a) => cmd_fit_glm(a),
        Command::FitMarginal(a) => cmd_fit_marginal(a),
        Command::TestLatent(a) => cmd_test_latent(a),
        Command::TestSerial(a) => cmd_test_serial(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Table1(a) => cmd_table1(a),
        Command::Power(a) => cmd_power(a),
        Command::TwoStepTable(a) => cmd_two_step(a),
    }
}

/// 1 usage, 2 data, 3 statistical degeneracy (pile-up, degenerate variance).
fn exit_status(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<binlat_core::Error>() {
            return if e.is_statistical_degeneracy() {
                3
            } else if matches!(e, binlat_core::Error::InvalidConfig(_)) {
                1
            } else {
                2
            };
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(report) => {
            if let Some(path) = &cli.json_out {
                if let Err(e) = write_text(path, &report.to_json()) {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(2);
                }
            }
            if cli.json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.text);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_status(&e))
        }
    }
}
