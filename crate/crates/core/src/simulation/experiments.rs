use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::fit_glm;
use crate::glm::info_matrices;
use crate::latent_test::{default_grid, standard_latent_test, sup_latent_test, DaviesBound};
use crate::marginal::{fit_marginal_with, MarginalOptions};
use crate::model::{conditional_moments, Design, ObservationSeries};
use crate::numerics::{chi2_quantile, sorted_quantile, RandomSource};
use crate::serial_test::serial_dependence_test;

use super::dgp::{simulate_on_design, LatentScaling, LatentSpec};

/// Failure share above which a cell is flagged.
const FAILURE_FLAG: f64 = 0.01;

/// Any experiment's output: the configuration it ran with, its results and
/// the wall time (kept out of the results so they stay reproducible).
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport<C, R> {
    pub config: C,
    pub results: R,
    pub wall_time_secs: f64,
}

/// Runs `f` for replicates `0..reps` on `workers` threads, keeping replicate
/// order. `workers = 0` uses every available core.
pub fn run_replicates<T, F>(reps: u32, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u32) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| (0..reps).into_par_iter().map(&f).collect()))
}

/// Monte Carlo standard error of a proportion.
pub fn proportion_se(p: f64, reps: usize) -> f64 {
    if reps == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / reps as f64).sqrt()
}

fn upper_quantiles(values: &mut [f64], levels: &[f64]) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    levels.iter().map(|a| sorted_quantile(values, 1.0 - a)).collect()
}

fn exceedance(values: &[f64], threshold: f64) -> f64 {
    values.iter().filter(|v| **v > threshold).count() as f64 / values.len() as f64
}

fn check_common(reps: u32, grid: &[f64], levels: &[f64]) -> Result<()> {
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if let Some(p) = grid.iter().find(|p| !(p.abs() < 1.0)) {
        return Err(Error::InvalidConfig(format!(
            "grid values must lie in (-1, 1), got {p}"
        )));
    }
    if let Some(a) = levels.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::InvalidConfig(format!("levels must lie in (0, 1), got {a}")));
    }
    Ok(())
}

fn default_levels() -> Vec<f64> {
    vec![0.10, 0.05, 0.025, 0.01]
}

/// Standard and supremum statistics for one series under the GLM null fit.
fn step_one_statistics(series: &ObservationSeries, grid: &[f64]) -> Result<(f64, f64)> {
    let fit = fit_glm(series)?;
    let sup = sup_latent_test(series, &fit, grid)?;
    let std = standard_latent_test(series, &fit)?;
    Ok((sup.statistic, std.statistic))
}

fn split_failures<T>(outcomes: Vec<Result<T>>) -> (Vec<T>, usize) {
    let mut ok = Vec::with_capacity(outcomes.len());
    let mut failed = 0;
    for o in outcomes {
        match o {
            Ok(v) => ok.push(v),
            Err(e) => {
                log::debug!("replicate excluded: {e}");
                failed += 1;
            }
        }
    }
    (ok, failed)
}

/// Null draws of the supremum and standard statistics, in replicate order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedLatentNull {
    pub sup: Vec<f64>,
    pub standard: Vec<f64>,
    /// Replicates whose GLM fit or test failed (excluded).
    pub failures: usize,
}

impl SimulatedLatentNull {
    /// Shares of null draws at or above the observed `(sup, standard)`.
    pub fn p_values(&self, sup: f64, standard: f64) -> (f64, f64) {
        let share = |v: &[f64], x: f64| v.iter().filter(|s| **s >= x).count() as f64 / v.len() as f64;
        (share(&self.sup, sup), share(&self.standard, standard))
    }
}

/// Simulates `Y_t ~ B(m_t, ḃ(x_tᵀβ))` on `design` and recomputes both
/// latent-process statistics, replicate `k` drawing from stream `(seed, 0, k)`.
pub fn simulate_latent_null(
    design: &Design,
    beta: &[f64],
    grid: &[f64],
    reps: u32,
    seed: u64,
    workers: usize,
) -> Result<SimulatedLatentNull> {
    check_common(reps, grid, &[0.05])?;
    let none = LatentSpec::none();
    let outcomes = run_replicates(reps, workers, |rep| {
        let rs = RandomSource::for_replicate(seed, 0, rep);
        let sim = simulate_on_design(design, beta, &none, &rs)?;
        step_one_statistics(&sim, grid)
    })?;
    let (stats, failures) = split_failures(outcomes);
    if stats.is_empty() {
        return Err(Error::NumericalInconsistency("every null replicate failed".into()));
    }
    let (sup, standard) = stats.into_iter().unzip();
    Ok(SimulatedLatentNull {
        sup,
        standard,
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullCell {
    pub n: usize,
    pub m: u32,
}

/// Null distribution of the supremum statistic on the linear-trend design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullQuantilesConfig {
    pub cells: Vec<NullCell>,
    pub reps: u32,
    pub grid: Vec<f64>,
    pub beta: Vec<f64>,
    /// Upper-tail probabilities of the reported quantiles.
    pub levels: Vec<f64>,
    pub seed: u64,
    pub workers: usize,
}

impl Default for NullQuantilesConfig {
    fn default() -> Self {
        Self {
            cells: [(200, 1), (200, 2), (1000, 1), (1000, 2)]
                .into_iter()
                .map(|(n, m)| NullCell { n, m })
                .collect(),
            reps: 10_000,
            grid: default_grid(),
            beta: vec![1.0, 2.0],
            levels: default_levels(),
            seed: 42,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullQuantilesCell {
    pub n: usize,
    pub m: u32,
    pub levels: Vec<f64>,
    /// Davies-bound quantiles at the true β on the design.
    pub theoretical: Vec<f64>,
    /// Empirical quantiles of the supremum statistic.
    pub empirical_sup: Vec<f64>,
    /// Empirical quantiles of the standard statistic.
    pub empirical_standard: Vec<f64>,
    /// Monte Carlo s.e. of the exceedance probability at each level.
    pub level_se: Vec<f64>,
    /// Share of standard statistics above the χ²(1) 5% critical value.
    pub standard_rejection_chi2: f64,
    /// Share of supremum statistics above the Davies 5% quantile.
    pub sup_rejection_davies: f64,
    pub rejection_se: f64,
    pub reps_used: usize,
    pub failures: usize,
    pub flagged: bool,
}

/// Davies-bound quantiles of the supremum statistic at `beta` on `design`.
pub fn theoretical_quantiles(design: &Design, beta: &[f64], grid: &[f64], levels: &[f64]) -> Result<Vec<f64>> {
    let series = design.with_responses(vec![0; design.n()])?;
    let sigma2 = conditional_moments(&series, beta)?.sigma2;
    let v1 = info_matrices(&series, beta)?.v_n1()?;
    let bound = DaviesBound::from_moments(&sigma2, v1, grid)?;
    levels.iter().map(|a| bound.quantile(*a, grid)).collect()
}

pub fn run_null_quantiles(
    config: &NullQuantilesConfig,
) -> Result<ExperimentReport<NullQuantilesConfig, Vec<NullQuantilesCell>>> {
    check_common(config.reps, &config.grid, &config.levels)?;
    let start = Instant::now();
    let mut cells = Vec::with_capacity(config.cells.len());
    for (idx, cell) in config.cells.iter().enumerate() {
        let design = Design::linear_trend(cell.n, cell.m)?;
        let theoretical = theoretical_quantiles(&design, &config.beta, &config.grid, &config.levels)?;
        let davies_5 = theoretical_quantiles(&design, &config.beta, &config.grid, &[0.05])?[0];
        let none = LatentSpec::none();
        let outcomes = run_replicates(config.reps, config.workers, |rep| {
            let rs = RandomSource::for_replicate(config.seed, idx as u32, rep);
            let series = simulate_on_design(&design, &config.beta, &none, &rs)?;
            step_one_statistics(&series, &config.grid)
        })?;
        let (stats, failures) = split_failures(outcomes);
        if stats.is_empty() {
            return Err(Error::NumericalInconsistency(format!(
                "every replicate failed in cell n = {}, m = {}",
                cell.n, cell.m
            )));
        }
        let (mut sup, mut std): (Vec<f64>, Vec<f64>) = stats.into_iter().unzip();
        let used = sup.len();
        let standard_rejection_chi2 = exceedance(&std, chi2_quantile(0.05, 1)?);
        let sup_rejection_davies = exceedance(&sup, davies_5);
        cells.push(NullQuantilesCell {
            n: cell.n,
            m: cell.m,
            levels: config.levels.clone(),
            theoretical,
            empirical_sup: upper_quantiles(&mut sup, &config.levels),
            empirical_standard: upper_quantiles(&mut std, &config.levels),
            level_se: config.levels.iter().map(|a| proportion_se(*a, used)).collect(),
            standard_rejection_chi2,
            sup_rejection_davies,
            rejection_se: proportion_se(0.05, used),
            reps_used: used,
            failures,
            flagged: failures as f64 > FAILURE_FLAG * f64::from(config.reps),
        });
    }
    Ok(ExperimentReport {
        config: config.clone(),
        results: cells,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Power of the standard and supremum tests against `√τ = i·√τ₀` for a
/// sequence of factors `i`, sized at the empirical 95% null quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerConfig {
    pub n: usize,
    pub m: u32,
    pub phi: f64,
    pub tau0: f64,
    pub factors: Vec<f64>,
    pub scaling: LatentScaling,
    pub reps: u32,
    pub grid: Vec<f64>,
    pub beta: Vec<f64>,
    pub seed: u64,
    pub workers: usize,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            n: 200,
            m: 1,
            phi: 0.9,
            tau0: 1.0,
            factors: (0..=10).map(|k| f64::from(k) / 10.0).collect(),
            scaling: LatentScaling::UnitInnovation,
            reps: 10_000,
            grid: default_grid(),
            beta: vec![1.0, 2.0],
            seed: 42,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerPoint {
    pub factor: f64,
    pub tau: f64,
    pub power_sup: f64,
    pub power_standard: f64,
    pub se_sup: f64,
    pub se_standard: f64,
    pub reps_used: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerCurve {
    /// Empirical 95% null quantiles used as critical values.
    pub critical_sup: f64,
    pub critical_standard: f64,
    pub null_failures: usize,
    pub points: Vec<PowerPoint>,
}

pub fn run_power_curve(config: &PowerConfig) -> Result<ExperimentReport<PowerConfig, PowerCurve>> {
    check_common(config.reps, &config.grid, &[0.05])?;
    if !(config.tau0 >= 0.0) || config.factors.iter().any(|f| !(*f >= 0.0)) {
        return Err(Error::InvalidConfig("τ₀ and power factors must be nonnegative".into()));
    }
    let start = Instant::now();
    let design = Design::linear_trend(config.n, config.m)?;
    let simulate_cell = |cell: u32, latent: LatentSpec| -> Result<(Vec<(f64, f64)>, usize)> {
        latent.validate()?;
        let outcomes = run_replicates(config.reps, config.workers, |rep| {
            let rs = RandomSource::for_replicate(config.seed, cell, rep);
            let series = simulate_on_design(&design, &config.beta, &latent, &rs)?;
            step_one_statistics(&series, &config.grid)
        })?;
        let (stats, failures) = split_failures(outcomes);
        if stats.is_empty() {
            return Err(Error::NumericalInconsistency("every replicate failed".into()));
        }
        Ok((stats, failures))
    };

    let (null, null_failures) = simulate_cell(0, LatentSpec::none())?;
    let (mut sup, mut std): (Vec<f64>, Vec<f64>) = null.into_iter().unzip();
    let critical_sup = upper_quantiles(&mut sup, &[0.05])[0];
    let critical_standard = upper_quantiles(&mut std, &[0.05])[0];

    let mut points = Vec::with_capacity(config.factors.len());
    for (k, &factor) in config.factors.iter().enumerate() {
        let tau = factor * factor * config.tau0;
        let latent = LatentSpec {
            tau,
            phi: config.phi,
            scaling: config.scaling,
        };
        let (stats, failures) = simulate_cell(k as u32 + 1, latent)?;
        let used = stats.len();
        let (sup, std): (Vec<f64>, Vec<f64>) = stats.into_iter().unzip();
        let power_sup = exceedance(&sup, critical_sup);
        let power_standard = exceedance(&std, critical_standard);
        points.push(PowerPoint {
            factor,
            tau,
            power_sup,
            power_standard,
            se_sup: proportion_se(power_sup, used),
            se_standard: proportion_se(power_standard, used),
            reps_used: used,
            failures,
        });
    }
    Ok(ExperimentReport {
        config: config.clone(),
        results: PowerCurve {
            critical_sup,
            critical_standard,
            null_failures,
            points,
        },
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Simulated null tables for both steps, conditional on a fitted series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStepConfig {
    pub reps: u32,
    pub grid: Vec<f64>,
    pub lags: usize,
    /// Upper-tail probabilities of the reported quantiles.
    pub levels: Vec<f64>,
    pub nodes: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for TwoStepConfig {
    fn default() -> Self {
        Self {
            reps: 1000,
            grid: default_grid(),
            lags: 2,
            levels: vec![0.20, 0.10, 0.05, 0.01],
            nodes: crate::numerics::DEFAULT_NODES,
            seed: 42,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepOneTable {
    pub observed_sup: f64,
    pub observed_standard: f64,
    pub davies_p_value: f64,
    pub quantiles_sup: Vec<f64>,
    pub quantiles_standard: Vec<f64>,
    /// `true` where the observed statistic exceeds the quantile.
    pub sup_exceeds: Vec<bool>,
    pub standard_exceeds: Vec<bool>,
    pub reps_used: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepTwoTable {
    /// `None` when the observed marginal fit piles up.
    pub observed: Option<f64>,
    pub observed_pile_up: bool,
    pub quantiles: Vec<f64>,
    pub exceeds: Vec<bool>,
    pub reps_used: usize,
    /// Null replicates whose marginal fit piled up (excluded).
    pub pile_ups: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoStepTable {
    pub beta_glm: Vec<f64>,
    pub levels: Vec<f64>,
    pub step_one: StepOneTable,
    pub step_two: StepTwoTable,
}

/// Step one simulates `Y_t ~ B(m_t, ḃ(x_tᵀβ̂⁽⁰⁾))`; step two adds i.i.d.
/// `α_t ~ N(0, 1)` and fits the marginal model to each replicate.
pub fn run_two_step_table(
    series: &ObservationSeries,
    config: &TwoStepConfig,
) -> Result<ExperimentReport<TwoStepConfig, TwoStepTable>> {
    check_common(config.reps, &config.grid, &config.levels)?;
    let start = Instant::now();
    let opts = MarginalOptions {
        nodes: config.nodes,
        ..MarginalOptions::default()
    };
    let fit = fit_glm(series)?;
    if !fit.converged {
        return Err(Error::Domain(
            "the GLM fit of the observed series did not converge".into(),
        ));
    }
    let beta = fit.beta_hat.clone();
    let design = series.design();
    let sup = sup_latent_test(series, &fit, &config.grid)?;
    let std = standard_latent_test(series, &fit)?;

    let null = simulate_latent_null(&design, &beta, &config.grid, config.reps, config.seed, config.workers)?;
    let used_one = null.sup.len();
    let failures = null.failures;
    let (mut null_sup, mut null_std) = (null.sup, null.standard);
    let quantiles_sup = upper_quantiles(&mut null_sup, &config.levels);
    let quantiles_standard = upper_quantiles(&mut null_std, &config.levels);
    let step_one = StepOneTable {
        observed_sup: sup.statistic,
        observed_standard: std.statistic,
        davies_p_value: sup.p_value_davies,
        sup_exceeds: quantiles_sup.iter().map(|q| sup.statistic > *q).collect(),
        standard_exceeds: quantiles_standard.iter().map(|q| std.statistic > *q).collect(),
        quantiles_sup,
        quantiles_standard,
        reps_used: used_one,
        failures,
    };

    let observed_fit = fit_marginal_with(series, &opts)?;
    let observed = if observed_fit.pile_up {
        None
    } else {
        Some(serial_dependence_test(series, &observed_fit, config.lags)?.statistic)
    };
    let iid = LatentSpec {
        tau: 1.0,
        phi: 0.0,
        scaling: LatentScaling::MarginalVariance,
    };
    let outcomes = run_replicates(config.reps, config.workers, |rep| -> Result<Option<f64>> {
        let rs = RandomSource::for_replicate(config.seed, 1, rep);
        let sim = simulate_on_design(&design, &beta, &iid, &rs)?;
        let mf = fit_marginal_with(&sim, &opts)?;
        if mf.pile_up {
            return Ok(None);
        }
        if !mf.converged {
            return Err(Error::NumericalInconsistency("marginal fit did not converge".into()));
        }
        Ok(Some(serial_dependence_test(&sim, &mf, config.lags)?.statistic))
    })?;
    let (stats, failures) = split_failures(outcomes);
    let pile_ups = stats.iter().filter(|s| s.is_none()).count();
    let mut null_q: Vec<f64> = stats.into_iter().flatten().collect();
    if null_q.is_empty() {
        return Err(Error::NumericalInconsistency(
            "every step-two replicate failed or piled up".into(),
        ));
    }
    let used_two = null_q.len();
    let quantiles = upper_quantiles(&mut null_q, &config.levels);
    let step_two = StepTwoTable {
        observed,
        observed_pile_up: observed_fit.pile_up,
        exceeds: quantiles.iter().map(|q| observed.is_some_and(|o| o > *q)).collect(),
        quantiles,
        reps_used: used_two,
        pile_ups,
        failures,
    };
    Ok(ExperimentReport {
        config: config.clone(),
        results: TwoStepTable {
            beta_glm: beta,
            levels: config.levels.clone(),
            step_one,
            step_two,
        },
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}
