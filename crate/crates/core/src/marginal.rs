//! Marginal likelihood for `(β, τ)` treating the latent effects as i.i.d.
//! Gaussian, its maximization with pile-up detection, and the per-observation
//! conditional residuals `U_t` and their variances `E(U_t²)`.
//!
//! All integrals are expectations over a standard normal `z`, with the state
//! `W = η + √τ z`, evaluated by the trapezoid rule of
//! [`QuadratureRule::for_logistic_scale`] (at least `nodes` points, step
//! shrinking as `1/√τ`).

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::glm::{fit_glm, glm_loglik, GlmFit};
use crate::model::ObservationSeries;
use crate::numerics::{maximize_scalar, numerical_hessian, QuadratureRule, DEFAULT_NODES};

/// `s = √τ` at or below this is a boundary estimate.
pub const PILE_UP_TOL: f64 = 1e-6;
const BETA_BOUND: f64 = 50.0;
const SD_BOUND: f64 = 10.0;
/// `ln(1e-300)`: marginal probabilities below this are treated as underflow.
const LOG_UNDERFLOW: f64 = -690.775_527_898_213_7;

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalOptions {
    /// Minimum number of quadrature nodes.
    pub nodes: usize,
    /// Spacing of the profile grid over `s = √τ`.
    pub profile_step: f64,
    /// Largest `s` on the profile grid.
    pub profile_max: f64,
}

impl Default for MarginalOptions {
    fn default() -> Self {
        Self {
            nodes: DEFAULT_NODES,
            profile_step: 0.05,
            profile_max: 2.0,
        }
    }
}

/// Marginal maximum likelihood estimate `(β̂⁽¹⁾, τ̂⁽¹⁾)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalFit {
    pub beta_hat: Vec<f64>,
    pub tau_hat: f64,
    /// `τ̂⁽¹⁾ = 0`: the maximum sits on the boundary.
    pub pile_up: bool,
    pub loglik: f64,
    /// False when the GLM or the search in τ failed, or when `l₁` still
    /// increases at the upper bound `τ = 100` (no finite maximizer).
    pub converged: bool,
    /// Conditional residuals `U_t` at the estimate.
    pub u: Vec<f64>,
    /// `E(U_t²)` at the estimate.
    pub eu2: Vec<f64>,
    /// Standard errors of `(β̂⁽¹⁾, τ̂⁽¹⁾)` from the numerical Hessian of `l₁`
    /// (one-sided in τ under pile-up, where they are only indicative);
    /// absent when the Hessian is not negative definite.
    pub std_errors: Option<Vec<f64>>,
    /// The GLM estimate used for initialization and under pile-up.
    pub glm_beta: Vec<f64>,
}

/// Per-node `π_k = ḃ(W_k)` and `1 − π_k` at one linear predictor.
///
/// Expectations of `π^j (1 − π)^{m−j}` are formed directly; an outcome whose
/// marginal probability falls below [`SAFE_MOMENT`] is recomputed in the log
/// domain, scaled by its largest exponent.
struct NodeTable<'a> {
    rule: &'a QuadratureRule,
    sd: f64,
    eta: f64,
    pi: Vec<f64>,
    q: Vec<f64>,
    qpow: Vec<f64>,
    d: Vec<f64>,
}

/// Moments below this are recomputed in the log domain.
const SAFE_MOMENT: f64 = 1e-200;

impl<'a> NodeTable<'a> {
    fn new(rule: &'a QuadratureRule, tau: f64) -> Self {
        let k = rule.len();
        Self {
            rule,
            sd: tau.sqrt(),
            eta: 0.0,
            pi: Vec::with_capacity(k),
            q: Vec::with_capacity(k),
            qpow: Vec::new(),
            d: Vec::new(),
        }
    }

    fn at(&mut self, eta: f64) -> &mut Self {
        self.eta = eta;
        self.pi.clear();
        self.q.clear();
        for &z in self.rule.nodes() {
            let w = eta + self.sd * z;
            let e = (-w.abs()).exp();
            let (small, large) = (e / (1.0 + e), 1.0 / (1.0 + e));
            if w >= 0.0 {
                self.pi.push(large);
                self.q.push(small);
            } else {
                self.pi.push(small);
                self.q.push(large);
            }
        }
        self
    }

    /// `E[π^y (1 − π)^{m−y}]`.
    fn moment(&self, y: u32, m: u32) -> f64 {
        let (a, b) = (y as i32, (m - y) as i32);
        self.rule
            .weights()
            .iter()
            .zip(self.pi.iter().zip(&self.q))
            .map(|(w, (p, q))| w * p.powi(a) * q.powi(b))
            .sum()
    }

    /// `log f(y)`.
    fn log_density(&self, y: u32, m: u32) -> Result<f64> {
        let a = self.moment(y, m);
        let log_f = if a > SAFE_MOMENT {
            a.ln() + ln_binomial(u64::from(m), u64::from(y))
        } else {
            self.log_domain(y, m).log_f
        };
        check_log_f(log_f, y, m)
    }

    /// `log f(y)`, `E(m ḃ(W) | y)` and `E(z | y)` with exponents
    /// `y W − m b(W)` scaled by their maximum.
    fn log_domain(&self, y: u32, m: u32) -> Outcome {
        let (yf, mf) = (f64::from(y), f64::from(m));
        let nodes = self.rule.nodes();
        let expo = |z: f64| {
            let w = self.eta + self.sd * z;
            yf * w - mf * (w.max(0.0) + (-w.abs()).exp().ln_1p())
        };
        let top = nodes.iter().map(|&z| expo(z)).fold(f64::NEG_INFINITY, f64::max);
        let (mut den, mut num, mut zsum) = (0.0, 0.0, 0.0);
        for (k, &z) in nodes.iter().enumerate() {
            let c = self.rule.weights()[k] * (expo(z) - top).exp();
            den += c;
            num += c * self.pi[k];
            zsum += c * z;
        }
        Outcome {
            log_f: top + den.ln() + ln_binomial(u64::from(m), u64::from(y)),
            mean_fitted: mf * num / den,
            mean_z: zsum / den,
        }
    }

    /// `(u(y_obs), E(U²), log f(y_obs))` from `D_j = E[π^j (1 − π)^{m+1−j}]`:
    /// `f(y) = C(m, y)(D_y + D_{y+1})` and `E(m π | y) = m D_{y+1} / (D_y + D_{y+1})`.
    fn residual(&mut self, y_obs: u32, m: u32) -> Result<(f64, f64, f64)> {
        let mu = m as usize;
        self.d.clear();
        self.d.resize(mu + 2, 0.0);
        self.qpow.resize(mu + 2, 0.0);
        for (k, w) in self.rule.weights().iter().enumerate() {
            let q = self.q[k];
            self.qpow[0] = *w;
            for i in 1..=mu + 1 {
                self.qpow[i] = self.qpow[i - 1] * q;
            }
            let mut p = 1.0;
            for j in 0..=mu + 1 {
                self.d[j] += p * self.qpow[mu + 1 - j];
                p *= self.pi[k];
            }
        }
        let mf = f64::from(m);
        let mut eu2 = 0.0;
        let mut observed = None;
        let mut coef = 1.0;
        for y in 0..=m {
            let j = y as usize;
            if y > 0 {
                coef *= f64::from(m - y + 1) / f64::from(y);
            }
            let a = self.d[j] + self.d[j + 1];
            if a <= SAFE_MOMENT || !coef.is_finite() {
                continue;
            }
            let u = f64::from(y) - mf * self.d[j + 1] / a;
            eu2 += coef * a * u * u;
            if y == y_obs {
                observed = Some((u, (coef * a).ln()));
            }
        }
        let (u, log_f) = match observed {
            Some(v) => v,
            None => {
                let o = self.log_domain(y_obs, m);
                (f64::from(y_obs) - o.mean_fitted, o.log_f)
            }
        };
        Ok((u, eu2, check_log_f(log_f, y_obs, m)?))
    }
}

fn check_log_f(log_f: f64, y: u32, m: u32) -> Result<f64> {
    if !log_f.is_finite() || log_f < LOG_UNDERFLOW {
        return Err(Error::Underflow { y, m });
    }
    Ok(log_f)
}

struct Outcome {
    log_f: f64,
    mean_fitted: f64,
    mean_z: f64,
}

fn rule_for(tau: f64, nodes: usize) -> Result<Cow<'static, QuadratureRule>> {
    QuadratureRule::for_logistic_scale(tau.sqrt(), nodes)
}

/// Conditional quantities of one observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalResidual {
    /// `u(y) = y − E(m ḃ(W) | y)`.
    pub u: f64,
    /// `E(U²) = Σ_y f(y) u(y)²`.
    pub eu2: f64,
    /// `E(α̃ | y) = √τ u(y)`.
    pub latent_mean: f64,
}

fn check_obs(y: u32, m: u32, eta: f64, tau: f64) -> Result<()> {
    if m == 0 || y > m {
        return Err(Error::Domain(format!(
            "need 0 ≤ y ≤ m with m ≥ 1, got y = {y}, m = {m}"
        )));
    }
    if !eta.is_finite() {
        return Err(Error::Domain("linear predictor must be finite".into()));
    }
    check_tau(tau)
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("τ must be finite and nonnegative, got {tau}")));
    }
    Ok(())
}

/// `f(y; η, τ) = E_z[ C(m, y) π^y (1 − π)^{m−y} ]` with `π = ḃ(η + √τ z)`.
pub fn obs_marginal_density(y: u32, m: u32, eta: f64, tau: f64) -> Result<f64> {
    obs_marginal_density_with(y, m, eta, tau, DEFAULT_NODES)
}

pub fn obs_marginal_density_with(y: u32, m: u32, eta: f64, tau: f64, nodes: usize) -> Result<f64> {
    check_obs(y, m, eta, tau)?;
    let rule = rule_for(tau, nodes)?;
    let mut table = NodeTable::new(&rule, tau);
    Ok(table.at(eta).log_density(y, m)?.exp())
}

pub fn conditional_residual(y: u32, m: u32, eta: f64, tau: f64) -> Result<ConditionalResidual> {
    conditional_residual_with(y, m, eta, tau, DEFAULT_NODES)
}

pub fn conditional_residual_with(y: u32, m: u32, eta: f64, tau: f64, nodes: usize) -> Result<ConditionalResidual> {
    check_obs(y, m, eta, tau)?;
    let rule = rule_for(tau, nodes)?;
    let mut table = NodeTable::new(&rule, tau);
    let (u, eu2, _) = table.at(eta).residual(y, m)?;
    Ok(ConditionalResidual {
        u,
        eu2,
        latent_mean: tau.sqrt() * u,
    })
}

/// `E(α̃ | y)` computed directly as `f(y)⁻¹ E_z[z f(y | η + √τ z)]`.
pub fn latent_conditional_mean(y: u32, m: u32, eta: f64, tau: f64) -> Result<f64> {
    check_obs(y, m, eta, tau)?;
    let rule = rule_for(tau, DEFAULT_NODES)?;
    let mut table = NodeTable::new(&rule, tau);
    let o = table.at(eta).log_domain(y, m);
    check_log_f(o.log_f, y, m)?;
    Ok(o.mean_z)
}

/// `l₁(β, τ) = Σ_t log f(y_t; x_tᵀβ, τ)`; at `τ = 0` this is `l₀(β)`.
pub fn marginal_loglik(series: &ObservationSeries, beta: &[f64], tau: f64) -> Result<f64> {
    marginal_loglik_with(series, beta, tau, DEFAULT_NODES)
}

pub fn marginal_loglik_with(series: &ObservationSeries, beta: &[f64], tau: f64, nodes: usize) -> Result<f64> {
    check_tau(tau)?;
    if tau == 0.0 {
        return glm_loglik(series, beta);
    }
    let rule = rule_for(tau, nodes)?;
    let eta = series.linear_predictor(beta)?;
    let mut table = NodeTable::new(&rule, tau);
    let mut total = 0.0;
    for (t, &w) in eta.iter().enumerate() {
        total += table.at(w).log_density(series.y()[t], series.m()[t])?;
    }
    Ok(total)
}

/// Per-observation `U_t` and `E(U_t²)` at `(β, τ)`.
pub fn conditional_residuals(series: &ObservationSeries, beta: &[f64], tau: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    check_tau(tau)?;
    let pass = scoring_pass(series, beta, tau, DEFAULT_NODES)?;
    Ok((pass.u, pass.eu2))
}

struct ScoringPass {
    loglik: f64,
    u: Vec<f64>,
    eu2: Vec<f64>,
}

fn scoring_pass(series: &ObservationSeries, beta: &[f64], tau: f64, nodes: usize) -> Result<ScoringPass> {
    let rule = rule_for(tau, nodes)?;
    let eta = series.linear_predictor(beta)?;
    let n = series.n();
    let mut pass = ScoringPass {
        loglik: 0.0,
        u: Vec::with_capacity(n),
        eu2: Vec::with_capacity(n),
    };
    let mut table = NodeTable::new(&rule, tau);
    for (t, &w) in eta.iter().enumerate() {
        let (u, eu2, log_f) = table.at(w).residual(series.y()[t], series.m()[t])?;
        pass.loglik += log_f;
        pass.u.push(u);
        pass.eu2.push(eu2);
    }
    Ok(pass)
}

/// Fisher-scoring direction in β at fixed τ: `(Σ E(U²) x xᵀ)⁻¹ Σ U x`.
fn scoring_direction(series: &ObservationSeries, pass: &ScoringPass) -> Option<Vec<f64>> {
    let r = series.r();
    let mut score: DVector<f64> = DVector::zeros(r);
    let mut info: DMatrix<f64> = DMatrix::zeros(r, r);
    for (t, row) in series.rows().enumerate() {
        for a in 0..r {
            score[a] += pass.u[t] * row[a];
            for b in 0..r {
                info[(a, b)] += pass.eu2[t] * row[a] * row[b];
            }
        }
    }
    let step = info.cholesky()?.solve(&score);
    step.iter()
        .all(|v| v.is_finite())
        .then(|| step.iter().copied().collect())
}

/// `β` maximizing `l₁(·, τ)` at fixed τ, with the pass at that `β`.
struct Inner {
    beta: Vec<f64>,
    pass: ScoringPass,
    converged: bool,
}

/// Step-halving Fisher scoring from `start`, at most `max_iter` steps;
/// converged once the largest step component is below `tol`.
fn profile_beta(
    series: &ObservationSeries,
    start: &[f64],
    tau: f64,
    nodes: usize,
    max_iter: usize,
    tol: f64,
) -> Result<Inner> {
    let mut beta = start.to_vec();
    let mut pass = scoring_pass(series, &beta, tau, nodes)?;
    for _ in 0..max_iter {
        let Some(dir) = scoring_direction(series, &pass) else {
            return Ok(Inner {
                beta,
                pass,
                converged: false,
            });
        };
        let size = dir.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if size < tol {
            return Ok(Inner {
                beta,
                pass,
                converged: true,
            });
        }
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = beta
                .iter()
                .zip(&dir)
                .map(|(b, d)| (b + scale * d).clamp(-BETA_BOUND, BETA_BOUND))
                .collect();
            if let Ok(next) = scoring_pass(series, &trial, tau, nodes) {
                if next.loglik >= pass.loglik - 1e-12 * pass.loglik.abs().max(1.0) {
                    beta = trial;
                    pass = next;
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted {
            return Ok(Inner {
                beta,
                pass,
                converged: false,
            });
        }
    }
    Ok(Inner {
        beta,
        pass,
        converged: false,
    })
}

const MAX_HALVINGS: usize = 20;
const INNER_ITERS: usize = 50;
/// β tolerance while searching over `s`, and for the final estimate.
const SEARCH_TOL: f64 = 1e-7;
const FINAL_TOL: f64 = 1e-10;
const SD_TOL: f64 = 1e-5;

/// Maximizes `l₁` over `(β, s)`, `s = √τ ≥ 0`.
pub fn fit_marginal(series: &ObservationSeries) -> Result<MarginalFit> {
    fit_marginal_with(series, &MarginalOptions::default())
}

/// β is profiled out by Fisher scoring at each `s`. The profile is scanned on
/// the `s` grid and its best bracket refined by Brent's method. When the grid
/// peaks at `s = 0` the sign of `∂l₁/∂τ` at `(β̂⁽⁰⁾, 0)`, `½Σ(e_t² − σ_t²)`,
/// decides between pile-up and a refinement on the first grid interval.
/// An estimate with `s ≤ 1e-6` is pile-up and carries the GLM estimate.
pub fn fit_marginal_with(series: &ObservationSeries, opts: &MarginalOptions) -> Result<MarginalFit> {
    if !(opts.profile_step > 0.0) || !(opts.profile_max >= 0.0) {
        return Err(Error::InvalidConfig("profile grid needs a positive step".into()));
    }
    let nodes = opts.nodes;
    let glm = fit_glm(series)?;

    // Profile grid: one scoring step per point, warm-started along s.
    let steps = (opts.profile_max / opts.profile_step + 1e-9).floor() as usize;
    let mut grid = vec![(0.0, glm.loglik)];
    let mut warm = glm.beta_hat.clone();
    for j in 1..=steps {
        let s = j as f64 * opts.profile_step;
        let pass = scoring_pass(series, &warm, s * s, nodes)?;
        grid.push((s, pass.loglik));
        if let Some(dir) = scoring_direction(series, &pass) {
            for (b, d) in warm.iter_mut().zip(dir) {
                *b = (*b + d).clamp(-BETA_BOUND, BETA_BOUND);
            }
        }
    }
    let best = (0..grid.len()).fold(0, |b, j| if grid[j].1 > grid[b].1 { j } else { b });

    let tau_score = 0.5 * glm.resid.iter().zip(&glm.sigma2).map(|(e, v)| e * e - v).sum::<f64>();
    if best == 0 && (tau_score <= 0.0 || grid.len() == 1) {
        return pile_up_fit(series, glm, true, nodes);
    }

    let mut lo = grid[best.saturating_sub(1)].0;
    let mut hi = grid[(best + 1).min(grid.len() - 1)].0;
    let mut profile = |s: f64| -> f64 {
        match profile_beta(series, &warm, s * s, nodes, INNER_ITERS, SEARCH_TOL) {
            Ok(inner) => {
                warm = inner.beta;
                inner.pass.loglik
            }
            Err(_) => f64::NEG_INFINITY,
        }
    };
    if best + 1 == grid.len() {
        // Profile still rising at the end of the grid: double s until it falls.
        let (mut s, mut ll) = grid[best];
        loop {
            let next = (2.0 * s).min(SD_BOUND);
            hi = next;
            if next <= s {
                // Rising up to the bound: l₁ has no interior maximum.
                log::warn!("marginal profile still increasing at s = {SD_BOUND}; estimate is at the bound");
                return bound_fit(series, glm, &warm, nodes);
            }
            let l_next = profile(next);
            if l_next <= ll {
                break;
            }
            lo = s;
            s = next;
            ll = l_next;
        }
    }
    let brent = maximize_scalar(&mut profile, lo, hi, SD_TOL)?;
    // Brent never evaluates the endpoints: s = 0 wins whenever it is at
    // least as good as the best interior point found.
    let s_hat = brent.argmax;
    if s_hat <= PILE_UP_TOL || (lo == 0.0 && glm.loglik >= brent.value) {
        return pile_up_fit(series, glm, brent.converged, nodes);
    }

    let tau_hat = s_hat * s_hat;
    let inner = profile_beta(series, &warm, tau_hat, nodes, INNER_ITERS, FINAL_TOL)?;
    let std_errors = std_errors(series, &inner.beta, tau_hat, nodes);
    Ok(MarginalFit {
        beta_hat: inner.beta,
        tau_hat,
        pile_up: false,
        loglik: inner.pass.loglik,
        converged: glm.converged && brent.converged && inner.converged,
        u: inner.pass.u,
        eu2: inner.pass.eu2,
        std_errors,
        glm_beta: glm.beta_hat,
    })
}

/// Estimate at `s = SD_BOUND`, reported as not converged.
fn bound_fit(series: &ObservationSeries, glm: GlmFit, start: &[f64], nodes: usize) -> Result<MarginalFit> {
    let tau = SD_BOUND * SD_BOUND;
    let inner = profile_beta(series, start, tau, nodes, INNER_ITERS, SEARCH_TOL)?;
    Ok(MarginalFit {
        beta_hat: inner.beta,
        tau_hat: tau,
        pile_up: false,
        loglik: inner.pass.loglik,
        converged: false,
        u: inner.pass.u,
        eu2: inner.pass.eu2,
        std_errors: None,
        glm_beta: glm.beta_hat,
    })
}

fn pile_up_fit(series: &ObservationSeries, glm: GlmFit, converged: bool, nodes: usize) -> Result<MarginalFit> {
    // At τ = 0 the conditional residual is the GLM residual and E(U_t²) = σ_t².
    let std_errors = std_errors(series, &glm.beta_hat, 0.0, nodes);
    Ok(MarginalFit {
        beta_hat: glm.beta_hat.clone(),
        tau_hat: 0.0,
        pile_up: true,
        loglik: glm.loglik,
        converged: converged && glm.converged,
        u: glm.resid,
        eu2: glm.sigma2,
        std_errors,
        glm_beta: glm.beta_hat,
    })
}

/// Standard errors of `(β, τ)` from the inverse negative Hessian of `l₁`.
fn std_errors(series: &ObservationSeries, beta: &[f64], tau: f64, nodes: usize) -> Option<Vec<f64>> {
    let r = series.r();
    let mut theta = beta.to_vec();
    theta.push(tau);
    let mut lower = vec![-BETA_BOUND; r];
    lower.push(0.0);
    let mut upper = vec![BETA_BOUND; r];
    upper.push(SD_BOUND * SD_BOUND);
    let hess = numerical_hessian(
        |th: &[f64]| marginal_loglik_with(series, &th[..r], th[r].max(0.0), nodes).unwrap_or(f64::NAN),
        &theta,
        &lower,
        &upper,
    );
    let cov = (-hess).cholesky()?.inverse();
    let se: Vec<f64> = cov.diagonal().iter().map(|v| v.sqrt()).collect();
    se.iter().all(|v| v.is_finite()).then_some(se)
}
