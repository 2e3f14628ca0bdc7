//! Logistic GLM under `τ = 0`: the Newton fit, the information-type
//! matrices entering the latent-process score variance, and the GLM
//! probability limit when a latent process is present.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};
use crate::model::{
    conditional_moments, link_derivatives, log1pexp, logistic, logistic_variance, Design, ObservationSeries,
};
use crate::numerics::{gaussian_expectation, QuadratureRule, DEFAULT_NODES};

const MAX_ITER: usize = 100;
/// Newton stops once `‖n⁻¹ Σ e_t x_t‖∞` is below this.
const GRAD_TOL: f64 = 1e-8;
/// Fitted linear predictors beyond this magnitude are numerically 0 or 1
/// probabilities, the signature of (quasi-)complete separation.
const SEPARATION_ETA: f64 = 30.0;

/// Maximizer of the GLM log-likelihood `l₀(β)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlmFit {
    pub beta_hat: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    /// Fitted probabilities hit 0 or 1; the MLE does not exist.
    pub separated: bool,
    pub iterations: usize,
    pub pi: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub resid: Vec<f64>,
    /// Asymptotic standard errors `sqrt(diag((n I_n)⁻¹))`.
    pub std_errors: Vec<f64>,
}

/// `I_n`, `J_n` and `K_n` at a given β.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrices {
    /// `n⁻¹ Σ m_t b̈(x_tᵀβ) x_t x_tᵀ`.
    pub i_n: DMatrix<f64>,
    /// `−(2n)⁻¹ Σ m_t b⁽³⁾(x_tᵀβ) x_t`.
    pub j_n: DVector<f64>,
    /// `(4n)⁻¹ Σ σ_t² (1 + (2 − 6/m_t) σ_t²)`.
    pub k_n: f64,
}

impl InfoMatrices {
    /// `V_{n,1} = K_n − J_nᵀ I_n⁻¹ J_n`.
    pub fn v_n1(&self) -> Result<f64> {
        let chol = checked_cholesky(&self.i_n)?;
        let sol = chol.solve(&self.j_n);
        Ok(self.k_n - self.j_n.dot(&sol))
    }
}

fn checked_cholesky(a: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let scale = a.diagonal().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let chol = a.clone().cholesky().ok_or(Error::SingularInformation)?;
    let l = chol.l();
    let min_pivot = l.diagonal().iter().fold(f64::INFINITY, |acc, v| acc.min(v * v));
    if !(scale > 0.0) || min_pivot < 1e-12 * scale {
        return Err(Error::SingularInformation);
    }
    Ok(chol)
}

pub fn info_matrices(series: &ObservationSeries, beta: &[f64]) -> Result<InfoMatrices> {
    let eta = series.linear_predictor(beta)?;
    let (n, r) = (series.n(), series.r());
    let mut i_n = DMatrix::zeros(r, r);
    let mut j_n = DVector::zeros(r);
    let mut k_n = 0.0;
    for (t, (row, &w)) in series.rows().zip(&eta).enumerate() {
        let m = f64::from(series.m()[t]);
        let d = link_derivatives(w)?;
        let sigma2 = m * d.b2;
        for a in 0..r {
            j_n[a] += m * d.b3 * row[a];
            for b in 0..=a {
                i_n[(a, b)] += m * d.b2 * row[a] * row[b];
            }
        }
        k_n += sigma2 * (1.0 + (2.0 - 6.0 / m) * sigma2);
    }
    let nf = n as f64;
    for a in 0..r {
        for b in 0..a {
            i_n[(b, a)] = i_n[(a, b)];
        }
    }
    Ok(InfoMatrices {
        i_n: i_n / nf,
        j_n: j_n * (-0.5 / nf),
        k_n: k_n / (4.0 * nf),
    })
}

/// `l₀(β) = Σ [y_t x_tᵀβ − m_t b(x_tᵀβ) + log C(m_t, y_t)]`.
pub fn glm_loglik(series: &ObservationSeries, beta: &[f64]) -> Result<f64> {
    let eta = series.linear_predictor(beta)?;
    Ok(eta
        .iter()
        .enumerate()
        .map(|(t, &w)| {
            let (y, m) = (series.y()[t], series.m()[t]);
            f64::from(y) * w - f64::from(m) * log1pexp(w) + ln_binomial(u64::from(m), u64::from(y))
        })
        .sum())
}

struct NewtonOutcome {
    beta: Vec<f64>,
    converged: bool,
    separated: bool,
    iterations: usize,
}

/// Newton (Fisher scoring) for `Σ (target_t − m_t ḃ(x_tᵀβ)) x_t = 0`.
///
/// Steps are halved until the pseudo log-likelihood `Σ target_t η_t − m_t b(η_t)`
/// does not decrease.
fn newton_logistic(design: &Design, targets: &[f64]) -> Result<NewtonOutcome> {
    let (n, r) = (design.n(), design.r());
    let nf = n as f64;
    let objective = |eta: &[f64]| -> f64 {
        eta.iter()
            .zip(targets)
            .zip(design.m())
            .map(|((&w, &y), &m)| y * w - f64::from(m) * log1pexp(w))
            .sum()
    };
    let mut beta = vec![0.0; r];
    let mut eta = design.linear_predictor(&beta)?;
    let mut current = objective(&eta);
    let mut converged = false;
    let mut iterations = 0;
    let mut polished = false;
    while iterations < MAX_ITER {
        let mut score = DVector::zeros(r);
        let mut info = DMatrix::zeros(r, r);
        for (t, row) in design.rows().enumerate() {
            let m = f64::from(design.m()[t]);
            let e = targets[t] - m * logistic(eta[t]);
            let v = m * logistic_variance(eta[t]);
            for a in 0..r {
                score[a] += e * row[a];
                for b in 0..=a {
                    info[(a, b)] += v * row[a] * row[b];
                }
            }
        }
        for a in 0..r {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
            }
        }
        let gnorm = score.amax() / nf;
        if gnorm < GRAD_TOL {
            if polished {
                converged = true;
                break;
            }
            polished = true;
        }
        iterations += 1;
        let step = checked_cholesky(&info)?.solve(&score);
        let mut scale = 1.0;
        let mut accepted = false;
        while scale > 1e-10 {
            let trial: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + scale * s).collect();
            let trial_eta = design.linear_predictor(&trial)?;
            let value = objective(&trial_eta);
            if value >= current {
                beta = trial;
                eta = trial_eta;
                current = value;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            converged = gnorm < GRAD_TOL;
            break;
        }
    }
    let separated = eta.iter().any(|w| w.abs() > SEPARATION_ETA);
    Ok(NewtonOutcome {
        beta,
        converged: converged && !separated,
        separated,
        iterations,
    })
}

/// Fits the logistic GLM by Newton's method with analytic `I_n`.
///
/// Separation is reported through `converged = false, separated = true`
/// rather than an error; a rank-deficient design is an error.
pub fn fit_glm(series: &ObservationSeries) -> Result<GlmFit> {
    let targets: Vec<f64> = series.y().iter().map(|&y| f64::from(y)).collect();
    let outcome = newton_logistic(&series.design(), &targets)?;
    if outcome.separated {
        log::warn!("GLM fit: fitted probabilities numerically 0 or 1 (separation)");
    }
    let moments = conditional_moments(series, &outcome.beta)?;
    let info = info_matrices(series, &outcome.beta)?;
    let n = series.n() as f64;
    let std_errors = match checked_cholesky(&(info.i_n.clone() * n)) {
        Ok(chol) => chol.inverse().diagonal().iter().map(|v| v.sqrt()).collect(),
        Err(_) => vec![f64::NAN; series.r()],
    };
    Ok(GlmFit {
        loglik: glm_loglik(series, &outcome.beta)?,
        beta_hat: outcome.beta,
        converged: outcome.converged,
        separated: outcome.separated,
        iterations: outcome.iterations,
        pi: moments.pi,
        sigma2: moments.sigma2,
        resid: moments.resid,
        std_errors,
    })
}

/// Limit `β′` of the GLM estimate when the data carry a latent process of
/// variance `τ₀`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityLimit {
    pub beta_prime: Vec<f64>,
    pub converged: bool,
}

/// Solves `Σ m_t [E ḃ(x_tᵀβ₀ + √τ₀ Z) − ḃ(x_tᵀβ′)] x_t = 0` for `β′`.
pub fn glm_prob_limit(design: &Design, beta0: &[f64], tau0: f64) -> Result<ProbabilityLimit> {
    if !(tau0 > 0.0) || !tau0.is_finite() {
        return Err(Error::Domain(format!("τ₀ must be positive, got {tau0}")));
    }
    let eta = design.linear_predictor(beta0)?;
    let sd = tau0.sqrt();
    let rule = QuadratureRule::for_logistic_scale(sd, DEFAULT_NODES)?;
    let targets = eta
        .iter()
        .zip(design.m())
        .map(|(&w, &m)| Ok(f64::from(m) * gaussian_expectation(|z| logistic(w + sd * z), &rule)?))
        .collect::<Result<Vec<f64>>>()?;
    let outcome = newton_logistic(design, &targets)?;
    Ok(ProbabilityLimit {
        beta_prime: outcome.beta,
        converged: outcome.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn intercept_only(y: Vec<u32>, m: u32) -> ObservationSeries {
        let n = y.len();
        ObservationSeries::new(y, vec![m; n], vec![vec![1.0]; n]).unwrap()
    }

    #[test]
    fn intercept_only_closed_form() {
        let y: Vec<u32> = (0..100).map(|i| u32::from(i < 30)).collect();
        let fit = fit_glm(&intercept_only(y, 1)).unwrap();
        assert!(fit.converged);
        assert_abs_diff_eq!(fit.beta_hat[0], (0.3f64 / 0.7).ln(), epsilon = 1e-10);
        assert_abs_diff_eq!(fit.beta_hat[0], -0.847_297_860_387_203_8, epsilon = 1e-10);
    }

    #[test]
    fn half_successes_give_zero() {
        let fit = fit_glm(&intercept_only(vec![1; 20], 2)).unwrap();
        assert_abs_diff_eq!(fit.beta_hat[0], 0.0, epsilon = 1e-12);
        let score: f64 = fit.resid.iter().sum();
        assert!(score.abs() < 1e-12);
    }

    #[test]
    fn separation_is_flagged() {
        let y = vec![0, 0, 0, 1, 1, 1];
        let rows = (0..6).map(|t| vec![1.0, t as f64]).collect();
        let s = ObservationSeries::new(y, vec![1; 6], rows).unwrap();
        let fit = fit_glm(&s).unwrap();
        assert!(!fit.converged);
        assert!(fit.separated);
    }

    #[test]
    fn collinear_design_is_singular() {
        let rows = (0..10).map(|t| vec![1.0, t as f64, 2.0 * t as f64]).collect();
        let y = (0..10).map(|t| u32::from(t % 3 == 0)).collect();
        let s = ObservationSeries::new(y, vec![1; 10], rows).unwrap();
        assert!(matches!(fit_glm(&s), Err(Error::SingularInformation)));
    }

    #[test]
    fn info_examples() {
        let s = intercept_only(vec![0; 7], 1);
        let info = info_matrices(&s, &[0.0]).unwrap();
        assert_eq!(info.i_n[(0, 0)], 0.25);
        assert_eq!(info.j_n[0], 0.0);
        assert_eq!(info.k_n, 0.0);
        assert_eq!(info.v_n1().unwrap(), 0.0);

        let s = intercept_only(vec![0; 7], 2);
        let info = info_matrices(&s, &[0.0]).unwrap();
        assert_abs_diff_eq!(info.i_n[(0, 0)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(info.k_n, 0.0625, epsilon = 1e-15);

        let s = intercept_only(vec![0; 7], 1);
        assert!(info_matrices(&s, &[0.8]).unwrap().j_n[0] > 0.0);
        assert!(info_matrices(&s, &[-0.8]).unwrap().j_n[0] < 0.0);
    }

    #[test]
    fn info_equals_negative_hessian_of_scaled_loglik() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|t| vec![1.0, t as f64 / 40.0, ((t * 7) % 5) as f64 - 2.0])
            .collect();
        let y: Vec<u32> = (0..40).map(|t| ((t * 13) % 4) as u32 % 3).collect();
        let s = ObservationSeries::new(y, vec![2; 40], rows).unwrap();
        let beta = [0.3, -0.4, 0.2];
        let info = info_matrices(&s, &beta).unwrap();
        let f = |b: &[f64]| glm_loglik(&s, b).unwrap() / 40.0;
        let h = 1e-4;
        for a in 0..3 {
            for c in 0..3 {
                let shift = |da: f64, dc: f64| {
                    let mut b = beta.to_vec();
                    b[a] += da;
                    b[c] += dc;
                    f(&b)
                };
                let d2 = (shift(h, h) - shift(h, -h) - shift(-h, h) + shift(-h, -h)) / (4.0 * h * h);
                assert_abs_diff_eq!(info.i_n[(a, c)], -d2, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn degenerate_latent_limit_returns_beta0() {
        let design = Design::linear_trend(200, 1).unwrap();
        let lim = glm_prob_limit(&design, &[1.0, 2.0], 1e-12).unwrap();
        assert!(lim.converged);
        assert_abs_diff_eq!(lim.beta_prime[0], 1.0, epsilon = 1e-5);
        assert_abs_diff_eq!(lim.beta_prime[1], 2.0, epsilon = 1e-5);
    }

    #[test]
    fn symmetric_limit_is_zero() {
        let design = Design::new(vec![1; 10], vec![vec![1.0]; 10]).unwrap();
        for tau in [0.5, 1.0, 3.0] {
            let lim = glm_prob_limit(&design, &[0.0], tau).unwrap();
            assert_abs_diff_eq!(lim.beta_prime[0], 0.0, epsilon = 1e-12);
        }
        assert!(glm_prob_limit(&design, &[0.0], 0.0).is_err());
    }

    #[test]
    fn attenuation_grows_with_latent_variance() {
        let design = Design::linear_trend(500, 1).unwrap();
        let slopes: Vec<f64> = [0.25, 0.5, 1.0, 2.0]
            .iter()
            .map(|&tau| glm_prob_limit(&design, &[1.0, 2.0], tau).unwrap().beta_prime[1])
            .collect();
        assert!(slopes.windows(2).all(|w| w[1] < w[0]), "{slopes:?}");
        assert!(slopes[0] < 2.0);
    }
}
