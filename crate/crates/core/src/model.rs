//! Binomial parameter-driven series: observations, parameters, the logistic
//! link primitives and the correlation kernel of the standardized latent
//! process.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts `y_t` out of `m_t` trials with regressors `x_t`, `t = 1..n`.
///
/// The time index is the row order; series are assumed equally spaced.
/// Regressors are stored row-major, the first column conventionally being
/// the intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSeries {
    y: Vec<u32>,
    m: Vec<u32>,
    x: Vec<f64>,
    r: usize,
}

impl ObservationSeries {
    /// Builds a series from per-time regressor rows.
    pub fn new(y: Vec<u32>, m: Vec<u32>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.first().map(Vec::len).unwrap_or(0);
        if let Some((t, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != r) {
            return Err(Error::InvalidSeries(format!(
                "regressor row {} has dimension {}, expected {}",
                t + 1,
                row.len(),
                r
            )));
        }
        Self::from_flat(y, m, rows.into_iter().flatten().collect(), r)
    }

    /// Builds a series from a row-major `n × r` regressor buffer.
    pub fn from_flat(y: Vec<u32>, m: Vec<u32>, x: Vec<f64>, r: usize) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidSeries("series is empty".into()));
        }
        if m.len() != n {
            return Err(Error::InvalidSeries(format!(
                "{} counts but {} trial numbers",
                n,
                m.len()
            )));
        }
        if r == 0 {
            return Err(Error::InvalidSeries("at least one regressor is required".into()));
        }
        if x.len() != n * r {
            return Err(Error::InvalidSeries(format!(
                "regressor buffer has {} entries, expected {} × {}",
                x.len(),
                n,
                r
            )));
        }
        if n < r {
            return Err(Error::InvalidSeries(format!(
                "n = {} is smaller than the number of regressors r = {}",
                n, r
            )));
        }
        for t in 0..n {
            if m[t] == 0 {
                return Err(Error::InvalidSeries(format!("m_t = 0 at t = {}", t + 1)));
            }
            if y[t] > m[t] {
                return Err(Error::InvalidSeries(format!(
                    "y_t = {} exceeds m_t = {} at t = {}",
                    y[t],
                    m[t],
                    t + 1
                )));
            }
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "non-finite regressor at t = {}",
                pos / r + 1
            )));
        }
        Ok(Self { y, m, x, r })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of regressors (the dimension of β).
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn y(&self) -> &[u32] {
        &self.y
    }

    pub fn m(&self) -> &[u32] {
        &self.m
    }

    /// Row-major regressor buffer.
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Regressor vector at zero-based time `t`.
    pub fn row(&self, t: usize) -> &[f64] {
        &self.x[t * self.r..(t + 1) * self.r]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.r)
    }

    /// Largest number of trials in the series.
    pub fn max_trials(&self) -> u32 {
        self.m.iter().copied().max().unwrap_or(0)
    }

    /// Linear predictor `x_tᵀβ` for every `t`.
    pub fn linear_predictor(&self, beta: &[f64]) -> Result<Vec<f64>> {
        self.check_beta(beta)?;
        Ok(self
            .rows()
            .map(|row| row.iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Trials and regressors without the responses.
    pub fn design(&self) -> Design {
        Design {
            m: self.m.clone(),
            x: self.x.clone(),
            r: self.r,
        }
    }

    /// Same design and trials with new responses.
    pub fn with_responses(&self, y: Vec<u32>) -> Result<Self> {
        Self::from_flat(y, self.m.clone(), self.x.clone(), self.r)
    }

    pub(crate) fn check_beta(&self, beta: &[f64]) -> Result<()> {
        if beta.len() != self.r {
            return Err(Error::DimensionMismatch {
                expected: self.r,
                got: beta.len(),
            });
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::Domain("β has non-finite entries".into()));
        }
        Ok(())
    }
}

/// Trials `m_t` and regressors `x_t` of a series, without responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    m: Vec<u32>,
    x: Vec<f64>,
    r: usize,
}

impl Design {
    pub fn new(m: Vec<u32>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let y = vec![0; m.len()];
        Ok(ObservationSeries::new(y, m, rows)?.design())
    }

    /// `x_t = (1, t/n)` with constant trials `m`.
    pub fn linear_trend(n: usize, m: u32) -> Result<Self> {
        let rows = (1..=n).map(|t| vec![1.0, t as f64 / n as f64]).collect();
        Self::new(vec![m; n], rows)
    }

    pub fn n(&self) -> usize {
        self.m.len()
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn m(&self) -> &[u32] {
        &self.m
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.r)
    }

    pub fn linear_predictor(&self, beta: &[f64]) -> Result<Vec<f64>> {
        if beta.len() != self.r {
            return Err(Error::DimensionMismatch {
                expected: self.r,
                got: beta.len(),
            });
        }
        Ok(self
            .rows()
            .map(|row| row.iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// Attaches responses.
    pub fn with_responses(&self, y: Vec<u32>) -> Result<ObservationSeries> {
        ObservationSeries::from_flat(y, self.m.clone(), self.x.clone(), self.r)
    }
}

/// Full parameter `θ = (β, τ, ψ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: Vec<f64>,
    pub tau: f64,
    pub psi: Vec<f64>,
}

impl ModelParams {
    pub fn new(beta: Vec<f64>, tau: f64, psi: Vec<f64>) -> Result<Self> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::Domain(format!("τ must be finite and nonnegative, got {tau}")));
        }
        if beta.iter().chain(&psi).any(|v| !v.is_finite()) {
            return Err(Error::Domain("parameters must be finite".into()));
        }
        Ok(Self { beta, tau, psi })
    }

    /// Parameters with an AR(1) latent correlation, `|ψ| < 1`.
    pub fn ar1(beta: Vec<f64>, tau: f64, psi: f64) -> Result<Self> {
        LatentKernel::ar1(psi)?;
        Self::new(beta, tau, vec![psi])
    }
}

/// Correlation function `R(h; ψ)` of the standardized latent process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LatentKernel {
    /// `R(h) = ψ^h`.
    Ar1(f64),
    /// User-supplied correlations `R(1), R(2), …`; zero beyond the table.
    Tabulated(Vec<f64>),
}

impl LatentKernel {
    pub fn ar1(psi: f64) -> Result<Self> {
        let kernel = LatentKernel::Ar1(psi);
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn tabulated(correlations: Vec<f64>) -> Result<Self> {
        let kernel = LatentKernel::Tabulated(correlations);
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LatentKernel::Ar1(psi) => {
                if !psi.is_finite() || psi.abs() >= 1.0 {
                    return Err(Error::InvalidKernel(format!(
                        "AR(1) coefficient must satisfy |ψ| < 1, got {psi}"
                    )));
                }
            }
            LatentKernel::Tabulated(values) => {
                if let Some(v) = values.iter().find(|v| !v.is_finite() || v.abs() > 1.0) {
                    return Err(Error::InvalidKernel(format!(
                        "correlations must lie in [-1, 1], got {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `R(h)` without validation; callers hold a validated kernel.
    pub fn eval(&self, h: usize) -> f64 {
        if h == 0 {
            return 1.0;
        }
        match self {
            LatentKernel::Ar1(psi) => psi.powi(h.min(i32::MAX as usize) as i32),
            LatentKernel::Tabulated(values) => values.get(h - 1).copied().unwrap_or(0.0),
        }
    }

    /// True when `R(h) = 0` for every `h ≥ 1`.
    pub fn is_white_noise(&self) -> bool {
        match self {
            LatentKernel::Ar1(psi) => *psi == 0.0,
            LatentKernel::Tabulated(values) => values.iter().all(|v| *v == 0.0),
        }
    }
}

/// Evaluates `R(h; ψ)`, rejecting invalid kernels.
pub fn kernel_eval(kernel: &LatentKernel, h: usize) -> Result<f64> {
    kernel.validate()?;
    Ok(kernel.eval(h))
}

/// `b(w) = log(1 + e^w)` and its first three derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkDerivatives {
    pub b: f64,
    /// `ḃ(w) = π`.
    pub b1: f64,
    /// `b̈(w) = π(1 − π)`.
    pub b2: f64,
    /// `b⁽³⁾(w) = π(1 − π)(1 − 2π)`.
    pub b3: f64,
}

/// Logistic function `e^w / (1 + e^w)`, stable for any finite `w`.
#[inline]
pub fn logistic(w: f64) -> f64 {
    if w >= 0.0 {
        1.0 / (1.0 + (-w).exp())
    } else {
        let e = w.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^w)` without overflow.
#[inline]
pub fn log1pexp(w: f64) -> f64 {
    if w > 35.0 {
        w + (-w).exp()
    } else if w < -35.0 {
        w.exp()
    } else {
        w.max(0.0) + (-w.abs()).exp().ln_1p()
    }
}

/// `π(1 − π)` evaluated from `e^{-|w|}` so that it never cancels.
#[inline]
pub fn logistic_variance(w: f64) -> f64 {
    let e = (-w.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

pub fn link_derivatives(w: f64) -> Result<LinkDerivatives> {
    if !w.is_finite() {
        return Err(Error::Domain(format!("link argument must be finite, got {w}")));
    }
    let pi = logistic(w);
    let b2 = logistic_variance(w);
    // 1 − 2π = tanh(−w/2) keeps precision where π is near 1/2 or 1.
    let b3 = b2 * (-0.5 * w).tanh();
    Ok(LinkDerivatives {
        b: log1pexp(w),
        b1: pi,
        b2,
        b3,
    })
}

/// Per-time conditional moments at `τ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMoments {
    /// `π_t = ḃ(x_tᵀβ)`.
    pub pi: Vec<f64>,
    /// `μ_t = m_t π_t`.
    pub mu: Vec<f64>,
    /// `σ_t² = m_t π_t (1 − π_t)`.
    pub sigma2: Vec<f64>,
    /// Unscaled residuals `e_t = y_t − μ_t`.
    pub resid: Vec<f64>,
}

pub fn conditional_moments(series: &ObservationSeries, beta: &[f64]) -> Result<ConditionalMoments> {
    let eta = series.linear_predictor(beta)?;
    let n = series.n();
    let mut out = ConditionalMoments {
        pi: Vec::with_capacity(n),
        mu: Vec::with_capacity(n),
        sigma2: Vec::with_capacity(n),
        resid: Vec::with_capacity(n),
    };
    for (t, &w) in eta.iter().enumerate() {
        let m = f64::from(series.m()[t]);
        let pi = logistic(w);
        let mu = m * pi;
        out.pi.push(pi);
        out.mu.push(mu);
        out.sigma2.push(m * logistic_variance(w));
        out.resid.push(f64::from(series.y()[t]) - mu);
    }
    Ok(out)
}
