use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{logistic, Design, ObservationSeries};
use crate::numerics::{RandomSource, StreamRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trials {
    Constant(u32),
    PerTime(Vec<u32>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regression {
    /// `x_t = (1, t/n)`.
    LinearTrend { beta: Vec<f64> },
    /// User-supplied regressor rows.
    Design { rows: Vec<Vec<f64>>, beta: Vec<f64> },
}

/// How `τ` scales the latent AR(1) path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LatentScaling {
    /// `Var(α_t) = τ`: innovations have variance `τ(1 − φ²)`.
    #[default]
    MarginalVariance,
    /// `α_t = √τ α̃_t` with `α̃_t = φ α̃_{t−1} + ε_t`, `ε_t ~ N(0, 1)`,
    /// so `Var(α_t) = τ / (1 − φ²)`.
    UnitInnovation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentSpec {
    pub tau: f64,
    pub phi: f64,
    #[serde(default)]
    pub scaling: LatentScaling,
}

impl LatentSpec {
    pub fn none() -> Self {
        Self {
            tau: 0.0,
            phi: 0.0,
            scaling: LatentScaling::MarginalVariance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "τ must be finite and nonnegative, got {}",
                self.tau
            )));
        }
        if !(self.phi.abs() < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "φ must satisfy |φ| < 1, got {}",
                self.phi
            )));
        }
        Ok(())
    }
}

/// Data-generating process: `W_t = x_tᵀβ + α_t`, `Y_t | α_t ~ B(m_t, ḃ(W_t))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub n: usize,
    pub trials: Trials,
    pub regression: Regression,
    pub latent: LatentSpec,
    pub seed: u64,
}

impl DgpSpec {
    /// The design used in the simulation tables: `x_t = (1, t/n)`, constant `m`.
    pub fn linear_trend(n: usize, m: u32, beta: Vec<f64>, latent: LatentSpec, seed: u64) -> Self {
        Self {
            n,
            trials: Trials::Constant(m),
            regression: Regression::LinearTrend { beta },
            latent,
            seed,
        }
    }

    pub fn beta(&self) -> &[f64] {
        match &self.regression {
            Regression::LinearTrend { beta } | Regression::Design { beta, .. } => beta,
        }
    }

    pub fn design(&self) -> Result<Design> {
        let m = match &self.trials {
            Trials::Constant(m) => vec![*m; self.n],
            Trials::PerTime(m) => {
                if m.len() != self.n {
                    return Err(Error::DimensionMismatch {
                        expected: self.n,
                        got: m.len(),
                    });
                }
                m.clone()
            }
        };
        let design = match &self.regression {
            Regression::LinearTrend { beta } => {
                if beta.len() != 2 {
                    return Err(Error::DimensionMismatch {
                        expected: 2,
                        got: beta.len(),
                    });
                }
                let rows = (1..=self.n).map(|t| vec![1.0, t as f64 / self.n as f64]).collect();
                Design::new(m, rows)?
            }
            Regression::Design { rows, beta } => {
                let design = Design::new(m, rows.clone())?;
                if design.r() != beta.len() {
                    return Err(Error::DimensionMismatch {
                        expected: design.r(),
                        got: beta.len(),
                    });
                }
                design
            }
        };
        Ok(design)
    }

    pub fn validate(&self) -> Result<()> {
        self.latent.validate()?;
        self.design().map(|_| ())
    }
}

/// A stationary latent path `α_1, …, α_n` for `latent`.
pub fn simulate_latent_path(n: usize, latent: &LatentSpec, rng: &mut StreamRng) -> Vec<f64> {
    if latent.tau == 0.0 {
        return vec![0.0; n];
    }
    let sd = latent.tau.sqrt();
    let phi = latent.phi;
    let (start_sd, innovation_sd) = match latent.scaling {
        LatentScaling::MarginalVariance => (1.0, (1.0 - phi * phi).sqrt()),
        LatentScaling::UnitInnovation => (1.0 / (1.0 - phi * phi).sqrt(), 1.0),
    };
    let mut path = Vec::with_capacity(n);
    let mut a = start_sd * rng.normal();
    for t in 0..n {
        if t > 0 {
            a = phi * a + innovation_sd * rng.normal();
        }
        path.push(sd * a);
    }
    path
}

/// Responses drawn over `design` with linear predictor `x_tᵀβ + α_t`.
pub fn simulate_on_design(
    design: &Design,
    beta: &[f64],
    latent: &LatentSpec,
    rs: &RandomSource,
) -> Result<ObservationSeries> {
    latent.validate()?;
    let eta = design.linear_predictor(beta)?;
    let mut rng = rs.rng();
    let alpha = simulate_latent_path(design.n(), latent, &mut rng);
    let y = eta
        .iter()
        .zip(&alpha)
        .zip(design.m())
        .map(|((e, a), &m)| rng.binomial(m, logistic(e + a)))
        .collect();
    design.with_responses(y)
}

/// One draw from `spec` on the stream `rs`.
pub fn simulate_series(spec: &DgpSpec, rs: &RandomSource) -> Result<ObservationSeries> {
    spec.latent.validate()?;
    simulate_on_design(&spec.design()?, spec.beta(), &spec.latent, rs)
}
