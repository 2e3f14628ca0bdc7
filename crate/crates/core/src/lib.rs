//! Score tests for binomial time series driven by a latent Gaussian process.
//!
//! The workflow is two-step. First test whether a latent process exists at all
//! (`τ = 0`) with [`latent_test::standard_latent_test`] or the supremum test
//! [`latent_test::sup_latent_test`], whose tail probability is bounded with
//! the Davies up-crossing bound. If a latent process is detected and the
//! marginal fit ([`marginal::fit_marginal`]) has `τ̂ > 0`, test the latent
//! process for serial dependence with [`serial_test::serial_dependence_test`].
//!
//! [`simulation`] holds the data-generating processes and Monte Carlo
//! experiment runners used to calibrate those tests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod error;
pub mod glm;
pub mod latent_test;
pub mod marginal;
pub mod model;
pub mod numerics;
pub mod simulation;

pub use error::{Error, Result};
pub use glm::{fit_glm, GlmFit, InfoMatrices};
pub use latent_test::{SupTestResult, TestResult};
pub use marginal::{fit_marginal, MarginalFit};
pub use model::{Design, LatentKernel, ModelParams, ObservationSeries};
pub use serial_test::SerialTestResult;
