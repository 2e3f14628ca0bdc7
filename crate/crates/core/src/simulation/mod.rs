//! Data-generating processes and Monte Carlo experiments.
//!
//! Every replicate draws from its own stream keyed by `(seed, cell, rep)`,
//! so reports are identical for any worker count.

mod dgp;
mod experiments;

pub use dgp::{
    simulate_latent_path, simulate_on_design, simulate_series, DgpSpec, LatentScaling, LatentSpec, Regression, Trials,
};
pub use experiments::{
    proportion_se, run_null_quantiles, run_power_curve, run_replicates, run_two_step_table, simulate_latent_null,
    theoretical_quantiles, ExperimentReport, NullCell, NullQuantilesCell, NullQuantilesConfig, PowerConfig, PowerCurve,
    PowerPoint, SimulatedLatentNull, StepOneTable, StepTwoTable, TwoStepConfig, TwoStepTable,
};
