//! Numerical kernels shared by the estimators and tests.

mod chi2;
mod optimize;
mod quadrature;
mod random;

pub use chi2::{chi2_quantile, chi2_tail};
pub use optimize::{find_root, maximize, maximize_scalar, numerical_hessian, MaximizeOptions, Maximum, ScalarMaximum};
pub use quadrature::{
    gaussian_expectation, gaussian_expectation_checked, CheckedExpectation, QuadratureRule, DEFAULT_NODES,
};
pub use random::{RandomSource, StreamRng};

/// Empirical quantile with linear interpolation between order statistics
/// (the "type 7" definition). `values` must be sorted ascending.
pub fn sorted_quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let h = (values.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    values[lo] + (h - lo as f64) * (values[hi] - values[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(sorted_quantile(&v, 0.5), 3.0);
        assert_eq!(sorted_quantile(&v, 0.9), 4.6);
        assert_eq!(sorted_quantile(&v, 0.0), 1.0);
        assert_eq!(sorted_quantile(&v, 1.0), 5.0);
    }
}
