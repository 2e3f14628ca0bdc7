use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

/// Upper-tail probability `P(χ²_df > u)`.
pub fn chi2_tail(u: f64, df: u32) -> Result<f64> {
    if df == 0 {
        return Err(Error::Domain("χ² degrees of freedom must be positive".into()));
    }
    if u.is_nan() || u < 0.0 {
        return Err(Error::Domain(format!("χ² argument must be nonnegative, got {u}")));
    }
    if u == 0.0 {
        return Ok(1.0);
    }
    if u.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_ur(0.5 * f64::from(df), 0.5 * u))
}

/// `u` with `P(χ²_df > u) = p`, by bisection on the tail function.
pub fn chi2_quantile(p: f64, df: u32) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("tail probability must lie in (0, 1), got {p}")));
    }
    let tail = |u: f64| chi2_tail(u, df);
    let mut hi = f64::from(df).max(1.0);
    while tail(hi)? > p {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if tail(mid)? > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
