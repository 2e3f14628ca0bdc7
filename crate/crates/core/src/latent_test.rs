//! Step one: score tests of `H₀: τ = 0`.
//!
//! Everything is evaluated at the GLM estimate β̂⁽⁰⁾. For a correlation
//! kernel `R(h; ψ)` the score splits as `S_τ = S_{τ,1} + S_{τ,2}` with
//! `S_{τ,1} = ½ Σ (e_t² − σ_t²)` and `S_{τ,2} = Σ_t e_t Σ_{h≥1} R(h) e_{t−h}`,
//! and its variance as `V_n = V_{n,1} + V_{n,2}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::glm::{info_matrices, GlmFit};
use crate::model::{conditional_moments, LatentKernel, ObservationSeries};
use crate::numerics::{chi2_tail, find_root};

/// Variances at or below this make the statistic degenerate.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;
/// Kernel lags with `|R(h)|` below this are dropped from double sums.
const KERNEL_TRUNCATION: f64 = 1e-12;
/// Lags with `ψ^{2h}` below this are dropped from the Davies sums.
const DAVIES_TRUNCATION: f64 = 1e-14;
const SIMPSON_TOL: f64 = 1e-10;
const SIMPSON_DEPTH: u32 = 48;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupTestResult {
    /// `max_ψ Q̂_τ(ψ)` over the retained grid.
    pub statistic: f64,
    pub argmax_psi: f64,
    /// Retained grid points, in the supplied order.
    pub grid: Vec<f64>,
    /// `Q̂_τ(ψ)` aligned with `grid`.
    pub per_psi: Vec<f64>,
    /// Grid points whose variance was degenerate.
    pub dropped: Vec<f64>,
    /// Davies upper bound on `P(sup > statistic)`.
    pub p_value_davies: f64,
}

/// `−0.9, −0.8, …, 0.9`.
pub fn default_grid() -> Vec<f64> {
    (-9..=9).map(|k| f64::from(k) / 10.0).collect()
}

/// `(S_{τ,1}, S_{τ,2})` from residuals `e_t` and variances `σ_t²`.
pub fn score_from_residuals(e: &[f64], sigma2: &[f64], kernel: &LatentKernel) -> Result<(f64, f64)> {
    if e.len() != sigma2.len() {
        return Err(Error::DimensionMismatch {
            expected: e.len(),
            got: sigma2.len(),
        });
    }
    kernel.validate()?;
    let s1 = 0.5 * e.iter().zip(sigma2).map(|(e, s)| e * e - s).sum::<f64>();
    let s2 = match kernel {
        LatentKernel::Ar1(psi) => {
            let psi = *psi;
            if psi == 0.0 {
                0.0
            } else {
                let mut c = 0.0;
                let mut total = 0.0;
                for t in 1..e.len() {
                    c = psi * (c + e[t - 1]);
                    total += e[t] * c;
                }
                total
            }
        }
        LatentKernel::Tabulated(_) => lagged_sum(e, e, kernel, |r| r),
    };
    Ok((s1, s2))
}

/// `Σ_t a_t Σ_{h=1}^{t−1} g(R(h)) b_{t−h}` for a tabulated kernel.
fn lagged_sum(a: &[f64], b: &[f64], kernel: &LatentKernel, g: impl Fn(f64) -> f64) -> f64 {
    let n = a.len();
    let mut total = 0.0;
    for h in 1..n {
        let r = kernel.eval(h);
        if r.abs() < KERNEL_TRUNCATION {
            if let LatentKernel::Tabulated(values) = kernel {
                if h > values.len() {
                    break;
                }
            }
            continue;
        }
        let w = g(r);
        total += w * (h..n).map(|t| a[t] * b[t - h]).sum::<f64>();
    }
    total
}

/// `(S_{τ,1}, S_{τ,2})` at `(β, τ = 0)`.
pub fn score_tau(series: &ObservationSeries, beta: &[f64], kernel: &LatentKernel) -> Result<(f64, f64)> {
    let mom = conditional_moments(series, beta)?;
    score_from_residuals(&mom.resid, &mom.sigma2, kernel)
}

/// `V_{n,2} = n⁻¹ Σ_t σ_t² Σ_{h≥1} R²(h) σ_{t−h}²`.
fn v_n2(sigma2: &[f64], kernel: &LatentKernel) -> f64 {
    let n = sigma2.len() as f64;
    match kernel {
        LatentKernel::Ar1(psi) => {
            let p2 = psi * psi;
            if p2 == 0.0 {
                return 0.0;
            }
            let mut d = 0.0;
            let mut total = 0.0;
            for t in 1..sigma2.len() {
                d = p2 * (d + sigma2[t - 1]);
                total += sigma2[t] * d;
            }
            total / n
        }
        LatentKernel::Tabulated(_) => lagged_sum(sigma2, sigma2, kernel, |r| r * r) / n,
    }
}

/// `(V_{n,1}, V_{n,2}, V_n)` at `(β, τ = 0)`.
pub fn variance_vn(series: &ObservationSeries, beta: &[f64], kernel: &LatentKernel) -> Result<(f64, f64, f64)> {
    kernel.validate()?;
    let v1 = info_matrices(series, beta)?.v_n1()?;
    let mom = conditional_moments(series, beta)?;
    let v2 = v_n2(&mom.sigma2, kernel);
    Ok((v1, v2, v1 + v2))
}

fn ratio(n: usize, s: f64, v: f64) -> Result<f64> {
    if !(v > DEGENERATE_VARIANCE) {
        return Err(Error::DegenerateStatistic { variance: v });
    }
    Ok(s * s / (n as f64 * v))
}

fn require_converged(fit: &GlmFit) -> Result<()> {
    if fit.converged {
        Ok(())
    } else {
        Err(Error::Domain("the GLM fit did not converge".into()))
    }
}

/// Quantities shared by every ψ: residuals, variances and `V_{n,1}` at β̂⁽⁰⁾.
struct NullFit {
    n: usize,
    resid: Vec<f64>,
    sigma2: Vec<f64>,
    v1: f64,
}

impl NullFit {
    fn new(series: &ObservationSeries, beta: &[f64]) -> Result<Self> {
        let mom = conditional_moments(series, beta)?;
        let v1 = info_matrices(series, beta)?.v_n1()?;
        Ok(Self {
            n: series.n(),
            resid: mom.resid,
            sigma2: mom.sigma2,
            v1,
        })
    }

    fn statistic(&self, kernel: &LatentKernel) -> Result<f64> {
        let (s1, s2) = score_from_residuals(&self.resid, &self.sigma2, kernel)?;
        ratio(self.n, s1 + s2, self.v1 + v_n2(&self.sigma2, kernel))
    }
}

/// `Q̂_τ(ψ) = n⁻¹ S_τ² / V_n` for an AR(1) kernel at β̂⁽⁰⁾.
pub fn q_tau(series: &ObservationSeries, fit: &GlmFit, psi: f64) -> Result<f64> {
    q_tau_kernel(series, fit, &LatentKernel::ar1(psi)?)
}

/// `Q̂_τ` for an arbitrary correlation kernel.
pub fn q_tau_kernel(series: &ObservationSeries, fit: &GlmFit, kernel: &LatentKernel) -> Result<f64> {
    require_converged(fit)?;
    NullFit::new(series, &fit.beta_hat)?.statistic(kernel)
}

/// The fixed-ψ test: `Q̂_τ(ψ)` against `χ²(1)`.
pub fn fixed_psi_latent_test(series: &ObservationSeries, fit: &GlmFit, psi: f64) -> Result<TestResult> {
    let statistic = q_tau(series, fit, psi)?;
    Ok(TestResult {
        statistic,
        df: 1,
        p_value: chi2_tail(statistic, 1)?,
        method: format!("fixed-psi({psi})"),
    })
}

/// `Q̂_τ(0) = n⁻¹ S_{τ,1}² / V_{n,1}` against `χ²(1)`.
pub fn standard_latent_test(series: &ObservationSeries, fit: &GlmFit) -> Result<TestResult> {
    let statistic = q_tau(series, fit, 0.0)?;
    Ok(TestResult {
        statistic,
        df: 1,
        p_value: chi2_tail(statistic, 1)?,
        method: "standard".into(),
    })
}

/// `sup_ψ Q̂_τ(ψ)` over `grid` with the Davies tail bound.
pub fn sup_latent_test(series: &ObservationSeries, fit: &GlmFit, grid: &[f64]) -> Result<SupTestResult> {
    require_converged(fit)?;
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let null = NullFit::new(series, &fit.beta_hat)?;
    let mut kept = Vec::with_capacity(grid.len());
    let mut per_psi = Vec::with_capacity(grid.len());
    let mut dropped = Vec::new();
    for &psi in grid {
        match null.statistic(&LatentKernel::ar1(psi)?) {
            Ok(q) => {
                kept.push(psi);
                per_psi.push(q);
            }
            Err(e) if e.is_statistical_degeneracy() => {
                log::debug!("dropping ψ = {psi} from the grid: {e}");
                dropped.push(psi);
            }
            Err(e) => return Err(e),
        }
    }
    if kept.is_empty() {
        return Err(Error::DegenerateStatistic { variance: null.v1 });
    }
    let mut best = 0;
    for k in 1..kept.len() {
        if prefer(per_psi[k], kept[k], per_psi[best], kept[best]) {
            best = k;
        }
    }
    let statistic = per_psi[best];
    let bound = DaviesBound::from_moments(&null.sigma2, null.v1, grid)?;
    let p_value_davies = bound.tail(statistic, grid)?;
    Ok(SupTestResult {
        statistic,
        argmax_psi: kept[best],
        grid: kept,
        per_psi,
        dropped,
        p_value_davies,
    })
}

/// Larger statistic wins; ties go to smaller `|ψ|`, then to positive ψ.
fn prefer(q: f64, psi: f64, q_best: f64, psi_best: f64) -> bool {
    if q != q_best {
        return q > q_best;
    }
    if psi.abs() != psi_best.abs() {
        return psi.abs() < psi_best.abs();
    }
    psi > psi_best
}

/// The Davies bound `F(u) = P(χ²₁ > u) + π⁻¹ e^{−u/2} ∫ λ(ψ)^{1/2} dψ` for the
/// AR(1) family, with `λ(ψ) = A(ψ)/V(ψ) − B(ψ)²/V(ψ)²`,
/// `A = Σ_h h² ψ^{2(h−1)} C_h`, `B = Σ_h h ψ^{2h−1} C_h`,
/// `V = V_{n,1} + Σ_h ψ^{2h} C_h` and `C_h = n⁻¹ Σ_t σ_t² σ_{t+h}²`.
#[derive(Debug, Clone, PartialEq)]
pub struct DaviesBound {
    v1: f64,
    /// `C_1, C_2, …` up to the truncation lag.
    lag_products: Vec<f64>,
    psi_max: f64,
}

impl DaviesBound {
    pub fn new(series: &ObservationSeries, beta: &[f64], grid: &[f64]) -> Result<Self> {
        let mom = conditional_moments(series, beta)?;
        let v1 = info_matrices(series, beta)?.v_n1()?;
        Self::from_moments(&mom.sigma2, v1, grid)
    }

    /// From the null variances `σ_t²` and `V_{n,1}`; `grid` fixes the lag range.
    pub fn from_moments(sigma2: &[f64], v1: f64, grid: &[f64]) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let psi_max = grid.iter().fold(0.0f64, |acc, p| acc.max(p.abs()));
        if !(psi_max < 1.0) {
            return Err(Error::InvalidKernel(format!(
                "grid must lie inside (-1, 1), got |ψ| = {psi_max}"
            )));
        }
        let n = sigma2.len();
        let h_max = if psi_max == 0.0 {
            1
        } else {
            (DAVIES_TRUNCATION.ln() / (2.0 * psi_max.ln())).ceil() as usize + 1
        }
        .min(n.saturating_sub(1));
        let lag_products = (1..=h_max)
            .map(|h| (0..n - h).map(|t| sigma2[t] * sigma2[t + h]).sum::<f64>() / n as f64)
            .collect();
        Ok(Self {
            v1,
            lag_products,
            psi_max,
        })
    }

    /// `V_n(ψ) = V_{n,1} + V_{n,2}(ψ)`.
    pub fn variance(&self, psi: f64) -> f64 {
        let p2 = psi * psi;
        let mut pow = p2;
        let mut v2 = 0.0;
        for c in &self.lag_products {
            v2 += pow * c;
            pow *= p2;
        }
        self.v1 + v2
    }

    /// `λ(ψ)`, the variance of the derivative of the standardized score process.
    pub fn lambda(&self, psi: f64) -> Result<f64> {
        if !(psi.abs() <= self.psi_max) {
            return Err(Error::Domain(format!(
                "ψ = {psi} lies outside the grid range ±{}",
                self.psi_max
            )));
        }
        let v = self.variance(psi);
        if !(v > DEGENERATE_VARIANCE) {
            return Err(Error::DegenerateStatistic { variance: v });
        }
        let p2 = psi * psi;
        let (mut a, mut b) = (0.0, 0.0);
        let mut pow = 1.0; // ψ^{2(h−1)}
        for (i, c) in self.lag_products.iter().enumerate() {
            let h = (i + 1) as f64;
            a += h * h * pow * c;
            b += h * pow * psi * c;
            pow *= p2;
        }
        let lambda = a / v - (b / v).powi(2);
        if lambda < -1e-10 {
            return Err(Error::NumericalInconsistency(format!(
                "λ({psi}) = {lambda:e} is negative"
            )));
        }
        Ok(lambda.max(0.0))
    }

    /// `∫ λ(ψ)^{1/2} dψ` over `[min grid, max grid]`, adaptively refined
    /// between consecutive grid points.
    pub fn integral(&self, grid: &[f64]) -> Result<f64> {
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let mut pts = grid.to_vec();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let f = |psi: f64| self.lambda(psi).map(f64::sqrt);
        let mut total = 0.0;
        for w in pts.windows(2) {
            total += adaptive_simpson(&f, w[0], w[1])?;
        }
        Ok(total)
    }

    /// `F(u)`, clipped to 1.
    pub fn tail(&self, u: f64, grid: &[f64]) -> Result<f64> {
        let integral = self.integral(grid)?;
        Self::tail_from_integral(u, integral)
    }

    fn tail_from_integral(u: f64, integral: f64) -> Result<f64> {
        let bound = chi2_tail(u, 1)? + (-u / 2.0).exp() * integral / std::f64::consts::PI;
        Ok(bound.min(1.0))
    }

    /// The `u` with `F(u) = α`, by bisection on `[0, 100]`.
    pub fn quantile(&self, alpha: f64, grid: &[f64]) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Domain(format!("α must lie in (0, 1), got {alpha}")));
        }
        let integral = self.integral(grid)?;
        find_root(
            |u| Self::tail_from_integral(u, integral).map_or(f64::NAN, |p| p - alpha),
            0.0,
            100.0,
            1e-10,
        )
    }
}

fn adaptive_simpson<F>(f: &F, a: f64, b: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (fa, fb) = (f(a)?, f(b)?);
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, SIMPSON_TOL, SIMPSON_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm)?, f(rm)?);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
}

/// `λ(ψ)` at β.
pub fn davies_lambda(series: &ObservationSeries, beta: &[f64], psi: f64) -> Result<f64> {
    DaviesBound::new(series, beta, &[psi])?.lambda(psi)
}

pub fn davies_tail(u: f64, series: &ObservationSeries, beta: &[f64], grid: &[f64]) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::Domain(format!("u must be nonnegative, got {u}")));
    }
    DaviesBound::new(series, beta, grid)?.tail(u, grid)
}

pub fn davies_quantile(alpha: f64, series: &ObservationSeries, beta: &[f64], grid: &[f64]) -> Result<f64> {
    DaviesBound::new(series, beta, grid)?.quantile(alpha, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::fit_glm;
    use crate::model::Design;
    use approx::assert_abs_diff_eq;

    fn direct_s2(e: &[f64], psi: f64) -> f64 {
        let mut total = 0.0;
        for t in 0..e.len() {
            for s in 0..t {
                total += e[t] * psi.powi((t - s) as i32) * e[s];
            }
        }
        total
    }

    #[test]
    fn hand_example() {
        let e = [1.0, -1.0, 2.0];
        let (s1, s2) = score_from_residuals(&e, &[0.25; 3], &LatentKernel::Ar1(0.5)).unwrap();
        assert_abs_diff_eq!(s1, 2.625, epsilon = 1e-15);
        assert_abs_diff_eq!(s2, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn white_noise_has_no_cross_term() {
        let e = [0.3, -1.2, 0.8, 0.1];
        let (_, s2) = score_from_residuals(&e, &[0.2; 4], &LatentKernel::Ar1(0.0)).unwrap();
        assert_eq!(s2, 0.0);
        assert_eq!(v_n2(&[0.2; 4], &LatentKernel::Ar1(0.0)), 0.0);
    }

    #[test]
    fn recursion_matches_double_sum() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in [2, 17, 200, 500] {
            let e: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            for psi in [-0.9, -0.3, 0.3, 0.9] {
                let (_, s2) = score_from_residuals(&e, &vec![0.1; n], &LatentKernel::Ar1(psi)).unwrap();
                let direct = direct_s2(&e, psi);
                assert!((s2 - direct).abs() <= 1e-10 * (1.0 + direct.abs()), "n={n} ψ={psi}");
                let table: Vec<f64> = (1..n).map(|h| psi.powi(h as i32)).collect();
                let (_, s2t) = score_from_residuals(&e, &vec![0.1; n], &LatentKernel::Tabulated(table)).unwrap();
                assert!((s2t - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
            }
        }
    }

    #[test]
    fn variance_recursion_matches_double_sum() {
        let sigma2: Vec<f64> = (0..50).map(|t| 0.1 + 0.003 * t as f64).collect();
        let psi: f64 = 0.7;
        let mut direct = 0.0;
        for t in 0..50 {
            for s in 0..t {
                direct += sigma2[t] * psi.powi(2 * (t - s) as i32) * sigma2[s];
            }
        }
        assert_abs_diff_eq!(v_n2(&sigma2, &LatentKernel::Ar1(psi)), direct / 50.0, epsilon = 1e-14);
        let bound = DaviesBound::from_moments(&sigma2, 0.0, &[psi]).unwrap();
        assert_abs_diff_eq!(bound.variance(psi), direct / 50.0, epsilon = 1e-14);
    }

    #[test]
    fn binary_symmetric_intercept_is_degenerate() {
        let s = ObservationSeries::new(vec![0, 1, 1, 0, 1, 0], vec![1; 6], vec![vec![1.0]; 6]).unwrap();
        let fit = fit_glm(&s).unwrap();
        assert!(matches!(q_tau(&s, &fit, 0.0), Err(Error::DegenerateStatistic { .. })));
    }

    #[test]
    fn lambda_at_zero_hand_value() {
        let d = Design::new(vec![2; 200], vec![vec![1.0]; 200]).unwrap();
        let s = d.with_responses(vec![1; 200]).unwrap();
        let info = info_matrices(&s, &[0.0]).unwrap();
        let v1 = info.v_n1().unwrap();
        let lam = davies_lambda(&s, &[0.0], 0.0).unwrap();
        assert_abs_diff_eq!(lam, 199.0 * 0.25 / (200.0 * v1), epsilon = 1e-12);
        // σ² = ½ everywhere and J_n = 0, so V_{n,1} = K_n.
        assert_abs_diff_eq!(v1, 0.5 * (1.0 + (2.0 - 3.0) * 0.5) / 4.0, epsilon = 1e-15);
    }

    fn trend_series(m: u32) -> ObservationSeries {
        Design::linear_trend(200, m)
            .unwrap()
            .with_responses(vec![0; 200])
            .unwrap()
    }

    #[test]
    fn lambda_symmetric_and_continuous() {
        let s = trend_series(1);
        let grid = default_grid();
        let bound = DaviesBound::new(&s, &[1.0, 2.0], &grid).unwrap();
        for &psi in &grid {
            assert_abs_diff_eq!(bound.lambda(psi).unwrap(), bound.lambda(-psi).unwrap(), epsilon = 1e-9);
        }
        assert!((bound.lambda(0.5).unwrap() - bound.lambda(0.5001).unwrap()).abs() < 1e-3);
    }

    #[test]
    fn tail_properties() {
        let s = trend_series(2);
        let beta = [1.0, 2.0];
        let grid = default_grid();
        assert_abs_diff_eq!(
            davies_tail(3.0, &s, &beta, &[0.0]).unwrap(),
            chi2_tail(3.0, 1).unwrap(),
            epsilon = 1e-15
        );
        let bound = DaviesBound::new(&s, &beta, &grid).unwrap();
        let mut last = 1.0;
        for k in 1..40 {
            let f = bound.tail(f64::from(k) * 0.5, &grid).unwrap();
            assert!(f <= last);
            last = f;
        }
        let narrow = bound.tail(6.0, &grid[5..14]).unwrap();
        assert!(narrow < bound.tail(6.0, &grid).unwrap());
        let q = bound.quantile(0.05, &grid).unwrap();
        assert_abs_diff_eq!(bound.tail(q, &grid).unwrap(), 0.05, epsilon = 1e-8);
        assert!(matches!(davies_tail(1.0, &s, &beta, &[]), Err(Error::EmptyGrid)));
    }

    #[test]
    fn sup_test_structure() {
        let design = Design::linear_trend(120, 2).unwrap();
        let y = (0..120).map(|t| [0, 1, 2, 2, 1, 2][t % 6]).collect();
        let s = design.with_responses(y).unwrap();
        let fit = fit_glm(&s).unwrap();
        let grid = default_grid();
        let sup = sup_latent_test(&s, &fit, &grid).unwrap();
        let max = sup.per_psi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(sup.statistic, max);
        assert!(sup.p_value_davies >= chi2_tail(sup.statistic, 1).unwrap());
        let sub = sup_latent_test(&s, &fit, &grid[3..12]).unwrap();
        assert!(sub.statistic <= sup.statistic);
        let std = standard_latent_test(&s, &fit).unwrap();
        let at_zero = sup.grid.iter().position(|p| *p == 0.0).unwrap();
        assert_abs_diff_eq!(sup.per_psi[at_zero], std.statistic, epsilon = 1e-14);
    }

    #[test]
    fn ties_prefer_small_then_positive() {
        assert!(prefer(1.0, 0.1, 1.0, 0.2));
        assert!(prefer(1.0, 0.2, 1.0, -0.2));
        assert!(!prefer(1.0, -0.2, 1.0, 0.2));
        assert!(prefer(1.1, 0.9, 1.0, 0.0));
    }
}
