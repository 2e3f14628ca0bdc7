//! Box-constrained maximization and bracketing root finding.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximizeOptions {
    pub max_iter: usize,
    /// Convergence when the projected gradient sup-norm drops below this.
    pub grad_tol: f64,
    /// Convergence when a full Newton step moves less than this.
    pub step_tol: f64,
}

impl Default for MaximizeOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-8,
            step_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub argmax: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

const GRAD_STEP: f64 = 6e-6;
const HESS_STEP: f64 = 1e-4;

struct Problem<'a, F> {
    f: F,
    lower: &'a [f64],
    upper: &'a [f64],
}

impl<F: Fn(&[f64]) -> f64> Problem<'_, F> {
    fn eval(&self, x: &[f64]) -> f64 {
        let v = (self.f)(x);
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    }

    fn project(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(self.lower).zip(self.upper) {
            *v = v.clamp(*lo, *hi);
        }
    }

    /// Stencil centre for coordinate `i`, pulled inside the box so that
    /// `centre ± 2h` stays feasible.
    fn centre(&self, x: f64, i: usize, h: f64) -> f64 {
        let (lo, hi) = (self.lower[i], self.upper[i]);
        if hi - lo > 4.0 * h {
            x.clamp(lo + 2.0 * h, hi - 2.0 * h)
        } else {
            x
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut work = x.to_vec();
        (0..x.len())
            .map(|i| {
                let h = GRAD_STEP * x[i].abs().max(1.0);
                let c = self.centre(x[i], i, h);
                work[i] = c + h;
                let up = self.eval(&work);
                work[i] = c - h;
                let dn = self.eval(&work);
                work[i] = x[i];
                (up - dn) / (2.0 * h)
            })
            .collect()
    }

    fn hessian(&self, x: &[f64], idx: &[usize]) -> DMatrix<f64> {
        let k = idx.len();
        let steps: Vec<f64> = idx.iter().map(|&i| HESS_STEP * x[i].abs().max(1.0)).collect();
        let mut c = x.to_vec();
        for (j, &i) in idx.iter().enumerate() {
            c[i] = self.centre(x[i], i, steps[j]);
        }
        let f0 = self.eval(&c);
        let mut h = DMatrix::zeros(k, k);
        let mut work = c.clone();
        for a in 0..k {
            let (ia, ha) = (idx[a], steps[a]);
            work[ia] = c[ia] + ha;
            let up = self.eval(&work);
            work[ia] = c[ia] - ha;
            let dn = self.eval(&work);
            work[ia] = c[ia];
            h[(a, a)] = (up - 2.0 * f0 + dn) / (ha * ha);
            for b in 0..a {
                let (ib, hb) = (idx[b], steps[b]);
                let mut corner = |sa: f64, sb: f64| {
                    work[ia] = c[ia] + sa * ha;
                    work[ib] = c[ib] + sb * hb;
                    let v = self.eval(&work);
                    work[ia] = c[ia];
                    work[ib] = c[ib];
                    v
                };
                let v =
                    (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * ha * hb);
                h[(a, b)] = v;
                h[(b, a)] = v;
            }
        }
        h
    }

    /// Newton step on the free coordinates, or `None` when the Hessian is not
    /// negative definite there.
    fn newton_direction(&self, x: &[f64], free: &[usize], g: &[f64]) -> Option<Vec<f64>> {
        let h = self.hessian(x, free);
        if h.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let chol = (-h).cholesky()?;
        let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));
        let step = chol.solve(&rhs);
        let mut d = vec![0.0; x.len()];
        for (j, &i) in free.iter().enumerate() {
            d[i] = step[j];
        }
        Some(d)
    }

    /// Backtracking along `d` from `x`; returns the first improving point.
    fn line_search(&self, x: &[f64], fx: f64, d: &[f64]) -> Option<(Vec<f64>, f64, f64)> {
        let mut t = 1.0;
        while t > 1e-12 {
            let mut xn: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
            self.project(&mut xn);
            let fnew = self.eval(&xn);
            if fnew > fx {
                return Some((xn, fnew, t));
            }
            t *= 0.5;
        }
        None
    }

    /// Nelder–Mead on the coordinates in `free`, starting from `x`.
    fn simplex(&self, x: &[f64], fx: f64, free: &[usize]) -> (Vec<f64>, f64) {
        let k = free.len();
        if k == 0 {
            return (x.to_vec(), fx);
        }
        let embed = |p: &[f64]| {
            let mut full = x.to_vec();
            for (j, &i) in free.iter().enumerate() {
                full[i] = p[j];
            }
            self.project(&mut full);
            full
        };
        let value = |p: &[f64]| -self.eval(&embed(p));
        let start: Vec<f64> = free.iter().map(|&i| x[i]).collect();
        let mut pts = vec![start.clone()];
        for (j, &i) in free.iter().enumerate() {
            let mut p = start.clone();
            let delta = 0.05 * x[i].abs().max(1.0);
            p[j] += if x[i] + delta <= self.upper[i] { delta } else { -delta };
            pts.push(p);
        }
        let mut vals: Vec<f64> = pts.iter().map(|p| value(p)).collect();
        let max_evals = 200 * (k + 1);
        let mut evals = k + 1;
        while evals < max_evals {
            let mut order: Vec<usize> = (0..=k).collect();
            order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            pts = order.iter().map(|&i| pts[i].clone()).collect();
            vals = order.iter().map(|&i| vals[i]).collect();
            let spread = vals[k] - vals[0];
            let size = pts[1..]
                .iter()
                .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread.abs() <= 1e-12 * (1.0 + vals[0].abs()) && size < 1e-10 {
                break;
            }
            let centroid: Vec<f64> = (0..k)
                .map(|j| pts[..k].iter().map(|p| p[j]).sum::<f64>() / k as f64)
                .collect();
            let along =
                |coef: f64| -> Vec<f64> { centroid.iter().zip(&pts[k]).map(|(c, w)| c + coef * (w - c)).collect() };
            let reflected = along(-1.0);
            let fr = value(&reflected);
            evals += 1;
            if fr < vals[0] {
                let expanded = along(-2.0);
                let fe = value(&expanded);
                evals += 1;
                if fe < fr {
                    pts[k] = expanded;
                    vals[k] = fe;
                } else {
                    pts[k] = reflected;
                    vals[k] = fr;
                }
            } else if fr < vals[k - 1] {
                pts[k] = reflected;
                vals[k] = fr;
            } else {
                let contracted = if fr < vals[k] { along(-0.5) } else { along(0.5) };
                let fc = value(&contracted);
                evals += 1;
                if fc < vals[k].min(fr) {
                    pts[k] = contracted;
                    vals[k] = fc;
                } else {
                    for i in 1..=k {
                        let shrunk: Vec<f64> = pts[i].iter().zip(&pts[0]).map(|(p, b)| b + 0.5 * (p - b)).collect();
                        vals[i] = value(&shrunk);
                        pts[i] = shrunk;
                    }
                    evals += k;
                }
            }
        }
        let best = (0..=k)
            .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
            .expect("simplex is nonempty");
        (embed(&pts[best]), -vals[best])
    }
}

/// Maximizes `objective` over the box `[lower, upper]`.
///
/// Quasi-Newton ascent with finite-difference gradient and Hessian,
/// backtracking and projection onto the box. Coordinates pinned at a bound
/// with the gradient pointing outward are held fixed. When the Hessian on
/// the free coordinates is not negative definite a Nelder–Mead search takes
/// over for that iteration. Hitting the iteration cap returns the best point
/// with `converged = false`.
pub fn maximize<F>(objective: F, init: &[f64], lower: &[f64], upper: &[f64], opts: MaximizeOptions) -> Result<Maximum>
where
    F: Fn(&[f64]) -> f64,
{
    let d = init.len();
    for bound in [lower, upper] {
        if bound.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bound.len(),
            });
        }
    }
    if lower.iter().zip(upper).any(|(lo, hi)| !(lo <= hi)) {
        return Err(Error::Domain("lower bound exceeds upper bound".into()));
    }
    let problem = Problem {
        f: objective,
        lower,
        upper,
    };
    let mut x = init.to_vec();
    problem.project(&mut x);
    let mut fx = problem.eval(&x);
    if !fx.is_finite() {
        return Err(Error::Domain("objective is not finite at the initial point".into()));
    }

    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let g = problem.gradient(&x);
        let free: Vec<usize> = (0..d)
            .filter(|&i| !((x[i] <= lower[i] && g[i] < 0.0) || (x[i] >= upper[i] && g[i] > 0.0)))
            .collect();
        let gnorm = free.iter().map(|&i| g[i].abs()).fold(0.0, f64::max);
        if gnorm < opts.grad_tol {
            converged = true;
            break;
        }

        if let Some(dir) = problem.newton_direction(&x, &free, &g) {
            match problem.line_search(&x, fx, &dir) {
                Some((xn, fnew, t)) => {
                    let step = xn.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                    x = xn;
                    fx = fnew;
                    if t == 1.0 && step < opts.step_tol {
                        converged = true;
                        break;
                    }
                }
                None => {
                    // No improving point along a small Newton step: the
                    // objective is flat to rounding at x.
                    let scale = x.iter().fold(1.0f64, |a, v| a.max(v.abs()));
                    let size = dir.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    converged = size < 1e-6 * scale;
                    break;
                }
            }
            continue;
        }

        let (xs, fs) = problem.simplex(&x, fx, &free);
        if fs > fx {
            x = xs;
            fx = fs;
            continue;
        }
        let ascent: Vec<f64> = (0..d).map(|i| if free.contains(&i) { g[i] } else { 0.0 }).collect();
        match problem.line_search(&x, fx, &ascent) {
            Some((xn, fnew, _)) => {
                x = xn;
                fx = fnew;
            }
            None => break,
        }
    }

    Ok(Maximum {
        argmax: x,
        value: fx,
        converged,
        iterations,
    })
}

/// Central-difference Hessian of `f` at `x`, stencils kept inside the box.
pub fn numerical_hessian<F>(f: F, x: &[f64], lower: &[f64], upper: &[f64]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let problem = Problem { f, lower, upper };
    let idx: Vec<usize> = (0..x.len()).collect();
    problem.hessian(x, &idx)
}

/// Result of [`maximize_scalar`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarMaximum {
    pub argmax: f64,
    pub value: f64,
    pub converged: bool,
    pub evaluations: usize,
}

/// Brent's method (golden section with parabolic steps) for a maximum of
/// `f` on `[lo, hi]`, to an absolute tolerance `tol` in the argument.
pub fn maximize_scalar<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<ScalarMaximum>
where
    F: FnMut(f64) -> f64,
{
    const GOLD: f64 = 0.381_966_011_250_105_1;
    const MAX_EVALS: usize = 200;
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() || !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "invalid interval [{lo}, {hi}] or tolerance {tol}"
        )));
    }
    let (mut a, mut b) = (lo, hi);
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = -f(x);
    if !fx.is_finite() {
        return Err(Error::Domain(format!("objective is not finite at {x}")));
    }
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    let mut evaluations = 1;
    let mut converged = false;
    while evaluations < MAX_EVALS {
        let mid = 0.5 * (a + b);
        let tol1 = tol + 1e-10 * x.abs();
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            converged = true;
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if mid > x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < mid { b - x } else { a - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let u = u.clamp(lo, hi);
        let raw = f(u);
        evaluations += 1;
        let fu = if raw.is_finite() { -raw } else { f64::INFINITY };
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok(ScalarMaximum {
        argmax: x,
        value: -fx,
        converged,
        evaluations,
    })
}

/// Bisection root of `f` on `[lo, hi]`, to `|hi − lo| < tol`.
pub fn find_root<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let (f_lo, f_hi) = (f(lo), f(hi));
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if !(f_lo * f_hi < 0.0) {
        return Err(Error::Bracketing { lo, hi, f_lo, f_hi });
    }
    let lo_negative = f_lo < 0.0;
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
        if mid == lo && mid == hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
