//! Asymptotic model for the zeros beyond the truncation point.
//!
//! Far out, the zeros split into two branches lambda = u_m^2 / w_k with
//! u_m = pi m + phi_k + beta_k / m. The missing factors of branch k contribute
//! sum_{m > M_k} ln(1 - lambda w_k / u_m^2), evaluated with Euler-Maclaurin.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use std::f64::consts::PI;

/// Zeros per branch used to fit the model.
pub const FIT_WINDOW: usize = 20;
/// Relative angular gap below which a zero cannot be assigned to a branch.
pub const AMBIGUITY_GAP: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchTail {
    pub w: C64,
    /// Index of the last computed zero on this branch.
    pub last_index: usize,
    /// (phi, beta, gamma) of u_m = pi m + phi + beta/m + gamma/m^2.
    pub coef: [C64; 3],
    /// Two-term fit (gamma = 0); the spread between the fits is the error estimate.
    pub coef_alt: [C64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TailModel {
    pub branches: [BranchTail; 2],
}

/// Angular distance of `lambda` from branch k, |arg(w_k lambda)|.
fn branch_angle(w: C64, lambda: C64) -> f64 {
    (w * lambda).arg().abs()
}

/// Branch index (0 or 1) of a zero, and whether the assignment is clear.
pub fn classify(w: [C64; 2], lambda: C64) -> (usize, bool) {
    if lambda.norm() == 0.0 {
        return (0, false);
    }
    let a = [branch_angle(w[0], lambda), branch_angle(w[1], lambda)];
    let k = if a[0] <= a[1] { 0 } else { 1 };
    let gap = (a[0] - a[1]).abs() / a[0].max(a[1]);
    (k, gap >= AMBIGUITY_GAP)
}

/// Least squares for y_m = sum_j coef_j m^{-j}, j < terms.
fn fit_offset(ms: &[f64], ys: &[C64], terms: usize) -> [C64; 3] {
    let a = nalgebra::DMatrix::from_fn(ms.len(), terms, |i, j| C64::new(ms[i].powi(-(j as i32)), 0.0));
    let b = nalgebra::DVector::from_column_slice(ys);
    let mut out = [C64::new(0.0, 0.0); 3];
    if let Ok(x) = a.svd(true, true).solve(&b, 1e-14) {
        out[..terms].copy_from_slice(x.as_slice());
    }
    out
}

fn model_u(coef: &[C64; 3], m: f64) -> C64 {
    PI * m + coef[0] + coef[1] / m + coef[2] / (m * m)
}

impl TailModel {
    /// Fits both branches from zeros sorted by modulus.
    pub fn fit(zeros: &[C64], w: [C64; 2]) -> Result<TailModel> {
        let mut per: [Vec<(C64, bool)>; 2] = [vec![], vec![]];
        for &z in zeros {
            let (k, clear) = classify(w, z);
            per[k].push((z, clear));
        }
        let mut out = vec![];
        for k in 0..2 {
            let zs = &per[k];
            let m_last = zs.len();
            if m_last < 4 {
                return Err(Error::Convergence(format!(
                    "only {m_last} zeros on branch {}; the tail model needs at least 4",
                    k + 1
                )));
            }
            let window = &zs[m_last.saturating_sub(FIT_WINDOW)..];
            if window.iter().any(|(_, clear)| !clear) {
                return Err(Error::Convergence(format!(
                    "branch assignment of the largest zeros is ambiguous (gap below {AMBIGUITY_GAP})"
                )));
            }
            let first = m_last - window.len() + 1;
            let ms: Vec<f64> = (first..=m_last).map(|m| m as f64).collect();
            let ys: Vec<C64> = window
                .iter()
                .zip(&ms)
                .map(|((z, _), m)| (w[k] * z).sqrt() - PI * m)
                .collect();
            let terms = if ys.len() >= 8 { 3 } else { 2 };
            out.push(BranchTail {
                w: w[k],
                last_index: m_last,
                coef: fit_offset(&ms, &ys, terms),
                coef_alt: fit_offset(&ms, &ys, terms - 1),
            });
        }
        Ok(TailModel { branches: [out[0], out[1]] })
    }

    /// ln of the missing factors at `lambda`, and an error estimate.
    pub fn log_tail(&self, lambda: C64) -> (C64, f64) {
        let mut total = C64::new(0.0, 0.0);
        let mut err = 0.0;
        for b in &self.branches {
            let c = lambda * b.w;
            let main = model_sum(c, &b.coef, b.last_index);
            let alt = model_sum(c, &b.coef_alt, b.last_index);
            total += main;
            err += (main - alt).norm();
        }
        (total, err)
    }
}

/// sum_{m > last} ln(1 - c / u_m^2) for the fitted u_m: the next `last` terms
/// directly, then the remainder with the 1/m terms frozen at m = 2 last plus
/// the leading correction for freezing beta, -c beta / (3 pi^3 M^3).
fn model_sum(c: C64, coef: &[C64; 3], last: usize) -> C64 {
    let one = C64::new(1.0, 0.0);
    let big = 2 * last;
    let head: C64 = (last + 1..=big).map(|m| (one - c / model_u(coef, m as f64).powi(2)).ln()).sum();
    let mb = big as f64;
    head + branch_sum(c, model_u(coef, mb)) - c * coef[1] / (3.0 * PI.powi(3) * mb.powi(3))
}

/// sum_{m >= 1} ln(1 - c / (u0 + pi m)^2): leading terms directly until
/// |sqrt(c) / u| < 1/2, the rest by Euler-Maclaurin.
pub fn branch_sum(c: C64, u0: C64) -> C64 {
    let one = C64::new(1.0, 0.0);
    let a_abs = c.norm().sqrt();
    let k = ((2.0 * a_abs - u0.norm()) / PI).ceil().clamp(0.0, 1e7) as usize;
    let head: C64 = (1..=k).map(|m| (one - c / (u0 + PI * m as f64).powi(2)).ln()).sum();
    head + branch_sum_far(c, u0 + PI * k as f64)
}

fn branch_sum_far(c: C64, u0: C64) -> C64 {
    let ratio = c / (u0 * u0);
    // (1/pi) * integral of ln(1 - c/u^2) from u0 to infinity
    // = -(1/pi) sum_j c^j u0^{1-2j} / (j (2j - 1))
    let mut integral = C64::new(0.0, 0.0);
    let mut pow = u0;
    for j in 1..200 {
        pow *= ratio;
        let jf = j as f64;
        let t = pow / (jf * (2.0 * jf - 1.0));
        integral -= t;
        if t.norm() <= 1e-18 * integral.norm().max(1e-300) {
            break;
        }
    }
    let integral = integral / PI;
    // f(m) = ln(u - a) + ln(u + a) - 2 ln(u), u = u0 + pi (m - M), a = sqrt(c)
    let a = c.sqrt();
    let deriv = |k: i32| {
        let fact: f64 = (1..k).map(f64::from).product();
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let s = (u0 - a).powi(-k) + (u0 + a).powi(-k) - 2.0 * u0.powi(-k);
        s * (sign * fact * PI.powi(k))
    };
    let f0 = (C64::new(1.0, 0.0) - ratio).ln();
    integral - f0 / 2.0 - deriv(1) / 12.0 + deriv(3) / 720.0 - deriv(5) / 30240.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn branch_sum_matches_direct_summation() {
        let cases = [
            (c(50.0, 3.0), c(300.0, 0.2)),
            (c(-400.0, 10.0), c(90.0, -0.5)),
            (c(0.0, 2000.0), c(70.0, 0.0)),
            (c(3000.0, 100.0), c(60.0, 0.3)),
        ];
        for (cc, u0) in cases {
            let k = 200_000;
            let head: C64 = (1..=k).map(|m| (C64::new(1.0, 0.0) - cc / (u0 + PI * m as f64).powi(2)).ln()).sum();
            // remaining terms ~ -c / u^2, summed as an integral from the midpoint
            let direct = head - cc / (PI * (u0 + PI * (k as f64 + 0.5)));
            let got = branch_sum(cc, u0);
            assert!((got - direct).norm() < 1e-9 * direct.norm().max(1e-6) + 1e-9, "{got} {direct}");
        }
    }

    #[test]
    fn fit_recovers_offsets() {
        let w = [c(1.0, 0.0), c(-1.0, 0.0)];
        let mut zeros = vec![];
        for m in 1..=40 {
            let mf = m as f64;
            let u1 = PI * mf - PI / 2.0 + 0.3 / mf;
            let u2 = PI * mf + 0.1 - 0.2 / mf;
            zeros.push(u1 * u1 / w[0]);
            zeros.push(C64::new(u2 * u2, 0.0) / w[1]);
        }
        zeros.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        let t = TailModel::fit(&zeros, w).unwrap();
        assert!((t.branches[0].coef[0] + PI / 2.0).norm() < 1e-10);
        assert!((t.branches[0].coef[1] - 0.3).norm() < 1e-8);
        assert!((t.branches[1].coef[0] - 0.1).norm() < 1e-10);
        assert_eq!(t.branches[1].last_index, 40);
    }

    #[test]
    fn ambiguous_branch_is_an_error() {
        let w = [c(1.0, 0.0), c(-1.0, 0.0)];
        let zeros: Vec<C64> = (1..30).map(|m| c(0.0, (m * m) as f64)).collect();
        assert!(matches!(TailModel::fit(&zeros, w), Err(Error::Convergence(_))));
    }
}
