//! Characteristic functions rebuilt from their zeros:
//! Delta(lambda) = c prod (1 - lambda / lambda_n), with c taken from the ray
//! asymptotics of Delta and Delta_jk.

pub mod tail;

pub use tail::{BranchTail, TailModel};

use crate::error::{Error, Result};
use crate::linalg::I;
use crate::problem::{BoundaryVariant, Ray, SectorGeometry};
use crate::spectral::Spectrum;
use num_complex::Complex64 as C64;
use std::fmt::Write;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayOptions {
    pub r0: f64,
    pub r1: f64,
    pub samples: usize,
}

impl Default for RayOptions {
    fn default() -> Self {
        RayOptions { r0: 12.0, r1: 45.0, samples: 8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HadamardOptions {
    /// Number of zeros used; all when `None`.
    pub truncation: Option<usize>,
    pub tail: bool,
    /// Index into the geometry's special rays used for the constant.
    pub ray: usize,
    pub ray_opts: RayOptions,
}

impl Default for HadamardOptions {
    fn default() -> Self {
        HadamardOptions { truncation: None, tail: true, ray: 0, ray_opts: RayOptions::default() }
    }
}

/// Extrapolated limit along one ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayLimit {
    pub ray: f64,
    pub value: C64,
    pub err: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HadamardProduct {
    pub variant: BoundaryVariant,
    /// Zeros used, repeated by multiplicity, ordered by modulus.
    pub zeros: Vec<C64>,
    pub shift: C64,
    pub constant: C64,
    pub constant_err: f64,
    pub truncation: usize,
    pub tail: Option<TailModel>,
    pub ray: f64,
}

/// Leading ray asymptotics of each characteristic function:
/// Delta ~ -E / (4 i rho d2), Delta_jk ~ alpha_jk E / 8 with
/// E = exp(i rho (d1 + d2)), alpha_jj = d1/d2 + 1, alpha_jk = d1/d2 - 1 (j != k).
pub fn log_asymptotic(variant: BoundaryVariant, d: [C64; 2], rho: C64) -> C64 {
    let [d1, d2] = d;
    let le = I * rho * (d1 + d2);
    let pre = match variant {
        BoundaryVariant::L => -C64::new(1.0, 0.0) / (4.0 * I * rho * d2),
        BoundaryVariant::L11 | BoundaryVariant::L22 => (d1 / d2 + 1.0) / 8.0,
        BoundaryVariant::L12 | BoundaryVariant::L21 => (d1 / d2 - 1.0) / 8.0,
    };
    le + pre.ln()
}

/// ln prod (1 - (lambda - s)/(lambda_n - s)) over `zeros` plus the tail, and
/// an error estimate for the tail part. `None` when lambda is a stored zero.
pub fn log_product(zeros: &[C64], shift: C64, tail: Option<&TailModel>, lambda: C64) -> Option<(C64, f64)> {
    if zeros.contains(&lambda) {
        return None;
    }
    let one = C64::new(1.0, 0.0);
    let mut s: C64 = zeros.iter().map(|&z| (one - (lambda - shift) / (z - shift)).ln()).sum();
    let mut err = 0.0;
    if let Some(t) = tail {
        let (a, ea) = t.log_tail(lambda);
        let (b, eb) = if shift == C64::new(0.0, 0.0) { (C64::new(0.0, 0.0), 0.0) } else { t.log_tail(shift) };
        s += a - b;
        err = ea + eb;
    }
    Some((s, err))
}

/// Limit at x = 0 of samples (x_i, y_i) by Neville extrapolation, choosing the
/// order whose estimate changes least from the previous order.
pub fn neville_at_zero(xs: &[f64], ys: &[C64]) -> (C64, f64) {
    let n = xs.len();
    let mut t: Vec<C64> = ys.to_vec();
    let mut diag = vec![ys[n - 1]];
    // t[i] holds the interpolant through points i..i+k evaluated at 0
    for k in 1..n {
        for i in 0..n - k {
            let (xi, xk) = (xs[i], xs[i + k]);
            t[i] = (t[i + 1] * xi - t[i] * xk) / (xi - xk);
        }
        diag.push(t[n - 1 - k]);
    }
    // Order with the smallest change; the error is the larger of its two
    // neighbouring changes, doubled, since one small step can be a fluke.
    let step = |k: usize| (diag[k] - diag[k - 1]).norm();
    let k = (1..n).min_by(|&a, &b| step(a).total_cmp(&step(b))).unwrap_or(n - 1);
    let next = if k + 1 < n { step(k + 1) } else { step(k) };
    (diag[k], 2.0 * step(k).max(next))
}

fn zeros_used(spectrum: &Spectrum, truncation: Option<usize>) -> Vec<C64> {
    let n = truncation.unwrap_or(usize::MAX);
    spectrum.smallest(n)
}

/// Relative accuracy assumed for stored zeros; it propagates into ln prod
/// through sum |lambda - s| / |lambda_n - lambda|.
pub const ZERO_REL_ACC: f64 = 1e-11;

/// c = lim (asymptotic form of Delta)(rho^2) / prod(rho^2) along `ray`.
pub fn ray_limit_constant(
    zeros: &[C64],
    shift: C64,
    tail: Option<&TailModel>,
    variant: BoundaryVariant,
    ray: &Ray,
    opts: &RayOptions,
) -> Result<RayLimit> {
    if opts.samples < 3 || !(opts.r1 > opts.r0 && opts.r0 > 0.0) {
        return Err(Error::Usage("ray sampling needs r1 > r0 > 0 and at least 3 samples".into()));
    }
    let n = opts.samples;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut tail_err: f64 = 0.0;
    for i in 0..n {
        let r = opts.r0 * (opts.r1 / opts.r0).powf(i as f64 / (n - 1) as f64);
        let rho = C64::from_polar(r, ray.angle);
        let (lp, e) = log_product(zeros, shift, tail, rho * rho)
            .ok_or_else(|| Error::Convergence("ray sample hits a zero".into()))?;
        let l = rho * rho;
        let sens: f64 = zeros.iter().map(|&z| (l - shift).norm() / (z - l).norm()).sum();
        xs.push(1.0 / r);
        ys.push((log_asymptotic(variant, ray.d, rho) - lp).exp());
        tail_err = tail_err.max(e + ZERO_REL_ACC * sens);
    }
    let (value, ext_err) = neville_at_zero(&xs, &ys);
    let err = ext_err + value.norm() * (tail_err + 1e-12);
    if !value.is_finite() || value.norm() == 0.0 {
        return Err(Error::Convergence("ray limit is zero or not finite".into()));
    }
    if err > 0.1 * value.norm() {
        return Err(Error::Convergence(format!(
            "ray-limit extrapolation error {err:e} exceeds 10% of |c| = {:e}",
            value.norm()
        )));
    }
    Ok(RayLimit { ray: ray.angle, value, err })
}

/// Fraction of the zeros kept for the truncation-sensitivity estimate.
const SPREAD_KEEP: f64 = 0.8;

/// Ray limit whose error also covers truncation: the constant is recomputed
/// from the smallest 80% of the zeros and the change is added to the bar.
/// The remaining truncation error falls at least as fast as N^-3, so the
/// change over-covers it.
fn ray_limit_with_spread(
    zeros: &[C64],
    shift: C64,
    tail: Option<&TailModel>,
    w: [C64; 2],
    variant: BoundaryVariant,
    ray: &Ray,
    opts: &RayOptions,
) -> Result<RayLimit> {
    let mut lim = ray_limit_constant(zeros, shift, tail, variant, ray, opts)?;
    let keep = (zeros.len() as f64 * SPREAD_KEEP).ceil() as usize;
    let fewer = &zeros[..keep];
    let fewer_tail = match tail {
        Some(_) => match TailModel::fit(fewer, w) {
            Ok(t) => Some(t),
            Err(_) => return Ok(lim),
        },
        None => None,
    };
    if let Ok(alt) = ray_limit_constant(fewer, shift, fewer_tail.as_ref(), variant, ray, opts) {
        lim.err += (alt.value - lim.value).norm();
    }
    Ok(lim)
}

impl HadamardProduct {
    /// Builds the product for the spectrum's characteristic function.
    pub fn build(spectrum: &Spectrum, geometry: &SectorGeometry, opts: &HadamardOptions) -> Result<Self> {
        let zeros = zeros_used(spectrum, opts.truncation);
        if zeros.is_empty() {
            return Err(Error::InvalidInput("no zeros to build a product from".into()));
        }
        let tail = if opts.tail { Some(TailModel::fit(&zeros, geometry.w)?) } else { None };
        let ray = geometry
            .rays
            .get(opts.ray)
            .ok_or_else(|| Error::Usage(format!("ray index {} out of range", opts.ray)))?;
        let lim = ray_limit_with_spread(
            &zeros,
            spectrum.shift,
            tail.as_ref(),
            geometry.w,
            spectrum.variant,
            ray,
            &opts.ray_opts,
        )?;
        Ok(HadamardProduct {
            variant: spectrum.variant,
            truncation: zeros.len(),
            zeros,
            shift: spectrum.shift,
            constant: lim.value,
            constant_err: lim.err,
            tail,
            ray: ray.angle,
        })
    }

    /// Ray limits on every special ray (for consistency checks).
    pub fn all_ray_limits(&self, geometry: &SectorGeometry, opts: &RayOptions) -> Result<Vec<RayLimit>> {
        geometry
            .rays
            .iter()
            .map(|r| {
                ray_limit_with_spread(&self.zeros, self.shift, self.tail.as_ref(), geometry.w, self.variant, r, opts)
            })
            .collect()
    }

    /// Value and error bound at `lambda`; exactly zero at a stored zero.
    pub fn eval(&self, lambda: C64) -> Result<(C64, f64)> {
        if !lambda.is_finite() {
            return Err(Error::Usage("lambda must be finite".into()));
        }
        match log_product(&self.zeros, self.shift, self.tail.as_ref(), lambda) {
            None => Ok((C64::new(0.0, 0.0), 0.0)),
            Some((lp, e)) => {
                let v = self.constant * lp.exp();
                let rel = e + self.constant_err / self.constant.norm();
                Ok((v, v.norm() * rel))
            }
        }
    }
}

pub fn evaluate_product(h: &HadamardProduct, lambda: C64) -> Result<(C64, f64)> {
    h.eval(lambda)
}

/// CSV with columns lambda_re, lambda_im, value_re, value_im, err_bound.
pub fn scan_csv(h: &HadamardProduct, lambdas: &[C64]) -> Result<String> {
    let mut out = String::from("lambda_re,lambda_im,value_re,value_im,err_bound\n");
    for &l in lambdas {
        let (v, e) = h.eval(l)?;
        writeln!(out, "{:.17e},{:.17e},{:.17e},{:.17e},{:.6e}", l.re, l.im, v.re, v.im, e).unwrap();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::problem::sector_geometry;
    use std::f64::consts::PI;

    /// Zeros of -cos(rho) sinh(rho)/rho: ((n + 1/2) pi)^2 and -(n pi)^2.
    fn free_zeros(n: usize) -> Vec<C64> {
        let mut z: Vec<C64> = (0..n)
            .flat_map(|k| [c(((k as f64 + 0.5) * PI).powi(2), 0.0), c(-((k as f64 + 1.0) * PI).powi(2), 0.0)])
            .collect();
        z.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        z.truncate(n);
        z
    }

    fn closed(l: C64) -> C64 {
        let r = l.sqrt();
        -r.cos() * r.sinh() / r
    }

    #[test]
    fn neville_is_exact_for_polynomials_in_x() {
        let xs: Vec<f64> = (1..7).map(|k| 1.0 / k as f64).collect();
        let ys: Vec<C64> = xs.iter().map(|x| c(2.0, 1.0) + c(0.5, 0.0) * x - c(3.0, 0.0) * x * x).collect();
        let (v, _) = neville_at_zero(&xs, &ys);
        assert!((v - c(2.0, 1.0)).norm() < 1e-10);
    }

    #[test]
    fn free_constant_and_values() {
        let g = sector_geometry([c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        let zeros = free_zeros(300);
        let tail = TailModel::fit(&zeros, g.w).unwrap();
        for ray in &g.rays {
            let lim = ray_limit_constant(&zeros, c(0.0, 0.0), Some(&tail), BoundaryVariant::L, ray, &RayOptions::default())
                .unwrap();
            assert!((lim.value + 1.0).norm() < 1e-6, "{lim:?}");
            assert!((lim.value + 1.0).norm() <= lim.err.max(1e-9) * 10.0);
        }
        for l in [c(-5.0, 0.0), c(30.0, 20.0), c(0.0, -45.0)] {
            let (lp, _) = log_product(&zeros, c(0.0, 0.0), Some(&tail), l).unwrap();
            let v = -lp.exp();
            assert!((v / closed(l) - 1.0).norm() < 1e-8, "{l}");
        }
        assert!(log_product(&zeros, c(0.0, 0.0), Some(&tail), zeros[3]).is_none());
    }
}
