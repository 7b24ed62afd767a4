//! First-order form of -Y'' + Q Y = lambda W Y around a nondegenerate anchor.
//!
//! Divide by W: -Ŵ Y'' + Q̂ Y = lambda Y with Ŵ = W^-1, Q̂ = Ŵ Q, and let
//! D̂ = diag(sqrt ŵ_k). If X = C(., λ*) has det X != 0 on [0, 1], then with
//! U = D̂ X' X^-1 and mu^2 = lambda - λ* (mu != 0) every solution Y gives
//!
//!   Y1 = Y,  Y2 = -(D̂ Y' - U Y) / mu,
//!   -D̂ Y1' + U Y1 = mu Y2,   D̂ Y2' + D̂ U D̂^-1 Y2 = mu Y1,
//!
//! and conversely. Stacking the second row first gives Q0 𝒴' + 𝒬 𝒴 = mu 𝒴 with
//! Q0 = [[0, D̂], [-D̂, 0]], whose eigenvalues are ±i d̂_k. U obeys the Riccati
//! equation U' = D̂^-1 (Q̂ - λ*) - U D̂^-1 U, U(0) = 0.

use crate::error::{Error, Result};
use crate::linalg::{sqrt_principal, Mat2, I, ONE, ZERO};
use crate::ode::{dop853, integrate_fundamental, stop_plan, uniform_grid, OdeOptions};
use crate::problem::io::ComplexJson;
use crate::problem::{MatrixSLProblem, SectorGeometry};
use nalgebra::Matrix4;
use num_complex::Complex64 as C64;
use std::f64::consts::{FRAC_1_SQRT_2, TAU};
use std::fmt::Write;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnchorOptions {
    /// First radius |rho*| tried; multiplied by `factor` after each failure.
    pub r0: f64,
    pub factor: f64,
    pub r_max: f64,
    pub grid_points: usize,
    /// Acceptance threshold for min |det X| (X(0) = I sets the scale).
    pub delta: f64,
    pub ode: OdeOptions,
}

impl Default for AnchorOptions {
    fn default() -> Self {
        AnchorOptions { r0: 20.0, factor: 2.0, r_max: 1e3, grid_points: 2049, delta: 1e-3, ode: OdeOptions::with_rtol(1e-12) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NondegenerateAnchor {
    pub lambda_star: C64,
    /// arg rho*, the middle of a sector.
    pub phi: f64,
    pub grid: Vec<f64>,
    pub x: Vec<Mat2>,
    pub dx: Vec<Mat2>,
    pub min_det: f64,
    pub delta: f64,
}

fn min_abs_det(xs: &[Mat2]) -> f64 {
    xs.iter().map(|m| m.det().norm()).fold(f64::INFINITY, f64::min)
}

/// Anchor lambda* = (r e^{i phi})^2 with phi inside a sector, r grown
/// geometrically until min_x |det C(x, lambda*)| clears the threshold.
pub fn find_anchor(prob: &MatrixSLProblem, geometry: &SectorGeometry, opts: &AnchorOptions) -> Result<NondegenerateAnchor> {
    let phi = geometry
        .sectors
        .iter()
        .min_by(|a, b| a.start.rem_euclid(TAU).total_cmp(&b.start.rem_euclid(TAU)))
        .map(|s| s.mid())
        .ok_or_else(|| Error::Anchor("sector geometry has no sectors".into()))?;
    if !(opts.r0 > 0.0 && opts.factor > 1.0 && opts.delta > 0.0) {
        return Err(Error::Usage("anchor search needs r0 > 0, factor > 1, delta > 0".into()));
    }
    let grid = uniform_grid(opts.grid_points);
    let mut r = opts.r0;
    let mut last = 0.0;
    while r <= opts.r_max {
        let lambda_star = C64::from_polar(r, phi).powi(2);
        let f = integrate_fundamental(prob, lambda_star, &grid, &opts.ode)?;
        last = min_abs_det(&f.c.values);
        if last > opts.delta {
            return Ok(NondegenerateAnchor {
                lambda_star,
                phi,
                grid,
                x: f.c.values,
                dx: f.c.derivs,
                min_det: last,
                delta: opts.delta,
            });
        }
        r *= opts.factor;
    }
    Err(Error::Anchor(format!(
        "min |det C| = {last:e} still below {} at r = {}",
        opts.delta, opts.r_max
    )))
}

fn block(a: Mat2, b: Mat2, c: Mat2, d: Mat2) -> Matrix4<C64> {
    Matrix4::from_fn(|i, j| {
        let m = match (i / 2, j / 2) {
            (0, 0) => a,
            (0, 1) => b,
            (1, 0) => c,
            _ => d,
        };
        m.0[i % 2][j % 2]
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FirstOrderSystem {
    pub lambda_star: C64,
    pub hat_w: [C64; 2],
    pub hat_d: [C64; 2],
    pub grid: Vec<f64>,
    pub hat_q: Vec<Mat2>,
    pub u: Vec<Mat2>,
    /// [[0, D̂], [-D̂, 0]].
    pub q0: Matrix4<C64>,
    /// [[0, D̂ U D̂^-1], [U, 0]] per grid node.
    pub q: Vec<Matrix4<C64>>,
    /// Similarity with transform^-1 q0 transform = diag(i D̂, -i D̂).
    pub transform: Matrix4<C64>,
    pub diag: [C64; 4],
    /// transform^-1 q(x) transform.
    pub q_diag: Vec<Matrix4<C64>>,
    breaks: Vec<f64>,
}

pub fn reduce_first_order(prob: &MatrixSLProblem, anchor: &NondegenerateAnchor) -> Result<FirstOrderSystem> {
    let hat_w = [ONE / prob.w[0], ONE / prob.w[1]];
    let hat_d = [sqrt_principal(hat_w[0]), sqrt_principal(hat_w[1])];
    let dh = Mat2::diag(hat_d[0], hat_d[1]);
    let dh_inv = Mat2::diag(ONE / hat_d[0], ONE / hat_d[1]);
    let mut u = Vec::with_capacity(anchor.grid.len());
    for (k, (x, dx)) in anchor.x.iter().zip(&anchor.dx).enumerate() {
        if x.det().norm() <= anchor.delta {
            return Err(Error::Anchor(format!("det X is below threshold at x = {}", anchor.grid[k])));
        }
        u.push(dh * *dx * x.inv().expect("det checked"));
    }
    let hat_q = anchor.grid.iter().map(|&x| Mat2::diag(hat_w[0], hat_w[1]) * prob.q(x)).collect();
    let q0 = block(Mat2::ZERO, dh, -dh, Mat2::ZERO);
    let q: Vec<_> = u.iter().map(|&um| block(Mat2::ZERO, dh * um * dh_inv, um, Mat2::ZERO)).collect();
    // columns (e_k, i e_k)/sqrt 2 and (e_k, -i e_k)/sqrt 2 are eigenvectors for ±i d̂_k
    let s = C64::new(FRAC_1_SQRT_2, 0.0);
    let eye = Mat2::IDENTITY * s;
    let transform = block(eye, eye, eye * I, eye * -I);
    let inv = transform.adjoint();
    let q_diag = q.iter().map(|m| inv * m * transform).collect();
    Ok(FirstOrderSystem {
        lambda_star: anchor.lambda_star,
        hat_w,
        hat_d,
        grid: anchor.grid.clone(),
        hat_q,
        u,
        q0,
        q,
        transform,
        diag: [I * hat_d[0], I * hat_d[1], -I * hat_d[0], -I * hat_d[1]],
        q_diag,
        breaks: prob.breakpoints(),
    })
}

impl FirstOrderSystem {
    /// mu = sqrt(lambda - lambda*), principal branch; the other branch flips the sign of Y2.
    pub fn mu(&self, lambda: C64) -> Result<C64> {
        mu_of(lambda, self.lambda_star)
    }

    /// Relative defect of U' = D̂^-1 (Q̂ - λ*) - U D̂^-1 U, with U' from
    /// eighth-order central differences of the samples (stencils across a
    /// break are skipped).
    pub fn riccati_defect(&self) -> f64 {
        const W: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
        let dh_inv = Mat2::diag(ONE / self.hat_d[0], ONE / self.hat_d[1]);
        let g = &self.grid;
        let n = g.len();
        let rhs = |k: usize| {
            let mut a = self.hat_q[k];
            a.0[0][0] -= self.lambda_star;
            a.0[1][1] -= self.lambda_star;
            dh_inv * a - self.u[k] * dh_inv * self.u[k]
        };
        let scale = (0..n).map(|k| rhs(k).max_abs()).fold(1.0, f64::max);
        let mut worst: f64 = 0.0;
        for k in 4..n.saturating_sub(4) {
            let (lo, hi) = (g[k - 4], g[k + 4]);
            if self.breaks.iter().any(|&b| b > lo && b < hi) {
                continue;
            }
            let h = g[k + 1] - g[k];
            let mut fd = Mat2::ZERO;
            for (j, w) in W.iter().enumerate() {
                fd += (self.u[k + j + 1] - self.u[k - j - 1]) * *w;
            }
            worst = worst.max((fd * (1.0 / h) - rhs(k)).max_abs());
        }
        worst / scale
    }

    /// Sum of |U(x_{k+1}) - U(x_k)|, finite for an absolutely continuous U.
    pub fn total_variation(&self) -> f64 {
        self.u.windows(2).map(|w| (w[1] - w[0]).max_abs()).sum()
    }

    /// CSV of U on the grid, preceded by a `# {json}` line with lambda*, D̂ and the diagonal.
    pub fn to_csv(&self) -> String {
        let cj = |z: C64| ComplexJson::from(z);
        let header = serde_json::json!({
            "lambda_star": cj(self.lambda_star),
            "hat_w": self.hat_w.map(cj),
            "hat_d": self.hat_d.map(cj),
            "diag": self.diag.map(cj),
        });
        let mut out = format!("# {header}\nx,u11_re,u11_im,u12_re,u12_im,u21_re,u21_im,u22_re,u22_im\n");
        for (x, u) in self.grid.iter().zip(&self.u) {
            write!(out, "{x:.17e}").unwrap();
            for z in u.entries() {
                write!(out, ",{:.17e},{:.17e}", z.re, z.im).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn mu_of(lambda: C64, lambda_star: C64) -> Result<C64> {
    if !lambda.is_finite() {
        return Err(Error::Usage("lambda must be finite".into()));
    }
    if (lambda - lambda_star).norm() <= 1e-12 * lambda_star.norm().max(1.0) {
        return Err(Error::Usage("lambda = lambda* (mu = 0) is excluded from the first-order equivalence".into()));
    }
    Ok(sqrt_principal(lambda - lambda_star))
}

fn put(y: &mut [C64], at: usize, m: Mat2) {
    y[at..at + 4].copy_from_slice(&m.entries());
}

fn get(y: &[C64], at: usize) -> Mat2 {
    Mat2::new(y[at], y[at + 1], y[at + 2], y[at + 3])
}

/// Integrates the Riccati equation for U together with the first-order system
/// for the images of C and S, and returns the largest relative deviation from
/// (Y, -(D̂ Y' - U Y)/mu) built from the second-order solutions on `grid`.
pub fn verify_equivalence(
    prob: &MatrixSLProblem,
    anchor: &NondegenerateAnchor,
    lambda: C64,
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<f64> {
    let mu = mu_of(lambda, anchor.lambda_star)?;
    let second = integrate_fundamental(prob, lambda, grid, opts)?;
    let hat_w = [ONE / prob.w[0], ONE / prob.w[1]];
    let hat_d = [sqrt_principal(hat_w[0]), sqrt_principal(hat_w[1])];
    let dh = Mat2::diag(hat_d[0], hat_d[1]);
    let dh_inv = Mat2::diag(ONE / hat_d[0], ONE / hat_d[1]);
    let hw = Mat2::diag(hat_w[0], hat_w[1]);
    let ls = anchor.lambda_star;
    // layout: U, then (Y1, Y2) of C, then (Y1, Y2) of S
    let rhs = |x: f64, y: &[C64; 20]| {
        let u = get(y, 0);
        let mut a = hw * prob.q(x);
        a.0[0][0] -= ls;
        a.0[1][1] -= ls;
        let mut out = [ZERO; 20];
        put(&mut out, 0, dh_inv * a - u * dh_inv * u);
        for b in [4, 12] {
            let (y1, y2) = (get(y, b), get(y, b + 4));
            put(&mut out, b, dh_inv * (u * y1 - y2 * mu));
            put(&mut out, b + 4, dh_inv * y1 * mu - u * dh_inv * y2);
        }
        out
    };
    let mut y0 = [ZERO; 20];
    put(&mut y0, 4, Mat2::IDENTITY);
    put(&mut y0, 16, -(dh * (ONE / mu)));
    let (stops, idx) = stop_plan(grid, &prob.breakpoints(), false);
    let mut worst: f64 = 0.0;
    let mut compare = |k: usize, y: &[C64; 20]| {
        let u = get(y, 0);
        for (b, sample) in [(4, &second.c), (12, &second.s)] {
            let (v, dv) = (sample.values[k], sample.derivs[k]);
            let y2_ref = (dh * dv - u * v) * (-ONE / mu);
            let scale = v.max_abs().max(y2_ref.max_abs()).max(1.0);
            let dev = (get(y, b) - v).max_abs().max((get(y, b + 4) - y2_ref).max_abs());
            worst = worst.max(dev / scale);
        }
    };
    compare(0, &y0);
    // several groups start at zero, so errors are measured against a unit floor
    let joint = OdeOptions { atol: opts.atol.max(opts.rtol), ..*opts };
    dop853::integrate(&rhs, 0.0, y0, &stops[1..], 4, false, &joint, |i, y, _| {
        if let Some(k) = idx[i + 1] {
            compare(k, y);
        }
        Ok(())
    })?;
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::problem::{random_poly, reduce_to_matrix, sector_geometry, BoundaryVariant, InvolutionProblem};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn free() -> MatrixSLProblem {
        reduce_to_matrix(&InvolutionProblem::free(c(0.0, 0.0)).unwrap()).unwrap()
    }

    fn random_problem(seed: u64, alpha: C64) -> MatrixSLProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_poly(&mut rng, 2, 1.0);
        let q = random_poly(&mut rng, 2, 1.0);
        reduce_to_matrix(&InvolutionProblem::new(alpha, p, q, BoundaryVariant::L).unwrap()).unwrap()
    }

    fn anchor(prob: &MatrixSLProblem) -> NondegenerateAnchor {
        find_anchor(prob, &sector_geometry(prob.w).unwrap(), &AnchorOptions::default()).unwrap()
    }

    #[test]
    fn free_anchor_is_found_at_the_first_radius() {
        let a = anchor(&free());
        assert!((a.phi - std::f64::consts::PI / 8.0).abs() < 1e-12, "phi = {}", a.phi);
        assert!((a.lambda_star - C64::from_polar(20.0, a.phi).powi(2)).norm() < 1e-9);
        // independent check of min |det C| from the closed form (cos kx, cos k'x)
        let k = [(a.lambda_star * 1.0).sqrt(), (a.lambda_star * -1.0).sqrt()];
        let m = a.grid.iter().map(|&x| ((k[0] * x).cos() * (k[1] * x).cos()).norm()).fold(f64::INFINITY, f64::min);
        assert!((a.min_det - m).abs() < 1e-8 * m.max(1.0));
        assert!(a.min_det > a.delta);
    }

    #[test]
    fn doubling_the_radius_keeps_the_anchor_nondegenerate() {
        let prob = random_problem(3, c(0.0, 0.0));
        let a = anchor(&prob);
        let r = a.lambda_star.norm().sqrt();
        let opts = AnchorOptions { r0: 2.0 * r, ..Default::default() };
        let b = find_anchor(&prob, &sector_geometry(prob.w).unwrap(), &opts).unwrap();
        assert!((b.lambda_star.norm().sqrt() - 2.0 * r).abs() < 1e-9);
    }

    #[test]
    fn free_u_matches_closed_form() {
        let prob = free();
        let a = anchor(&prob);
        let sys = reduce_first_order(&prob, &a).unwrap();
        for (x, u) in sys.grid.iter().zip(&sys.u) {
            for kk in 0..2 {
                let kappa = (a.lambda_star * prob.w[kk]).sqrt();
                // X_kk = cos(kappa x), so U_kk = -d̂_k kappa tan(kappa x)
                let want = -sys.hat_d[kk] * kappa * (kappa * x).tan();
                assert!((u.0[kk][kk] - want).norm() <= 1e-8 * want.norm().max(1.0), "x {x}: {} vs {want}", u.0[kk][kk]);
            }
            assert!(u.0[0][1].norm() < 1e-12 && u.0[1][0].norm() < 1e-12);
        }
    }

    #[test]
    fn block_matrix_diagonalises_to_plus_minus_i_dhat() {
        let prob = random_problem(5, c(0.2, 0.5));
        let sys = reduce_first_order(&prob, &anchor(&prob)).unwrap();
        let d = sys.transform.adjoint() * sys.q0 * sys.transform;
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { sys.diag[i] } else { ZERO };
                assert!((d[(i, j)] - want).norm() < 1e-14);
            }
        }
        let ev = sys.q0.schur().eigenvalues().expect("complex Schur form is triangular");
        for z in sys.diag {
            assert!(ev.iter().any(|e| (e - z).norm() < 1e-10), "{z} not among {ev:?}");
        }
    }

    #[test]
    fn riccati_identity_and_equivalence_on_random_problems() {
        for (seed, alpha) in [(1, c(0.0, 0.0)), (2, c(0.0, 1.0)), (4, c(0.3, -0.2))] {
            let prob = random_problem(seed, alpha);
            let a = anchor(&prob);
            let sys = reduce_first_order(&prob, &a).unwrap();
            let defect = sys.riccati_defect();
            assert!(defect < 1e-6, "seed {seed}: Riccati defect {defect:e}");
            assert!(sys.total_variation().is_finite());
            let res = verify_equivalence(&prob, &a, c(4.0, 3.0), &uniform_grid(65), &OdeOptions::with_rtol(1e-12)).unwrap();
            assert!(res < 1e-6, "seed {seed}: equivalence residual {res:e}");
        }
    }

    #[test]
    fn free_equivalence_at_one_and_mu_zero_rejected() {
        let prob = free();
        let a = anchor(&prob);
        let res = verify_equivalence(&prob, &a, c(1.0, 0.0), &uniform_grid(33), &OdeOptions::with_rtol(1e-12)).unwrap();
        assert!(res < 1e-8, "{res:e}");
        let err = verify_equivalence(&prob, &a, a.lambda_star, &uniform_grid(9), &OdeOptions::default());
        assert!(matches!(err, Err(Error::Usage(_))));
    }

    #[test]
    fn csv_has_json_header() {
        let prob = free();
        let sys = reduce_first_order(&prob, &anchor(&prob)).unwrap();
        let csv = sys.to_csv();
        let first = csv.lines().next().unwrap();
        let v: serde_json::Value = serde_json::from_str(first.trim_start_matches("# ")).unwrap();
        assert!(v["lambda_star"]["re"].is_number());
        assert_eq!(csv.lines().count(), 2 + sys.grid.len());
    }
}
