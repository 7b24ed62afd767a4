//! Solutions of -Y'' + Q Y = lambda W Y: fundamental and adjoint matrices on a
//! grid, the Weyl solution, Wronskians, and log-scaled boundary determinants.

mod compound;
pub(crate) mod dop853;

pub use compound::{boundary_determinants, Plane};
pub use dop853::OdeOptions;

use crate::error::{Error, Result};
use crate::linalg::{flush_tiny, Mat2, ONE, ZERO};
use crate::problem::MatrixSLProblem;
use num_complex::Complex64 as C64;

/// Uniform grid of `n >= 2` points on [0, 1].
pub fn uniform_grid(n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

pub(crate) fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::Usage("grid needs at least two points".into()));
    }
    if grid[0].abs() > 1e-14 || (grid[grid.len() - 1] - 1.0).abs() > 1e-14 {
        return Err(Error::Usage("grid must start at 0 and end at 1".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Stop points for an integration from `from` over `grid` (in travel order),
/// merged with `breaks`; each entry carries its grid index, if any.
pub(crate) fn stop_plan(grid: &[f64], breaks: &[f64], backward: bool) -> (Vec<f64>, Vec<Option<usize>>) {
    let mut pts: Vec<(f64, Option<usize>)> =
        grid.iter().enumerate().map(|(i, &x)| (x, Some(i))).collect();
    for &b in breaks {
        if !grid.iter().any(|&g| (g - b).abs() < 1e-13) {
            pts.push((b, None));
        }
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    if backward {
        pts.reverse();
    }
    pts.into_iter().unzip()
}

/// Whether a matrix sample holds column solutions or row (adjoint) solutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleKind {
    Column,
    Row,
}

/// A matrix-valued solution and its derivative sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSample {
    pub lambda: C64,
    pub kind: SampleKind,
    pub grid: Vec<f64>,
    pub values: Vec<Mat2>,
    pub derivs: Vec<Mat2>,
}

impl MatrixSample {
    /// Index of the grid node at `x`.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        self.grid.iter().position(|&g| (g - x).abs() < 1e-12)
    }

    pub fn at(&self, x: f64) -> Option<(Mat2, Mat2)> {
        self.index_of(x).map(|i| (self.values[i], self.derivs[i]))
    }

    fn transposed(&self) -> MatrixSample {
        MatrixSample {
            lambda: self.lambda,
            kind: match self.kind {
                SampleKind::Column => SampleKind::Row,
                SampleKind::Row => SampleKind::Column,
            },
            grid: self.grid.clone(),
            values: self.values.iter().map(Mat2::transpose).collect(),
            derivs: self.derivs.iter().map(Mat2::transpose).collect(),
        }
    }
}

/// C(x, lambda) and S(x, lambda): C(0) = S'(0) = I, C'(0) = S(0) = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct FundamentalSolutions {
    pub lambda: C64,
    pub c: MatrixSample,
    pub s: MatrixSample,
}

/// Row solutions C*(x, lambda), S*(x, lambda) of -Z'' + Z Q = lambda Z W.
pub type AdjointSolutions = FundamentalSolutions;

fn column_rhs<'a, const N: usize>(
    prob: &'a MatrixSLProblem,
    lambda: C64,
) -> impl Fn(f64, &[C64; N]) -> [C64; N] + 'a {
    move |x, y| {
        let k = prob.k(x, lambda).0;
        let mut out = [ZERO; N];
        for b in (0..N).step_by(4) {
            out[b] = y[b + 2];
            out[b + 1] = y[b + 3];
            out[b + 2] = k[0][0] * y[b] + k[0][1] * y[b + 1];
            out[b + 3] = k[1][0] * y[b] + k[1][1] * y[b + 1];
        }
        out
    }
}

/// Pulls the 2x2 value and derivative of the column pair starting at column `c0`.
fn pair(y: &[C64], c0: usize) -> (Mat2, Mat2) {
    let a = 4 * c0;
    let b = a + 4;
    (
        Mat2::from_cols([y[a], y[a + 1]], [y[b], y[b + 1]]),
        Mat2::from_cols([y[a + 2], y[a + 3]], [y[b + 2], y[b + 3]]),
    )
}

fn check_lambda(lambda: C64) -> Result<C64> {
    if !lambda.is_finite() {
        return Err(Error::Usage("lambda must be finite".into()));
    }
    Ok(flush_tiny(lambda))
}

/// Integrates C and S forward over `grid`.
pub fn integrate_fundamental(
    prob: &MatrixSLProblem,
    lambda: C64,
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<FundamentalSolutions> {
    validate_grid(grid)?;
    let lambda = check_lambda(lambda)?;
    let (stops, idx) = stop_plan(grid, &prob.breakpoints(), false);
    let mut y0 = [ZERO; 16];
    // columns: C e1, C e2, S e1, S e2
    y0[0] = ONE;
    y0[5] = ONE;
    y0[10] = ONE;
    y0[15] = ONE;
    let n = grid.len();
    let mut cv = vec![Mat2::ZERO; n];
    let mut cd = vec![Mat2::ZERO; n];
    let mut sv = vec![Mat2::ZERO; n];
    let mut sd = vec![Mat2::ZERO; n];
    let (c0, c0d) = pair(&y0, 0);
    let (s0, s0d) = pair(&y0, 2);
    cv[0] = c0;
    cd[0] = c0d;
    sv[0] = s0;
    sd[0] = s0d;
    let rhs = column_rhs::<16>(prob, lambda);
    dop853::integrate(&rhs, 0.0, y0, &stops[1..], 4, false, opts, |i, y, _| {
        if let Some(g) = idx[i + 1] {
            let (a, b) = pair(y, 0);
            let (c, d) = pair(y, 2);
            cv[g] = a;
            cd[g] = b;
            sv[g] = c;
            sd[g] = d;
        }
        Ok(())
    })?;
    let mk = |values, derivs| MatrixSample {
        lambda,
        kind: SampleKind::Column,
        grid: grid.to_vec(),
        values,
        derivs,
    };
    Ok(FundamentalSolutions { lambda, c: mk(cv, cd), s: mk(sv, sd) })
}

impl FundamentalSolutions {
    /// CSV with columns x, then re/im of the entries of C, C', S, S' (row-major).
    pub fn to_csv(&self) -> String {
        use std::fmt::Write;
        let names = ["C", "dC", "S", "dS"];
        let mut head = vec!["x".to_string()];
        for n in names {
            for e in ["11", "12", "21", "22"] {
                head.push(format!("{n}{e}_re"));
                head.push(format!("{n}{e}_im"));
            }
        }
        let mut out = head.join(",");
        out.push('\n');
        for (k, x) in self.c.grid.iter().enumerate() {
            write!(out, "{x}").unwrap();
            for m in [self.c.values[k], self.c.derivs[k], self.s.values[k], self.s.derivs[k]] {
                for z in m.entries() {
                    write!(out, ",{:.17e},{:.17e}", z.re, z.im).unwrap();
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Row solutions C*, S* of the adjoint equation, via the transposed problem.
pub fn integrate_adjoint(
    prob: &MatrixSLProblem,
    lambda: C64,
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<AdjointSolutions> {
    let f = integrate_fundamental(&prob.adjoint(), lambda, grid, opts)?;
    Ok(FundamentalSolutions { lambda, c: f.c.transposed(), s: f.s.transposed() })
}

/// Wronskian <Z, Y> = Z Y' - Z' Y of a row solution and a column solution at `x`.
pub fn wronskian(z: &MatrixSample, y: &MatrixSample, x: f64) -> Result<Mat2> {
    if z.kind != SampleKind::Row || y.kind != SampleKind::Column {
        return Err(Error::Usage("wronskian needs a row solution and a column solution".into()));
    }
    if (z.lambda - y.lambda).norm() > 1e-14 * z.lambda.norm().max(1.0) {
        return Err(Error::Usage("wronskian arguments have different lambda".into()));
    }
    let (zi, yi) = match (z.index_of(x), y.index_of(x)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Usage(format!("x = {x} is not a grid node of both samples"))),
    };
    Ok(z.values[zi] * y.derivs[yi] - z.derivs[zi] * y.values[yi])
}

/// Weyl solution Phi (Phi(0) = I, V(Phi) = 0) and Weyl matrix M = Phi'(0).
#[derive(Clone, Debug, PartialEq)]
pub struct WeylData {
    pub lambda: C64,
    pub phi: MatrixSample,
    pub m: Mat2,
}

/// Relative size of det V(S) below which lambda counts as an eigenvalue.
pub const NEAR_EIGENVALUE_REL: f64 = 1e-8;

/// V(S(1, lambda)).
pub fn v_of_s(prob: &MatrixSLProblem, lambda: C64, opts: &OdeOptions) -> Result<Mat2> {
    let lambda = check_lambda(lambda)?;
    let mut y0 = [ZERO; 8];
    y0[2] = ONE;
    y0[7] = ONE;
    let rhs = column_rhs::<8>(prob, lambda);
    let (stops, _) = stop_plan(&[0.0, 1.0], &prob.breakpoints(), false);
    let out = dop853::integrate(&rhs, 0.0, y0, &stops[1..], 4, false, opts, |_, _, _| Ok(()))?;
    let (s, sp) = pair(&out.y, 0);
    Ok(prob.v_of(s, sp))
}

/// Computes Phi by integrating F with V(F) = 0 backward from x = 1 and
/// normalising Phi = F F(0)^{-1}; this stays accurate when growth is one-sided.
pub fn weyl_solution(
    prob: &MatrixSLProblem,
    lambda: C64,
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<WeylData> {
    validate_grid(grid)?;
    let lambda = check_lambda(lambda)?;
    let vs = v_of_s(prob, lambda, opts)?;
    let scale = vs.norm();
    let rel = if scale == 0.0 { 0.0 } else { vs.det().norm() / (scale * scale) };
    if rel < NEAR_EIGENVALUE_REL {
        return Err(Error::NearEigenvalue { rel });
    }
    let (stops, idx) = stop_plan(grid, &prob.breakpoints(), true);
    let t = prob.t;
    let tp = prob.t_perp();
    let mut y0 = [ZERO; 8];
    for j in 0..2 {
        y0[4 * j] = t.0[0][j];
        y0[4 * j + 1] = t.0[1][j];
        y0[4 * j + 2] = tp.0[0][j];
        y0[4 * j + 3] = tp.0[1][j];
    }
    let n = grid.len();
    let mut fv = vec![Mat2::ZERO; n];
    let mut fd = vec![Mat2::ZERO; n];
    let mut ls = vec![[0.0; 2]; n];
    let (a, b) = pair(&y0, 0);
    fv[n - 1] = a;
    fd[n - 1] = b;
    let rhs = column_rhs::<8>(prob, lambda);
    dop853::integrate(&rhs, 1.0, y0, &stops[1..], 4, true, opts, |i, y, l| {
        if let Some(g) = idx[i + 1] {
            let (a, b) = pair(y, 0);
            fv[g] = a;
            fd[g] = b;
            ls[g] = [l[0], l[1]];
        }
        Ok(())
    })?;
    let f0inv = fv[0].inv().ok_or(Error::NearEigenvalue { rel: 0.0 })?;
    let mut pv = Vec::with_capacity(n);
    let mut pd = Vec::with_capacity(n);
    for g in 0..n {
        let d = Mat2::diag(
            C64::new((ls[g][0] - ls[0][0]).exp(), 0.0),
            C64::new((ls[g][1] - ls[0][1]).exp(), 0.0),
        );
        pv.push(fv[g] * d * f0inv);
        pd.push(fd[g] * d * f0inv);
    }
    let m = pd[0];
    if !m.is_finite() {
        return Err(Error::Integration { x: 0.0, reason: "Weyl matrix is not finite".into() });
    }
    Ok(WeylData {
        lambda,
        phi: MatrixSample { lambda, kind: SampleKind::Column, grid: grid.to_vec(), values: pv, derivs: pd },
        m,
    })
}

/// Adjoint Weyl solution Phi* (row solution, Phi*(0) = I,
/// Phi*'(1) T - Phi*(1) T_perp = 0) and M* = Phi*'(0).
pub fn adjoint_weyl_solution(
    prob: &MatrixSLProblem,
    lambda: C64,
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<WeylData> {
    let w = weyl_solution(&prob.adjoint(), lambda, grid, opts)?;
    Ok(WeylData { lambda, phi: w.phi.transposed(), m: w.m.transpose() })
}

/// Weyl matrix from forward data, M = -V(S)^{-1} V(C).
pub fn weyl_matrix_cramer(prob: &MatrixSLProblem, f: &FundamentalSolutions) -> Result<Mat2> {
    let n = f.c.grid.len() - 1;
    let vs = prob.v_of(f.s.values[n], f.s.derivs[n]);
    let vc = prob.v_of(f.c.values[n], f.c.derivs[n]);
    let inv = vs.inv().ok_or(Error::NearEigenvalue { rel: 0.0 })?;
    Ok(-(inv * vc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, I};
    use crate::problem::{reduce_to_matrix, InvolutionProblem, Potential};

    fn free() -> MatrixSLProblem {
        reduce_to_matrix(&InvolutionProblem::free(c(0.0, 0.0)).unwrap()).unwrap()
    }

    #[test]
    fn free_fundamental_closed_form() {
        // W = diag(1, -1), lambda = 1: C(1) = diag(cos 1, cosh 1), S(1) = diag(sin 1, sinh 1).
        let f = integrate_fundamental(&free(), c(1.0, 0.0), &uniform_grid(11), &OdeOptions::default())
            .unwrap();
        let (cm, _) = f.c.at(1.0).unwrap();
        let (sm, _) = f.s.at(1.0).unwrap();
        let want_c = Mat2::diag(c(1f64.cos(), 0.0), c(1f64.cosh(), 0.0));
        let want_s = Mat2::diag(c(1f64.sin(), 0.0), c(1f64.sinh(), 0.0));
        assert!((cm - want_c).norm() < 1e-12);
        assert!((sm - want_s).norm() < 1e-12);
    }

    #[test]
    fn free_weyl_matrix_closed_form() {
        // M = diag(rho tan rho, -rho coth rho) for W = diag(1, -1), T = diag(1, 0).
        let lambda = c(2.0, 1.0);
        let rho = lambda.sqrt();
        let w = weyl_solution(&free(), lambda, &uniform_grid(5), &OdeOptions::default()).unwrap();
        let want = Mat2::diag(rho * rho.tan(), -rho / rho.tanh());
        assert!((w.m - want).norm() < 1e-10 * want.norm(), "{:?}", w.m);
        // Phi = C + S M
        let f = integrate_fundamental(&free(), lambda, &uniform_grid(5), &OdeOptions::default()).unwrap();
        for i in 0..5 {
            let d = f.c.values[i] + f.s.values[i] * w.m - w.phi.values[i];
            assert!(d.norm() < 1e-10);
        }
        let mc = weyl_matrix_cramer(&free(), &f).unwrap();
        assert!((mc - w.m).norm() < 1e-10 * want.norm());
    }

    #[test]
    fn weyl_rejects_eigenvalue() {
        let lambda = c((std::f64::consts::PI / 2.0).powi(2), 0.0);
        let r = weyl_solution(&free(), lambda, &uniform_grid(5), &OdeOptions::default());
        assert!(matches!(r, Err(Error::NearEigenvalue { .. })));
    }

    #[test]
    fn shift_identity() {
        // Q = W shifts the spectral parameter by one.
        let p = MatrixSLProblem {
            potential: Potential::Poly(vec![Mat2::diag(c(1.0, 0.0), c(-1.0, 0.0))]),
            ..free()
        };
        let g = uniform_grid(9);
        let a = integrate_fundamental(&p, c(3.0, 2.0), &g, &OdeOptions::default()).unwrap();
        let b = integrate_fundamental(&free(), c(2.0, 2.0), &g, &OdeOptions::default()).unwrap();
        for i in 0..9 {
            assert!((a.s.values[i] - b.s.values[i]).norm() < 1e-11);
        }
    }

    #[test]
    fn wronskian_checks_arguments() {
        let g = uniform_grid(5);
        let p = free();
        let f = integrate_fundamental(&p, I, &g, &OdeOptions::default()).unwrap();
        let a = integrate_adjoint(&p, I, &g, &OdeOptions::default()).unwrap();
        assert!(wronskian(&a.c, &f.s, 0.5).is_ok());
        assert!(matches!(wronskian(&f.c, &f.s, 0.5), Err(Error::Usage(_))));
        assert!(matches!(wronskian(&a.c, &f.s, 0.3), Err(Error::Usage(_))));
        let other = integrate_fundamental(&p, c(2.0, 0.0), &g, &OdeOptions::default()).unwrap();
        assert!(matches!(wronskian(&a.c, &other.s, 0.5), Err(Error::Usage(_))));
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let f = integrate_fundamental(&free(), c(1.0, 0.0), &uniform_grid(3), &OdeOptions::default()).unwrap();
        let csv = f.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("x,C11_re,C11_im,C12_re"));
        assert_eq!(lines[1].split(',').count(), 33);
        assert!(lines[1].starts_with("0,1.00000000000000000e0,"));
    }

    #[test]
    fn rejects_bad_grid() {
        let p = free();
        assert!(integrate_fundamental(&p, I, &[0.0, 0.5], &OdeOptions::default()).is_err());
        assert!(integrate_fundamental(&p, I, &[0.0, 0.6, 0.5, 1.0], &OdeOptions::default()).is_err());
    }
}
