//! Boundary determinants det V([a(1), b(1)]) for solutions with initial data
//! a(0), b(0), computed from the Pluecker coordinates of the 2-plane they span.
//! Working with the plane instead of the two vectors avoids the cancellation
//! that destroys vector-based determinants when one growth rate dominates.

use super::dop853::{self, OdeOptions};
use crate::error::Result;
use crate::linalg::{flush_tiny, Scaled, ZERO};
use crate::problem::MatrixSLProblem;
use num_complex::Complex64 as C64;

/// Initial data (y1, y2, y1', y2') at x = 0 of two solutions, and a sign applied to
/// the resulting determinant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Plane {
    pub a: [C64; 4],
    pub b: [C64; 4],
    pub sign: f64,
}

const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Derivative of the Pluecker coordinates (p01, p02, p03, p12, p13, p23) under
/// y' = A y with A = [[0, I], [K, 0]], i.e. the independent entries of A P + P A^T.
#[inline]
fn plane_derivative(k: &[[C64; 2]; 2], p: &[C64]) -> [C64; 6] {
    let [p01, p02, p03, p12, p13, p23] = [p[0], p[1], p[2], p[3], p[4], p[5]];
    [
        p03 - p12,
        k[0][1] * p01,
        p23 + k[1][1] * p01,
        -p23 - k[0][0] * p01,
        -k[1][0] * p01,
        k[0][0] * p03 + k[0][1] * p13 - k[1][0] * p02 - k[1][1] * p12,
    ]
}

fn plane_rhs<const N: usize>(
    prob: &MatrixSLProblem,
    lambda: C64,
) -> impl Fn(f64, &[C64; N]) -> [C64; N] + '_ {
    move |x, y| {
        let k = prob.k(x, lambda).0;
        let mut out = [ZERO; N];
        for base in (0..N).step_by(6) {
            out[base..base + 6].copy_from_slice(&plane_derivative(&k, &y[base..base + 6]));
        }
        out
    }
}

fn plucker(a: &[C64; 4], b: &[C64; 4]) -> [C64; 6] {
    PAIRS.map(|(i, j)| a[i] * b[j] - a[j] * b[i])
}

fn evaluate<const N: usize>(
    prob: &MatrixSLProblem,
    lambda: C64,
    planes: &[Plane],
    opts: &OdeOptions,
) -> Result<Vec<Scaled>> {
    debug_assert_eq!(planes.len() * 6, N);
    let lambda = flush_tiny(lambda);
    let mut y0 = [ZERO; N];
    for (m, pl) in planes.iter().enumerate() {
        y0[6 * m..6 * m + 6].copy_from_slice(&plucker(&pl.a, &pl.b));
    }
    let mut stops = prob.breakpoints();
    stops.push(1.0);
    let rhs = plane_rhs::<N>(prob, lambda);
    let out = dop853::integrate(&rhs, 0.0, y0, &stops, 6, true, opts, |_, _, _| Ok(()))?;
    let l = prob.v_functional();
    let coef = PAIRS.map(|(i, j)| l[0][i] * l[1][j] - l[0][j] * l[1][i]);
    Ok(planes
        .iter()
        .enumerate()
        .map(|(m, pl)| {
            let p = &out.y[6 * m..6 * m + 6];
            let v: C64 = coef.iter().zip(p).map(|(c, q)| c * q).sum();
            Scaled::new(v * pl.sign, out.log_scale[m])
        })
        .collect())
}

/// det V([a(1), b(1)]) (times each plane's sign) for up to five planes at once.
pub fn boundary_determinants(
    prob: &MatrixSLProblem,
    lambda: C64,
    planes: &[Plane],
    opts: &OdeOptions,
) -> Result<Vec<Scaled>> {
    match planes.len() {
        0 => Ok(vec![]),
        1 => evaluate::<6>(prob, lambda, planes, opts),
        2 => evaluate::<12>(prob, lambda, planes, opts),
        3 => evaluate::<18>(prob, lambda, planes, opts),
        4 => evaluate::<24>(prob, lambda, planes, opts),
        5 => evaluate::<30>(prob, lambda, planes, opts),
        _ => {
            let mut out = evaluate::<30>(prob, lambda, &planes[..5], opts)?;
            out.extend(boundary_determinants(prob, lambda, &planes[5..], opts)?);
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, ONE};
    use crate::ode::{integrate_fundamental, uniform_grid};
    use crate::problem::{reduce_to_matrix, CoefficientFunction, InvolutionProblem, BoundaryVariant};

    fn s_plane() -> Plane {
        Plane { a: [ZERO, ZERO, ONE, ZERO], b: [ZERO, ZERO, ZERO, ONE], sign: 1.0 }
    }

    #[test]
    fn matches_vector_determinant_at_moderate_lambda() {
        let pr = InvolutionProblem::new(
            c(0.2, 0.3),
            CoefficientFunction::Poly(vec![c(1.0, 0.5), c(-2.0, 0.0)]),
            CoefficientFunction::Poly(vec![c(0.0, 1.0), c(0.5, 0.0), c(1.0, 0.0)]),
            BoundaryVariant::L,
        )
        .unwrap();
        let m = reduce_to_matrix(&pr).unwrap();
        let opts = OdeOptions::with_rtol(1e-12);
        for lambda in [c(3.0, 1.0), c(-10.0, 4.0), c(0.0, -7.0)] {
            let f = integrate_fundamental(&m, lambda, &uniform_grid(2), &opts).unwrap();
            let want = m.v_of(f.s.values[1], f.s.derivs[1]).det();
            let got = boundary_determinants(&m, lambda, &[s_plane()], &opts).unwrap()[0].to_c64();
            assert!((got - want).norm() < 1e-10 * want.norm(), "{got} {want}");
        }
    }

    #[test]
    fn plane_derivative_matches_matrix_product() {
        let k = [[c(0.3, 1.0), c(-2.0, 0.5)], [c(0.1, 0.0), c(4.0, -1.0)]];
        let p = [c(1.0, 2.0), c(-0.5, 0.0), c(0.25, 1.0), c(3.0, -1.0), c(0.0, 0.7), c(-1.0, -1.0)];
        let mut a = [[ZERO; 4]; 4];
        a[0][2] = ONE;
        a[1][3] = ONE;
        for i in 0..2 {
            for j in 0..2 {
                a[2 + i][j] = k[i][j];
            }
        }
        let mut pm = [[ZERO; 4]; 4];
        for (s, &(i, j)) in PAIRS.iter().enumerate() {
            pm[i][j] = p[s];
            pm[j][i] = -p[s];
        }
        let got = plane_derivative(&k, &p);
        for (s, &(i, j)) in PAIRS.iter().enumerate() {
            let mut want = ZERO;
            for m in 0..4 {
                want += a[i][m] * pm[m][j] + pm[i][m] * a[j][m];
            }
            assert!((got[s] - want).norm() < 1e-14, "slot {s}");
        }
    }

    #[test]
    fn free_delta_at_large_lambda() {
        // Delta = -cos(rho) sinh(rho) / rho for alpha = 0 and zero potential.
        let m = reduce_to_matrix(&InvolutionProblem::free(c(0.0, 0.0)).unwrap()).unwrap();
        let opts = OdeOptions::with_rtol(1e-12);
        for lambda in [c(2.0e5, 3.0), c(-4.0e4, 1.0e3), c(1.0e3, 1.0e4)] {
            let rho = lambda.sqrt();
            let ln_want = (-(rho.cos()) / rho).ln() + rho.sinh().ln();
            let got = boundary_determinants(&m, lambda, &[s_plane()], &opts).unwrap()[0];
            let d = got.ln() - ln_want;
            let d = C64::new(d.re, (d.im + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI) - std::f64::consts::PI);
            assert!(d.norm() < 1e-8, "lambda {lambda}: {d}");
        }
    }
}
