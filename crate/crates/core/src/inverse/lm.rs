//! Levenberg-Marquardt for holomorphic residuals r: C^n -> C^m.
//!
//! For holomorphic r the Gauss-Newton step of |r|^2 solves
//! J^H J d = -J^H r with the complex Jacobian, so no real splitting is needed.

use crate::error::Result;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

/// A residual with state carried between accepted points (e.g. tracked zeros).
pub trait Model {
    /// Residual at a trial point. A failure counts as an infinite objective.
    fn residual(&mut self, x: &[C64]) -> Result<Vec<C64>>;
    /// Keeps the state of the last `residual` call.
    fn accept(&mut self) {}
    /// Jacobian at the last accepted point.
    fn jacobian(&mut self, x: &[C64], r: &[C64]) -> Result<DMatrix<C64>>;
}

#[derive(Clone, Copy, Debug)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop once the objective falls below this.
    pub tol_cost: f64,
    /// Stop once |step| <= tol_step (1 + |x|).
    pub tol_step: f64,
    /// Adds ridge |x|^2 to the objective.
    pub ridge: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions { max_iter: 60, tol_cost: 1e-24, tol_step: 1e-11, ridge: 0.0 }
    }
}

#[derive(Clone, Debug)]
pub struct LmOutcome {
    pub x: Vec<C64>,
    pub cost: f64,
    pub history: Vec<f64>,
    pub iterations: usize,
    pub failed_evaluations: usize,
}

fn objective(r: &[C64], x: &[C64], ridge: f64) -> f64 {
    r.iter().map(|z| z.norm_sqr()).sum::<f64>() + ridge * x.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

pub fn levenberg_marquardt<M: Model>(model: &mut M, x0: &[C64], opts: &LmOptions) -> LmOutcome {
    let mut x = x0.to_vec();
    let mut failed = 0;
    let mut r = match model.residual(&x) {
        Ok(r) => r,
        Err(e) => {
            log::warn!("residual failed at the start point: {e}");
            return LmOutcome { x, cost: f64::INFINITY, history: vec![], iterations: 0, failed_evaluations: 1 };
        }
    };
    model.accept();
    let mut cost = objective(&r, &x, opts.ridge);
    let mut history = vec![cost];
    let mut mu = 1e-3;
    let mut iterations = 0;
    let n = x.len();
    while iterations < opts.max_iter && cost > opts.tol_cost {
        iterations += 1;
        let j = match model.jacobian(&x, &r) {
            Ok(j) => j,
            Err(e) => {
                log::warn!("jacobian failed: {e}");
                failed += 1;
                break;
            }
        };
        let jh = j.adjoint();
        let mut a = &jh * &j;
        let mut g = &jh * DVector::from_column_slice(&r);
        if opts.ridge > 0.0 {
            for i in 0..n {
                a[(i, i)] += opts.ridge;
                g[i] += x[i] * opts.ridge;
            }
        }
        let dmax = (0..n).map(|i| a[(i, i)].re).fold(0.0, f64::max).max(1e-300);
        let mut stepped = false;
        let mut small_step = false;
        while mu < 1e16 {
            let mut damped = a.clone();
            for i in 0..n {
                damped[(i, i)] += mu * a[(i, i)].re.max(1e-12 * dmax);
            }
            let Some(d) = damped.lu().solve(&(-&g)) else {
                mu *= 4.0;
                continue;
            };
            let xn: Vec<C64> = x.iter().zip(d.iter()).map(|(a, b)| a + b).collect();
            let step = d.norm();
            let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            small_step = step <= opts.tol_step * (1.0 + xnorm);
            match model.residual(&xn) {
                Ok(rn) => {
                    let cn = objective(&rn, &xn, opts.ridge);
                    if cn < cost {
                        model.accept();
                        x = xn;
                        r = rn;
                        cost = cn;
                        mu = (mu / 3.0).max(1e-12);
                        stepped = true;
                        break;
                    }
                }
                Err(e) => {
                    log::warn!("residual failed during a trial step: {e}");
                    failed += 1;
                }
            }
            if small_step {
                break;
            }
            mu *= 4.0;
        }
        history.push(cost);
        if !stepped || small_step {
            break;
        }
    }
    LmOutcome { x, cost, history, iterations, failed_evaluations: failed }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    /// Rows x0^2, x0 x1, x1 matched to their values at TRUTH.
    struct Toy;
    const TRUTH: [C64; 2] = [C64::new(1.5, 0.5), C64::new(-0.2, 0.7)];

    impl Model for Toy {
        fn residual(&mut self, x: &[C64]) -> Result<Vec<C64>> {
            let t = TRUTH;
            Ok(vec![x[0] * x[0] - t[0] * t[0], x[0] * x[1] - t[0] * t[1], x[1] - t[1]])
        }
        fn jacobian(&mut self, x: &[C64], _r: &[C64]) -> Result<DMatrix<C64>> {
            let z = c(0.0, 0.0);
            let one = c(1.0, 0.0);
            Ok(DMatrix::from_row_slice(3, 2, &[x[0] * 2.0, z, x[1], x[0], z, one]))
        }
    }

    #[test]
    fn solves_a_consistent_complex_system() {
        let out = levenberg_marquardt(&mut Toy, &[c(1.0, 0.0), c(0.0, 0.0)], &LmOptions::default());
        assert!((out.x[0] - TRUTH[0]).norm() < 1e-8, "{:?}", out.x);
        assert!((out.x[1] - TRUTH[1]).norm() < 1e-8);
        assert!(out.cost < 1e-16);
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
    }
}
