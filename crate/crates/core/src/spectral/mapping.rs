//! Blocks of the spectral mapping between two problems with equal weight.

use crate::error::{Error, Result};
use crate::linalg::Mat2;
use crate::ode::{adjoint_weyl_solution, integrate_adjoint, integrate_fundamental, weyl_solution, OdeOptions};
use crate::problem::MatrixSLProblem;
use num_complex::Complex64 as C64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralMappingBlocks {
    pub x: f64,
    pub lambda: C64,
    pub p11: Mat2,
    pub p12: Mat2,
}

/// P11 = -S Phi~*' + Phi S~*', P12 = S Phi~* - Phi S~* at (x, lambda), where
/// S, Phi belong to `a` and the adjoint row solutions S~*, Phi~* to `b`.
pub fn spectral_mapping_blocks(
    a: &MatrixSLProblem,
    b: &MatrixSLProblem,
    x: f64,
    lambda: C64,
    opts: &OdeOptions,
) -> Result<SpectralMappingBlocks> {
    if !(0.0..=1.0).contains(&x) || !x.is_finite() {
        return Err(Error::Usage(format!("x = {x} is outside [0, 1]")));
    }
    let grid: Vec<f64> = if x == 0.0 || x == 1.0 { vec![0.0, 1.0] } else { vec![0.0, x, 1.0] };
    let k = grid.iter().position(|&g| g == x).expect("x is a grid node");
    let fa = integrate_fundamental(a, lambda, &grid, opts)?;
    let phi = weyl_solution(a, lambda, &grid, opts)?.phi;
    let fb = integrate_adjoint(b, lambda, &grid, opts)?;
    let phis = adjoint_weyl_solution(b, lambda, &grid, opts)?.phi;
    let s = fa.s.values[k];
    let ph = phi.values[k];
    let (ss, ssd) = (fb.s.values[k], fb.s.derivs[k]);
    let (ps, psd) = (phis.values[k], phis.derivs[k]);
    Ok(SpectralMappingBlocks { x, lambda, p11: -(s * psd) + ph * ssd, p12: s * ps - ph * ss })
}
