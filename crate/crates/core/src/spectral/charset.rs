//! The five characteristic functions of the involution problem.

use crate::error::{Error, Result};
use crate::linalg::{c, u_matrix, Mat2, Scaled, ONE, ZERO};
use crate::ode::{boundary_determinants, OdeOptions, Plane};
use crate::par::Exec;
use crate::problem::{
    reduce_to_matrix, sector_geometry, BoundaryVariant, InvolutionProblem, MatrixSLProblem, SectorGeometry,
};
use num_complex::Complex64 as C64;
use std::f64::consts::FRAC_1_SQRT_2;

/// Evaluators for Delta and Delta_jk of one problem.
#[derive(Clone, Debug)]
pub struct CharacteristicSet {
    pub problem: InvolutionProblem,
    pub matrix: MatrixSLProblem,
    pub geometry: SectorGeometry,
    /// Tolerance for values.
    pub ode: OdeOptions,
    /// Tighter tolerance for Newton refinement of zeros. Zero errors feed every
    /// Hadamard factor, and the few evaluations per zero make this cheap.
    pub refine_ode: OdeOptions,
    /// Looser tolerance for phase tracking along contours.
    pub count_ode: OdeOptions,
}

fn e4(k: usize) -> [C64; 4] {
    let mut v = [ZERO; 4];
    v[k] = ONE;
    v
}

impl CharacteristicSet {
    pub fn new(problem: &InvolutionProblem) -> Result<Self> {
        let matrix = reduce_to_matrix(problem)?;
        let geometry = sector_geometry(matrix.w)?;
        Ok(CharacteristicSet {
            problem: problem.clone(),
            matrix,
            geometry,
            ode: OdeOptions::with_rtol(1e-12),
            refine_ode: OdeOptions::with_rtol(1e-14),
            count_ode: OdeOptions::with_rtol(1e-7),
        })
    }

    /// Refinement runs at `rtol / 100`.
    pub fn with_rtol(mut self, rtol: f64, count_rtol: f64) -> Self {
        self.ode = OdeOptions::with_rtol(rtol);
        self.refine_ode = OdeOptions::with_rtol(rtol * 1e-2);
        self.count_ode = OdeOptions::with_rtol(count_rtol);
        self
    }

    /// Initial data of the two solutions whose boundary determinant is the
    /// characteristic function of `variant`. The Delta_jk planes pair columns of
    /// C and S after conjugation by U, reflected to x = 0.
    pub fn plane(variant: BoundaryVariant) -> Plane {
        let h = c(FRAC_1_SQRT_2, 0.0);
        let u1 = [h, -h];
        let u2 = [h, h];
        let val = |u: [C64; 2]| [u[0], u[1], ZERO, ZERO];
        let der = |u: [C64; 2]| [ZERO, ZERO, u[0], u[1]];
        match variant {
            BoundaryVariant::L => Plane { a: e4(2), b: e4(3), sign: 1.0 },
            BoundaryVariant::L11 => Plane { a: val(u1), b: der(u2), sign: -1.0 },
            BoundaryVariant::L12 => Plane { a: val(u2), b: der(u2), sign: -1.0 },
            BoundaryVariant::L21 => Plane { a: der(u1), b: val(u1), sign: -1.0 },
            BoundaryVariant::L22 => Plane { a: der(u1), b: val(u2), sign: -1.0 },
        }
    }

    pub fn eval_with(&self, variant: BoundaryVariant, lambda: C64, opts: &OdeOptions) -> Result<Scaled> {
        if !lambda.is_finite() {
            return Err(Error::Usage("lambda must be finite".into()));
        }
        Ok(boundary_determinants(&self.matrix, lambda, &[Self::plane(variant)], opts)?[0])
    }

    /// Characteristic function of `variant` in log-scaled form.
    pub fn eval(&self, variant: BoundaryVariant, lambda: C64) -> Result<Scaled> {
        self.eval_with(variant, lambda, &self.ode)
    }

    /// Delta, Delta11, Delta12, Delta21, Delta22 from one integration.
    pub fn components(&self, lambda: C64) -> Result<[Scaled; 5]> {
        if !lambda.is_finite() {
            return Err(Error::Usage("lambda must be finite".into()));
        }
        let planes = BoundaryVariant::ALL.map(Self::plane);
        let v = boundary_determinants(&self.matrix, lambda, &planes, &self.ode)?;
        Ok([v[0], v[1], v[2], v[3], v[4]])
    }

    /// [Delta_jk] / Delta, the Weyl matrix in the U-conjugated frame.
    pub fn cramer_matrix(&self, lambda: C64) -> Result<Mat2> {
        let [d, d11, d12, d21, d22] = self.components(lambda)?;
        if d.is_zero() {
            return Err(Error::NearEigenvalue { rel: 0.0 });
        }
        let m = Mat2::new(d11.ratio(&d), d12.ratio(&d), d21.ratio(&d), d22.ratio(&d));
        if !m.is_finite() {
            return Err(Error::NearEigenvalue { rel: 0.0 });
        }
        Ok(m)
    }

    /// Weyl matrix M = U (Delta_jk / Delta) U^T.
    pub fn weyl_matrix(&self, lambda: C64) -> Result<Mat2> {
        let u = u_matrix();
        Ok(u * self.cramer_matrix(lambda)? * u.transpose())
    }

    /// Plain values of one characteristic function along a list of points.
    pub fn scan(&self, variant: BoundaryVariant, lambdas: &[C64], exec: Exec) -> Result<Vec<C64>> {
        exec.try_map(lambdas, |&l| self.eval(variant, l).map(|v| v.to_c64()))
    }
}

/// Delta(lambda); may overflow to infinity far out on the rays.
pub fn char_delta(ctx: &CharacteristicSet, lambda: C64) -> Result<C64> {
    Ok(ctx.eval(BoundaryVariant::L, lambda)?.to_c64())
}

/// (Delta, Delta11, Delta12, Delta21, Delta22) as plain values.
pub fn char_components(ctx: &CharacteristicSet, lambda: C64) -> Result<[C64; 5]> {
    Ok(ctx.components(lambda)?.map(|v| v.to_c64()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::I;
    use crate::ode::{uniform_grid, weyl_solution};
    use crate::problem::CoefficientFunction;

    fn free0() -> CharacteristicSet {
        CharacteristicSet::new(&InvolutionProblem::free(c(0.0, 0.0)).unwrap()).unwrap()
    }

    #[test]
    fn free_closed_forms() {
        let ctx = free0();
        for lambda in [c(2.0, 0.3), c(-7.0, 1.0), c(30.0, -4.0), c(0.5, 12.0)] {
            let rho = lambda.sqrt();
            let (cs, sn, ch, sh) = (rho.cos(), rho.sin(), rho.cosh(), rho.sinh());
            let want = [
                -cs * sh / rho,
                (cs * ch - sn * sh) / 2.0,
                -(sn * sh + cs * ch) / 2.0,
            ];
            let got = char_components(&ctx, lambda).unwrap();
            for k in 0..3 {
                assert!((got[k] - want[k]).norm() < 1e-9 * want[k].norm().max(1.0), "{k} {lambda}");
            }
        }
        assert!((char_delta(&ctx, ZERO).unwrap() + 1.0).norm() < 1e-10);
    }

    #[test]
    fn zeros_match_even_odd_oracle_for_every_variant() {
        // same zero sets: the ratio to the oracle determinant is zero-free, so
        // checking that both vanish at oracle roots suffices
        for alpha in [c(0.0, 0.0), c(0.3, 0.0), c(0.2, 0.7)] {
            let ctx = CharacteristicSet::new(&InvolutionProblem::free(alpha).unwrap()).unwrap();
            for v in BoundaryVariant::ALL {
                let f = |l: C64| crate::spectral::even_odd_delta(alpha, v, l);
                for z0 in [c(3.0, 0.1), c(20.0, -1.0), c(-12.0, 0.5)] {
                    let g = move |z: C64| Ok(Scaled::from_c64(f(z)));
                    let Ok(root) = super::super::roots::newton(&g, z0, 1, 80, 50.0) else { continue };
                    let scale = [root + 1.0, root - 1.0, root + I, root - I]
                        .iter()
                        .map(|&l| ctx.eval(v, l).unwrap().ln_abs())
                        .fold(f64::NEG_INFINITY, f64::max);
                    let at = ctx.eval(v, root).unwrap();
                    assert!(at.ln_abs() - scale < -18.0, "alpha {alpha} {v} root {root}");
                }
            }
        }
    }

    #[test]
    fn cramer_identity_matches_weyl_solution() {
        let pr = InvolutionProblem::new(
            c(0.25, 0.1),
            CoefficientFunction::Poly(vec![c(1.0, 0.5), c(-2.0, 0.0)]),
            CoefficientFunction::Poly(vec![c(0.0, 1.0), c(0.5, 0.0)]),
            BoundaryVariant::L,
        )
        .unwrap();
        let ctx = CharacteristicSet::new(&pr).unwrap();
        let u = u_matrix();
        for lambda in [c(5.0, 2.0), c(-40.0, 10.0), c(100.0, 30.0)] {
            let m = weyl_solution(&ctx.matrix, lambda, &uniform_grid(2), &ctx.ode).unwrap().m;
            let ms = u.transpose() * m * u;
            let [d, d11, d12, d21, d22] = ctx.components(lambda).unwrap();
            let dj = Mat2::new(d11.ratio(&d), d12.ratio(&d), d21.ratio(&d), d22.ratio(&d));
            assert!((dj - ms).norm() <= 1e-8 * dj.norm(), "{lambda}");
        }
    }

    #[test]
    fn conjugate_symmetry_for_real_data() {
        let pr = InvolutionProblem::new(
            c(0.4, 0.0),
            CoefficientFunction::Poly(vec![c(1.0, 0.0), c(-2.0, 0.0)]),
            CoefficientFunction::Poly(vec![c(0.3, 0.0)]),
            BoundaryVariant::L,
        )
        .unwrap();
        let ctx = CharacteristicSet::new(&pr).unwrap();
        for v in BoundaryVariant::ALL {
            let l = c(7.0, 3.0);
            let a = ctx.eval(v, l).unwrap().to_c64();
            let b = ctx.eval(v, l.conj()).unwrap().to_c64();
            assert!((a.conj() - b).norm() < 1e-10 * a.norm());
        }
    }
}
