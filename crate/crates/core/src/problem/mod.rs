//! Problem model: the scalar operator with involution and its reduction to a
//! 2x2 matrix Sturm-Liouville problem on [0, 1].

mod coefficient;
mod geometry;
pub mod io;

pub use coefficient::{compose_linear, CoefficientFunction};
pub use geometry::{sector_geometry, Ray, Sector, SectorGeometry};

use crate::error::{Error, Result};
use crate::linalg::{c, u_matrix, Mat2, ONE, ZERO};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Boundary-value variant of the scalar problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum BoundaryVariant {
    /// u(-1) = u(1) = 0.
    L,
    /// u'(-1) = u(1) = 0.
    L11,
    /// u(-1) = u'(-1) = 0.
    L12,
    /// u(1) = u'(1) = 0.
    L21,
    /// u(-1) = u'(1) = 0.
    L22,
}

impl BoundaryVariant {
    pub const ALL: [BoundaryVariant; 5] = [
        BoundaryVariant::L,
        BoundaryVariant::L11,
        BoundaryVariant::L12,
        BoundaryVariant::L21,
        BoundaryVariant::L22,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryVariant::L => "L",
            BoundaryVariant::L11 => "L11",
            BoundaryVariant::L12 => "L12",
            BoundaryVariant::L21 => "L21",
            BoundaryVariant::L22 => "L22",
        }
    }

    /// Matrix index (j, k) for the four auxiliary variants.
    pub fn jk(self) -> Option<(usize, usize)> {
        match self {
            BoundaryVariant::L => None,
            BoundaryVariant::L11 => Some((0, 0)),
            BoundaryVariant::L12 => Some((0, 1)),
            BoundaryVariant::L21 => Some((1, 0)),
            BoundaryVariant::L22 => Some((1, 1)),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for BoundaryVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BoundaryVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        BoundaryVariant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown boundary variant `{s}`")))
    }
}

/// alpha must lie in (-1, 1) or off the real axis.
pub fn check_alpha(alpha: C64) -> Result<()> {
    if !alpha.is_finite() {
        return Err(Error::InvalidInput("alpha is not finite".into()));
    }
    if alpha.im == 0.0 && alpha.re.abs() >= 1.0 {
        return Err(Error::Admissibility { alpha });
    }
    Ok(())
}

/// Diagonal weight entries (1/(alpha+1), 1/(alpha-1)).
pub fn weight_from_alpha(alpha: C64) -> Result<[C64; 2]> {
    check_alpha(alpha)?;
    Ok([ONE / (alpha + 1.0), ONE / (alpha - 1.0)])
}

/// The scalar problem -alpha u''(x) - u''(-x) + p(x) u(x) + q(x) u(-x) = lambda u(x)
/// on (-1, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct InvolutionProblem {
    pub alpha: C64,
    pub p: CoefficientFunction,
    pub q: CoefficientFunction,
    pub variant: BoundaryVariant,
}

impl InvolutionProblem {
    pub fn new(
        alpha: C64,
        p: CoefficientFunction,
        q: CoefficientFunction,
        variant: BoundaryVariant,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(InvolutionProblem { alpha, p, q, variant })
    }

    /// Zero potential.
    pub fn free(alpha: C64) -> Result<Self> {
        Self::new(alpha, CoefficientFunction::zero(), CoefficientFunction::zero(), BoundaryVariant::L)
    }

    pub fn with_variant(&self, variant: BoundaryVariant) -> Self {
        InvolutionProblem { variant, ..self.clone() }
    }

    pub fn weight(&self) -> [C64; 2] {
        [ONE / (self.alpha + 1.0), ONE / (self.alpha - 1.0)]
    }

    pub fn is_free(&self) -> bool {
        self.p.is_zero() && self.q.is_zero()
    }

    /// The same operator with p(x), q(x) replaced by p(-x), q(-x).
    pub fn reflected(&self) -> Self {
        InvolutionProblem { p: self.p.reflected(), q: self.q.reflected(), ..self.clone() }
    }
}

/// [[alpha, 1], [1, alpha]]^{-1}.
fn w_script(alpha: C64) -> Mat2 {
    let d = alpha * alpha - 1.0;
    Mat2::new(alpha / d, -ONE / d, -ONE / d, alpha / d)
}

/// Matrix potential Q(x) on [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    /// Q(x) = sum_k x^k Q_k.
    Poly(Vec<Mat2>),
    /// Q(x) = U W_s B(1 - x) U^T with B(t) = [[p(-t), q(-t)], [q(t), p(t)]],
    /// evaluated pointwise (used for grid coefficients).
    Reduced { alpha: C64, p: CoefficientFunction, q: CoefficientFunction },
}

impl Potential {
    pub fn eval(&self, x: f64) -> Mat2 {
        match self {
            Potential::Poly(qs) => qs.iter().rev().fold(Mat2::ZERO, |acc, &qk| acc * x + qk),
            Potential::Reduced { alpha, p, q } => {
                let t = 1.0 - x;
                let b = Mat2::new(p.eval(-t), q.eval(-t), q.eval(t), p.eval(t));
                let u = u_matrix();
                u * w_script(*alpha) * b * u.transpose()
            }
        }
    }

    /// Interior points of (0, 1) where Q is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Potential::Poly(_) => vec![],
            Potential::Reduced { p, q, .. } => {
                let mut v: Vec<f64> = p
                    .knots()
                    .into_iter()
                    .chain(q.knots())
                    .map(|t| 1.0 - t.abs())
                    .filter(|&x| x > 1e-12 && x < 1.0 - 1e-12)
                    .collect();
                v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
                v
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Potential::Poly(qs) => qs.iter().all(|m| *m == Mat2::ZERO),
            Potential::Reduced { p, q, .. } => p.is_zero() && q.is_zero(),
        }
    }
}

/// -Y'' + Q(x) Y = lambda W Y on (0, 1), with Y(0) = 0 and
/// V(Y) = T Y'(1) - T_perp Y(1) = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixSLProblem {
    pub potential: Potential,
    pub w: [C64; 2],
    /// Orthogonal projector T.
    pub t: Mat2,
    /// Evaluate Q^T instead of Q (adjoint problems).
    pub transposed: bool,
}

impl MatrixSLProblem {
    /// General problem; `t` must be an orthogonal projector.
    pub fn new(potential: Potential, w: [C64; 2], t: Mat2) -> Result<Self> {
        if w.iter().any(|z| *z == ZERO || !z.is_finite()) {
            return Err(Error::InvalidInput("weight entries must be finite and nonzero".into()));
        }
        if (t * t - t).norm() > 1e-12 || (t.adjoint() - t).norm() > 1e-12 {
            return Err(Error::InvalidInput("T must be an orthogonal projector".into()));
        }
        Ok(MatrixSLProblem { potential, w, t, transposed: false })
    }

    pub fn q(&self, x: f64) -> Mat2 {
        let q = self.potential.eval(x);
        if self.transposed {
            q.transpose()
        } else {
            q
        }
    }

    pub fn weight_matrix(&self) -> Mat2 {
        Mat2::diag(self.w[0], self.w[1])
    }

    /// Q(x) - lambda W.
    pub fn k(&self, x: f64, lambda: C64) -> Mat2 {
        let mut m = self.q(x);
        m.0[0][0] -= lambda * self.w[0];
        m.0[1][1] -= lambda * self.w[1];
        m
    }

    pub fn t_perp(&self) -> Mat2 {
        Mat2::IDENTITY - self.t
    }

    /// Rows of the 2x4 map (y, y') -> T y' - T_perp y.
    pub fn v_functional(&self) -> [[C64; 4]; 2] {
        let tp = self.t_perp();
        std::array::from_fn(|i| std::array::from_fn(|j| if j < 2 { -tp.0[i][j] } else { self.t.0[i][j - 2] }))
    }

    /// V(Y) for a matrix solution with value `y` and derivative `yp` at x = 1.
    pub fn v_of(&self, y: Mat2, yp: Mat2) -> Mat2 {
        self.t * yp - self.t_perp() * y
    }

    /// Transposed-coefficient problem whose column solutions are the transposes of
    /// the row (adjoint) solutions.
    pub fn adjoint(&self) -> Self {
        MatrixSLProblem {
            potential: self.potential.clone(),
            w: self.w,
            t: self.t.transpose(),
            transposed: !self.transposed,
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.potential.breakpoints()
    }
}

/// T = diag(1, 0), the projector produced by the reduction.
pub fn reduction_projector() -> Mat2 {
    Mat2::diag(ONE, ZERO)
}

/// Reduces the scalar problem to -Y'' + Q Y = lambda W Y with
/// Y(x) = U [u(x - 1); u(1 - x)].
pub fn reduce_to_matrix(problem: &InvolutionProblem) -> Result<MatrixSLProblem> {
    let w = weight_from_alpha(problem.alpha)?;
    let potential = match (&problem.p, &problem.q) {
        (CoefficientFunction::Poly(pc), CoefficientFunction::Poly(qc)) => {
            // p(-t), q(-t) with t = 1 - x become p(x - 1), q(x - 1).
            let pm = compose_linear(pc, -1.0, 1.0);
            let qm = compose_linear(qc, -1.0, 1.0);
            let pp = compose_linear(pc, 1.0, -1.0);
            let qp = compose_linear(qc, 1.0, -1.0);
            let n = pm.len().max(qm.len()).max(pp.len()).max(qp.len());
            let at = |v: &Vec<C64>, k: usize| v.get(k).copied().unwrap_or(ZERO);
            let u = u_matrix();
            let ws = w_script(problem.alpha);
            let qs = (0..n)
                .map(|k| {
                    let b = Mat2::new(at(&pm, k), at(&qm, k), at(&qp, k), at(&pp, k));
                    u * ws * b * u.transpose()
                })
                .collect();
            Potential::Poly(qs)
        }
        _ => Potential::Reduced { alpha: problem.alpha, p: problem.p.clone(), q: problem.q.clone() },
    };
    Ok(MatrixSLProblem { potential, w, t: reduction_projector(), transposed: false })
}

/// Recovers (p(t), q(t), p(-t), q(-t)) from Q(1 - t), t in [0, 1].
pub fn unpack_coefficients(alpha: C64, q_at: Mat2) -> [C64; 4] {
    let u = u_matrix();
    let qs = u.transpose() * q_at * u;
    let b = Mat2::new(alpha, ONE, ONE, alpha) * qs;
    [b.get(1, 1), b.get(1, 0), b.get(0, 0), b.get(0, 1)]
}

/// Random complex polynomial with `deg + 1` coefficients of modulus below `scale`.
pub fn random_poly<R: rand::Rng>(rng: &mut R, deg: usize, scale: f64) -> CoefficientFunction {
    CoefficientFunction::Poly(
        (0..=deg)
            .map(|_| c(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale)))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn poly(v: &[(f64, f64)]) -> CoefficientFunction {
        CoefficientFunction::Poly(v.iter().map(|&(a, b)| c(a, b)).collect())
    }

    #[test]
    fn weight_from_alpha_examples() {
        let w = weight_from_alpha(c(0.0, 0.0)).unwrap();
        assert_eq!(w, [c(1.0, 0.0), c(-1.0, 0.0)]);
        let w = weight_from_alpha(c(0.5, 0.0)).unwrap();
        assert!((w[0] - c(2.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!((w[1] - c(-2.0, 0.0)).norm() < 1e-15);
        let w = weight_from_alpha(c(0.0, 1.0)).unwrap();
        assert!((w[0] - c(0.5, -0.5)).norm() < 1e-15);
        assert!((w[1] - c(-0.5, -0.5)).norm() < 1e-15);
        assert!(matches!(weight_from_alpha(c(1.0, 0.0)), Err(Error::Admissibility { .. })));
        assert!(matches!(weight_from_alpha(c(-3.0, 0.0)), Err(Error::Admissibility { .. })));
    }

    #[test]
    fn unit_p_reduces_to_weight() {
        let pr = InvolutionProblem::new(
            c(0.0, 0.0),
            poly(&[(1.0, 0.0)]),
            CoefficientFunction::zero(),
            BoundaryVariant::L,
        )
        .unwrap();
        let m = reduce_to_matrix(&pr).unwrap();
        for &x in &[0.0, 0.3, 1.0] {
            assert!((m.q(x) - Mat2::diag(c(1.0, 0.0), c(-1.0, 0.0))).norm() < 1e-15);
        }
    }

    #[test]
    fn unit_q_reduces_to_identity() {
        let pr = InvolutionProblem::new(
            c(0.0, 0.0),
            CoefficientFunction::zero(),
            poly(&[(1.0, 0.0)]),
            BoundaryVariant::L,
        )
        .unwrap();
        let m = reduce_to_matrix(&pr).unwrap();
        assert!((m.q(0.4) - Mat2::IDENTITY).norm() < 1e-15);
    }

    #[test]
    fn poly_and_pointwise_reductions_agree() {
        let alpha = c(0.3, 0.7);
        let p = poly(&[(0.2, 0.1), (1.0, -0.5), (0.0, 0.3)]);
        let q = poly(&[(-0.4, 0.0), (0.0, 0.0), (0.7, 0.2), (0.1, 0.0)]);
        let pr = InvolutionProblem::new(alpha, p.clone(), q.clone(), BoundaryVariant::L).unwrap();
        let a = reduce_to_matrix(&pr).unwrap();
        let b = Potential::Reduced { alpha, p, q };
        for &x in &[0.0, 0.15, 0.5, 0.9, 1.0] {
            assert!((a.q(x) - b.eval(x)).norm() < 1e-13);
        }
    }

    #[test]
    fn unpack_inverts_reduction() {
        let alpha = c(-0.2, 0.4);
        let p = poly(&[(0.2, 0.1), (1.0, -0.5), (0.0, 0.3)]);
        let q = poly(&[(-0.4, 0.0), (0.5, 0.0), (0.7, 0.2)]);
        let pr = InvolutionProblem::new(alpha, p.clone(), q.clone(), BoundaryVariant::L).unwrap();
        let m = reduce_to_matrix(&pr).unwrap();
        for &t in &[0.0, 0.25, 0.8, 1.0] {
            let [pt, qt, pmt, qmt] = unpack_coefficients(alpha, m.q(1.0 - t));
            assert!((pt - p.eval(t)).norm() < 1e-13);
            assert!((qt - q.eval(t)).norm() < 1e-13);
            assert!((pmt - p.eval(-t)).norm() < 1e-13);
            assert!((qmt - q.eval(-t)).norm() < 1e-13);
        }
    }

    #[test]
    fn grid_breakpoints_map_to_unit_interval() {
        let g = CoefficientFunction::grid(
            vec![-1.0, -0.5, 0.25, 1.0],
            vec![c(0.0, 0.0), c(1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        let pr = InvolutionProblem::new(c(0.0, 0.0), g, CoefficientFunction::zero(), BoundaryVariant::L)
            .unwrap();
        let m = reduce_to_matrix(&pr).unwrap();
        assert_eq!(m.breakpoints(), vec![0.5, 0.75]);
    }

    #[test]
    fn projector_validation() {
        let bad = Mat2::new(c(1.0, 0.0), c(1.0, 0.0), ZERO, ZERO);
        assert!(MatrixSLProblem::new(Potential::Poly(vec![]), [ONE, -ONE], bad).is_err());
    }
}
