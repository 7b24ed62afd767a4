use crate::error::{Error, Result};
use crate::linalg::ZERO;
use num_complex::Complex64 as C64;

/// A complex coefficient on [-1, 1]: a polynomial in ascending powers, or
/// piecewise-linear data on a grid covering the interval.
#[derive(Clone, Debug, PartialEq)]
pub enum CoefficientFunction {
    Poly(Vec<C64>),
    Grid { x: Vec<f64>, values: Vec<C64> },
}

impl CoefficientFunction {
    pub fn zero() -> Self {
        CoefficientFunction::Poly(vec![])
    }

    pub fn constant(v: C64) -> Self {
        CoefficientFunction::Poly(vec![v])
    }

    pub fn poly(coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidInput("polynomial coefficient is not finite".into()));
        }
        Ok(CoefficientFunction::Poly(coeffs))
    }

    /// Grid data must be strictly increasing, span [-1, 1] and be finite.
    pub fn grid(x: Vec<f64>, values: Vec<C64>) -> Result<Self> {
        if x.len() < 2 || x.len() != values.len() {
            return Err(Error::InvalidInput(
                "grid coefficient needs at least two nodes and one value per node".into(),
            ));
        }
        if x.iter().any(|v| !v.is_finite()) || values.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidInput("grid coefficient contains NaN or Inf".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("grid nodes must be strictly increasing".into()));
        }
        if x[0] > -1.0 + 1e-12 || x[x.len() - 1] < 1.0 - 1e-12 {
            return Err(Error::InvalidInput("grid nodes must cover [-1, 1]".into()));
        }
        Ok(CoefficientFunction::Grid { x, values })
    }

    pub fn eval(&self, t: f64) -> C64 {
        match self {
            CoefficientFunction::Poly(cs) => cs.iter().rev().fold(ZERO, |acc, &a| acc * t + a),
            CoefficientFunction::Grid { x, values } => {
                let n = x.len();
                if t <= x[0] {
                    return values[0];
                }
                if t >= x[n - 1] {
                    return values[n - 1];
                }
                let k = x.partition_point(|&v| v <= t).clamp(1, n - 1);
                let (x0, x1) = (x[k - 1], x[k]);
                let s = (t - x0) / (x1 - x0);
                values[k - 1] * (1.0 - s) + values[k] * s
            }
        }
    }

    /// Interior nodes where the function fails to be smooth.
    pub fn knots(&self) -> Vec<f64> {
        match self {
            CoefficientFunction::Poly(_) => vec![],
            CoefficientFunction::Grid { x, .. } => {
                x.iter().copied().filter(|v| v.abs() < 1.0 - 1e-14).collect()
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            CoefficientFunction::Poly(cs) => cs.iter().all(|z| *z == ZERO),
            CoefficientFunction::Grid { values, .. } => values.iter().all(|z| *z == ZERO),
        }
    }

    /// Reflected function t -> f(-t).
    pub fn reflected(&self) -> Self {
        match self {
            CoefficientFunction::Poly(cs) => CoefficientFunction::Poly(
                cs.iter()
                    .enumerate()
                    .map(|(k, &a)| if k % 2 == 1 { -a } else { a })
                    .collect(),
            ),
            CoefficientFunction::Grid { x, values } => CoefficientFunction::Grid {
                x: x.iter().rev().map(|v| -v).collect(),
                values: values.iter().rev().copied().collect(),
            },
        }
    }
}

/// Coefficients of x -> p(a + b x) for p given in ascending powers.
pub fn compose_linear(coeffs: &[C64], a: f64, b: f64) -> Vec<C64> {
    let mut out: Vec<C64> = vec![];
    for &ck in coeffs.iter().rev() {
        // out <- out * (a + b x) + ck
        let mut next = vec![ZERO; out.len() + 1];
        for (k, &o) in out.iter().enumerate() {
            next[k] += o * a;
            next[k + 1] += o * b;
        }
        next[0] += ck;
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn poly_eval_horner() {
        let f = CoefficientFunction::poly(vec![c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 0.0)]).unwrap();
        let t = 0.3;
        let want = c(1.0, 0.0) + c(0.0, 2.0) * t - t * t;
        assert!((f.eval(t) - want).norm() < 1e-15);
    }

    #[test]
    fn grid_is_piecewise_linear() {
        let f = CoefficientFunction::grid(
            vec![-1.0, 0.0, 1.0],
            vec![c(0.0, 0.0), c(2.0, 2.0), c(0.0, 0.0)],
        )
        .unwrap();
        assert!((f.eval(-0.5) - c(1.0, 1.0)).norm() < 1e-15);
        assert!((f.eval(0.25) - c(1.5, 1.5)).norm() < 1e-15);
        assert_eq!(f.knots(), vec![0.0]);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(CoefficientFunction::grid(vec![-1.0, 0.5], vec![c(0.0, 0.0); 2]).is_err());
        assert!(CoefficientFunction::grid(vec![-1.0, 1.0], vec![c(f64::NAN, 0.0); 2]).is_err());
        assert!(CoefficientFunction::grid(vec![-1.0, -1.0, 1.0], vec![c(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn composition_matches_pointwise() {
        let cs = vec![c(0.5, 0.1), c(-1.0, 2.0), c(0.3, 0.0), c(0.0, -0.7)];
        let f = CoefficientFunction::Poly(cs.clone());
        let g = CoefficientFunction::Poly(compose_linear(&cs, 1.0, -1.0));
        for &x in &[0.0, 0.2, 0.7, 1.0] {
            assert!((g.eval(x) - f.eval(1.0 - x)).norm() < 1e-14);
        }
        let r = f.reflected();
        assert!((r.eval(0.4) - f.eval(-0.4)).norm() < 1e-15);
    }
}
