use crate::error::{Error, Result};
use crate::linalg::{c, ZERO};
use crate::problem::{BoundaryVariant, CoefficientFunction, InvolutionProblem};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

/// Search space for each of p and q: polynomials of a given degree, or
/// piecewise-linear data on equispaced nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisKind {
    Poly(usize),
    Grid(usize),
}

impl BasisKind {
    /// Parameters per coefficient function.
    pub fn per_function(self) -> usize {
        match self {
            BasisKind::Poly(d) => d + 1,
            BasisKind::Grid(n) => n,
        }
    }

    /// Total parameters: p's then q's.
    pub fn n_params(self) -> usize {
        2 * self.per_function()
    }

    fn nodes(n: usize) -> Vec<f64> {
        (0..n).map(|k| -1.0 + 2.0 * k as f64 / (n - 1) as f64).collect()
    }

    pub fn function(self, params: &[C64]) -> CoefficientFunction {
        match self {
            BasisKind::Poly(_) => CoefficientFunction::Poly(params.to_vec()),
            BasisKind::Grid(n) => CoefficientFunction::Grid { x: Self::nodes(n), values: params.to_vec() },
        }
    }

    /// Parameters representing `f`: exact for polynomials of degree <= d,
    /// least squares otherwise; nodal samples for grids.
    pub fn project(self, f: &CoefficientFunction) -> Vec<C64> {
        match self {
            BasisKind::Grid(n) => Self::nodes(n).iter().map(|&x| f.eval(x)).collect(),
            BasisKind::Poly(d) => {
                if let CoefficientFunction::Poly(cs) = f {
                    if cs.len() <= d + 1 {
                        let mut out = cs.clone();
                        out.resize(d + 1, ZERO);
                        return out;
                    }
                }
                let xs = Self::nodes(4 * (d + 1) + 1);
                let a = nalgebra::DMatrix::from_fn(xs.len(), d + 1, |i, j| c(xs[i].powi(j as i32), 0.0));
                let b = nalgebra::DVector::from_iterator(xs.len(), xs.iter().map(|&x| f.eval(x)));
                a.svd(true, true).solve(&b, 1e-14).map(|v| v.as_slice().to_vec()).unwrap_or_else(|_| vec![ZERO; d + 1])
            }
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisKind::Poly(d) => write!(f, "poly:{d}"),
            BasisKind::Grid(n) => write!(f, "grid:{n}"),
        }
    }
}

impl FromStr for BasisKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("basis must be poly:<degree> or grid:<nodes>, got {s:?}"));
        let (kind, num) = s.split_once(':').ok_or_else(bad)?;
        let k: usize = num.trim().parse().map_err(|_| bad())?;
        match kind.trim() {
            "poly" if k <= 12 => Ok(BasisKind::Poly(k)),
            "grid" if (2..=256).contains(&k) => Ok(BasisKind::Grid(k)),
            _ => Err(bad()),
        }
    }
}

impl Serialize for BasisKind {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BasisKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A point of the search space.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientBasis {
    pub kind: BasisKind,
    pub params: Vec<C64>,
}

impl CoefficientBasis {
    pub fn new(kind: BasisKind, params: Vec<C64>) -> Result<Self> {
        if params.len() != kind.n_params() {
            return Err(Error::InvalidInput(format!(
                "basis {kind} needs {} parameters, got {}",
                kind.n_params(),
                params.len()
            )));
        }
        if params.iter().any(|z| !z.is_finite()) {
            return Err(Error::InvalidInput("basis parameters must be finite".into()));
        }
        Ok(CoefficientBasis { kind, params })
    }

    pub fn zero(kind: BasisKind) -> Self {
        CoefficientBasis { kind, params: vec![ZERO; kind.n_params()] }
    }

    pub fn from_functions(kind: BasisKind, p: &CoefficientFunction, q: &CoefficientFunction) -> Self {
        let mut params = kind.project(p);
        params.extend(kind.project(q));
        CoefficientBasis { kind, params }
    }

    pub fn p(&self) -> CoefficientFunction {
        self.kind.function(&self.params[..self.kind.per_function()])
    }

    pub fn q(&self) -> CoefficientFunction {
        self.kind.function(&self.params[self.kind.per_function()..])
    }

    pub fn problem(&self, alpha: C64) -> Result<InvolutionProblem> {
        InvolutionProblem::new(alpha, self.p(), self.q(), BoundaryVariant::L)
    }

    /// The coefficients under x -> -x.
    pub fn reflected(&self) -> Self {
        Self::from_functions(self.kind, &self.p().reflected(), &self.q().reflected())
    }

    /// max over [-1, 1] of |p - p'| and |q - q'|, sampled on 401 points.
    pub fn sup_distance(&self, other: &CoefficientBasis) -> f64 {
        let (p, q, p2, q2) = (self.p(), self.q(), other.p(), other.q());
        (0..=400)
            .map(|k| -1.0 + k as f64 / 200.0)
            .map(|x| (p.eval(x) - p2.eval(x)).norm().max((q.eval(x) - q2.eval(x)).norm()))
            .fold(0.0, f64::max)
    }
}
