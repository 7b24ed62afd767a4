//! JSON encoding of problem files.

use super::{BoundaryVariant, CoefficientFunction, InvolutionProblem};
use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for ComplexJson {
    fn from(z: C64) -> Self {
        ComplexJson { re: z.re, im: z.im }
    }
}

impl From<ComplexJson> for C64 {
    fn from(z: ComplexJson) -> Self {
        C64::new(z.re, z.im)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum CoefficientJson {
    Poly { coeffs: Vec<[f64; 2]> },
    Grid { x: Vec<f64>, values: Vec<[f64; 2]> },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProblemJson {
    pub alpha: ComplexJson,
    pub p: CoefficientJson,
    pub q: CoefficientJson,
    #[serde(default = "default_bc")]
    pub bc: BoundaryVariant,
}

fn default_bc() -> BoundaryVariant {
    BoundaryVariant::L
}

fn pairs(v: &[[f64; 2]]) -> Vec<C64> {
    v.iter().map(|p| C64::new(p[0], p[1])).collect()
}

impl TryFrom<&CoefficientJson> for CoefficientFunction {
    type Error = Error;
    fn try_from(c: &CoefficientJson) -> Result<Self> {
        match c {
            CoefficientJson::Poly { coeffs } => CoefficientFunction::poly(pairs(coeffs)),
            CoefficientJson::Grid { x, values } => CoefficientFunction::grid(x.clone(), pairs(values)),
        }
    }
}

impl From<&CoefficientFunction> for CoefficientJson {
    fn from(c: &CoefficientFunction) -> Self {
        let unpair = |v: &[C64]| v.iter().map(|z| [z.re, z.im]).collect();
        match c {
            CoefficientFunction::Poly(cs) => CoefficientJson::Poly { coeffs: unpair(cs) },
            CoefficientFunction::Grid { x, values } => {
                CoefficientJson::Grid { x: x.clone(), values: unpair(values) }
            }
        }
    }
}

impl TryFrom<&ProblemJson> for InvolutionProblem {
    type Error = Error;
    fn try_from(j: &ProblemJson) -> Result<Self> {
        InvolutionProblem::new(j.alpha.into(), (&j.p).try_into()?, (&j.q).try_into()?, j.bc)
    }
}

impl From<&InvolutionProblem> for ProblemJson {
    fn from(p: &InvolutionProblem) -> Self {
        ProblemJson { alpha: p.alpha.into(), p: (&p.p).into(), q: (&p.q).into(), bc: p.variant }
    }
}

pub fn problem_from_str(s: &str) -> Result<InvolutionProblem> {
    let j: ProblemJson =
        serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("problem file: {e}")))?;
    (&j).try_into()
}

pub fn problem_to_string(p: &InvolutionProblem) -> String {
    serde_json::to_string_pretty(&ProblemJson::from(p)).expect("problem serialises")
}

pub fn load_problem(path: &Path) -> Result<InvolutionProblem> {
    problem_from_str(&std::fs::read_to_string(path)?)
}

/// Writes `contents` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Usage(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// Serialises non-finite floats as null and reads null back as infinity.
pub(crate) mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_json() {
        let s = r#"{"alpha":{"re":0.25,"im":-0.5},
            "p":{"type":"poly","coeffs":[[1.0,0.0],[0.0,2.0]]},
            "q":{"type":"grid","x":[-1.0,0.0,1.0],"values":[[0,0],[1,1],[0,0]]},
            "bc":"L12"}"#;
        let p = problem_from_str(s).unwrap();
        assert_eq!(p.variant, BoundaryVariant::L12);
        let back = problem_from_str(&problem_to_string(&p)).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn rejects_inadmissible_and_malformed() {
        let bad_alpha = r#"{"alpha":{"re":1.0,"im":0.0},"p":{"type":"poly","coeffs":[]},"q":{"type":"poly","coeffs":[]}}"#;
        assert!(matches!(problem_from_str(bad_alpha), Err(Error::Admissibility { .. })));
        let bad_grid = r#"{"alpha":{"re":0.0,"im":0.0},"p":{"type":"grid","x":[-1.0,0.5],"values":[[0,0],[0,0]]},"q":{"type":"poly","coeffs":[]}}"#;
        assert!(matches!(problem_from_str(bad_grid), Err(Error::InvalidInput(_))));
        assert!(problem_from_str("{").is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = std::env::temp_dir().join(format!("invspec-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let f = dir.join("out.json");
        write_atomic(&f, "first").unwrap();
        write_atomic(&f, "second").unwrap();
        assert_eq!(std::fs::read_to_string(&f).unwrap(), "second");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
