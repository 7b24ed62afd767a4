//! Eigenvalue sets: rectangle searches and certified "first n" searches.

use super::charset::CharacteristicSet;
use super::contour::{winding_number, Contour, Rect};
use super::roots::{newton, roots_in_rect, sort_lex, Root, RootFunctions, RootOptions};
use crate::error::{Error, Result};
use crate::linalg::Scaled;
use crate::problem::io::{write_atomic, ComplexJson};
use crate::problem::BoundaryVariant;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

/// Zeros of one characteristic function, sorted by (Re, Im).
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub variant: BoundaryVariant,
    pub region: Rect,
    /// Set when completeness is certified on the disk |lambda| < radius
    /// rather than on the whole rectangle.
    pub radius: Option<f64>,
    /// Reference point for products; nonzero only when 0 is an eigenvalue.
    pub shift: C64,
    pub eigenvalues: Vec<Root>,
}

#[derive(Serialize, Deserialize)]
struct EigenJson {
    re: f64,
    im: f64,
    mult: u32,
}

#[derive(Serialize, Deserialize)]
struct SpectrumJson {
    variant: BoundaryVariant,
    region: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(default = "zero_shift")]
    shift: ComplexJson,
    eigenvalues: Vec<EigenJson>,
}

fn zero_shift() -> ComplexJson {
    ComplexJson { re: 0.0, im: 0.0 }
}

impl Spectrum {
    /// Builds a spectrum, sorting the zeros and choosing the shift.
    pub fn new(variant: BoundaryVariant, region: Rect, radius: Option<f64>, mut eigenvalues: Vec<Root>) -> Self {
        sort_lex(&mut eigenvalues);
        let shift = choose_shift(&eigenvalues);
        Spectrum { variant, region, radius, shift, eigenvalues }
    }

    pub fn total_multiplicity(&self) -> usize {
        self.eigenvalues.iter().map(|r| r.mult as usize).sum()
    }

    /// Eigenvalues repeated by multiplicity, in stored order.
    pub fn values(&self) -> Vec<C64> {
        self.eigenvalues.iter().flat_map(|r| std::iter::repeat_n(r.z, r.mult as usize)).collect()
    }

    /// The `n` eigenvalues (with multiplicity) of smallest modulus, ordered by modulus.
    pub fn smallest(&self, n: usize) -> Vec<C64> {
        let mut v = self.values();
        v.sort_by(|a, b| a.norm().total_cmp(&b.norm()).then(a.re.total_cmp(&b.re)).then(a.im.total_cmp(&b.im)));
        v.truncate(n);
        v
    }

    /// Keeps the `n` smallest-modulus eigenvalues, shrinking the certified
    /// radius to lie strictly between the kept and the dropped ones.
    pub fn truncated(&self, n: usize) -> Spectrum {
        let mut all = self.values();
        all.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
        if all.len() <= n {
            return self.clone();
        }
        let r = 0.5 * (all[n - 1].norm() + all[n].norm());
        let roots = all[..n].iter().map(|&z| Root { z, mult: 1 }).collect();
        let mut s = Spectrum::new(self.variant, self.region, Some(r), merge(roots));
        s.shift = self.shift;
        s
    }

    pub fn to_json(&self) -> String {
        let j = SpectrumJson {
            variant: self.variant,
            region: self.region.as_array(),
            radius: self.radius,
            shift: self.shift.into(),
            eigenvalues: self.eigenvalues.iter().map(|r| EigenJson { re: r.z.re, im: r.z.im, mult: r.mult }).collect(),
        };
        serde_json::to_string_pretty(&j).expect("spectrum serialises")
    }

    pub fn from_json(s: &str) -> Result<Spectrum> {
        let j: SpectrumJson =
            serde_json::from_str(s).map_err(|e| Error::InvalidInput(format!("spectrum file: {e}")))?;
        let [a, b, c, d] = j.region;
        let region = Rect::new(a, b, c, d).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let mut eig = Vec::with_capacity(j.eigenvalues.len());
        for e in j.eigenvalues {
            if !(e.re.is_finite() && e.im.is_finite()) || e.mult == 0 {
                return Err(Error::InvalidInput("eigenvalues must be finite with positive multiplicity".into()));
            }
            eig.push(Root { z: C64::new(e.re, e.im), mult: e.mult });
        }
        sort_lex(&mut eig);
        Ok(Spectrum { variant: j.variant, region, radius: j.radius, shift: j.shift.into(), eigenvalues: eig })
    }

    pub fn load(path: &Path) -> Result<Spectrum> {
        Spectrum::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_json())
    }
}

/// Merges numerically identical values into multiplicities.
fn merge(mut roots: Vec<Root>) -> Vec<Root> {
    sort_lex(&mut roots);
    let mut out: Vec<Root> = vec![];
    for r in roots {
        match out.last_mut() {
            Some(l) if (l.z - r.z).norm() <= 1e-12 * r.z.norm().max(1.0) => l.mult += r.mult,
            _ => out.push(r),
        }
    }
    out
}

/// Zero eigenvalues make the product normalisation at 0 meaningless, so the
/// product is then taken about a real point s < 0 half way to the nearest
/// nonzero eigenvalue.
fn choose_shift(eig: &[Root]) -> C64 {
    const ZERO_TOL: f64 = 1e-8;
    if !eig.iter().any(|r| r.z.norm() <= ZERO_TOL) {
        return C64::new(0.0, 0.0);
    }
    let d = eig
        .iter()
        .map(|r| r.z.norm())
        .filter(|&m| m > ZERO_TOL)
        .fold(f64::INFINITY, f64::min);
    let d = if d.is_finite() { d } else { 2.0 };
    C64::new(-0.5 * d, 0.0)
}

fn functions<'a>(
    ctx: &'a CharacteristicSet,
    variant: BoundaryVariant,
) -> (impl Fn(C64) -> Result<Scaled> + Sync + 'a, impl Fn(C64) -> Result<Scaled> + Sync + 'a) {
    (
        move |l| ctx.eval_with(variant, l, &ctx.count_ode),
        move |l| ctx.eval_with(variant, l, &ctx.refine_ode),
    )
}

/// All zeros of the characteristic function of `variant` inside `region`.
pub fn find_eigenvalues(
    ctx: &CharacteristicSet,
    region: Rect,
    variant: BoundaryVariant,
    opts: &RootOptions,
) -> Result<Spectrum> {
    let (count, refine) = functions(ctx, variant);
    let fs = RootFunctions { count: &count, refine: &refine };
    let (roots, used, _) = roots_in_rect(&fs, region, opts)?;
    Ok(Spectrum::new(variant, used, None, roots))
}

/// Winding number of the characteristic function around |lambda| = radius.
pub fn count_in_disk(
    ctx: &CharacteristicSet,
    variant: BoundaryVariant,
    radius: f64,
    opts: &RootOptions,
) -> Result<i64> {
    let (count, _) = functions(ctx, variant);
    let c = Contour::Circle { center: C64::new(0.0, 0.0), radius };
    Ok(winding_number(&count, &c, &opts.contour)?.count)
}

/// Walks the zeros lambda = z^2 / w_k, z ~ pi m + phi, outward from `start`,
/// returning those with |lambda| <= limit.
fn walk_branch(
    refine: &(dyn Fn(C64) -> Result<Scaled> + Sync),
    wk: C64,
    start: C64,
    limit: f64,
) -> Result<Vec<C64>> {
    let g = |z: C64| refine(z * z / wk);
    let mut out = vec![];
    let mut last = start;
    loop {
        let pred = last + PI;
        let mut found = None;
        for off in [0.0, 0.3, -0.3] {
            if let Ok(z) = newton(&g, pred + off, 1, 40, PI) {
                if (z - pred).norm() < 0.6 * PI && z.re > last.re + 0.25 * PI {
                    found = Some(z);
                    break;
                }
            }
        }
        let Some(z) = found else {
            return Err(Error::Convergence(format!("branch walk lost track after z = {last}")));
        };
        let lambda = z * z / wk;
        if lambda.norm() > limit {
            return Ok(out);
        }
        out.push(lambda);
        last = z;
    }
}

/// Circle radius in [lo, hi] farthest (relatively) from every known zero modulus.
fn gap_radius(zeros: &[C64], lo: f64, hi: f64) -> f64 {
    let mut best = (lo, -1.0);
    for k in 0..=48 {
        let r = lo + (hi - lo) * k as f64 / 48.0;
        let d = zeros.iter().map(|z| (z.norm() - r).abs()).fold(f64::INFINITY, f64::min);
        if d > best.1 {
            best = (r, d);
        }
    }
    best.0
}

/// At least `n` zeros of smallest modulus, certified complete on a disk.
///
/// A rectangle search covers a core disk; beyond it zeros follow the two
/// asymptotic branches and are traced by Newton's method in z = sqrt(w_k lambda).
/// The disk count is then checked against a contour winding number, with a
/// full rectangle search as fallback.
pub fn first_n(
    ctx: &CharacteristicSet,
    variant: BoundaryVariant,
    n: usize,
    opts: &RootOptions,
) -> Result<Spectrum> {
    if n == 0 {
        return Err(Error::Usage("first_n needs n >= 1".into()));
    }
    let w = ctx.matrix.w;
    let sw = [w[0].norm().sqrt(), w[1].norm().sqrt()];
    let core = (2.5 * PI / sw[0].min(sw[1])).powi(2);
    let mut target = (((n + 1) as f64) * PI / (sw[0] + sw[1])).powi(2) * 1.2 + 4.0;
    let (count, refine) = functions(ctx, variant);
    let fs = RootFunctions { count: &count, refine: &refine };
    for _ in 0..6 {
        let found = if target <= core {
            let (roots, used, _) = roots_in_rect(&fs, Rect::square(target * 1.02), opts)?;
            let r = gap_radius(&values(&roots), target, used.re1.min(-used.re0).min(used.im1).min(-used.im0));
            Some((roots, r))
        } else {
            walk_and_certify(ctx, variant, &fs, core, target, opts)?
        };
        let (roots, r) = match found {
            Some(v) => v,
            None => {
                let half = target * 1.1;
                let (roots, used, _) = roots_in_rect(&fs, Rect::square(half), opts)?;
                let inner = used.re1.min(-used.re0).min(used.im1).min(-used.im0);
                (roots.clone(), gap_radius(&values(&roots), target, inner))
            }
        };
        let inside: Vec<Root> = roots.into_iter().filter(|x| x.z.norm() < r).collect();
        let total: usize = inside.iter().map(|x| x.mult as usize).sum();
        if total >= n {
            return Ok(Spectrum::new(variant, Rect::square(r), Some(r), inside));
        }
        target *= 1.5;
    }
    Err(Error::Convergence(format!("could not certify {n} eigenvalues")))
}

fn values(roots: &[Root]) -> Vec<C64> {
    roots.iter().map(|r| r.z).collect()
}

/// Returns `None` when the disk count disagrees with the zeros found.
fn walk_and_certify(
    ctx: &CharacteristicSet,
    variant: BoundaryVariant,
    fs: &RootFunctions<'_>,
    core: f64,
    target: f64,
    opts: &RootOptions,
) -> Result<Option<(Vec<Root>, f64)>> {
    let (core_roots, _, _) = roots_in_rect(fs, Rect::square(core), opts)?;
    let w = ctx.matrix.w;
    let limit = target * 1.1;
    let exec = opts.contour.exec;
    let start_for = |wk: C64| -> C64 {
        core_roots
            .iter()
            .map(|r| (wk * r.z).sqrt())
            .filter(|z| z.re > 0.0 && z.im.abs() < 1.5)
            .max_by(|a, b| a.re.total_cmp(&b.re))
            .unwrap_or_else(|| C64::new((core * wk.norm()).sqrt() - PI, 0.0))
    };
    let (b0, b1) = exec.join(
        || walk_branch(fs.refine, w[0], start_for(w[0]), limit),
        || walk_branch(fs.refine, w[1], start_for(w[1]), limit),
    );
    let mut roots = core_roots.clone();
    for lam in b0?.into_iter().chain(b1?) {
        if !roots.iter().any(|r| (r.z - lam).norm() <= 1e-8 * lam.norm().max(1.0)) {
            roots.push(Root { z: lam, mult: 1 });
        }
    }
    let r = gap_radius(&values(&roots), target, limit);
    let known: i64 = roots.iter().filter(|x| x.z.norm() < r).map(|x| x.mult as i64).sum();
    match count_in_disk(ctx, variant, r, opts) {
        Ok(c) if c == known => Ok(Some((roots, r))),
        Ok(_) | Err(Error::Region { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}
