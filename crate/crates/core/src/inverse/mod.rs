//! Recovering (p, q) from spectra by least squares over a finite basis.
//!
//! The default objective matches eigenvalues directly. Candidate eigenvalues
//! are tracked by Newton's method from the previous accepted point, with a
//! certified search as fallback, and the eigenvalue Jacobian comes from
//! implicit differentiation, d lambda / d theta = -(dDelta/dtheta)/(dDelta/dlambda).
//! The secondary objective compares candidate characteristic functions with
//! Hadamard reconstructions of the targets on a lambda grid.

mod basis;
pub mod lm;

pub use basis::{BasisKind, CoefficientBasis};

use crate::error::{Error, Result};
use crate::hadamard::{HadamardOptions, HadamardProduct};
use crate::linalg::{c, Scaled, ONE};
use crate::par::Exec;
use crate::problem::io::ComplexJson;
use crate::problem::{check_alpha, BoundaryVariant};
use crate::spectral::{first_n, CharacteristicSet, RootOptions, Spectrum};
use crate::spectral::roots::newton;
use lm::{levenberg_marquardt, LmOptions, Model};
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Extra zeros tracked beyond N so that reordering near the cut is seen.
const TRACK_MARGIN: usize = 2;
const FD_STEP: f64 = 1e-6;

/// Target spectra of one problem; alpha is not part of the spectra and must be supplied.
#[derive(Clone, Debug)]
pub struct FitTargets {
    pub alpha: C64,
    pub spectra: Vec<Spectrum>,
}

impl FitTargets {
    pub fn new(alpha: C64, spectra: Vec<Spectrum>) -> Result<Self> {
        check_alpha(alpha)?;
        if spectra.is_empty() || spectra.len() > 5 {
            return Err(Error::Usage("between one and five target spectra are needed".into()));
        }
        for (i, s) in spectra.iter().enumerate() {
            if spectra[..i].iter().any(|t| t.variant == s.variant) {
                return Err(Error::Usage(format!("variant {} given twice", s.variant)));
            }
        }
        Ok(FitTargets { alpha, spectra })
    }

    fn check_count(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::Usage("N must be at least 1".into()));
        }
        for s in &self.spectra {
            if s.total_multiplicity() < n {
                return Err(Error::Usage(format!(
                    "target {} has {} eigenvalues, fewer than N = {n}",
                    s.variant,
                    s.total_multiplicity()
                )));
            }
        }
        Ok(())
    }
}

/// Sorts by |lambda - shift|, then (Re, Im); the pairing order of the residual.
pub fn sort_for_pairing(v: &mut [C64], shift: C64) {
    v.sort_by(|a, b| {
        (a - shift).norm().total_cmp(&(b - shift).norm()).then(a.re.total_cmp(&b.re)).then(a.im.total_cmp(&b.im))
    });
}

fn paired(values: Vec<C64>, shift: C64, n: usize) -> Vec<C64> {
    let mut v = values;
    sort_for_pairing(&mut v, shift);
    v.truncate(n);
    v
}

/// Sum over the target variants of sum_{n <= N} |lambda_n(candidate) - lambda_n(target)|^2,
/// each spectrum paired in sorted order after its shift. Candidate eigenvalues
/// come from a fresh certified search.
pub fn spectra_residual(params: &CoefficientBasis, targets: &FitTargets, n: usize, opts: &RootOptions) -> Result<f64> {
    Ok(eigen_mismatches(params, targets, n, opts)?.iter().map(|m| m.sum_sq()).sum())
}

/// Per-spectrum eigenvalue mismatches at `params`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMismatch {
    pub variant: BoundaryVariant,
    /// |lambda_n(candidate) - lambda_n(target)| in pairing order.
    pub abs: Vec<f64>,
}

impl SpectrumMismatch {
    pub fn sum_sq(&self) -> f64 {
        self.abs.iter().map(|a| a * a).sum()
    }
    pub fn max(&self) -> f64 {
        self.abs.iter().copied().fold(0.0, f64::max)
    }
}

pub fn eigen_mismatches(
    params: &CoefficientBasis,
    targets: &FitTargets,
    n: usize,
    opts: &RootOptions,
) -> Result<Vec<SpectrumMismatch>> {
    targets.check_count(n)?;
    let residual_err = |e: Error| Error::Residual(format!("candidate forward solve failed: {e}"));
    let ctx = CharacteristicSet::new(&params.problem(targets.alpha)?)?;
    opts.contour.exec.try_map(&targets.spectra, |t| {
        let cand = first_n(&ctx, t.variant, n, opts).map_err(residual_err)?;
        let a = paired(cand.values(), t.shift, n);
        let b = paired(t.values(), t.shift, n);
        Ok(SpectrumMismatch { variant: t.variant, abs: a.iter().zip(&b).map(|(x, y)| (x - y).norm()).collect() })
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMode {
    #[default]
    Eigen,
    Charfun,
}

/// Fit configuration; the JSON keys follow the CLI config file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitConfig {
    pub basis: BasisKind,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub mode: FitMode,
    /// A start has converged when its objective is below this.
    #[serde(default = "default_tol_fit")]
    pub tol_fit: f64,
    /// Random starts draw Re and Im of each parameter from [-scale, scale].
    #[serde(default = "default_start_scale")]
    pub start_scale: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub ridge: f64,
    #[serde(skip)]
    pub exec: Exec,
}

fn default_starts() -> usize {
    8
}
fn default_seed() -> u64 {
    42
}
fn default_tol_fit() -> f64 {
    1e-8
}
fn default_start_scale() -> f64 {
    0.5
}
fn default_max_iter() -> usize {
    60
}

impl FitConfig {
    pub fn new(basis: BasisKind, n: usize) -> Self {
        FitConfig {
            basis,
            n,
            starts: default_starts(),
            seed: default_seed(),
            mode: FitMode::Eigen,
            tol_fit: default_tol_fit(),
            start_scale: default_start_scale(),
            max_iter: default_max_iter(),
            ridge: 0.0,
            exec: Exec::Auto,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.starts == 0 || self.max_iter == 0 {
            return Err(Error::Usage("N, starts and max_iter must be positive".into()));
        }
        if !(self.tol_fit > 0.0 && self.start_scale >= 0.0 && self.ridge >= 0.0) {
            return Err(Error::Usage("tol_fit must be positive, start_scale and ridge non-negative".into()));
        }
        Ok(())
    }

    /// Start points: all zeros first, then seeded random draws.
    pub fn start_points(&self) -> Vec<Vec<C64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let np = self.basis.n_params();
        let s = self.start_scale;
        (0..self.starts)
            .map(|k| {
                if k == 0 || s == 0.0 {
                    vec![c(0.0, 0.0); np]
                } else {
                    (0..np).map(|_| c(rng.gen_range(-s..=s), rng.gen_range(-s..=s))).collect()
                }
            })
            .collect()
    }
}

/// Eigenvalue-matching objective with tracked candidate zeros.
struct EigenModel<'a> {
    kind: BasisKind,
    alpha: C64,
    targets: Vec<(BoundaryVariant, C64, Vec<C64>)>,
    n: usize,
    roots: &'a RootOptions,
    exec: Exec,
    /// Tracked zeros per target (N + margin, pairing order) at the accepted point.
    accepted: Option<Vec<Vec<C64>>>,
    trial: Option<Vec<Vec<C64>>>,
}

impl<'a> EigenModel<'a> {
    fn new(targets: &FitTargets, kind: BasisKind, n: usize, roots: &'a RootOptions, exec: Exec) -> Self {
        EigenModel {
            kind,
            alpha: targets.alpha,
            targets: targets.spectra.iter().map(|s| (s.variant, s.shift, paired(s.values(), s.shift, n))).collect(),
            n,
            roots,
            exec,
            accepted: None,
            trial: None,
        }
    }

    fn ctx(&self, x: &[C64]) -> Result<CharacteristicSet> {
        CharacteristicSet::new(&CoefficientBasis::new(self.kind, x.to_vec())?.problem(self.alpha)?)
    }
}

/// Re-finds zeros near `prev` by Newton; None if any is lost or two merge.
fn track(ctx: &CharacteristicSet, variant: BoundaryVariant, prev: &[C64]) -> Option<Vec<C64>> {
    let f = |l: C64| ctx.eval_with(variant, l, &ctx.refine_ode);
    let mut out = Vec::with_capacity(prev.len());
    for (i, &z0) in prev.iter().enumerate() {
        let gap = prev
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, w)| (w - z0).norm())
            .fold(f64::INFINITY, f64::min);
        let reach = (0.45 * gap).min(z0.norm().max(1.0));
        out.push(newton(&f, z0, 1, 30, reach).ok()?);
    }
    for i in 0..out.len() {
        for j in 0..i {
            if (out[i] - out[j]).norm() <= 1e-6 * out[i].norm().max(1.0) {
                return None;
            }
        }
    }
    Some(out)
}

impl Model for EigenModel<'_> {
    fn residual(&mut self, x: &[C64]) -> Result<Vec<C64>> {
        let ctx = self.ctx(x)?;
        let m = self.n + TRACK_MARGIN;
        let idx: Vec<usize> = (0..self.targets.len()).collect();
        let prev = self.accepted.as_ref();
        let found = self.exec.try_map(&idx, |&k| {
            let (variant, shift, _) = &self.targets[k];
            let tracked = prev.and_then(|p| track(&ctx, *variant, &p[k]));
            let mut zs = match tracked {
                Some(z) => z,
                None => first_n(&ctx, *variant, m, self.roots)
                    .map_err(|e| Error::Residual(format!("candidate forward solve failed: {e}")))?
                    .values(),
            };
            sort_for_pairing(&mut zs, *shift);
            zs.truncate(m);
            Ok::<_, Error>(zs)
        })?;
        let mut r = Vec::with_capacity(self.n * self.targets.len());
        for (zs, (_, _, t)) in found.iter().zip(&self.targets) {
            r.extend(zs.iter().zip(t).map(|(a, b)| a - b));
        }
        self.trial = Some(found);
        Ok(r)
    }

    fn accept(&mut self) {
        self.accepted = self.trial.take();
    }

    fn jacobian(&mut self, x: &[C64], _r: &[C64]) -> Result<DMatrix<C64>> {
        let zs = self.accepted.as_ref().ok_or_else(|| Error::Residual("no accepted point".into()))?;
        let base = self.ctx(x)?;
        let np = x.len();
        let steps: Vec<f64> = x.iter().map(|z| FD_STEP * z.norm().max(1.0)).collect();
        let perturbed: Vec<(CharacteristicSet, CharacteristicSet)> = (0..np)
            .map(|j| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[j] += steps[j];
                xm[j] -= steps[j];
                Ok((self.ctx(&xp)?, self.ctx(&xm)?))
            })
            .collect::<Result<_>>()?;
        let tasks: Vec<(BoundaryVariant, C64)> = self
            .targets
            .iter()
            .zip(zs)
            .flat_map(|((v, _, _), z)| z[..self.n].iter().map(move |&l| (*v, l)))
            .collect();
        let rows = self.exec.try_map(&tasks, |&(v, l)| {
            let hl = FD_STEP * l.norm().max(1.0);
            let d0 = base.eval(v, l + hl)?;
            let dm = base.eval(v, l - hl)?;
            // (Delta(l + h) - Delta(l - h)) / Delta(l + h)
            let slope = ONE - dm.ratio(&d0);
            perturbed
                .iter()
                .zip(&steps)
                .map(|((cp, cm), &h)| {
                    let dp: Scaled = cp.eval(v, l)?;
                    let dn: Scaled = cm.eval(v, l)?;
                    let dtheta = dp.ratio(&d0) - dn.ratio(&d0);
                    Ok(-dtheta * hl / (slope * h))
                })
                .collect::<Result<Vec<C64>>>()
        })?;
        Ok(DMatrix::from_fn(rows.len(), np, |i, j| rows[i][j]))
    }
}

/// Characteristic-function objective: Delta_candidate / Delta_hat - 1 on two
/// circles inside the known zeros, with Delta_hat the Hadamard reconstruction.
struct CharfunModel {
    kind: BasisKind,
    alpha: C64,
    samples: Vec<(BoundaryVariant, Vec<(C64, C64)>)>,
    exec: Exec,
}

/// Radius near `target` farthest from all zero moduli.
fn circle_radius(zeros: &[C64], target: f64) -> f64 {
    let mut best = (target, -1.0);
    for k in 0..=40 {
        let r = target * (0.8 + 0.4 * k as f64 / 40.0);
        let d = zeros.iter().map(|z| (z.norm() - r).abs()).fold(f64::INFINITY, f64::min);
        if d > best.1 {
            best = (r, d);
        }
    }
    best.0
}

impl CharfunModel {
    const POINTS: usize = 8;

    fn new(targets: &FitTargets, kind: BasisKind, n: usize) -> Result<Self> {
        let geometry = crate::problem::sector_geometry(crate::problem::weight_from_alpha(targets.alpha)?)?;
        let mut samples = vec![];
        for s in &targets.spectra {
            let h = HadamardProduct::build(s, &geometry, &HadamardOptions { truncation: Some(n), ..Default::default() })?;
            let zs = s.smallest(n);
            let mut pts = vec![];
            // inner circles, where Delta still depends visibly on p and q
            for (ring, frac) in [(0usize, 8usize), (1, 4)] {
                let r = circle_radius(&zs, zs[(n / frac).max(1) - 1].norm().max(1.0));
                for k in 0..Self::POINTS {
                    let t = (k as f64 + 0.5 * (ring + 1) as f64) * 2.0 * PI / Self::POINTS as f64;
                    let l = C64::from_polar(r, t);
                    pts.push((l, h.eval(l)?.0));
                }
            }
            samples.push((s.variant, pts));
        }
        Ok(CharfunModel { kind, alpha: targets.alpha, samples, exec: Exec::Auto })
    }

    fn values(&self, x: &[C64]) -> Result<Vec<C64>> {
        let ctx = CharacteristicSet::new(&CoefficientBasis::new(self.kind, x.to_vec())?.problem(self.alpha)?)?;
        let tasks: Vec<(BoundaryVariant, C64, C64)> =
            self.samples.iter().flat_map(|(v, pts)| pts.iter().map(move |&(l, h)| (*v, l, h))).collect();
        self.exec.try_map(&tasks, |&(v, l, h)| Ok(ctx.eval(v, l)?.ratio(&Scaled::from_c64(h)) - ONE))
    }
}

impl Model for CharfunModel {
    fn residual(&mut self, x: &[C64]) -> Result<Vec<C64>> {
        self.values(x)
    }

    fn jacobian(&mut self, x: &[C64], _r: &[C64]) -> Result<DMatrix<C64>> {
        let mut cols = vec![];
        for j in 0..x.len() {
            let h = FD_STEP * x[j].norm().max(1.0);
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (self.values(&xp)?, self.values(&xm)?);
            cols.push(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>());
        }
        Ok(DMatrix::from_fn(cols[0].len(), x.len(), |i, j| cols[j][i]))
    }
}

/// Infinite objectives (failed starts) are written as null.

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StartReport {
    pub initial: Vec<ComplexJson>,
    pub params: Vec<ComplexJson>,
    #[serde(with = "crate::problem::io::finite_or_null")]
    pub objective: f64,
    pub iterations: usize,
    pub failed_evaluations: usize,
}

impl StartReport {
    pub fn basis(&self, kind: BasisKind) -> CoefficientBasis {
        CoefficientBasis { kind, params: self.params.iter().map(|&z| z.into()).collect() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitReport {
    pub basis: BasisKind,
    pub mode: FitMode,
    #[serde(rename = "N")]
    pub n: usize,
    pub alpha: ComplexJson,
    pub seed: u64,
    pub params: Vec<ComplexJson>,
    /// Objective after each iteration of the best start.
    pub residual_history: Vec<f64>,
    /// Objective at `params`, recomputed from scratch (certified searches in eigen mode).
    #[serde(with = "crate::problem::io::finite_or_null")]
    pub final_residual: f64,
    pub mismatches: Vec<SpectrumMismatch>,
    pub converged: bool,
    pub best_start: usize,
    pub starts: Vec<StartReport>,
}

impl FitReport {
    pub fn recovered(&self) -> CoefficientBasis {
        CoefficientBasis { kind: self.basis, params: self.params.iter().map(|&z| z.into()).collect() }
    }

    /// Start results with objective below `tol`, as basis points.
    pub fn near_zero_candidates(&self, tol: f64) -> Vec<CoefficientBasis> {
        self.starts.iter().filter(|s| s.objective < tol).map(|s| s.basis(self.basis)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

fn to_json_vec(v: &[C64]) -> Vec<ComplexJson> {
    v.iter().map(|&z| z.into()).collect()
}

/// Multistart damped least squares. Non-convergence is reported through the
/// `converged` flag rather than an error.
pub fn fit_coefficients(targets: &FitTargets, config: &FitConfig, roots: &RootOptions) -> Result<FitReport> {
    config.validate()?;
    targets.check_count(config.n)?;
    let lm_opts = LmOptions { max_iter: config.max_iter, ridge: config.ridge, ..Default::default() };
    let starts = config.start_points();
    let charfun = match config.mode {
        FitMode::Charfun => Some(CharfunModel::new(targets, config.basis, config.n)?),
        FitMode::Eigen => None,
    };
    let outcomes = config.exec.map(&starts, |x0| match &charfun {
        Some(model) => {
            let mut m = CharfunModel { samples: model.samples.clone(), exec: config.exec, ..*model };
            levenberg_marquardt(&mut m, x0, &lm_opts)
        }
        None => {
            let mut m = EigenModel::new(targets, config.basis, config.n, roots, config.exec);
            levenberg_marquardt(&mut m, x0, &lm_opts)
        }
    });
    let best = outcomes
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cost.total_cmp(&b.1.cost))
        .map(|(i, _)| i)
        .expect("at least one start");
    let recovered = CoefficientBasis::new(config.basis, outcomes[best].x.clone())?;
    let mismatches = eigen_mismatches(&recovered, targets, config.n, roots).unwrap_or_default();
    let final_residual = match &charfun {
        Some(model) => {
            let fresh = CharfunModel { samples: model.samples.clone(), ..*model };
            fresh.values(&recovered.params).map(|r| r.iter().map(|z| z.norm_sqr()).sum()).unwrap_or(f64::INFINITY)
        }
        None if mismatches.is_empty() => f64::INFINITY,
        None => mismatches.iter().map(|m| m.sum_sq()).sum(),
    } + config.ridge * recovered.params.iter().map(|z| z.norm_sqr()).sum::<f64>();
    Ok(FitReport {
        basis: config.basis,
        mode: config.mode,
        n: config.n,
        alpha: targets.alpha.into(),
        seed: config.seed,
        params: to_json_vec(&recovered.params),
        residual_history: outcomes[best].history.clone(),
        final_residual,
        mismatches,
        converged: final_residual < config.tol_fit,
        best_start: best,
        starts: starts
            .iter()
            .zip(&outcomes)
            .map(|(x0, o)| StartReport {
                initial: to_json_vec(x0),
                params: to_json_vec(&o.x),
                objective: o.cost,
                iterations: o.iterations,
                failed_evaluations: o.failed_evaluations,
            })
            .collect(),
    })
}
