//! Numerical self-checks: Wronskian constancy, M = M*, the Cramer form of the
//! Weyl matrix, ray asymptotics, spectral-mapping blocks and the first-order
//! reduction. Each suite returns per-check metrics against fixed thresholds.

use crate::error::{Error, Result};
use crate::first_order::{find_anchor, reduce_first_order, verify_equivalence, AnchorOptions};
use crate::hadamard::log_asymptotic;
use crate::linalg::{u_matrix, Mat2, I, ONE};
use crate::ode::{
    adjoint_weyl_solution, integrate_adjoint, integrate_fundamental, uniform_grid, weyl_solution, wronskian,
    OdeOptions,
};
use crate::par::Exec;
use crate::problem::{BoundaryVariant, CoefficientFunction, InvolutionProblem, Ray};
use crate::spectral::{spectral_mapping_blocks, CharacteristicSet};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Identity-type checks must hold to this.
pub const IDENTITY_TOL: f64 = 1e-8;
/// Reduction checks (Riccati identity, first-order equivalence).
pub const REDUCTION_TOL: f64 = 1e-6;
/// Fitted log-log slopes of ray deviations must not exceed this.
pub const SLOPE_MAX: f64 = -0.9;
/// Deviations this small are at the integration floor and carry no slope.
pub const DEVIATION_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Asymptotics,
    Wronskian,
    Adjoint,
    Cramer,
    Firstorder,
    Mappings,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Asymptotics, Suite::Wronskian, Suite::Adjoint, Suite::Cramer, Suite::Firstorder, Suite::Mappings];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Asymptotics => "asymptotics",
            Suite::Wronskian => "wronskian",
            Suite::Adjoint => "adjoint",
            Suite::Cramer => "cramer",
            Suite::Firstorder => "firstorder",
            Suite::Mappings => "mappings",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown suite {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(with = "crate::problem::io::finite_or_null")]
    pub metric: f64,
    pub threshold: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    /// Passes when `metric <= threshold`.
    fn at_most(name: impl Into<String>, metric: f64, threshold: f64) -> Self {
        Check { name: name.into(), metric, threshold, pass: metric <= threshold, note: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl SuiteReport {
    fn new(suite: Suite, checks: Vec<Check>) -> Self {
        let pass = !checks.is_empty() && checks.iter().all(|c| c.pass);
        SuiteReport { suite, checks, pass }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Random lambda samples per check.
    pub samples: usize,
    pub seed: u64,
    /// Samples are drawn from |lambda| <= radius.
    pub radius: f64,
    /// Restricts ray checks to one special ray.
    pub ray: Option<usize>,
    /// Radii for ray checks: geometric between the two, inclusive.
    pub ray_range: (f64, f64),
    pub ray_points: usize,
    pub ode: OdeOptions,
    /// Second problem for the mapping suite; defaults to p shifted by 1.
    pub other: Option<InvolutionProblem>,
    pub exec: Exec,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples: 5,
            seed: 7,
            radius: 100.0,
            ray: None,
            ray_range: (20.0, 200.0),
            ray_points: 7,
            ode: OdeOptions::with_rtol(1e-12),
            other: None,
            exec: Exec::Auto,
        }
    }
}

impl VerifyOptions {
    fn validate(&self) -> Result<()> {
        let (r0, r1) = self.ray_range;
        if self.samples == 0 || self.ray_points < 3 {
            return Err(Error::Usage("need at least one sample and three ray points".into()));
        }
        if !(self.radius > 0.0 && self.radius.is_finite() && r0 > 0.0 && r1 > r0 && r1.is_finite()) {
            return Err(Error::Usage("radius and ray range must be positive and finite".into()));
        }
        Ok(())
    }
}

fn random_lambdas(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let r = radius * rng.gen::<f64>().sqrt();
            C64::from_polar(r, rng.gen_range(0.0..std::f64::consts::TAU))
        })
        .collect()
}

/// Draws `n` samples for which `f` succeeds, redrawing on eigenvalue proximity.
fn pole_avoiding<T>(
    rng: &mut ChaCha8Rng,
    n: usize,
    radius: f64,
    mut f: impl FnMut(C64) -> Result<T>,
) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(n);
    let mut tries = 0;
    while out.len() < n {
        tries += 1;
        if tries > 20 * n {
            return Err(Error::Consistency("too many samples fell on eigenvalues".into()));
        }
        let l = random_lambdas(rng, 1, radius)[0];
        match f(l) {
            Ok(v) => out.push(v),
            Err(Error::NearEigenvalue { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Least-squares slope of ln y against ln x.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.max(1e-300).ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Slope check for deviations sampled at radii `rs`.
pub fn slope_check(name: impl Into<String>, rs: &[f64], devs: &[f64]) -> Check {
    let slope = loglog_slope(rs, devs);
    let worst = devs.iter().cloned().fold(0.0, f64::max);
    let mut c = Check::at_most(name, slope, SLOPE_MAX);
    if !worst.is_finite() {
        c.pass = false;
        c.note = Some("non-finite deviation".into());
    } else if worst <= DEVIATION_FLOOR {
        c.pass = true;
        c.note = Some(format!("all deviations at the integration floor (max {worst:.2e})"));
    }
    c
}

pub fn ray_radii(range: (f64, f64), points: usize) -> Vec<f64> {
    let (a, b) = range;
    (0..points).map(|k| a * (b / a).powf(k as f64 / (points - 1) as f64)).collect()
}

fn chosen_rays(ctx: &CharacteristicSet, ray: Option<usize>) -> Result<Vec<(usize, Ray)>> {
    let all = &ctx.geometry.rays;
    match ray {
        None => Ok(all.iter().copied().enumerate().collect()),
        Some(k) if k < all.len() => Ok(vec![(k, all[k])]),
        Some(k) => Err(Error::Usage(format!("ray index {k} out of range 0..{}", all.len()))),
    }
}

fn diag_exp(d: [C64; 2], s: C64) -> Mat2 {
    Mat2::diag((s * d[0]).exp(), (s * d[1]).exp())
}

/// Largest deviation of a Wronskian identity, with the size of the terms it
/// cancels. Rounding alone leaves about 1e-16 times `scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WronskianDeviation {
    pub abs: f64,
    /// max over the grid of |Z| |Y'| + |Z'| |Y|.
    pub scale: f64,
}

/// max over the grid of |<C*, S> - I| and |<S*, C> + I|.
pub fn wronskian_deviation(
    ctx: &CharacteristicSet,
    lambda: C64,
    grid: &[f64],
    opts: &OdeOptions,
) -> Result<WronskianDeviation> {
    let f = integrate_fundamental(&ctx.matrix, lambda, grid, opts)?;
    let a = integrate_adjoint(&ctx.matrix, lambda, grid, opts)?;
    let mut out = WronskianDeviation { abs: 0.0, scale: 0.0 };
    for (k, &x) in grid.iter().enumerate() {
        let cs = wronskian(&a.c, &f.s, x)? - Mat2::IDENTITY;
        let sc = wronskian(&a.s, &f.c, x)? + Mat2::IDENTITY;
        out.abs = out.abs.max(cs.max_abs()).max(sc.max_abs());
        for (z, y) in [(&a.c, &f.s), (&a.s, &f.c)] {
            let t = z.values[k].norm() * y.derivs[k].norm() + z.derivs[k].norm() * y.values[k].norm();
            out.scale = out.scale.max(t);
        }
    }
    Ok(out)
}

/// |M - M*| / |M| from independent forward and adjoint Weyl solutions.
pub fn adjoint_discrepancy(ctx: &CharacteristicSet, lambda: C64, opts: &OdeOptions) -> Result<f64> {
    let g = [0.0, 1.0];
    let m = weyl_solution(&ctx.matrix, lambda, &g, opts)?.m;
    let ms = adjoint_weyl_solution(&ctx.matrix, lambda, &g, opts)?.m;
    Ok((m - ms).norm() / m.norm().max(f64::MIN_POSITIVE))
}

/// max_jk |Delta_jk / Delta - (U^T M U)_jk| / |[Delta_jk / Delta]|.
pub fn cramer_discrepancy(ctx: &CharacteristicSet, lambda: C64, opts: &OdeOptions) -> Result<f64> {
    let m = weyl_solution(&ctx.matrix, lambda, &[0.0, 1.0], opts)?.m;
    let u = u_matrix();
    let calm = u.transpose() * m * u;
    let cr = ctx.cramer_matrix(lambda)?;
    Ok((cr - calm).max_abs() / cr.norm().max(f64::MIN_POSITIVE))
}

/// Deviations from one of the normalised ray quantities at rho = r e^{i theta}:
/// [2 i rho D e^{-i rho D} S(1)], [e^{i rho D / 2} Phi(1/2)], and each
/// characteristic function divided by its leading term.
pub fn ray_deviations(ctx: &CharacteristicSet, ray: &Ray, r: f64, opts: &OdeOptions) -> Result<[f64; 7]> {
    let rho = C64::from_polar(r, ray.angle);
    let lambda = rho * rho;
    let d = ray.d;
    let f = integrate_fundamental(&ctx.matrix, lambda, &[0.0, 1.0], opts)?;
    let s1 = f.s.values[1];
    let s_norm = Mat2::diag(2.0 * I * rho * d[0], 2.0 * I * rho * d[1]) * diag_exp(d, -I * rho) * s1;
    let phi = weyl_solution(&ctx.matrix, lambda, &[0.0, 0.5, 1.0], opts)?.phi.values[1];
    let phi_norm = diag_exp(d, 0.5 * I * rho) * phi;
    let comps = ctx.components(lambda)?;
    let mut out = [0.0; 7];
    out[0] = (s_norm - Mat2::IDENTITY).max_abs();
    out[1] = (phi_norm - Mat2::IDENTITY).max_abs();
    for (k, v) in BoundaryVariant::ALL.into_iter().enumerate() {
        let ratio = (comps[k].ln() - log_asymptotic(v, d, rho)).exp();
        out[2 + k] = (ratio - ONE).norm();
    }
    Ok(out)
}

const RAY_QUANTITIES: [&str; 7] = ["S(1)", "Phi(1/2)", "Delta", "Delta11", "Delta12", "Delta21", "Delta22"];

fn suite_asymptotics(ctx: &CharacteristicSet, o: &VerifyOptions) -> Result<Vec<Check>> {
    let rs = ray_radii(o.ray_range, o.ray_points);
    let mut checks = vec![];
    for (k, ray) in chosen_rays(ctx, o.ray)? {
        let devs = o.exec.try_map(&rs, |&r| ray_deviations(ctx, &ray, r, &o.ode))?;
        for (q, name) in RAY_QUANTITIES.iter().enumerate() {
            let col: Vec<f64> = devs.iter().map(|d| d[q]).collect();
            checks.push(slope_check(format!("ray {k} ({:.4} rad): {name}", ray.angle), &rs, &col));
        }
    }
    Ok(checks)
}

/// The default partner problem for the mapping suite: p shifted by one.
pub fn shifted_partner(prob: &InvolutionProblem) -> Result<InvolutionProblem> {
    let p = match &prob.p {
        CoefficientFunction::Poly(cs) => {
            let mut cs = cs.clone();
            if cs.is_empty() {
                cs.push(C64::new(0.0, 0.0));
            }
            cs[0] += ONE;
            CoefficientFunction::Poly(cs)
        }
        CoefficientFunction::Grid { x, values } => {
            CoefficientFunction::Grid { x: x.clone(), values: values.iter().map(|v| v + ONE).collect() }
        }
    };
    InvolutionProblem::new(prob.alpha, p, prob.q.clone(), prob.variant)
}

fn suite_mappings(ctx: &CharacteristicSet, o: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let other = match &o.other {
        Some(p) => p.clone(),
        None => shifted_partner(&ctx.problem)?,
    };
    if other.alpha != ctx.problem.alpha {
        return Err(Error::Usage("spectral mappings need problems with the same alpha".into()));
    }
    let b = CharacteristicSet::new(&other)?;
    let a = &ctx.matrix;
    let same = pole_avoiding(rng, o.samples, o.radius, |l| {
        let x = rng_free_x(l);
        let p = spectral_mapping_blocks(a, a, x, l, &o.ode)?;
        Ok((p.p11 - Mat2::IDENTITY).max_abs().max(p.p12.max_abs()))
    })?;
    let mut checks = vec![Check::at_most("identical problems: |P11 - I|, |P12|", max(&same), IDENTITY_TOL)];
    let rs = ray_radii(o.ray_range, o.ray_points);
    for (k, ray) in chosen_rays(ctx, o.ray)? {
        let devs = o.exec.try_map(&rs, |&r| {
            let rho = C64::from_polar(r, ray.angle);
            let p = spectral_mapping_blocks(a, &b.matrix, 0.5, rho * rho, &o.ode)?;
            Ok::<_, Error>([(p.p11 - Mat2::IDENTITY).max_abs(), p.p12.max_abs()])
        })?;
        for (q, name) in ["|P11 - I|", "|P12|"].iter().enumerate() {
            let col: Vec<f64> = devs.iter().map(|d| d[q]).collect();
            checks.push(slope_check(format!("ray {k} ({:.4} rad): {name}", ray.angle), &rs, &col));
        }
    }
    Ok(checks)
}

/// A deterministic interior point that varies with lambda.
fn rng_free_x(l: C64) -> f64 {
    0.1 + 0.8 * (l.re.abs() + l.im.abs()).fract()
}

fn max(v: &[f64]) -> f64 {
    v.iter().cloned().fold(0.0, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) })
}

fn suite_firstorder(ctx: &CharacteristicSet, o: &VerifyOptions, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let aopts = AnchorOptions { ode: o.ode, ..Default::default() };
    let anchor = find_anchor(&ctx.matrix, &ctx.geometry, &aopts)?;
    let sys = reduce_first_order(&ctx.matrix, &anchor)?;
    let mut anchor_check = Check::at_most("anchor: -min |det X|", -anchor.min_det, -anchor.delta);
    anchor_check.note = Some(format!("lambda* = {}", anchor.lambda_star));
    let grid = uniform_grid(65);
    let mut res = Vec::with_capacity(o.samples);
    while res.len() < o.samples {
        let l = random_lambdas(rng, 1, o.radius)[0];
        if (l - anchor.lambda_star).norm() < 1e-6 * anchor.lambda_star.norm() {
            continue;
        }
        res.push(verify_equivalence(&ctx.matrix, &anchor, l, &grid, &o.ode)?);
    }
    Ok(vec![
        anchor_check,
        Check::at_most("Riccati identity for U", sys.riccati_defect(), REDUCTION_TOL),
        Check::at_most("first-order equivalence", max(&res), REDUCTION_TOL),
    ])
}

/// Runs one suite on `problem`.
pub fn run_suite(suite: Suite, problem: &InvolutionProblem, o: &VerifyOptions) -> Result<SuiteReport> {
    o.validate()?;
    let ctx = CharacteristicSet::new(problem)?;
    let ctx = CharacteristicSet { ode: o.ode, ..ctx };
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let grid = uniform_grid(21);
    let checks = match suite {
        Suite::Wronskian => {
            let ls = random_lambdas(&mut rng, o.samples, o.radius);
            let devs = o.exec.try_map(&ls, |&l| wronskian_deviation(&ctx, l, &grid, &o.ode))?;
            let abs: Vec<f64> = devs.iter().map(|d| d.abs).collect();
            let scale = devs.iter().map(|d| d.scale).fold(0.0, f64::max);
            let mut c = Check::at_most("<C*, S> = I, <S*, C> = -I", max(&abs), IDENTITY_TOL);
            c.note = Some(format!("largest cancelled term {scale:.2e}"));
            vec![c]
        }
        Suite::Adjoint => {
            let devs = pole_avoiding(&mut rng, o.samples, o.radius, |l| adjoint_discrepancy(&ctx, l, &o.ode))?;
            vec![Check::at_most("M = M*", max(&devs), IDENTITY_TOL)]
        }
        Suite::Cramer => {
            let devs = pole_avoiding(&mut rng, o.samples, o.radius, |l| cramer_discrepancy(&ctx, l, &o.ode))?;
            vec![Check::at_most("Delta M = [Delta_jk]", max(&devs), IDENTITY_TOL)]
        }
        Suite::Asymptotics => suite_asymptotics(&ctx, o)?,
        Suite::Mappings => suite_mappings(&ctx, o, &mut rng)?,
        Suite::Firstorder => suite_firstorder(&ctx, o, &mut rng)?,
    };
    Ok(SuiteReport::new(suite, checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn sample() -> InvolutionProblem {
        InvolutionProblem::new(
            c(0.0, 0.0),
            CoefficientFunction::Poly(vec![c(1.0, 0.0), c(2.0, 0.0)]),
            CoefficientFunction::Poly(vec![c(0.5, 0.0), c(-1.0, 0.0)]),
            BoundaryVariant::L,
        )
        .unwrap()
    }

    #[test]
    fn slope_of_power_law() {
        let rs = ray_radii((20.0, 200.0), 5);
        let ys: Vec<f64> = rs.iter().map(|r| 3.0 / r).collect();
        assert!((loglog_slope(&rs, &ys) + 1.0).abs() < 1e-12);
        assert!(slope_check("x", &rs, &ys).pass);
        let flat = vec![1e-3; 5];
        assert!(!slope_check("x", &rs, &flat).pass);
        let tiny = vec![1e-14; 5];
        assert!(slope_check("x", &rs, &tiny).pass);
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!(matches!("bogus".parse::<Suite>(), Err(Error::Usage(_))));
    }

    #[test]
    fn identity_suites_pass_on_a_sample_problem() {
        let o = VerifyOptions { samples: 3, ..Default::default() };
        for s in [Suite::Wronskian, Suite::Adjoint, Suite::Cramer] {
            let r = run_suite(s, &sample(), &o).unwrap();
            assert!(r.pass, "{}", r.to_json());
        }
    }
}
