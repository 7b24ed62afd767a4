use super::{pair, report, Cli, Command};
use super::{CharscanArgs, ForwardArgs, InvertArgs, ReconstructArgs, ReduceArgs, VerifyArgs, WeylArgs};
use crate::error::{Error, Result};
use crate::first_order::{find_anchor, reduce_first_order, AnchorOptions};
use crate::hadamard::{scan_csv, HadamardOptions, HadamardProduct};
use crate::inverse::{fit_coefficients, FitConfig, FitTargets};
use crate::linalg::Mat2;
use crate::ode::{integrate_fundamental, uniform_grid, weyl_matrix_cramer, weyl_solution};
use crate::par::Exec;
use crate::problem::io::{load_problem, write_atomic, ComplexJson};
use crate::problem::{sector_geometry, weight_from_alpha, BoundaryVariant, InvolutionProblem};
use crate::spectral::{
    find_eigenvalues, first_n, oracle_spectrum, CharacteristicSet, Rect, RootOptions, Spectrum,
};
use crate::verify::{run_suite, Suite, VerifyOptions};
use num_complex::Complex64 as C64;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Relative agreement required between the main path and the oracle.
const ORACLE_TOL: f64 = 1e-8;

pub(super) fn dispatch(cli: &Cli) -> Result<i32> {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Auto };
    match &cli.command {
        Command::Forward(a) => forward(a, exec),
        Command::Weyl(a) => weyl(a),
        Command::Charscan(a) => charscan(a, exec),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Invert(a) => invert(a, exec),
        Command::Verify(a) => verify(a, exec),
        Command::Reduce(a) => reduce(a),
    }
}

/// Fails unless the directory that will hold `path` exists.
fn check_file_target(path: &Path) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !dir.is_dir() {
        return Err(Error::Usage(format!("output directory {} does not exist", dir.display())));
    }
    if path.is_dir() {
        return Err(Error::Usage(format!("output {} is a directory", path.display())));
    }
    Ok(())
}

fn prepare_dir(path: &Path) -> Result<()> {
    if path.exists() && !path.is_dir() {
        return Err(Error::Usage(format!("output {} is not a directory", path.display())));
    }
    std::fs::create_dir_all(path)?;
    Ok(())
}

fn emit(out: Option<&PathBuf>, contents: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, contents),
        None => {
            print!("{contents}");
            if !contents.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn rect(v: &[f64]) -> Result<Rect> {
    match v {
        [a, b, c, d] => Rect::new(*a, *b, *c, *d),
        _ => Err(Error::Usage("a region needs four numbers RE0 RE1 IM0 IM1".into())),
    }
}

/// Lattice over a scan box; unlike a search region the box may be a segment.
fn lattice(bounds: &[f64], points: &[usize]) -> Result<Vec<C64>> {
    let [re0, re1, im0, im1] = bounds else {
        return Err(Error::Usage("a scan box needs four numbers RE0 RE1 IM0 IM1".into()));
    };
    if !bounds.iter().all(|v| v.is_finite()) || re0 > re1 || im0 > im1 {
        return Err(Error::Usage(format!("invalid scan box {bounds:?}")));
    }
    let [nre, nim] = points else {
        return Err(Error::Usage("--points needs two counts".into()));
    };
    if *nre == 0 || *nim == 0 || nre * nim > 1_000_000 {
        return Err(Error::Usage("--points counts must be positive with at most 10^6 points".into()));
    }
    let axis = |a: f64, b: f64, n: usize, k: usize| if n == 1 { a } else { a + (b - a) * k as f64 / (n - 1) as f64 };
    let mut out = Vec::with_capacity(nre * nim);
    for j in 0..*nim {
        for i in 0..*nre {
            out.push(C64::new(axis(*re0, *re1, *nre, i), axis(*im0, *im1, *nim, j)));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct OracleDiff {
    variant: BoundaryVariant,
    main_count: usize,
    oracle_count: usize,
    #[serde(with = "crate::problem::io::finite_or_null")]
    max_rel_diff: f64,
    pass: bool,
}

fn oracle_diff(main: &Spectrum, alpha: C64, opts: &RootOptions) -> Result<OracleDiff> {
    let (region, keep): (Rect, Box<dyn Fn(C64) -> bool>) = match main.radius {
        Some(r) => (Rect::square(r), Box::new(move |z: C64| z.norm() < r)),
        None => (main.region, Box::new(|_| true)),
    };
    let oracle = oracle_spectrum(alpha, main.variant, region, opts)?;
    let mut a: Vec<C64> = main.values().into_iter().filter(|z| keep(*z)).collect();
    let mut b: Vec<C64> = oracle.values().into_iter().filter(|z| keep(*z)).collect();
    let key = |z: &C64, w: &C64| z.re.total_cmp(&w.re).then(z.im.total_cmp(&w.im));
    a.sort_by(key);
    b.sort_by(key);
    let max_rel_diff = if a.len() == b.len() {
        a.iter().zip(&b).map(|(x, y)| (x - y).norm() / y.norm().max(1.0)).fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    Ok(OracleDiff {
        variant: main.variant,
        main_count: a.len(),
        oracle_count: b.len(),
        max_rel_diff,
        pass: max_rel_diff <= ORACLE_TOL,
    })
}

fn forward(a: &ForwardArgs, exec: Exec) -> Result<i32> {
    let problem = load_problem(&a.problem)?;
    let variants: Vec<BoundaryVariant> = if a.variant.is_empty() {
        vec![problem.variant]
    } else {
        a.variant.iter().map(|&v| v.into()).collect()
    };
    let region = a.region.as_deref().map(rect).transpose()?;
    match (region, a.first) {
        (None, None) => return Err(Error::Usage("give --region or --first".into())),
        (_, Some(0)) => return Err(Error::Usage("--first needs n >= 1".into())),
        _ => {}
    }
    if a.oracle && !(problem.p.is_zero() && problem.q.is_zero()) {
        return Err(Error::Usage("--oracle needs p = q = 0".into()));
    }
    let many = variants.len() > 1;
    match (&a.out, many) {
        (Some(p), true) => prepare_dir(p)?,
        (Some(p), false) => check_file_target(p)?,
        (None, _) => {}
    }
    let ctx = CharacteristicSet::new(&problem)?;
    let opts = RootOptions::default().with_exec(exec);
    let mut spectra = Vec::with_capacity(variants.len());
    for &v in &variants {
        let s = match (region, a.first) {
            (Some(r), _) => find_eigenvalues(&ctx, r, v, &opts)?,
            (None, Some(n)) => first_n(&ctx, v, n, &opts)?,
            (None, None) => unreachable!("checked above"),
        };
        spectra.push(s);
    }
    let diffs = if a.oracle {
        spectra.iter().map(|s| oracle_diff(s, problem.alpha, &opts)).collect::<Result<Vec<_>>>()?
    } else {
        vec![]
    };
    match (&a.out, many) {
        (Some(dir), true) => {
            for s in &spectra {
                s.save(&dir.join(format!("{}.json", s.variant.name())))?;
            }
        }
        (Some(p), false) => spectra[0].save(p)?,
        (None, false) => emit(None, &spectra[0].to_json())?,
        (None, true) => {
            let all: Vec<serde_json::Value> =
                spectra.iter().map(|s| serde_json::from_str(&s.to_json()).expect("valid json")).collect();
            emit(None, &serde_json::to_string_pretty(&all)?)?;
        }
    }
    if a.oracle {
        eprintln!("{}", serde_json::to_string(&diffs)?);
        if let Some(d) = diffs.iter().find(|d| !d.pass) {
            return Err(Error::Consistency(format!(
                "{} disagrees with the even/odd oracle: {} vs {} zeros, max relative difference {:e}",
                d.variant, d.main_count, d.oracle_count, d.max_rel_diff
            )));
        }
    }
    Ok(0)
}

fn mat_json(m: &Mat2) -> [[ComplexJson; 2]; 2] {
    m.0.map(|row| row.map(ComplexJson::from))
}

#[derive(Serialize)]
struct WeylReport {
    lambda: ComplexJson,
    m: [[ComplexJson; 2]; 2],
    m_cramer: [[ComplexJson; 2]; 2],
    relative_discrepancy: f64,
}

fn weyl(a: &WeylArgs) -> Result<i32> {
    let problem = load_problem(&a.problem)?;
    let lambda = pair(&a.lambda, "--lambda")?;
    if a.grid < 2 || a.grid > 100_001 {
        return Err(Error::Usage("--grid must be between 2 and 100001".into()));
    }
    for p in a.csv.iter().chain(a.out.iter()) {
        check_file_target(p)?;
    }
    let ctx = CharacteristicSet::new(&problem)?;
    let grid = uniform_grid(a.grid);
    let w = weyl_solution(&ctx.matrix, lambda, &grid, &ctx.ode)?;
    let f = integrate_fundamental(&ctx.matrix, lambda, &grid, &ctx.ode)?;
    let mc = weyl_matrix_cramer(&ctx.matrix, &f)?;
    let rep = WeylReport {
        lambda: lambda.into(),
        m: mat_json(&w.m),
        m_cramer: mat_json(&mc),
        relative_discrepancy: (w.m - mc).norm() / w.m.norm().max(f64::MIN_POSITIVE),
    };
    if let Some(p) = &a.csv {
        write_atomic(p, &f.to_csv())?;
    }
    emit(a.out.as_ref(), &serde_json::to_string_pretty(&rep)?)?;
    Ok(0)
}

fn charscan(a: &CharscanArgs, exec: Exec) -> Result<i32> {
    let problem = load_problem(&a.problem)?;
    let lambdas = lattice(&a.region, &a.points)?;
    if let Some(p) = &a.out {
        check_file_target(p)?;
    }
    let ctx = CharacteristicSet::new(&problem)?;
    let rows = exec.try_map(&lambdas, |&l| ctx.components(l))?;
    let mut out = String::from("lambda_re,lambda_im");
    for v in BoundaryVariant::ALL {
        let n = v.name().to_lowercase();
        write!(out, ",{n}_re,{n}_im,{n}_lnabs").unwrap();
    }
    out.push('\n');
    for (l, vals) in lambdas.iter().zip(&rows) {
        write!(out, "{:.17e},{:.17e}", l.re, l.im).unwrap();
        for v in vals {
            let z = v.to_c64();
            write!(out, ",{:.17e},{:.17e},{:.17e}", z.re, z.im, v.ln_abs()).unwrap();
        }
        out.push('\n');
    }
    emit(a.out.as_ref(), &out)?;
    Ok(0)
}

fn load_spectra(paths: &[PathBuf]) -> Result<Vec<Spectrum>> {
    let spectra = paths.iter().map(|p| Spectrum::load(p)).collect::<Result<Vec<_>>>()?;
    for (i, s) in spectra.iter().enumerate() {
        if spectra[..i].iter().any(|t| t.variant == s.variant) {
            return Err(Error::Usage(format!("two spectrum files for variant {}", s.variant)));
        }
    }
    Ok(spectra)
}

#[derive(Serialize)]
struct RayLimitJson {
    ray: f64,
    value: ComplexJson,
    err: f64,
}

#[derive(Serialize)]
struct ConstantJson {
    variant: BoundaryVariant,
    constant: ComplexJson,
    constant_err: f64,
    truncation: usize,
    ray: f64,
    ray_limits: Vec<RayLimitJson>,
}

fn reconstruct(a: &ReconstructArgs) -> Result<i32> {
    let alpha = pair(&a.alpha, "--alpha")?;
    let spectra = load_spectra(&a.spectra)?;
    let scan = a.region.as_deref().map(|r| lattice(r, &a.points)).transpose()?;
    if a.truncation == Some(0) {
        return Err(Error::Usage("--truncation needs n >= 1".into()));
    }
    prepare_dir(&a.out)?;
    let geometry = sector_geometry(weight_from_alpha(alpha)?)?;
    let opts = HadamardOptions { truncation: a.truncation, tail: !a.no_tail, ..Default::default() };
    let mut constants = vec![];
    let mut csvs = vec![];
    for s in &spectra {
        let h = HadamardProduct::build(s, &geometry, &opts)?;
        let limits = h.all_ray_limits(&geometry, &opts.ray_opts)?;
        constants.push(ConstantJson {
            variant: s.variant,
            constant: h.constant.into(),
            constant_err: h.constant_err,
            truncation: h.truncation,
            ray: h.ray,
            ray_limits: limits.iter().map(|l| RayLimitJson { ray: l.ray, value: l.value.into(), err: l.err }).collect(),
        });
        if let Some(ls) = &scan {
            csvs.push((s.variant, scan_csv(&h, ls)?));
        }
    }
    for (v, csv) in csvs {
        write_atomic(&a.out.join(format!("{}_scan.csv", v.name())), &csv)?;
    }
    write_atomic(&a.out.join("constants.json"), &serde_json::to_string_pretty(&constants)?)?;
    Ok(0)
}

fn invert(a: &InvertArgs, exec: Exec) -> Result<i32> {
    let alpha = pair(&a.alpha, "--alpha")?;
    let spectra = load_spectra(&a.spectra)?;
    let text = std::fs::read_to_string(&a.config)?;
    let mut config: FitConfig =
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("fit config: {e}")))?;
    config.exec = exec;
    config.validate()?;
    if let Some(p) = &a.out {
        check_file_target(p)?;
    }
    let targets = FitTargets::new(alpha, spectra)?;
    let rep = fit_coefficients(&targets, &config, &RootOptions::default().with_exec(exec))?;
    emit(a.out.as_ref(), &rep.to_json())?;
    if !rep.converged {
        let e = Error::Convergence(format!(
            "best residual {:e} above tol_fit {:e}",
            rep.final_residual, config.tol_fit
        ));
        report(e.kind(), e.to_string(), e.exit_code());
        return Ok(e.exit_code());
    }
    Ok(0)
}

fn default_samples(s: Suite) -> usize {
    match s {
        Suite::Adjoint | Suite::Cramer => 20,
        Suite::Firstorder => 10,
        Suite::Wronskian | Suite::Mappings | Suite::Asymptotics => 5,
    }
}

fn verify(a: &VerifyArgs, exec: Exec) -> Result<i32> {
    let suite: Suite = a.suite.parse()?;
    let problem = load_problem(&a.problem)?;
    let other: Option<InvolutionProblem> = a.other.as_deref().map(load_problem).transpose()?;
    if let Some(p) = &a.out {
        check_file_target(p)?;
    }
    let opts = VerifyOptions {
        samples: a.samples.unwrap_or(default_samples(suite)),
        seed: a.seed,
        ray: a.ray,
        other,
        exec,
        ..Default::default()
    };
    let rep = run_suite(suite, &problem, &opts)?;
    emit(a.out.as_ref(), &rep.to_json())?;
    if rep.pass {
        Ok(0)
    } else {
        let e = Error::Consistency(format!("suite {suite} has failing checks"));
        report(e.kind(), e.to_string(), e.exit_code());
        Ok(e.exit_code())
    }
}

fn reduce(a: &ReduceArgs) -> Result<i32> {
    let problem = load_problem(&a.problem)?;
    if !(9..=100_001).contains(&a.grid) {
        return Err(Error::Usage("--grid must be between 9 and 100001".into()));
    }
    if let Some(p) = &a.out {
        check_file_target(p)?;
    }
    let ctx = CharacteristicSet::new(&problem)?;
    let opts = AnchorOptions { grid_points: a.grid, ..Default::default() };
    let anchor = find_anchor(&ctx.matrix, &ctx.geometry, &opts)?;
    let sys = reduce_first_order(&ctx.matrix, &anchor)?;
    emit(a.out.as_ref(), &sys.to_csv())?;
    Ok(0)
}
