//! Zeros of entire functions inside rectangles: winding-number subdivision
//! followed by Newton refinement.

use super::contour::{winding_number, Contour, ContourOptions, Rect, Winding};
use crate::error::{Error, Result};
use crate::linalg::Scaled;
use crate::par::Exec;
use num_complex::Complex64 as C64;

/// Log-scaled function of a complex variable.
pub type ScaledFn<'a> = dyn Fn(C64) -> Result<Scaled> + Sync + 'a;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub z: C64,
    pub mult: u32,
}

#[derive(Clone, Copy, Debug)]
pub struct RootOptions {
    pub contour: ContourOptions,
    /// Accept a refined zero when |f| <= tol_root * max(1, max |f| on the cell boundary).
    pub tol_root: f64,
    pub max_depth: usize,
    pub max_inflations: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        RootOptions {
            contour: ContourOptions::default(),
            tol_root: 1e-10,
            max_depth: 80,
            max_inflations: 3,
        }
    }
}

impl RootOptions {
    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.contour.exec = exec;
        self
    }
}

/// Cheap `count` evaluator for contours and an accurate `refine` evaluator for Newton.
pub struct RootFunctions<'a> {
    pub count: &'a ScaledFn<'a>,
    pub refine: &'a ScaledFn<'a>,
}

const SPLITS: [f64; 7] = [0.5, 0.45, 0.55, 0.4, 0.6, 0.35, 0.65];

/// Newton's method for a zero of multiplicity `mult`, with central differences
/// on the first step and secant updates afterwards for simple zeros. Gives up
/// once an iterate leaves the disk |z - z0| <= `reach`.
pub fn newton(f: &ScaledFn<'_>, z0: C64, mult: u32, max_iter: usize, reach: f64) -> Result<C64> {
    let m = mult as f64;
    let mut z = z0;
    let mut fz = f(z)?;
    if fz.is_zero() {
        return Ok(z);
    }
    let mut prev: Option<(C64, Scaled)> = None;
    let mut last_step = f64::INFINITY;
    for it in 0..max_iter {
        let scale = z.norm().max(1.0);
        let step = match prev {
            Some((zp, fp)) if mult == 1 => {
                // secant: f(z)/slope = (z - zp) / (1 - f(zp)/f(z))
                let denom = C64::new(1.0, 0.0) - fp.ratio(&fz);
                (z - zp) / denom
            }
            _ => {
                let h = 1e-6 * scale;
                let fp = f(z + h)?;
                let fm = f(z - h)?;
                let d = fp.ratio(&fz) - fm.ratio(&fz);
                m * 2.0 * h / d
            }
        };
        if !step.is_finite() {
            return Err(Error::Convergence(format!("Newton step is not finite at {z}")));
        }
        let zn = z - step;
        if (zn - z0).norm() > reach {
            return Err(Error::Convergence(format!("Newton left the search disk around {z0}")));
        }
        let fzn = f(zn)?;
        prev = Some((z, fz));
        z = zn;
        fz = fzn;
        let s = step.norm();
        if fz.is_zero() || s <= 1e-14 * scale {
            return Ok(z);
        }
        // noise floor: steps no longer shrink
        if it >= 3 && s <= 1e-9 * scale && s > 0.5 * last_step {
            return Ok(z);
        }
        last_step = s;
    }
    if last_step <= 1e-8 * z.norm().max(1.0) {
        return Ok(z);
    }
    Err(Error::Convergence(format!("Newton did not converge near {z0}")))
}

fn count_in(fs: &RootFunctions<'_>, contour: &Contour, opts: &RootOptions) -> Result<Winding> {
    winding_number(&fs.count, contour, &opts.contour)
}

fn accept(fs: &RootFunctions<'_>, z: C64, bound_ln: f64, opts: &RootOptions) -> Result<bool> {
    let v = (fs.refine)(z)?;
    Ok(v.is_zero() || v.ln_abs() <= opts.tol_root.ln() + bound_ln.max(0.0))
}

fn solve_cell(
    fs: &RootFunctions<'_>,
    rect: Rect,
    w: Winding,
    depth: usize,
    opts: &RootOptions,
) -> Result<Vec<Root>> {
    if w.count == 0 {
        return Ok(vec![]);
    }
    if w.count < 0 {
        return Err(Error::Consistency(format!("negative winding number {} for an entire function", w.count)));
    }
    let margin = 1e-9 * rect.diam();
    if w.count == 1 {
        if let Ok(z) = newton(fs.refine, rect.center(), 1, 30, rect.diam()) {
            if rect.contains(z, margin) && accept(fs, z, w.max_ln, opts)? {
                return Ok(vec![Root { z, mult: 1 }]);
            }
        }
    } else if let Ok(z) = newton(fs.refine, rect.center(), w.count as u32, 30, rect.diam()) {
        if rect.contains(z, margin) {
            let r = (1e-3 * rect.diam()).max(1e-7 * z.norm().max(1.0));
            let circ = Contour::Circle { center: z, radius: r };
            if let Ok(cw) = count_in(fs, &circ, opts) {
                if cw.count == w.count && accept(fs, z, w.max_ln, opts)? {
                    return Ok(vec![Root { z, mult: w.count as u32 }]);
                }
            }
        }
    }
    if depth >= opts.max_depth {
        return Err(Error::Consistency(format!(
            "subdivision depth exhausted near {} with {} zeros unresolved",
            rect.center(),
            w.count
        )));
    }
    let mut last_err = None;
    for t in SPLITS {
        let (a, b) = rect.split(t);
        let exec = opts.contour.exec;
        let (wa, wb) = exec.join(
            || count_in(fs, &Contour::Rect(a), opts),
            || count_in(fs, &Contour::Rect(b), opts),
        );
        match (wa, wb) {
            (Ok(wa), Ok(wb)) => {
                if wa.count + wb.count != w.count {
                    last_err = Some(Error::Consistency(format!(
                        "subregion counts {} + {} differ from parent count {}",
                        wa.count, wb.count, w.count
                    )));
                    continue;
                }
                let (ra, rb) = exec.join(
                    || solve_cell(fs, a, wa, depth + 1, opts),
                    || solve_cell(fs, b, wb, depth + 1, opts),
                );
                let mut out = ra?;
                out.extend(rb?);
                return Ok(out);
            }
            (Err(e @ Error::Region { .. }), _) | (_, Err(e @ Error::Region { .. })) => {
                last_err = Some(e);
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Consistency("no admissible split".into())))
}

/// All zeros in `rect` with multiplicities, plus the rectangle actually used
/// (inflated when the original boundary passes too close to a zero).
pub fn roots_in_rect(fs: &RootFunctions<'_>, rect: Rect, opts: &RootOptions) -> Result<(Vec<Root>, Rect, i64)> {
    let mut r = rect;
    let mut attempt = 0;
    loop {
        match count_in(fs, &Contour::Rect(r), opts) {
            Ok(w) => {
                let mut roots = solve_cell(fs, r, w, 0, opts)?;
                let total: i64 = roots.iter().map(|x| x.mult as i64).sum();
                if total != w.count {
                    return Err(Error::Consistency(format!(
                        "found {total} zeros but the winding number is {}",
                        w.count
                    )));
                }
                sort_lex(&mut roots);
                return Ok((roots, r, w.count));
            }
            Err(Error::Region { suggested_inflation, detail }) => {
                attempt += 1;
                if attempt > opts.max_inflations {
                    return Err(Error::Region { suggested_inflation, detail });
                }
                // jittered inflation avoids re-hitting symmetric zero patterns
                r = r.inflated(suggested_inflation * (1.0 + 0.37 * attempt as f64));
            }
            Err(e) => return Err(e),
        }
    }
}

pub fn sort_lex(roots: &mut [Root]) {
    roots.sort_by(|a, b| a.z.re.total_cmp(&b.z.re).then(a.z.im.total_cmp(&b.z.im)));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn finds_simple_and_double_zeros() {
        let f = |z: C64| Ok(Scaled::from_c64((z - 1.0) * (z - c(0.0, 2.0)).powi(2) * (z + c(3.0, 0.5))));
        let fs = RootFunctions { count: &f, refine: &f };
        let (roots, _, n) = roots_in_rect(&fs, Rect::new(-5.0, 5.0, -5.0, 5.0).unwrap(), &RootOptions::default()).unwrap();
        assert_eq!(n, 4);
        assert_eq!(roots.len(), 3, "{roots:?}");
        assert!((roots[0].z - c(-3.0, -0.5)).norm() < 1e-10);
        assert_eq!(roots[1].mult, 2);
        assert!((roots[1].z - c(0.0, 2.0)).norm() < 1e-6);
        assert!((roots[2].z - 1.0).norm() < 1e-10);
    }

    #[test]
    fn inflates_when_boundary_hits_zero() {
        let f = |z: C64| Ok(Scaled::from_c64(z.sin()));
        let fs = RootFunctions { count: &f, refine: &f };
        let (roots, used, _) =
            roots_in_rect(&fs, Rect::new(0.0, 4.0, -1.0, 1.0).unwrap(), &RootOptions::default()).unwrap();
        assert!(used.re0 < 0.0);
        assert_eq!(roots.len(), 2);
    }

    #[test]
    fn many_zeros_of_growing_function() {
        let f = |z: C64| Ok(Scaled::from_c64(z.sin() * (3.0 * z).exp()));
        let fs = RootFunctions { count: &f, refine: &f };
        let (roots, _, _) =
            roots_in_rect(&fs, Rect::new(-20.1, 20.3, -1.0, 1.3).unwrap(), &RootOptions::default()).unwrap();
        assert_eq!(roots.len(), 13);
        for (k, r) in roots.iter().enumerate() {
            assert!((r.z - std::f64::consts::PI * (k as f64 - 6.0)).norm() < 1e-12);
        }
    }
}
