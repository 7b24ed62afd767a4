//! Winding numbers of log-scaled analytic functions along closed contours.

use crate::error::{Error, Result};
use crate::linalg::Scaled;
use crate::par::Exec;
use num_complex::Complex64 as C64;
use std::f64::consts::{PI, TAU};

/// Axis-aligned rectangle [re0, re1] x [im0, im1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub re0: f64,
    pub re1: f64,
    pub im0: f64,
    pub im1: f64,
}

impl Rect {
    pub fn new(re0: f64, re1: f64, im0: f64, im1: f64) -> Result<Self> {
        let ok = [re0, re1, im0, im1].iter().all(|v| v.is_finite()) && re1 > re0 && im1 > im0;
        if !ok {
            return Err(Error::Usage(format!("invalid region [{re0}, {re1}] x [{im0}, {im1}]")));
        }
        Ok(Rect { re0, re1, im0, im1 })
    }

    pub fn square(half: f64) -> Self {
        Rect { re0: -half, re1: half, im0: -half, im1: half }
    }

    pub fn width(&self) -> f64 {
        self.re1 - self.re0
    }

    pub fn height(&self) -> f64 {
        self.im1 - self.im0
    }

    pub fn diam(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> C64 {
        C64::new(0.5 * (self.re0 + self.re1), 0.5 * (self.im0 + self.im1))
    }

    pub fn contains(&self, z: C64, margin: f64) -> bool {
        z.re >= self.re0 - margin
            && z.re <= self.re1 + margin
            && z.im >= self.im0 - margin
            && z.im <= self.im1 + margin
    }

    /// Grows each side by `frac` of the larger dimension.
    pub fn inflated(&self, frac: f64) -> Rect {
        let d = frac * self.width().max(self.height());
        Rect { re0: self.re0 - d, re1: self.re1 + d, im0: self.im0 - d, im1: self.im1 + d }
    }

    /// Splits the longer side at fraction `t`.
    pub fn split(&self, t: f64) -> (Rect, Rect) {
        if self.width() >= self.height() {
            let m = self.re0 + t * self.width();
            (Rect { re1: m, ..*self }, Rect { re0: m, ..*self })
        } else {
            let m = self.im0 + t * self.height();
            (Rect { im1: m, ..*self }, Rect { im0: m, ..*self })
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.re0, self.re1, self.im0, self.im1]
    }
}

/// Positively oriented closed contour.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Contour {
    Rect(Rect),
    Circle { center: C64, radius: f64 },
}

impl Contour {
    /// Parameter range is [0, period).
    fn period(&self) -> f64 {
        match self {
            Contour::Rect(_) => 4.0,
            Contour::Circle { .. } => 1.0,
        }
    }

    fn point(&self, t: f64) -> C64 {
        match self {
            Contour::Rect(r) => {
                let side = (t.floor() as i64).clamp(0, 3);
                let s = t - side as f64;
                match side {
                    0 => C64::new(r.re0 + s * r.width(), r.im0),
                    1 => C64::new(r.re1, r.im0 + s * r.height()),
                    2 => C64::new(r.re1 - s * r.width(), r.im1),
                    _ => C64::new(r.re0, r.im1 - s * r.height()),
                }
            }
            Contour::Circle { center, radius } => center + C64::from_polar(*radius, TAU * t),
        }
    }

    fn initial(&self, per_side: usize) -> Vec<f64> {
        let n = match self {
            Contour::Rect(_) => 4 * per_side,
            Contour::Circle { .. } => 4 * per_side,
        };
        (0..n).map(|i| self.period() * i as f64 / n as f64).collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ContourOptions {
    pub per_side: usize,
    /// Largest accepted phase increment between neighbouring samples.
    pub max_step: f64,
    pub max_points: usize,
    pub exec: Exec,
}

impl Default for ContourOptions {
    fn default() -> Self {
        ContourOptions { per_side: 64, max_step: PI / 4.0, max_points: 400_000, exec: Exec::Auto }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Winding {
    pub count: i64,
    /// Largest ln|f| seen on the contour.
    pub max_ln: f64,
    pub samples: usize,
}

fn phase_step(a: &Scaled, b: &Scaled) -> f64 {
    (b.mantissa * a.mantissa.conj()).arg()
}

fn total_phase(vals: &[(f64, Scaled)]) -> f64 {
    let n = vals.len();
    (0..n).map(|i| phase_step(&vals[i].1, &vals[(i + 1) % n].1)).sum()
}

/// Second difference of ln|f| over three samples that counts as a dip.
const DIP: f64 = 1.0;

fn too_close(detail: String) -> Error {
    Error::Region { suggested_inflation: 0.02, detail }
}

/// Samples `f` on the contour, bisects every interval whose phase increment
/// exceeds `max_step`, then doubles the sampling once more and requires the
/// winding number to agree.
pub fn winding_number<F>(f: &F, contour: &Contour, opts: &ContourOptions) -> Result<Winding>
where
    F: Fn(C64) -> Result<Scaled> + Sync,
{
    let period = contour.period();
    let eval = |ts: &[f64]| -> Result<Vec<(f64, Scaled)>> {
        let vals = opts.exec.try_map(ts, |&t| f(contour.point(t)))?;
        ts.iter()
            .zip(vals)
            .map(|(&t, v)| {
                if v.is_zero() || !v.mantissa.is_finite() || !v.log_scale.is_finite() {
                    Err(too_close(format!("function vanishes on the contour at {}", contour.point(t))))
                } else {
                    Ok((t, v))
                }
            })
            .collect()
    };
    let mut vals = eval(&contour.initial(opts.per_side))?;
    let mut previous: Option<i64> = None;
    for _round in 0..4 {
        // adaptive refinement
        loop {
            let n = vals.len();
            let mut split = vec![false; n];
            for i in 0..n {
                if phase_step(&vals[i].1, &vals[(i + 1) % n].1).abs() > opts.max_step {
                    split[i] = true;
                }
                // A sharp dip in |f| marks a zero close to the contour even when
                // the phase hides it (a double zero on the contour).
                let l = vals[i].1.ln_abs();
                let prev = vals[(i + n - 1) % n].1.ln_abs();
                let next = vals[(i + 1) % n].1.ln_abs();
                if l < 0.5 * (prev + next) - DIP {
                    split[i] = true;
                    split[(i + n - 1) % n] = true;
                }
            }
            let mut mids = vec![];
            for i in (0..n).filter(|&i| split[i]) {
                let t0 = vals[i].0;
                let t1 = if i + 1 == n { vals[0].0 + period } else { vals[i + 1].0 };
                if t1 - t0 < 1e-12 * period {
                    return Err(too_close(format!("zero on or near the contour at {}", contour.point(t0))));
                }
                mids.push(0.5 * (t0 + t1));
            }
            if mids.is_empty() {
                break;
            }
            if vals.len() + mids.len() > opts.max_points {
                return Err(too_close("contour sampling budget exhausted".into()));
            }
            vals.extend(eval(&mids)?);
            vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        }
        let w = total_phase(&vals) / TAU;
        let count = w.round() as i64;
        if (w - count as f64).abs() > 1e-3 {
            return Err(Error::Consistency(format!("non-integer winding {w}")));
        }
        if previous == Some(count) {
            let max_ln = vals.iter().map(|v| v.1.ln_abs()).fold(f64::NEG_INFINITY, f64::max);
            return Ok(Winding { count, max_ln, samples: vals.len() });
        }
        previous = Some(count);
        // double the sampling everywhere
        let n = vals.len();
        let mids: Vec<f64> = (0..n)
            .map(|i| {
                let t0 = vals[i].0;
                let t1 = if i + 1 == n { vals[0].0 + period } else { vals[i + 1].0 };
                0.5 * (t0 + t1)
            })
            .collect();
        if vals.len() + mids.len() > opts.max_points {
            return Err(too_close("contour sampling budget exhausted".into()));
        }
        vals.extend(eval(&mids)?);
        vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    }
    Err(too_close("winding number did not stabilise under refinement".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn poly(z: C64) -> Result<Scaled> {
        // zeros at 1, 2i (double), -3
        Ok(Scaled::from_c64((z - 1.0) * (z - c(0.0, 2.0)).powi(2) * (z + 3.0)))
    }

    #[test]
    fn counts_polynomial_zeros() {
        let o = ContourOptions::default();
        let w = |r: Rect| winding_number(&poly, &Contour::Rect(r), &o).unwrap().count;
        assert_eq!(w(Rect::new(-4.0, 4.0, -4.0, 4.0).unwrap()), 4);
        assert_eq!(w(Rect::new(0.5, 4.0, -1.0, 1.0).unwrap()), 1);
        assert_eq!(w(Rect::new(-1.0, 1.5, 1.0, 3.0).unwrap()), 2);
        assert_eq!(w(Rect::new(5.0, 6.0, 5.0, 6.0).unwrap()), 0);
        let circ = Contour::Circle { center: c(0.0, 0.0), radius: 2.5 };
        assert_eq!(winding_number(&poly, &circ, &o).unwrap().count, 3);
    }

    #[test]
    fn zero_on_contour_is_reported() {
        let o = ContourOptions::default();
        let r = winding_number(&poly, &Contour::Rect(Rect::new(1.0, 2.0, -1.0, 1.0).unwrap()), &o);
        assert!(matches!(r, Err(Error::Region { .. })));
    }

    #[test]
    fn exponential_growth_does_not_confuse_count() {
        // e^{50 z} sin(z): zeros at k pi.
        let f = |z: C64| {
            let s = z.sin();
            Ok(Scaled::new(s, 0.0).mul(&Scaled::new(C64::from_polar(1.0, 50.0 * z.im), 50.0 * z.re)))
        };
        let r = Rect::new(-10.0, 10.0, -2.0, 2.0).unwrap();
        assert_eq!(winding_number(&f, &Contour::Rect(r), &ContourOptions::default()).unwrap().count, 7);
    }
}
