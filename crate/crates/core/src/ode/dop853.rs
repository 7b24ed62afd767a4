//! Adaptive explicit Runge-Kutta of order 8(5,3) (Dormand-Prince) on complex states.

use crate::error::{Error, Result};
use num_complex::Complex64 as C64;

const A: [[f64; 12]; 12] = [
    [0.0; 12],
    [5.260_015_195_876_773E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.972_505_698_453_79E-2, 5.917_517_095_361_37E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.958_758_547_680_685E-2, 0.0, 8.876_275_643_042_054E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        2.413_651_341_592_667E-1,
        0.0,
        -8.845_494_793_282_861E-1,
        9.248_340_032_617_92E-1,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ],
    [
        3.703_703_703_703_703_5E-2,
        0.0,
        0.0,
        1.708_286_087_294_738_6E-1,
        1.254_676_875_668_224_2E-1,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ],
    [
        3.7109375E-2,
        0.0,
        0.0,
        1.702_522_110_195_440_5E-1,
        6.021_653_898_045_596E-2,
        -1.7578125E-2,
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
    ],
    [
        3.709_200_011_850_479E-2,
        0.0,
        0.0,
        1.703_839_257_122_399_8E-1,
        1.072_620_304_463_732_8E-1,
        -1.531_943_774_862_440_2E-2,
        8.273_789_163_814_023E-3,
        0.0, 0.0, 0.0, 0.0, 0.0,
    ],
    [
        6.241_109_587_160_757E-1,
        0.0,
        0.0,
        -3.360_892_629_446_941_4,
        -8.682_193_468_417_26E-1,
        2.759_209_969_944_671E1,
        2.015_406_755_047_789_4E1,
        -4.348_988_418_106_996E1,
        0.0, 0.0, 0.0, 0.0,
    ],
    [
        4.776_625_364_382_643_4E-1,
        0.0,
        0.0,
        -2.488_114_619_971_667_7,
        -5.902_908_268_368_43E-1,
        2.123_005_144_818_119_3E1,
        1.527_923_363_288_242_3E1,
        -3.328_821_096_898_486E1,
        -2.033_120_170_850_862_7E-2,
        0.0, 0.0, 0.0,
    ],
    [
        -9.371_424_300_859_873E-1,
        0.0,
        0.0,
        5.186_372_428_844_064,
        1.091_437_348_996_729_5,
        -8.149_787_010_746_927,
        -1.852_006_565_999_696E1,
        2.273_948_709_935_050_5E1,
        2.493_605_552_679_652_3,
        -3.046_764_471_898_219_6,
        0.0, 0.0,
    ],
    [
        2.273_310_147_516_538,
        0.0,
        0.0,
        -1.053_449_546_673_725E1,
        -2.000_872_058_224_862_5,
        -1.795_893_186_311_88E1,
        2.794_888_452_941_996E1,
        -2.858_998_277_135_023_5,
        -8.872_856_933_530_63,
        1.236_056_717_579_430_3E1,
        6.433_927_460_157_636E-1,
        0.0,
    ],
];

const C: [f64; 12] = [
    0.0,
    5.260_015_195_876_773E-2,
    7.890_022_793_815_16E-2,
    1.183_503_419_072_274E-1,
    2.816_496_580_927_726E-1,
    3.333_333_333_333_333E-1,
    0.25,
    3.076_923_076_923_077E-1,
    6.512_820_512_820_513E-1,
    0.6,
    8.571_428_571_428_571E-1,
    1.0,
];

const B: [f64; 12] = [
    5.429_373_411_656_876_5E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450_312_892_752_409,
    1.891_517_899_314_500_3,
    -5.801_203_960_010_585,
    3.111_643_669_578_199E-1,
    -1.521_609_496_625_161E-1,
    2.013_654_008_040_303_4E-1,
    4.471_061_572_777_259E-2,
];

const ER: [f64; 12] = [
    1.312_004_499_419_488E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.225_156_446_376_204_4,
    -4.957_589_496_572_502E-1,
    1.664_377_182_454_986_4,
    -3.503_288_487_499_736_6E-1,
    3.341_791_187_130_175E-1,
    8.192_320_648_511_571E-2,
    -2.235_530_786_388_629_4E-2,
];

const BHH: [f64; 3] = [2.440_944_881_889_764E-1, 7.338_466_882_816_118E-1, 2.205_882_352_941_176_6E-2];

/// Tolerances for the adaptive integrator. Errors are measured relative to the
/// max-norm of each component group, not componentwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rtol: 1e-11, atol: 1e-300, max_steps: 200_000 }
    }
}

impl OdeOptions {
    pub fn with_rtol(rtol: f64) -> Self {
        OdeOptions { rtol, ..Default::default() }
    }
}

pub(crate) struct Outcome<const N: usize> {
    pub y: [C64; N],
    /// Per-group accumulated ln of the factors removed by rescaling.
    pub log_scale: Vec<f64>,
}

/// Rescale a group once its max-norm leaves [e^-RESCALE_AT, e^RESCALE_AT].
const RESCALE_AT: f64 = 200.0;

fn group_max<const N: usize>(y: &[C64; N], g: usize, size: usize) -> f64 {
    y[g * size..(g + 1) * size].iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn err_norm<const N: usize>(
    e: &[C64; N],
    y: &[C64; N],
    yn: &[C64; N],
    group: usize,
    opts: &OdeOptions,
) -> f64 {
    let mut s = 0.0;
    for g in 0..N / group {
        let sk = opts.atol + opts.rtol * group_max(y, g, group).max(group_max(yn, g, group));
        for v in &e[g * group..(g + 1) * group] {
            s += v.norm_sqr() / (sk * sk);
        }
    }
    s
}

fn combine<const N: usize>(y: &[C64; N], h: f64, coef: &[f64], ks: &[[C64; N]]) -> [C64; N] {
    let mut out = *y;
    for (j, &a) in coef.iter().enumerate() {
        if a != 0.0 {
            let ha = h * a;
            for i in 0..N {
                out[i] += ks[j][i] * ha;
            }
        }
    }
    out
}

/// Integrates y' = f(x, y) from `x0` through each point of `stops` in order
/// (monotone, all on one side of `x0`), calling `sink(i, y, log_scale)` on arrival
/// at stop `i`. Components are grouped in blocks of `group` for error control; with
/// `rescale`, blocks whose size drifts out of range are renormalised and the
/// removed factors are returned in `log_scale`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn integrate<const N: usize, F, S>(
    f: &F,
    x0: f64,
    y0: [C64; N],
    stops: &[f64],
    group: usize,
    rescale: bool,
    opts: &OdeOptions,
    mut sink: S,
) -> Result<Outcome<N>>
where
    F: Fn(f64, &[C64; N]) -> [C64; N],
    S: FnMut(usize, &[C64; N], &[f64]) -> Result<()>,
{
    debug_assert!(N.is_multiple_of(group));
    let ngroups = N / group;
    let mut log_scale = vec![0.0; ngroups];
    let mut x = x0;
    let mut y = y0;
    let mut k = [[C64::new(0.0, 0.0); N]; 12];
    k[0] = f(x, &y);
    let mut steps = 0usize;
    let Some(&x_last) = stops.last() else {
        return Ok(Outcome { y, log_scale });
    };
    let dir = if x_last >= x0 { 1.0 } else { -1.0 };
    let mut h = dir * initial_step(f, x, &y, &k[0], group, opts).min((x_last - x0).abs().max(1e-300));
    let mut last_rejected = false;

    for (si, &xs) in stops.iter().enumerate() {
        while dir * (xs - x) > 0.0 {
            let rem = xs - x;
            let mut hh = h;
            let mut hits = false;
            if dir * (hh - rem) >= -1e-14 * rem.abs().max(1.0) {
                hh = rem;
                hits = true;
            }
            if hh.abs() < 1e-14 * x.abs().max(1.0) && !hits {
                return Err(Error::Integration { x, reason: "step size underflow".into() });
            }
            for s in 1..12 {
                let ys = combine(&y, hh, &A[s][..s], &k[..s]);
                k[s] = f(x + C[s] * hh, &ys);
            }
            let incr = combine(&[C64::new(0.0, 0.0); N], 1.0, &B, &k);
            let mut yn = y;
            for i in 0..N {
                yn[i] += incr[i] * hh;
            }
            let mut e5 = [C64::new(0.0, 0.0); N];
            let mut e3 = incr;
            for i in 0..N {
                let mut s5 = C64::new(0.0, 0.0);
                for (j, &c) in ER.iter().enumerate() {
                    if c != 0.0 {
                        s5 += k[j][i] * c;
                    }
                }
                e5[i] = s5;
                e3[i] -= k[0][i] * BHH[0] + k[8][i] * BHH[1] + k[11][i] * BHH[2];
            }
            let err5 = err_norm(&e5, &y, &yn, group, opts);
            let err3 = err_norm(&e3, &y, &yn, group, opts);
            let mut deno = err5 + 0.01 * err3;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = hh.abs() * err5 * (1.0 / (N as f64 * deno)).sqrt();
            if !err.is_finite() {
                if yn.iter().any(|z| !z.is_finite()) && y.iter().all(|z| z.is_finite()) && hh.abs() > 1e-10 {
                    h = hh * 0.1;
                    last_rejected = true;
                    continue;
                }
                return Err(Error::Integration { x, reason: "non-finite state".into() });
            }
            let fac11 = err.powf(0.125);
            let fac = (fac11 / 0.9).clamp(1.0 / 6.0, 1.0 / 0.333);
            if err <= 1.0 {
                steps += 1;
                if steps > opts.max_steps {
                    return Err(Error::Integration { x, reason: "step budget exhausted".into() });
                }
                x = if hits { xs } else { x + hh };
                y = yn;
                let mut hnew = hh / fac;
                if last_rejected && hnew.abs() > hh.abs() {
                    hnew = hh;
                }
                last_rejected = false;
                // Keep the untruncated step when the stop forced a short one.
                h = if hits && hnew.abs() < h.abs() && err < 0.5 { h } else { hnew };
                let mut rescaled = false;
                if rescale {
                    for g in 0..ngroups {
                        let m = group_max(&y, g, group);
                        if m > 0.0 && m.is_finite() && m.ln().abs() > RESCALE_AT {
                            let inv = 1.0 / m;
                            for v in &mut y[g * group..(g + 1) * group] {
                                *v *= inv;
                            }
                            log_scale[g] += m.ln();
                            rescaled = true;
                        }
                    }
                }
                k[0] = f(x, &y);
                if !rescaled && y.iter().any(|z| !z.is_finite()) {
                    return Err(Error::Integration { x, reason: "solution overflow".into() });
                }
            } else {
                h = hh / (fac11 / 0.9).min(1.0 / 0.333);
                last_rejected = true;
            }
        }
        sink(si, &y, &log_scale)?;
    }
    Ok(Outcome { y, log_scale })
}

fn initial_step<const N: usize, F>(
    f: &F,
    x: f64,
    y: &[C64; N],
    f0: &[C64; N],
    group: usize,
    opts: &OdeOptions,
) -> f64
where
    F: Fn(f64, &[C64; N]) -> [C64; N],
{
    let n = N as f64;
    let d0 = (err_norm(y, y, y, group, opts) / n).sqrt();
    let d1 = (err_norm(f0, y, y, group, opts) / n).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(0.1);
    let mut y1 = *y;
    for i in 0..N {
        y1[i] += f0[i] * h0;
    }
    let f1 = f(x + h0, &y1);
    let mut df = *f0;
    for i in 0..N {
        df[i] = f1[i] - f0[i];
    }
    let d2 = (err_norm(&df, y, y, group, opts) / n).sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.125) };
    (100.0 * h0).min(h1).min(0.25)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn harmonic_oscillator_to_high_accuracy() {
        // y'' = -w^2 y with w = 20: y = cos(w x).
        let w = 20.0;
        let f = |_x: f64, y: &[C64; 2]| [y[1], y[0] * (-w * w)];
        let opts = OdeOptions::with_rtol(1e-12);
        let out = integrate(&f, 0.0, [c(1.0, 0.0), c(0.0, 0.0)], &[1.0], 2, false, &opts, |_, _, _| Ok(()))
            .unwrap();
        assert!((out.y[0].re - w.cos()).abs() < 1e-10, "{}", out.y[0]);
        assert!((out.y[1].re + w * w.sin()).abs() < 1e-8);
    }

    #[test]
    fn eighth_order_convergence() {
        // Fixed tolerances an order of magnitude apart: error ratio about 10.
        let f = |x: f64, y: &[C64; 1]| [y[0] * c(x.cos(), 1.0)];
        let exact = |x: f64| (c(x.sin(), x)).exp();
        let mut errs = vec![];
        for tol in [1e-7, 1e-9, 1e-11] {
            let o = OdeOptions::with_rtol(tol);
            let out = integrate(&f, 0.0, [c(1.0, 0.0)], &[2.0], 1, false, &o, |_, _, _| Ok(())).unwrap();
            errs.push((out.y[0] - exact(2.0)).norm());
        }
        assert!(errs[2] < 1e-10, "{errs:?}");
        assert!(errs[0] > errs[2]);
    }

    #[test]
    fn backward_with_stops_and_rescaling() {
        // y' = 300 y backward from x = 1 to 0: y(0) = e^-300 relative to y(1).
        let f = |_x: f64, y: &[C64; 1]| [y[0] * 300.0];
        let mut seen = vec![];
        let out = integrate(
            &f,
            1.0,
            [c(1.0, 0.0)],
            &[0.5, 0.0],
            1,
            true,
            &OdeOptions::with_rtol(1e-12),
            |i, y, _| {
                seen.push((i, y[0]));
                Ok(())
            },
        )
        .unwrap();
        assert_eq!(seen.len(), 2);
        let ln = out.y[0].norm().ln() + out.log_scale[0];
        assert!((ln + 300.0).abs() < 1e-8, "{ln}");
    }
}
