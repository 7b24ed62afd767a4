//! Small dense complex types: 2x2 matrices and log-scaled scalars.

use num_complex::Complex64 as C64;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Principal square root (branch cut on the negative real axis).
pub fn sqrt_principal(z: C64) -> C64 {
    z.sqrt()
}

/// Zeroes a component that is negligible next to the other; subnormal parts
/// left over from Newton iterations slow every later operation badly.
pub fn flush_tiny(z: C64) -> C64 {
    let m = z.re.abs().max(z.im.abs());
    let keep = |x: f64| if x.abs() < 1e-200 * m { 0.0 } else { x };
    C64::new(keep(z.re), keep(z.im))
}

/// 2x2 complex matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[ZERO, ZERO], [ZERO, ZERO]]);
    pub const IDENTITY: Mat2 = Mat2([[ONE, ZERO], [ZERO, ONE]]);

    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub fn diag(a: C64, d: C64) -> Self {
        Mat2([[a, ZERO], [ZERO, d]])
    }

    pub fn from_cols(c0: [C64; 2], c1: [C64; 2]) -> Self {
        Mat2([[c0[0], c1[0]], [c0[1], c1[1]]])
    }

    pub fn col(&self, j: usize) -> [C64; 2] {
        [self.0[0][j], self.0[1][j]]
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[i][j]
    }

    pub fn det(&self) -> C64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Inverse, or `None` when the determinant vanishes exactly or is non-finite.
    pub fn inv(&self) -> Option<Mat2> {
        let d = self.det();
        if d == ZERO || !d.is_finite() {
            return None;
        }
        let [[a, b], [c, e]] = self.0;
        Some(Mat2([[e / d, -b / d], [-c / d, a / d]]))
    }

    pub fn transpose(&self) -> Mat2 {
        let [[a, b], [c, d]] = self.0;
        Mat2([[a, c], [b, d]])
    }

    pub fn adjoint(&self) -> Mat2 {
        let [[a, b], [c, d]] = self.0;
        Mat2([[a.conj(), c.conj()], [b.conj(), d.conj()]])
    }

    pub fn scale(&self, s: C64) -> Mat2 {
        let [[a, b], [c, d]] = self.0;
        Mat2([[a * s, b * s], [c * s, d * s]])
    }

    pub fn mul_vec(&self, v: [C64; 2]) -> [C64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.is_finite())
    }

    pub fn entries(&self) -> [C64; 4] {
        [self.0[0][0], self.0[0][1], self.0[1][0], self.0[1][1]]
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let mut r = self;
        r += o;
        r
    }
}

impl AddAssign for Mat2 {
    fn add_assign(&mut self, o: Mat2) {
        for i in 0..2 {
            for j in 0..2 {
                self.0[i][j] += o.0[i][j];
            }
        }
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + (-o)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(-ONE)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let a = &self.0;
        let b = &o.0;
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

impl Mul<C64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: C64) -> Mat2 {
        self.scale(s)
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        self.scale(C64::new(s, 0.0))
    }
}

/// The orthogonal matrix (1/sqrt 2)[[1, 1], [-1, 1]]; real, so its adjoint is its transpose.
pub fn u_matrix() -> Mat2 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Mat2::new(c(h, 0.0), c(h, 0.0), c(-h, 0.0), c(h, 0.0))
}

/// Complex number stored as `mantissa * exp(log_scale)`, so exponentially large or
/// small values survive without overflow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Scaled {
    pub mantissa: C64,
    pub log_scale: f64,
}

impl Scaled {
    pub fn new(mantissa: C64, log_scale: f64) -> Self {
        Scaled { mantissa, log_scale }.normalized()
    }

    pub fn from_c64(z: C64) -> Self {
        Scaled::new(z, 0.0)
    }

    /// Renormalises so that |mantissa| is 1 (or the value is exactly zero).
    pub fn normalized(self) -> Self {
        let m = self.mantissa.norm();
        if m == 0.0 || !m.is_finite() {
            return self;
        }
        Scaled { mantissa: self.mantissa / m, log_scale: self.log_scale + m.ln() }
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == ZERO
    }

    /// ln|z|; `-inf` for zero.
    pub fn ln_abs(&self) -> f64 {
        self.mantissa.norm().ln() + self.log_scale
    }

    pub fn arg(&self) -> f64 {
        self.mantissa.arg()
    }

    /// Principal complex logarithm.
    pub fn ln(&self) -> C64 {
        C64::new(self.ln_abs(), self.arg())
    }

    /// Plain value; may overflow to infinity or underflow to zero.
    pub fn to_c64(&self) -> C64 {
        self.mantissa * self.log_scale.exp()
    }

    pub fn mul(&self, o: &Scaled) -> Scaled {
        Scaled::new(self.mantissa * o.mantissa, self.log_scale + o.log_scale)
    }

    pub fn div(&self, o: &Scaled) -> Scaled {
        Scaled::new(self.mantissa / o.mantissa, self.log_scale - o.log_scale)
    }

    pub fn scale_by(&self, z: C64) -> Scaled {
        Scaled::new(self.mantissa * z, self.log_scale)
    }

    /// Ratio as a plain complex number.
    pub fn ratio(&self, o: &Scaled) -> C64 {
        self.div(o).to_c64()
    }

    pub fn add(&self, o: &Scaled) -> Scaled {
        if self.is_zero() {
            return *o;
        }
        if o.is_zero() {
            return *self;
        }
        let s = self.log_scale.max(o.log_scale);
        let a = self.mantissa * (self.log_scale - s).exp();
        let b = o.mantissa * (o.log_scale - s).exp();
        Scaled::new(a + b, s)
    }

    pub fn sub(&self, o: &Scaled) -> Scaled {
        self.add(&Scaled { mantissa: -o.mantissa, log_scale: o.log_scale })
    }
}
