//! Closed-form characteristic functions for p = q = 0.
//!
//! Without potential the even and odd parts of u decouple:
//! -(alpha + 1) u_e'' = lambda u_e and -(alpha - 1) u_o'' = lambda u_o, so
//! u = A cos(k1 x) + B sin(k2 x) with k1^2 = lambda/(alpha + 1),
//! k2^2 = lambda/(alpha - 1), and each boundary variant is a 2x2 determinant.

use super::contour::Rect;
use super::roots::{roots_in_rect, RootFunctions, RootOptions};
use super::spectrum::Spectrum;
use crate::error::Result;
use crate::linalg::Scaled;
use crate::problem::{check_alpha, BoundaryVariant};
use num_complex::Complex64 as C64;

fn sinc(z: C64) -> C64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        C64::new(1.0, 0.0) - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// Boundary determinant in (A, B), with the B column divided by k2 so the
/// result is entire in lambda. Same zeros as the characteristic function.
pub fn even_odd_delta(alpha: C64, v: BoundaryVariant, lambda: C64) -> C64 {
    let k1 = (lambda / (alpha + 1.0)).sqrt();
    let k2 = (lambda / (alpha - 1.0)).sqrt();
    // rows u(1), u(-1), u'(1), u'(-1)
    let u1 = [k1.cos(), sinc(k2)];
    let um1 = [k1.cos(), -sinc(k2)];
    let d1 = [-k1 * k1.sin(), k2.cos()];
    let dm1 = [k1 * k1.sin(), k2.cos()];
    let (r0, r1) = match v {
        BoundaryVariant::L => (um1, u1),
        BoundaryVariant::L11 => (dm1, u1),
        BoundaryVariant::L12 => (um1, dm1),
        BoundaryVariant::L21 => (u1, d1),
        BoundaryVariant::L22 => (um1, d1),
    };
    r0[0] * r1[1] - r0[1] * r1[0]
}

/// Zeros of [`even_odd_delta`] in `region`, found by the same contour machinery
/// as the ODE-based search.
pub fn oracle_spectrum(alpha: C64, variant: BoundaryVariant, region: Rect, opts: &RootOptions) -> Result<Spectrum> {
    check_alpha(alpha)?;
    let f = move |l: C64| Ok(Scaled::from_c64(even_odd_delta(alpha, variant, l)));
    let fs = RootFunctions { count: &f, refine: &f };
    let (roots, used, _) = roots_in_rect(&fs, region, opts)?;
    Ok(Spectrum::new(variant, used, None, roots))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use std::f64::consts::PI;

    #[test]
    fn dirichlet_zeros_are_the_decoupled_ones() {
        let s = oracle_spectrum(c(0.0, 0.0), BoundaryVariant::L, Rect::new(-50.0, 50.0, -1.0, 1.0).unwrap(), &RootOptions::default())
            .unwrap();
        let want = [-4.0 * PI * PI, -PI * PI, PI * PI / 4.0, 9.0 * PI * PI / 4.0];
        assert_eq!(s.total_multiplicity(), 4);
        for (z, w) in s.values().iter().zip(want) {
            assert!((z - w).norm() < 1e-10 * w.abs());
        }
    }

    #[test]
    fn entire_across_the_branch_cut() {
        // sqrt flips sign across the negative real axis; the value must not
        let a = c(0.2, 0.7);
        for v in BoundaryVariant::ALL {
            let above = even_odd_delta(a, v, c(-30.0, 1e-12));
            let below = even_odd_delta(a, v, c(-30.0, -1e-12));
            assert!((above - below).norm() < 1e-9 * above.norm().max(1.0), "{v}");
        }
    }
}
