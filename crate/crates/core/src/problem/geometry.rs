use crate::error::{Error, Result};
use crate::linalg::I;
use num_complex::Complex64 as C64;
use std::f64::consts::{PI, TAU};

/// A special ray arg(rho) = angle on which Re(i rho d1) = Re(i rho d2) > 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub angle: f64,
    /// Square roots of the weights, signed so that Re(i rho d_k) > 0 on the ray.
    pub d: [C64; 2],
}

/// Open arc (start, end) of the rho-plane with a fixed branch choice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sector {
    pub start: f64,
    /// `end > start`; may exceed 2 pi for the wrapping sector.
    pub end: f64,
    pub d: [C64; 2],
}

impl Sector {
    pub fn mid(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    pub fn contains(&self, angle: f64) -> bool {
        let a = (angle - self.start).rem_euclid(TAU);
        a > 0.0 && a < self.end - self.start
    }
}

/// Ray and sector partition of the rho-plane for the weight diag(w1, w2).
#[derive(Clone, Debug, PartialEq)]
pub struct SectorGeometry {
    pub w: [C64; 2],
    /// Principal square roots of w1, w2.
    pub d_principal: [C64; 2],
    /// The four special rays, sorted by angle in [0, 2 pi).
    pub rays: Vec<Ray>,
    /// All sector boundaries, sorted in [0, 2 pi).
    pub boundaries: Vec<f64>,
    pub sectors: Vec<Sector>,
}

/// Sign choice of each principal root making Re(i rho d_k) >= 0 at `angle`.
pub fn branch_at(d_principal: [C64; 2], angle: f64) -> [C64; 2] {
    let irho = I * C64::from_polar(1.0, angle);
    d_principal.map(|d| if (irho * d).re >= 0.0 { d } else { -d })
}

fn same_angle(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(TAU);
    d < 1e-12 || TAU - d < 1e-12
}

/// Computes the special rays, sector boundaries and branch tables.
pub fn sector_geometry(w: [C64; 2]) -> Result<SectorGeometry> {
    if w.iter().any(|z| z.norm() == 0.0 || !z.is_finite()) {
        return Err(Error::InvalidInput("weight entries must be finite and nonzero".into()));
    }
    if same_angle(w[0].arg(), w[1].arg()) {
        return Err(Error::DegenerateWeight);
    }
    let dp = [w[0].sqrt(), w[1].sqrt()];
    let mut rays = Vec::with_capacity(4);
    for eps in [1.0, -1.0] {
        let theta0 = (-(dp[0] - dp[1] * eps).arg()).rem_euclid(PI);
        for theta in [theta0, theta0 + PI] {
            let irho = I * C64::from_polar(1.0, theta);
            let sigma = if (irho * dp[0]).re >= 0.0 { 1.0 } else { -1.0 };
            rays.push(Ray { angle: theta, d: [dp[0] * sigma, dp[1] * sigma * eps] });
        }
    }
    rays.sort_by(|a, b| a.angle.partial_cmp(&b.angle).unwrap());

    let mut boundaries: Vec<f64> = rays.iter().map(|r| r.angle).collect();
    for d in dp {
        let t0 = (-d.arg()).rem_euclid(PI);
        boundaries.push(t0);
        boundaries.push(t0 + PI);
    }
    boundaries.iter_mut().for_each(|b| *b = b.rem_euclid(TAU));
    boundaries.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut uniq: Vec<f64> = vec![];
    for b in boundaries {
        if !uniq.iter().any(|&u| same_angle(u, b)) {
            uniq.push(b);
        }
    }
    let n = uniq.len();
    let sectors = (0..n)
        .map(|j| {
            let start = uniq[j];
            let end = if j + 1 < n { uniq[j + 1] } else { uniq[0] + TAU };
            let d = branch_at(dp, 0.5 * (start + end));
            Sector { start, end, d }
        })
        .collect();
    Ok(SectorGeometry { w, d_principal: dp, rays, boundaries: uniq, sectors })
}

impl SectorGeometry {
    pub fn sector_containing(&self, angle: f64) -> Option<&Sector> {
        self.sectors.iter().find(|s| s.contains(angle))
    }

    pub fn branch_at(&self, angle: f64) -> [C64; 2] {
        branch_at(self.d_principal, angle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    #[test]
    fn unit_weight_has_eight_equal_sectors() {
        let g = sector_geometry([c(1.0, 0.0), c(-1.0, 0.0)]).unwrap();
        assert_eq!(g.boundaries.len(), 8);
        for (j, b) in g.boundaries.iter().enumerate() {
            assert!((b - PI * j as f64 / 4.0).abs() < 1e-12);
        }
        let ray = g.rays.iter().find(|r| (r.angle - PI / 4.0).abs() < 1e-12).unwrap();
        assert!((ray.d[0] - c(-1.0, 0.0)).norm() < 1e-15);
        assert!((ray.d[1] - c(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn degenerate_weight_is_rejected() {
        assert!(matches!(
            sector_geometry([c(1.0, 1.0), c(2.0, 2.0)]),
            Err(Error::DegenerateWeight)
        ));
    }

    #[test]
    fn rays_balance_growth_rates() {
        for w in [[c(1.0, 0.0), c(-1.0, 0.0)], [c(0.5, -0.5), c(-0.5, -0.5)], [c(2.0 / 3.0, 0.0), c(-2.0, 0.0)]] {
            let g = sector_geometry(w).unwrap();
            assert_eq!(g.rays.len(), 4);
            for r in &g.rays {
                let irho = I * C64::from_polar(1.0, r.angle);
                let a = (irho * r.d[0]).re;
                let b = (irho * r.d[1]).re;
                assert!(a > 0.0 && (a - b).abs() < 1e-12, "{a} {b}");
                assert!((r.d[0] * r.d[0] - w[0]).norm() < 1e-14);
                assert!((r.d[1] * r.d[1] - w[1]).norm() < 1e-14);
            }
        }
    }
}
