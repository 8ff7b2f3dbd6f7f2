//! The domain `{ |w - exp(i phi(|z|))|^2 < r(|z|) }` and the sets the
//! separation argument is built from: the boundary set `K` over `|z| in {2, 16}`,
//! the open set `V` over `8 < |z| < 10`, the flat annuli `A_w`, and the
//! nontangential approach regions at boundary points.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::point::DomainPoint;
use super::profile::RadialProfile;

/// Radii `|z|` of the two circles carrying `K`.
pub const K_RADII: [f64; 2] = [2.0, 16.0];
/// `|z|`-range of the set `V` (open).
pub const V_T_RANGE: (f64, f64) = (8.0, 10.0);
/// `|z|`-range of the annuli `A_w` (closed).
pub const ANNULUS_T_RANGE: (f64, f64) = (2.0, 16.0);
/// Round-off slack used for exact set-membership tests (`eta = 0`).
pub const MEMBERSHIP_TOL: f64 = 1e-12;
/// Below this norm the gradient of the defining function is treated as zero.
pub const DEGENERATE_GRADIENT: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("defining function has vanishing gradient ({norm:e}) at boundary point t = {t}")]
    DegenerateBoundaryPoint { t: f64, norm: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RegionTag {
    Interior,
    Boundary(f64),
    Exterior,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HartogsDomain {
    profile: RadialProfile,
}

impl HartogsDomain {
    pub fn new(profile: RadialProfile) -> Self {
        Self { profile }
    }

    pub fn profile(&self) -> &RadialProfile {
        &self.profile
    }

    #[inline]
    pub fn fiber_center(&self, t: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.profile.phi(t))
    }

    /// Defining function in reduced coordinates.
    #[inline]
    pub fn rho_reduced(&self, t: f64, w: Complex64) -> f64 {
        (w - self.fiber_center(t)).norm_sqr() - self.profile.r(t)
    }

    /// `|w - e^{i phi(|z|)}|^2 - r(|z|)`; negative exactly on the domain.
    pub fn rho(&self, p: &DomainPoint) -> f64 {
        self.rho_reduced(p.t, p.w)
    }

    /// Real gradient of `rho` in `(Re z, Im z, Re w, Im w)`, closed form.
    pub fn rho_gradient(&self, p: &DomainPoint) -> [f64; 4] {
        let c = self.fiber_center(p.t);
        let d = p.w - c;
        let dt = 2.0 * self.profile.phi_prime(p.t) * (p.w.conj() * c).im - self.profile.r_prime(p.t);
        let (gx, gy) = if p.t > 0.0 {
            (dt * p.z.re / p.t, dt * p.z.im / p.t)
        } else {
            (0.0, 0.0)
        };
        [gx, gy, 2.0 * d.re, 2.0 * d.im]
    }

    pub fn classify(&self, p: &DomainPoint, tol: f64) -> RegionTag {
        debug_assert!(tol > 0.0);
        let rho = self.rho(p);
        if rho < -tol {
            RegionTag::Interior
        } else if rho.abs() <= tol {
            RegionTag::Boundary(tol)
        } else {
            RegionTag::Exterior
        }
    }

    pub fn contains(&self, p: &DomainPoint) -> bool {
        self.rho(p) < 0.0
    }

    /// Euclidean distance in reduced coordinates from `(t, w)` to `K`.
    ///
    /// `K` over `|z| = t_k` is the product of that circle with the fiber
    /// boundary circle, so the distance splits into a z-part and a w-part.
    pub fn distance_to_k_reduced(&self, t: f64, w: Complex64) -> f64 {
        K_RADII
            .iter()
            .map(|&tk| {
                let r = self.profile.r(tk).max(0.0).sqrt();
                let dw = (w - self.fiber_center(tk)).norm() - r;
                ((t - tk).powi(2) + dw * dw).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn distance_to_k(&self, p: &DomainPoint) -> f64 {
        self.distance_to_k_reduced(p.t, p.w)
    }

    /// Whether `p` lies within distance `eta` of `K`.
    pub fn in_k(&self, p: &DomainPoint, eta: f64) -> bool {
        debug_assert!(eta >= 0.0);
        self.distance_to_k(p) <= eta + MEMBERSHIP_TOL
    }

    /// Membership in `V`: `8 < |z| < 10`, `|w| < delta` and `|w| < sqrt(r(|z|)) - 1`.
    ///
    /// The last condition is `(|w| + 1)^2 < r`, which keeps the whole set
    /// inside the domain for every rotation of the fiber center.
    pub fn in_v_reduced(&self, t: f64, w: Complex64, delta: f64) -> bool {
        let (lo, hi) = V_T_RANGE;
        if !(t > lo && t < hi) {
            return false;
        }
        let m = w.norm();
        m < delta && m < self.profile.r(t).max(0.0).sqrt() - 1.0
    }

    pub fn in_v(&self, p: &DomainPoint, delta: f64) -> bool {
        self.in_v_reduced(p.t, p.w, delta)
    }

    /// Membership in the flat annulus `A_{w0} = {(z, w0) : 2 <= |z| <= 16}`.
    pub fn in_annulus_aw(&self, p: &DomainPoint, w0: Complex64) -> bool {
        let (lo, hi) = ANNULUS_T_RANGE;
        p.w == w0 && p.t >= lo && p.t <= hi
    }

    /// Distance from `z` to the real tangent hyperplane of the boundary at `xi`.
    pub fn tangent_plane_distance(
        &self,
        xi: &DomainPoint,
        z: &DomainPoint,
    ) -> Result<f64, DomainError> {
        let g = self.rho_gradient(xi);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < DEGENERATE_GRADIENT {
            return Err(DomainError::DegenerateBoundaryPoint { t: xi.t, norm });
        }
        let a = xi.to_real();
        let b = z.to_real();
        let dot: f64 = (0..4).map(|k| g[k] * (b[k] - a[k])).sum();
        Ok(dot.abs() / norm)
    }

    /// Unit inward normal (direction of decreasing `rho`) at a boundary point.
    pub fn inward_normal(&self, xi: &DomainPoint) -> Result<[f64; 4], DomainError> {
        let g = self.rho_gradient(xi);
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < DEGENERATE_GRADIENT {
            return Err(DomainError::DegenerateBoundaryPoint { t: xi.t, norm });
        }
        Ok([-g[0] / norm, -g[1] / norm, -g[2] / norm, -g[3] / norm])
    }

    /// Membership in the approach region `|z - xi| < alpha * delta_xi(z)`.
    pub fn in_approach_region(
        &self,
        z: &DomainPoint,
        xi: &DomainPoint,
        alpha: f64,
    ) -> Result<bool, DomainError> {
        debug_assert!(alpha >= 1.0);
        let d = self.tangent_plane_distance(xi, z)?;
        Ok(z.distance(xi) < alpha * d)
    }
}
