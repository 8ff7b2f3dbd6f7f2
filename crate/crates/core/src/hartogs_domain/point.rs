use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A point `(z, w)` of complex 2-space with `t = |z|` cached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainPoint {
    pub z: Complex64,
    pub w: Complex64,
    pub t: f64,
}

impl DomainPoint {
    pub fn new(z: Complex64, w: Complex64) -> Self {
        Self { z, w, t: z.norm() }
    }

    /// The representative `(t + 0i, w)` of the z-rotation orbit through `(t, w)`.
    pub fn reduced(t: f64, w: Complex64) -> Self {
        Self {
            z: Complex64::new(t, 0.0),
            w,
            t,
        }
    }

    pub fn from_real(x: [f64; 4]) -> Self {
        Self::new(Complex64::new(x[0], x[1]), Complex64::new(x[2], x[3]))
    }

    /// Real coordinates `(Re z, Im z, Re w, Im w)`.
    pub fn to_real(&self) -> [f64; 4] {
        [self.z.re, self.z.im, self.w.re, self.w.im]
    }

    /// `self + s * (dz, dw)`.
    pub fn offset(&self, dz: Complex64, dw: Complex64) -> Self {
        Self::new(self.z + dz, self.w + dw)
    }

    pub fn distance(&self, other: &Self) -> f64 {
        ((self.z - other.z).norm_sqr() + (self.w - other.w).norm_sqr()).sqrt()
    }

    pub fn rotate_z(&self, theta: f64) -> Self {
        Self::new(self.z * Complex64::from_polar(1.0, theta), self.w)
    }
}
