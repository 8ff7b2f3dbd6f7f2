//! The symmetry-reduced lattice over `(|z|, Re w, Im w)` and its masks.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::edt::squared_distance_to;
use super::EnvelopeError;
use crate::hartogs_domain::{DomainPoint, HartogsDomain};

/// Tolerance of the node classification `|rho| <= tol` as boundary.
pub const CLASSIFY_TOL: f64 = 1e-9;

/// An evenly spaced axis `min + i * spacing`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub spacing: f64,
    pub n: usize,
}

impl Axis {
    /// The axis from `min` to `max` (inclusive up to round-off) at `spacing`.
    pub fn spanning(min: f64, max: f64, spacing: f64) -> Self {
        let n = ((max - min) / spacing + 1e-9).floor() as usize + 1;
        Self { min, spacing, n }
    }

    /// Node coordinate; axes starting at a multiple of the spacing use exact
    /// integer multiples so that the lattice is symmetric about 0.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        let first = self.min / self.spacing;
        if (first - first.round()).abs() < 1e-9 {
            (first.round() + i as f64) * self.spacing
        } else {
            self.min + i as f64 * self.spacing
        }
    }

    pub fn max(&self) -> f64 {
        self.coord(self.n - 1)
    }

    /// Fractional index of `x`, snapped to an integer within `1e-9`.
    #[inline]
    pub fn position(&self, x: f64) -> f64 {
        let p = x / self.spacing - self.min / self.spacing;
        let r = p.round();
        if (p - r).abs() < 1e-9 {
            r
        } else {
            p
        }
    }

    /// Index of the node closest to `x`, clamped to the axis.
    pub fn nearest(&self, x: f64) -> usize {
        self.position(x).round().clamp(0.0, (self.n - 1) as f64) as usize
    }
}

/// Row-major lattice with axes `(t, u, v)` = `(|z|, Re w, Im w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice3 {
    pub t: Axis,
    pub u: Axis,
    pub v: Axis,
}

impl Lattice3 {
    pub fn dims(&self) -> [usize; 3] {
        [self.t.n, self.u.n, self.v.n]
    }

    pub fn spacings(&self) -> [f64; 3] {
        [self.t.spacing, self.u.spacing, self.v.spacing]
    }

    pub fn len(&self) -> usize {
        self.t.n * self.u.n * self.v.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Nodes per slice of fixed `t`.
    pub fn slab(&self) -> usize {
        self.u.n * self.v.n
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.u.n + j) * self.v.n + k
    }

    #[inline]
    pub fn split(&self, idx: usize) -> (usize, usize, usize) {
        let k = idx % self.v.n;
        let ij = idx / self.v.n;
        (ij / self.u.n, ij % self.u.n, k)
    }

    /// Reduced coordinates `(t, w)` of a node.
    #[inline]
    pub fn point(&self, idx: usize) -> (f64, Complex64) {
        let (i, j, k) = self.split(idx);
        (self.t.coord(i), Complex64::new(self.u.coord(j), self.v.coord(k)))
    }

    /// Length of the cell diagonal.
    pub fn diagonal(&self) -> f64 {
        let [a, b, c] = self.spacings();
        (a * a + b * b + c * c).sqrt()
    }

    pub fn nearest(&self, t: f64, w: Complex64) -> usize {
        self.index(self.t.nearest(t), self.u.nearest(w.re), self.v.nearest(w.im))
    }
}

/// Which of the grid masks a field or problem lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskKind {
    Interior,
    Closure,
    Enlarged,
}

/// A lattice with the domain masks and the distance to the closure.
#[derive(Debug, Clone)]
pub struct Grid3 {
    pub lattice: Lattice3,
    pub delta: f64,
    pub interior: Arc<[bool]>,
    pub closure: Arc<[bool]>,
    pub enlarged: Arc<[bool]>,
    /// Distance from each node to the nearest closure node.
    pub closure_distance: Arc<[f64]>,
}

impl Grid3 {
    pub fn mask(&self, kind: MaskKind) -> Arc<[bool]> {
        match kind {
            MaskKind::Interior => self.interior.clone(),
            MaskKind::Closure => self.closure.clone(),
            MaskKind::Enlarged => self.enlarged.clone(),
        }
    }

    pub fn count(&self, kind: MaskKind) -> usize {
        self.mask(kind).iter().filter(|&&b| b).count()
    }

    /// Upper bound on the distance from `(t, w)` to the closure, from the
    /// node distances and the triangle inequality over the surrounding nodes.
    pub fn closure_distance_bound(&self, t: f64, w: Complex64) -> f64 {
        let l = &self.lattice;
        let (ci, cj, ck) = (l.t.nearest(t), l.u.nearest(w.re), l.v.nearest(w.im));
        let mut best = f64::INFINITY;
        for i in ci.saturating_sub(1)..=(ci + 1).min(l.t.n - 1) {
            for j in cj.saturating_sub(1)..=(cj + 1).min(l.u.n - 1) {
                for k in ck.saturating_sub(1)..=(ck + 1).min(l.v.n - 1) {
                    let idx = l.index(i, j, k);
                    let (nt, nw) = l.point(idx);
                    let gap = ((nt - t).powi(2) + (nw - w).norm_sqr()).sqrt();
                    best = best.min(self.closure_distance[idx] + gap);
                }
            }
        }
        best
    }
}

/// Builds the lattice and classifies every node against the domain.
pub fn build_grid(
    domain: &HartogsDomain,
    t_range: (f64, f64),
    w_range: (f64, f64),
    spacing_t: f64,
    spacing_w: f64,
    delta: f64,
) -> Result<Grid3, EnvelopeError> {
    let bad = |reason: &str| Err(EnvelopeError::InvalidRange(reason.to_string()));
    if !(spacing_t > 0.0 && spacing_w > 0.0) || !spacing_t.is_finite() || !spacing_w.is_finite() {
        return bad("spacings must be positive");
    }
    if !(delta > 0.0 && delta <= 0.1) {
        return bad("delta must lie in (0, 0.1]");
    }
    if t_range.0 != 0.0 || t_range.1 < 18.0 {
        return bad("t range must start at 0 and cover [0, 18]");
    }
    if w_range.0 > -2.6 || w_range.1 < 2.6 {
        return bad("w range must cover [-2.6, 2.6]");
    }
    let lattice = Lattice3 {
        t: Axis::spanning(t_range.0, t_range.1, spacing_t),
        u: Axis::spanning(w_range.0, w_range.1, spacing_w),
        v: Axis::spanning(w_range.0, w_range.1, spacing_w),
    };
    let rho: Vec<f64> = (0..lattice.len())
        .into_par_iter()
        .map(|idx| {
            let (t, w) = lattice.point(idx);
            domain.rho_reduced(t, w)
        })
        .collect();
    let interior: Vec<bool> = rho.iter().map(|&r| r < -CLASSIFY_TOL).collect();
    let closure: Vec<bool> = rho.iter().map(|&r| r <= CLASSIFY_TOL).collect();
    drop(rho);
    let dist: Vec<f64> = squared_distance_to(&closure, lattice.dims(), lattice.spacings())
        .into_iter()
        .map(f64::sqrt)
        .collect();
    let enlarged: Vec<bool> = dist.iter().map(|&d| d < delta).collect();
    Ok(Grid3 {
        lattice,
        delta,
        interior: interior.into(),
        closure: closure.into(),
        enlarged: enlarged.into(),
        closure_distance: dist.into(),
    })
}

/// Scalar values on the lattice, `INFINITY` off the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub lattice: Lattice3,
    pub mask: Arc<[bool]>,
    pub values: Vec<f64>,
}

impl GridField {
    /// Evaluates `f` on every masked node.
    pub fn from_fn<F>(lattice: Lattice3, mask: Arc<[bool]>, f: F) -> Self
    where
        F: Fn(f64, Complex64) -> f64 + Sync,
    {
        let values = (0..lattice.len())
            .into_par_iter()
            .map(|idx| {
                if mask[idx] {
                    let (t, w) = lattice.point(idx);
                    f(t, w)
                } else {
                    f64::INFINITY
                }
            })
            .collect();
        Self { lattice, mask, values }
    }

    pub fn at_node(&self, t: f64, w: Complex64) -> Option<f64> {
        let idx = self.lattice.nearest(t, w);
        self.mask[idx].then_some(self.values[idx])
    }

    /// Trilinear interpolation; `None` unless every corner with nonzero weight is masked.
    pub fn interpolate(&self, t: f64, w: Complex64) -> Option<f64> {
        let l = &self.lattice;
        let pos = [l.t.position(t), l.u.position(w.re), l.v.position(w.im)];
        let dims = l.dims();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            if pos[a] < 0.0 || pos[a] > (dims[a] - 1) as f64 {
                return None;
            }
            let f = pos[a].floor();
            base[a] = f as usize;
            frac[a] = pos[a] - f;
        }
        let mut sum = 0.0;
        for corner in 0..8 {
            let mut wgt = 1.0;
            let mut c = [0usize; 3];
            for a in 0..3 {
                let up = (corner >> a) & 1 == 1;
                wgt *= if up { frac[a] } else { 1.0 - frac[a] };
                c[a] = base[a] + up as usize;
            }
            if wgt == 0.0 {
                continue;
            }
            let idx = l.index(c[0], c[1], c[2]);
            if !self.mask[idx] {
                return None;
            }
            sum += wgt * self.values[idx];
        }
        Some(sum)
    }

    /// Value at a point of complex 2-space, through `(z, w) -> (|z|, w)`.
    pub fn eval(&self, p: &DomainPoint) -> Option<f64> {
        self.interpolate(p.t, p.w)
    }

    /// Every node on the line `w = 0` (nearest lattice line), as `(t, value)`
    /// with `None` off the mask.
    pub fn slice_w0(&self) -> Vec<(f64, Option<f64>)> {
        let l = &self.lattice;
        let (j, k) = (l.u.nearest(0.0), l.v.nearest(0.0));
        (0..l.t.n)
            .map(|i| {
                let idx = l.index(i, j, k);
                (l.t.coord(i), self.mask[idx].then_some(self.values[idx]))
            })
            .collect()
    }

    /// Masked nodes on the slice `t = const` (nearest lattice slice), as `(Re w, Im w, value)`.
    pub fn slice_t(&self, t: f64) -> Vec<(f64, f64, f64)> {
        let l = &self.lattice;
        let i = l.t.nearest(t);
        let mut out = Vec::new();
        for j in 0..l.u.n {
            for k in 0..l.v.n {
                let idx = l.index(i, j, k);
                if self.mask[idx] {
                    out.push((l.u.coord(j), l.v.coord(k), self.values[idx]));
                }
            }
        }
        out
    }

    pub fn masked_values(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|&(i, _)| self.mask[i])
            .map(|(i, &v)| (i, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn axis_spanning() {
        let a = Axis::spanning(-2.6, 2.6, 0.025);
        assert_eq!(a.n, 209);
        assert!((a.max() - 2.6).abs() < 1e-12);
        assert_eq!(a.nearest(0.0), 104);
        assert!(a.coord(104).abs() < 1e-12);
    }

    #[test]
    fn lattice_index_roundtrip() {
        let l = Lattice3 {
            t: Axis::spanning(0.0, 1.0, 0.25),
            u: Axis::spanning(-1.0, 1.0, 0.5),
            v: Axis::spanning(-1.0, 1.0, 0.25),
        };
        for idx in 0..l.len() {
            let (i, j, k) = l.split(idx);
            assert_eq!(l.index(i, j, k), idx);
        }
    }

    #[test]
    fn grid_masks_on_reference_nodes() {
        let d = HartogsDomain::default();
        let g = build_grid(&d, (0.0, 18.0), (-2.6, 2.6), 0.1, 0.05, 0.05).unwrap();
        let l = &g.lattice;
        let at = |t: f64, w: Complex64| l.nearest(t, w);
        assert!(g.interior[at(9.0, c(0.0, 0.0))]);
        let five = at(5.0, c(0.0, 0.0));
        assert!(!g.interior[five] && g.closure[five] && g.enlarged[five]);
        let far = at(17.9, c(0.0, 0.0));
        assert!(!g.interior[far] && !g.closure[far] && !g.enlarged[far]);
        // masks are nested
        for idx in 0..l.len() {
            assert!(!g.interior[idx] || g.closure[idx]);
            assert!(!g.closure[idx] || g.enlarged[idx]);
        }
        // the distance at 17.9 exceeds the distance to the last closure node on the axis
        assert!(g.closure_distance[far] >= 0.05);
    }

    #[test]
    fn invalid_ranges() {
        let d = HartogsDomain::default();
        assert!(matches!(
            build_grid(&d, (0.0, 10.0), (-2.6, 2.6), 0.1, 0.05, 0.05),
            Err(EnvelopeError::InvalidRange(_))
        ));
        assert!(matches!(
            build_grid(&d, (0.0, 18.0), (-2.6, 2.6), 0.1, 0.05, 0.5),
            Err(EnvelopeError::InvalidRange(_))
        ));
        assert!(matches!(
            build_grid(&d, (0.0, 18.0), (-2.6, 2.6), 0.0, 0.05, 0.05),
            Err(EnvelopeError::InvalidRange(_))
        ));
    }

    #[test]
    fn interpolation_reproduces_affine_fields() {
        let d = HartogsDomain::default();
        let g = build_grid(&d, (0.0, 18.0), (-2.6, 2.6), 0.1, 0.05, 0.05).unwrap();
        let f = GridField::from_fn(g.lattice, g.interior.clone(), |t, w| 2.0 * t - w.re + 3.0 * w.im);
        let (t, w) = (9.03, c(0.013, -0.021));
        let v = f.interpolate(t, w).unwrap();
        assert!((v - (2.0 * t - w.re + 3.0 * w.im)).abs() < 1e-12);
        assert!(f.interpolate(0.5, c(0.0, 0.0)).is_none());
    }
}
