//! Discrete Perron envelopes: the largest grid function below the given
//! bounds that satisfies the sub-mean-value inequality on every test disc
//! fitting inside the mask.

use std::f64::consts::TAU;
use std::ops::Range;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::edt::{squared_distance_to, squared_distance_to_in_slices};
use super::grid::{GridField, Lattice3};
use super::EnvelopeError;
use crate::psh_construction::{disc_directions, Direction};

/// Test discs: directions, radii in units of the lattice step along each
/// direction, and circle samples per disc.
///
/// A disc whose radius exceeds `wide_from` steps is only used when the
/// concentric disc `wide_clearance` times larger also fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscFamily {
    pub directions: Vec<Direction>,
    pub radii: Vec<f64>,
    pub n_circle: usize,
    pub wide_from: f64,
    pub wide_clearance: f64,
}

/// Radius multipliers used by default.
pub const DEFAULT_RADII: [f64; 7] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
pub const DEFAULT_CIRCLE_SAMPLES: usize = 16;
pub const DEFAULT_WIDE_FROM: f64 = 4.0;
pub const DEFAULT_WIDE_CLEARANCE: f64 = 1.5;

impl DiscFamily {
    /// The eight directions of `psh_construction`.
    pub fn standard(settings: &SolverSettings) -> Self {
        Self {
            directions: disc_directions(),
            radii: settings.radii.clone(),
            n_circle: settings.n_circle,
            wide_from: settings.wide_from,
            wide_clearance: settings.wide_clearance,
        }
    }

    /// Discs in the `w`-line only, for problems in one complex variable.
    pub fn planar(settings: &SolverSettings) -> Self {
        Self {
            directions: vec![(Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))],
            ..Self::standard(settings)
        }
    }

    /// Factor applied to radius number `r` when testing whether it fits.
    pub fn clearance(&self, r: usize) -> f64 {
        if self.radii[r] > self.wide_from {
            self.wide_clearance
        } else {
            1.0
        }
    }

    pub fn n_pairs(&self) -> usize {
        self.directions.len() * self.radii.len()
    }

    /// Radius in ambient units of pair `p` (direction-major).
    pub fn radius(&self, lattice: &Lattice3, p: usize) -> f64 {
        let dir = self.directions[p / self.radii.len()];
        self.radii[p % self.radii.len()] * unit_step(lattice, dir)
    }
}

fn unit_step(lattice: &Lattice3, dir: Direction) -> f64 {
    let [ht, hu, hv] = lattice.spacings();
    let hw = hu.max(hv);
    (dir.0.norm_sqr() * ht * ht + dir.1.norm_sqr() * hw * hw).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DirKind {
    Z,
    W,
    Mixed,
}

fn kind(dir: Direction) -> DirKind {
    if dir.1.norm_sqr() == 0.0 {
        DirKind::Z
    } else if dir.0.norm_sqr() == 0.0 {
        DirKind::W
    } else {
        DirKind::Mixed
    }
}

/// Solver settings shared by the envelope problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub radii: Vec<f64>,
    pub n_circle: usize,
    pub wide_from: f64,
    pub wide_clearance: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            radii: DEFAULT_RADII.to_vec(),
            n_circle: DEFAULT_CIRCLE_SAMPLES,
            wide_from: DEFAULT_WIDE_FROM,
            wide_clearance: DEFAULT_WIDE_CLEARANCE,
            tol: 1e-7,
            max_iters: 5000,
        }
    }
}

/// Domain mask, upper bound, obstacle and disc family of an envelope problem.
/// `upper` and `obstacle` are dense and `INFINITY` where absent.
#[derive(Debug, Clone)]
pub struct EnvelopeProblem {
    pub lattice: Lattice3,
    pub mask: Arc<[bool]>,
    pub upper: Vec<f64>,
    pub obstacle: Vec<f64>,
    pub family: DiscFamily,
    pub tol: f64,
    pub max_iters: usize,
}

impl EnvelopeProblem {
    pub fn validate(&self) -> Result<(), EnvelopeError> {
        let bad = |s: &str| Err(EnvelopeError::InvalidProblem(s.to_string()));
        let n = self.lattice.len();
        if self.mask.len() != n || self.upper.len() != n || self.obstacle.len() != n {
            return bad("mask and bound fields must match the lattice");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.family.n_pairs() == 0 || self.family.n_pairs() > 64 {
            return bad("the disc family must have between 1 and 64 (direction, radius) pairs");
        }
        if self.family.n_circle < 4 {
            return bad("at least 4 circle samples are required");
        }
        if self.family.radii.iter().any(|&r| !(r > 0.0)) {
            return bad("disc radii must be positive");
        }
        if self.family.radii.windows(2).any(|w| w[1] <= w[0]) {
            return bad("disc radii must be increasing");
        }
        if !(self.family.wide_clearance >= 1.0) {
            return bad("the clearance of wide discs must be at least 1");
        }
        for &dir in &self.family.directions {
            let norm = dir.0.norm_sqr() + dir.1.norm_sqr();
            if (norm - 1.0).abs() > 1e-12 {
                return bad("disc directions must be unit vectors");
            }
            if kind(dir) != DirKind::W && self.lattice.t.n < 2 {
                return bad("z-directions need a t-axis with at least two nodes");
            }
        }
        for idx in 0..n {
            if self.mask[idx] {
                let (u, o) = (self.upper[idx], self.obstacle[idx]);
                if !(u.min(o)).is_finite() {
                    return bad("every masked node needs a finite upper bound or obstacle");
                }
            }
        }
        Ok(())
    }

    /// Starting field `min(upper, obstacle)` on the mask.
    pub fn initial_field(&self) -> Vec<f64> {
        (0..self.lattice.len())
            .map(|i| {
                if self.mask[i] {
                    self.upper[i].min(self.obstacle[i])
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }
}

/// Precomputed active nodes, fitting discs and interpolation stencils.
pub struct SolvePlan {
    lattice: Lattice3,
    n_pairs: usize,
    active: Vec<u32>,
    slab_ranges: Vec<Range<usize>>,
    fits: Vec<u64>,
    bound: Vec<f64>,
    taps: Vec<(isize, f64)>,
    stencils: Vec<Range<usize>>,
}

impl SolvePlan {
    pub fn prepare(problem: &EnvelopeProblem) -> Result<Self, EnvelopeError> {
        problem.validate()?;
        let lattice = problem.lattice;
        let family = &problem.family;
        let n_pairs = family.n_pairs();
        let slab = lattice.slab();
        let active: Vec<u32> = (0..lattice.len())
            .filter(|&i| problem.mask[i])
            .map(|i| u32::try_from(i).expect("lattice index fits in u32"))
            .collect();
        let mut slab_ranges = vec![0..0; lattice.t.n];
        let mut a = 0;
        for (i, range) in slab_ranges.iter_mut().enumerate() {
            let start = a;
            while a < active.len() && (active[a] as usize) < (i + 1) * slab {
                a += 1;
            }
            *range = start..a;
        }
        let bound: Vec<f64> = active
            .iter()
            .map(|&i| problem.upper[i as usize].min(problem.obstacle[i as usize]))
            .collect();

        let st = build_stencils(&lattice, family);
        let fits = fit_masks(problem, &active, &st);
        let Stencils {
            offsets,
            weights,
            ranges: stencils,
            ..
        } = st;
        Ok(Self {
            lattice,
            n_pairs,
            active,
            slab_ranges,
            fits,
            bound,
            taps: offsets.into_iter().zip(weights).collect(),
            stencils,
        })
    }

    pub fn active_nodes(&self) -> usize {
        self.active.len()
    }

    /// Total number of fitting (node, disc) pairs.
    pub fn fitting_discs(&self) -> u64 {
        self.fits.iter().map(|b| b.count_ones() as u64).sum()
    }

    /// One Jacobi pass reading `prev` and writing `next`; returns the
    /// largest decrease.
    pub fn sweep(&self, prev: &[f64], next: &mut [f64]) -> f64 {
        let slab = self.lattice.slab();
        next.par_chunks_mut(slab)
            .enumerate()
            .map(|(i, out)| {
                let base = i * slab;
                let mut residual = 0.0f64;
                let stencils = &self.stencils[i * self.n_pairs..(i + 1) * self.n_pairs];
                for a in self.slab_ranges[i].clone() {
                    let idx = self.active[a] as usize;
                    let old = prev[idx];
                    let m = self.relax(a, stencils, prev);
                    debug_assert!(m <= old);
                    out[idx - base] = m;
                    residual = residual.max(old - m);
                }
                residual
            })
            .reduce(|| 0.0, f64::max)
    }
}

impl SolvePlan {
    #[inline]
    fn relax(&self, a: usize, stencils: &[Range<usize>], field: &[f64]) -> f64 {
        let idx = self.active[a] as usize;
        let mut m = field[idx].min(self.bound[a]);
        let mut bits = self.fits[a];
        while bits != 0 {
            let p = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let mut acc = 0.0;
            for &(off, w) in &self.taps[stencils[p].clone()] {
                acc += w * field[(idx as isize + off) as usize];
            }
            if acc < m {
                m = acc;
            }
        }
        m
    }

    /// One Gauss-Seidel pass updating `field` in place, in lattice order or
    /// in reverse; returns the largest decrease.
    pub fn sweep_in_place(&self, field: &mut [f64], reverse: bool) -> f64 {
        let mut residual = 0.0f64;
        let n_t = self.slab_ranges.len();
        for step in 0..n_t {
            let i = if reverse { n_t - 1 - step } else { step };
            let stencils = &self.stencils[i * self.n_pairs..(i + 1) * self.n_pairs];
            let range = self.slab_ranges[i].clone();
            let mut update = |a: usize| {
                let idx = self.active[a] as usize;
                let m = self.relax(a, stencils, field);
                debug_assert!(m <= field[idx]);
                residual = residual.max(field[idx] - m);
                field[idx] = m;
            };
            if reverse {
                range.rev().for_each(&mut update);
            } else {
                range.for_each(&mut update);
            }
        }
        residual
    }
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r
    } else {
        x
    }
}

/// Merged trilinear stencils of every (t-index, pair), flattened. `cells`
/// holds the `(t, u, v)` index offsets of each entry.
struct Stencils {
    offsets: Vec<isize>,
    weights: Vec<f64>,
    cells: Vec<[i32; 3]>,
    ranges: Vec<Range<usize>>,
}

fn build_stencils(lattice: &Lattice3, family: &DiscFamily) -> Stencils {
    let n_pairs = family.n_pairs();
    let slab = lattice.slab() as isize;
    let nv = lattice.v.n as isize;
    let [_, hu, hv] = lattice.spacings();
    let per_slice: Vec<Vec<(Vec<[i32; 3]>, Vec<f64>)>> = (0..lattice.t.n)
        .into_par_iter()
        .map(|i| {
            let t = lattice.t.coord(i);
            (0..n_pairs)
                .map(|p| {
                    let dir = family.directions[p / family.radii.len()];
                    let rho = family.radius(lattice, p);
                    let mut entries: Vec<([i32; 3], f64)> = Vec::with_capacity(8 * family.n_circle);
                    let n = family.n_circle;
                    for s in 0..n {
                        let e = Complex64::from_polar(rho, TAU * s as f64 / n as f64);
                        let tp = (Complex64::new(t, 0.0) + e * dir.0).norm();
                        let dw = e * dir.1;
                        let pt = lattice.t.position(tp);
                        let pu = snap(dw.re / hu);
                        let pv = snap(dw.im / hv);
                        let (ft, fu, fv) = (pt.floor(), pu.floor(), pv.floor());
                        let frac = [pt - ft, pu - fu, pv - fv];
                        let base = [ft as isize - i as isize, fu as isize, fv as isize];
                        for corner in 0..8 {
                            let mut wgt = 1.0 / n as f64;
                            let mut c = [0isize; 3];
                            for a in 0..3 {
                                let up = (corner >> a) & 1 == 1;
                                wgt *= if up { frac[a] } else { 1.0 - frac[a] };
                                c[a] = base[a] + up as isize;
                            }
                            if wgt != 0.0 {
                                entries.push(([c[0] as i32, c[1] as i32, c[2] as i32], wgt));
                            }
                        }
                    }
                    entries.sort_by_key(|e| e.0);
                    let mut offs: Vec<[i32; 3]> = Vec::with_capacity(entries.len());
                    let mut wts: Vec<f64> = Vec::with_capacity(entries.len());
                    for (o, w) in entries {
                        if offs.last() == Some(&o) {
                            *wts.last_mut().unwrap() += w;
                        } else {
                            offs.push(o);
                            wts.push(w);
                        }
                    }
                    (offs, wts)
                })
                .collect()
        })
        .collect();
    let mut offsets = Vec::new();
    let mut weights = Vec::new();
    let mut cells = Vec::new();
    let mut ranges = Vec::with_capacity(lattice.t.n * n_pairs);
    for slice in per_slice {
        for (c, w) in slice {
            let start = offsets.len();
            offsets.extend(c.iter().map(|c| c[0] as isize * slab + c[1] as isize * nv + c[2] as isize));
            cells.extend(c);
            weights.extend(w);
            ranges.push(start..offsets.len());
        }
    }
    Stencils {
        offsets,
        weights,
        cells,
        ranges,
    }
}

/// Bitmask of pairs whose disc, with all interpolation corners, stays on the mask.
fn fit_masks(problem: &EnvelopeProblem, active: &[u32], st: &Stencils) -> Vec<u64> {
    let lattice = problem.lattice;
    let family = &problem.family;
    let dims = lattice.dims();
    let [_, hu, hv] = lattice.spacings();
    let kinds: Vec<DirKind> = family.directions.iter().map(|&d| kind(d)).collect();
    let need_w = kinds.contains(&DirKind::W);
    let need_mixed = kinds.contains(&DirKind::Mixed);
    let need_z = kinds.contains(&DirKind::Z);

    let on_face = |idx: usize, axes: &[usize]| {
        let (i, j, k) = lattice.split(idx);
        let c = [i, j, k];
        axes.iter().any(|&a| c[a] == 0 || c[a] == dims[a] - 1)
    };
    let compact = |d: Vec<f64>| -> Vec<f64> { active.iter().map(|&i| d[i as usize].sqrt()).collect() };
    let dist_w = need_w.then(|| {
        let seed: Vec<bool> = (0..lattice.len())
            .map(|i| !problem.mask[i] || on_face(i, &[1, 2]))
            .collect();
        compact(squared_distance_to_in_slices(&seed, dims, lattice.spacings()))
    });
    let dist_3 = need_mixed.then(|| {
        let seed: Vec<bool> = (0..lattice.len())
            .map(|i| !problem.mask[i] || on_face(i, &[0, 1, 2]))
            .collect();
        compact(squared_distance_to(&seed, dims, lattice.spacings()))
    });
    // contiguous masked runs along t: [lo, hi] in t-indices
    let runs = need_z.then(|| {
        let mut lo = vec![0u32; lattice.len()];
        let mut hi = vec![0u32; lattice.len()];
        let slab = lattice.slab();
        for col in 0..slab {
            let mut i = 0;
            while i < dims[0] {
                if !problem.mask[i * slab + col] {
                    i += 1;
                    continue;
                }
                let start = i;
                while i < dims[0] && problem.mask[i * slab + col] {
                    i += 1;
                }
                for r in start..i {
                    lo[r * slab + col] = start as u32;
                    hi[r * slab + col] = (i - 1) as u32;
                }
            }
        }
        let lo: Vec<u32> = active.iter().map(|&i| lo[i as usize]).collect();
        let hi: Vec<u32> = active.iter().map(|&i| hi[i as usize]).collect();
        (lo, hi)
    });
    let w_slack = (hu * hu + hv * hv).sqrt();
    let diag_slack = lattice.diagonal();
    let n_radii = family.radii.len();
    let n_pairs = family.n_pairs();
    let corners_on_mask = |idx: usize, i: usize, p: usize| {
        let (_, j, k) = lattice.split(idx);
        let base = [i as i64, j as i64, k as i64];
        st.cells[st.ranges[i * n_pairs + p].clone()].iter().all(|c| {
            let q = [base[0] + c[0] as i64, base[1] + c[1] as i64, base[2] + c[2] as i64];
            (0..3).all(|a| q[a] >= 0 && q[a] < dims[a] as i64)
                && problem.mask[lattice.index(q[0] as usize, q[1] as usize, q[2] as usize)]
        })
    };
    // the filled disc must be on the mask; near the edge of that test the
    // circle samples' interpolation corners are checked one by one
    let fits_edt = |dist: f64, rho: f64, slack: f64, idx: usize, i: usize, p: usize| {
        dist > rho + slack || (dist > rho && corners_on_mask(idx, i, p))
    };
    (0..active.len())
        .into_par_iter()
        .map(|a| {
            let idx = active[a] as usize;
            let (i, _, _) = lattice.split(idx);
            let (t, _) = lattice.point(idx);
            let mut bits = 0u64;
            for (d, &kd) in kinds.iter().enumerate() {
                for r in 0..n_radii {
                    let p = d * n_radii + r;
                    let rho = family.radius(&lattice, p) * family.clearance(r);
                    let fits = match kd {
                        DirKind::Z => {
                            let (lo, hi) = runs.as_ref().unwrap();
                            let lo_t = if rho < t { t - rho } else { 0.0 };
                            let lo_i = lattice.t.position(lo_t).floor();
                            let hi_i = lattice.t.position(t + rho).ceil();
                            lo_i >= lo[a] as f64 && hi_i <= hi[a] as f64 && hi_i <= (dims[0] - 1) as f64
                        }
                        DirKind::W => fits_edt(dist_w.as_ref().unwrap()[a], rho, w_slack, idx, i, p),
                        DirKind::Mixed => fits_edt(dist_3.as_ref().unwrap()[a], rho, diag_slack, idx, i, p),
                    };
                    if fits {
                        bits |= 1 << p;
                    } else {
                        // larger radii of the same direction contain this disc
                        break;
                    }
                }
            }
            bits
        })
        .collect()
}

/// Result of an envelope solve.
#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    pub field: GridField,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
}

/// One Jacobi sub-mean projection of `field`: every masked node is replaced
/// by the minimum of its value, its bounds and its fitting circle averages.
pub fn psh_projection_step(
    field: &GridField,
    problem: &EnvelopeProblem,
) -> Result<(GridField, f64), EnvelopeError> {
    let plan = SolvePlan::prepare(problem)?;
    let mut next = field.values.clone();
    let residual = plan.sweep(&field.values, &mut next);
    Ok((
        GridField {
            lattice: field.lattice,
            mask: problem.mask.clone(),
            values: next,
        },
        residual,
    ))
}

/// Decreasing sub-mean iteration from `min(upper, obstacle)` until the
/// largest decrease of a sweep drops below `tol` or `max_iters` sweeps have
/// run. Sweeps update in place and alternate direction; every update is the
/// projection of [`psh_projection_step`] at one node.
pub fn perron_sweep(problem: &EnvelopeProblem) -> Result<EnvelopeResult, EnvelopeError> {
    perron_sweep_observed(problem, |_, _| {})
}

/// [`perron_sweep`] with a callback `(iteration, residual)` after every sweep.
pub fn perron_sweep_observed<F>(problem: &EnvelopeProblem, mut observe: F) -> Result<EnvelopeResult, EnvelopeError>
where
    F: FnMut(usize, f64),
{
    let plan = SolvePlan::prepare(problem)?;
    let mut prev = problem.initial_field();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < problem.max_iters {
        residual = plan.sweep_in_place(&mut prev, iterations % 2 == 1);
        iterations += 1;
        observe(iterations, residual);
        if residual < problem.tol {
            break;
        }
    }
    Ok(EnvelopeResult {
        field: GridField {
            lattice: problem.lattice,
            mask: problem.mask.clone(),
            values: prev,
        },
        iterations,
        final_residual: residual,
        converged: residual < problem.tol,
    })
}
