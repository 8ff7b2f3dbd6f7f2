//! The branch `h` of `arg w`, the piecewise function `f` and the witness `g`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PshError;
use crate::hartogs_domain::{ConstraintCheck, ConstraintKind, ConstraintReport, DomainPoint, HartogsDomain};

/// Upper bound of `f`; the witness is `(f - F_MAX) / F_MAX`.
pub const F_MAX: f64 = 110.0;
/// Value of `f` on the middle shell `7 < |z| < 11`.
pub const F_MIDDLE: f64 = 100.0;
/// Agreement required between overlapping pieces of `f`.
pub const PIECE_TOL: f64 = 1e-9;
/// `g` on `V` as given by `(f - 110) / 110` with `f = 100`.
pub const G_ON_V: f64 = (F_MIDDLE - F_MAX) / F_MAX;
/// The constant printed in the original argument for `g` on `V`.
pub const G_ON_V_AS_PRINTED: f64 = -10.0 / 11.0;

/// The two shells carrying a continuous branch of `arg w` (open intervals in `|z|`).
pub const BRANCH_SHELLS: [(f64, f64); 2] = [(3.0, 8.0), (10.0, 15.0)];

/// `|z|`-values where the piece structure of `f` changes.
pub const PIECE_BREAKS: [f64; 11] = [3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 10.0, 11.0, 12.0, 13.0, 14.0];

/// The six places where two pieces of `f` meet, as `(a, b, first, second)`.
/// The first five are open shells `a < |z| < b`. On `13 < |z| < 14` only
/// `max{0, h}` applies, so the last entry is checked on the closing circle
/// `|z| = 14` where it meets the zero piece.
pub const OVERLAPS: [(f64, f64, Piece, Piece); 6] = [
    (3.0, 4.0, Piece::Zero, Piece::MaxZeroBranch),
    (5.0, 6.0, Piece::MaxZeroBranch, Piece::MaxHundredBranch),
    (7.0, 8.0, Piece::MaxHundredBranch, Piece::Hundred),
    (10.0, 11.0, Piece::Hundred, Piece::MaxHundredBranch),
    (12.0, 13.0, Piece::MaxHundredBranch, Piece::MaxZeroBranch),
    (13.0, 14.0, Piece::MaxZeroBranch, Piece::Zero),
];

/// The `|z|`-range sampled for an overlap entry.
fn overlap_t_range(a: f64, b: f64) -> (f64, f64) {
    if (a, b) == (13.0, 14.0) {
        (14.0, 14.0)
    } else {
        (a, b)
    }
}

/// Representative of `arg w` in `[phi(|z|) - pi/2, phi(|z|) + pi/2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchValue {
    pub theta: f64,
}

pub fn in_branch_region(t: f64) -> bool {
    BRANCH_SHELLS.iter().any(|&(a, b)| t > a && t < b)
}

/// The continuous branch of `arg w` on the two shells.
pub fn branch_arg(domain: &HartogsDomain, p: &DomainPoint) -> Result<BranchValue, PshError> {
    if !in_branch_region(p.t) {
        return Err(PshError::OutsideBranchRegion { t: p.t });
    }
    let phi = domain.profile().phi(p.t);
    if p.w == Complex64::new(0.0, 0.0) {
        return Err(PshError::NoRepresentative { t: p.t });
    }
    let rel = (p.w * Complex64::from_polar(1.0, -phi)).arg();
    if rel.abs() > FRAC_PI_2 {
        return Err(PshError::NoRepresentative { t: p.t });
    }
    Ok(BranchValue { theta: phi + rel })
}

/// One line of the piecewise definition of `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Piece {
    /// `0` on `|z| < 4` and `|z| >= 14`.
    Zero,
    /// `max{0, h}` on `3 < |z| < 6` and `12 < |z| < 14`.
    MaxZeroBranch,
    /// `max{100, h}` on `5 < |z| < 8` and `10 < |z| < 13`.
    MaxHundredBranch,
    /// `100` on `7 < |z| < 11`.
    Hundred,
}

impl Piece {
    /// The pieces whose region contains `t`. `|z| = 14` is assigned to the
    /// zero piece, which is how `f` is continued onto `{|z| >= 14}`.
    pub fn covering(t: f64) -> Vec<Piece> {
        let mut out = Vec::with_capacity(2);
        if t < 4.0 || t >= 14.0 {
            out.push(Piece::Zero);
        }
        if (t > 3.0 && t < 6.0) || (t > 12.0 && t < 14.0) {
            out.push(Piece::MaxZeroBranch);
        }
        if (t > 5.0 && t < 8.0) || (t > 10.0 && t < 13.0) {
            out.push(Piece::MaxHundredBranch);
        }
        if t > 7.0 && t < 11.0 {
            out.push(Piece::Hundred);
        }
        out
    }
}

/// `f` and `g` on a fixed domain.
#[derive(Debug, Clone, Copy)]
pub struct PshWitness<'a> {
    domain: &'a HartogsDomain,
}

impl<'a> PshWitness<'a> {
    pub fn new(domain: &'a HartogsDomain) -> Self {
        Self { domain }
    }

    pub fn domain(&self) -> &'a HartogsDomain {
        self.domain
    }

    pub fn branch(&self, p: &DomainPoint) -> Result<BranchValue, PshError> {
        branch_arg(self.domain, p)
    }

    pub fn eval_piece(&self, piece: Piece, p: &DomainPoint) -> Result<f64, PshError> {
        Ok(match piece {
            Piece::Zero => 0.0,
            Piece::Hundred => F_MIDDLE,
            Piece::MaxZeroBranch => self.branch(p)?.theta.max(0.0),
            Piece::MaxHundredBranch => self.branch(p)?.theta.max(F_MIDDLE),
        })
    }

    /// Evaluates `f`; where two pieces overlap both are evaluated and compared.
    pub fn eval_f(&self, p: &DomainPoint) -> Result<f64, PshError> {
        let pieces = Piece::covering(p.t);
        let first = self.eval_piece(pieces[0], p)?;
        for &piece in &pieces[1..] {
            let other = self.eval_piece(piece, p)?;
            let disagreement = (other - first).abs();
            if disagreement > PIECE_TOL {
                return Err(PshError::PieceMismatch { t: p.t, disagreement });
            }
        }
        Ok(first)
    }

    pub fn eval_g(&self, p: &DomainPoint) -> Result<f64, PshError> {
        Ok((self.eval_f(p)? - F_MAX) / F_MAX)
    }
}

/// Uniform sample from the fiber disc over `|z| = t` (scaled by `shrink`),
/// with a random rotation of `z`. Returns `None` if the fiber is empty.
pub fn sample_fiber_point<R: Rng>(
    domain: &HartogsDomain,
    t: f64,
    shrink: f64,
    rng: &mut R,
) -> Option<DomainPoint> {
    let r = domain.profile().r(t);
    if r <= 0.0 {
        return None;
    }
    let radius = r.sqrt() * shrink * rng.gen::<f64>().sqrt();
    let w = domain.fiber_center(t) + Complex64::from_polar(radius, rng.gen_range(0.0..std::f64::consts::TAU));
    let z = Complex64::from_polar(t, rng.gen_range(0.0..std::f64::consts::TAU));
    let p = DomainPoint::new(z, w);
    (domain.rho(&p) < 0.0).then_some(p)
}

/// Uniform sample of the domain restricted to `t_range`.
pub fn sample_interior<R: Rng>(domain: &HartogsDomain, t_range: (f64, f64), rng: &mut R) -> DomainPoint {
    loop {
        let t = rng.gen_range(t_range.0..t_range.1);
        // accept proportional to fiber area so that samples are uniform in volume
        let r = domain.profile().r(t);
        if r <= 0.0 || rng.gen::<f64>() * 2.0 > r {
            continue;
        }
        if let Some(p) = sample_fiber_point(domain, t, 1.0, rng) {
            return p;
        }
    }
}

/// Deterministic per-chunk generator for parallel sampling.
pub(crate) fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ chunk.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub(crate) const SAMPLE_CHUNK: usize = 256;

/// Samples each overlap annulus and reports the largest disagreement between
/// the two pieces of `f` that apply there.
pub fn overlap_consistency(domain: &HartogsDomain, n_samples: usize, seed: u64) -> ConstraintReport {
    assert!(n_samples >= 100, "overlap_consistency needs at least 100 samples per annulus");
    let witness = PshWitness::new(domain);
    let checks = OVERLAPS
        .iter()
        .enumerate()
        .map(|(k, &(a, b, first, second))| {
            let (lo, hi) = overlap_t_range(a, b);
            let n_chunks = n_samples.div_ceil(SAMPLE_CHUNK);
            let (worst, worst_t) = (0..n_chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = chunk_rng(seed.wrapping_add(k as u64 * 1_000_003), c as u64);
                    let count = SAMPLE_CHUNK.min(n_samples - c * SAMPLE_CHUNK);
                    let mut worst = (-1.0f64, lo);
                    let mut done = 0;
                    while done < count {
                        let t = if lo == hi { lo } else { rng.gen_range(lo..hi) };
                        if lo < hi && t <= lo {
                            continue;
                        }
                        let Some(p) = sample_fiber_point(domain, t, 1.0, &mut rng) else {
                            continue;
                        };
                        let d = match (witness.eval_piece(first, &p), witness.eval_piece(second, &p)) {
                            (Ok(x), Ok(y)) => (x - y).abs(),
                            _ => f64::INFINITY,
                        };
                        if d > worst.0 {
                            worst = (d, t);
                        }
                        done += 1;
                    }
                    worst
                })
                .reduce(|| (-1.0, lo), |x, y| if y.0 > x.0 { y } else { x });
            let id = format!("overlap_{}_{}", a as u32, b as u32);
            ConstraintCheck::new(id, ConstraintKind::NonStrict, PIECE_TOL - worst, worst_t)
        })
        .collect();
    ConstraintReport { checks }
}
