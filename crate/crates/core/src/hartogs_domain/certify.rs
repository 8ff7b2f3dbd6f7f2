//! Sampled certification of every constraint the profiles must satisfy.
//!
//! Value constraints are checked on a uniform sample of `[0, 18]`. Strict
//! monotonicity and the strict off-peak bound need care: the blend step is
//! flat to all orders at the anchors, so close to an anchor the sampled
//! differences underflow to zero even though the curve is strictly monotone.
//! Those checks are therefore split in two parts:
//!
//! * a numeric part on samples whose local blend coordinate lies in
//!   `[RESOLVED_EDGE, 1 - RESOLVED_EDGE]` (peak bound: samples at least
//!   `PEAK_EXCLUSION` away from a peak), which yields the reported margin;
//! * a structural part for the excluded collars: every blend segment that
//!   meets the interval must move in the required direction. On the open
//!   segment the step is strictly increasing, so this certifies the collars.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::profile::{BlendCurve, RadialProfile, Segment};

pub const CERTIFY_T_RANGE: (f64, f64) = (0.0, 18.0);
/// Local blend coordinates closer than this to an anchor are certified structurally.
pub const RESOLVED_EDGE: f64 = 0.1;
/// Half-width of the neighborhoods of the peaks excluded from the numeric `r < 2` check.
pub const PEAK_EXCLUSION: f64 = 0.15;
/// Bound on sampled finite-difference derivatives of orders 1 to 3.
pub const DERIVATIVE_BOUND: f64 = 1e6;
/// Slack for equality constraints.
pub const EQUALITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// `margin > 0` required.
    Strict,
    /// `margin >= 0` required.
    NonStrict,
    /// `margin = -max |deviation|`, must be `>= -EQUALITY_TOL`.
    Equality,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub constraint_id: String,
    pub kind: ConstraintKind,
    pub margin: f64,
    pub worst_t: f64,
    pub pass: bool,
}

impl ConstraintCheck {
    pub fn new(constraint_id: impl Into<String>, kind: ConstraintKind, margin: f64, worst_t: f64) -> Self {
        let pass = match kind {
            ConstraintKind::Strict => margin > 0.0,
            ConstraintKind::NonStrict => margin >= 0.0,
            ConstraintKind::Equality => margin >= -EQUALITY_TOL,
        };
        Self {
            constraint_id: constraint_id.into(),
            kind,
            margin,
            worst_t,
            pass,
        }
    }

    fn with_structure(mut self, structural_ok: bool) -> Self {
        self.pass &= structural_ok;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub checks: Vec<ConstraintCheck>,
}

impl ConstraintReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, id: &str) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.constraint_id == id)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Smallest margin among strict constraints.
    pub fn min_strict_margin(&self) -> f64 {
        self.checks
            .iter()
            .filter(|c| c.kind == ConstraintKind::Strict)
            .map(|c| c.margin)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Running minimum of a margin with the sample where it occurred.
#[derive(Clone, Copy)]
struct Worst {
    margin: f64,
    t: f64,
}

impl Worst {
    fn new() -> Self {
        Self {
            margin: f64::INFINITY,
            t: f64::NAN,
        }
    }

    fn push(&mut self, margin: f64, t: f64) {
        if margin < self.margin || self.t.is_nan() {
            self.margin = margin.min(self.margin);
            self.t = t;
        }
    }
}

fn samples(step: f64, lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    let (a, b) = CERTIFY_T_RANGE;
    let n = ((b - a) / step).round() as usize;
    (0..=n).map(move |k| a + k as f64 * step).filter(move |&t| t >= lo && t <= hi)
}

/// `value(t) relation bound` over `[lo, hi]`, margin as `sign * (bound - value)`.
fn bound_check(
    id: &str,
    kind: ConstraintKind,
    step: f64,
    range: (f64, f64),
    open: bool,
    f: impl Fn(f64) -> f64,
) -> ConstraintCheck {
    let mut worst = Worst::new();
    for t in samples(step, range.0, range.1) {
        if open && (t == range.0 || t == range.1) {
            continue;
        }
        worst.push(f(t), t);
    }
    ConstraintCheck::new(id, kind, worst.margin, worst.t)
}

/// Whether every blend segment of `curve` meeting `(lo, hi)` has trend `sign`.
fn segments_trend(curve: &BlendCurve, lo: f64, hi: f64, sign: i8) -> bool {
    let anchors = curve.anchors();
    let mut touched = false;
    for i in 0..anchors.len().saturating_sub(1) {
        let (a, b) = (anchors[i].t, anchors[i + 1].t);
        if b <= lo || a >= hi {
            continue;
        }
        touched = true;
        if curve.segment_trend(i) != sign {
            return false;
        }
    }
    // an interval on a flat tail is not strictly monotone
    touched && lo >= anchors[0].t && hi <= anchors[anchors.len() - 1].t
}

fn monotone_check(id: &str, curve: &BlendCurve, step: f64, range: (f64, f64), sign: i8) -> ConstraintCheck {
    let mut worst = Worst::new();
    let (lo, hi) = range;
    for t in samples(step, lo, hi - step) {
        let u = t + step;
        let resolved = |s: f64| match curve.segment(s) {
            Segment::Blend { x, .. } => (RESOLVED_EDGE..=1.0 - RESOLVED_EDGE).contains(&x),
            Segment::Tail { .. } => false,
        };
        if !(resolved(t) && resolved(u)) {
            continue;
        }
        let quotient = f64::from(sign) * (curve.eval(u) - curve.eval(t)) / step;
        worst.push(quotient, t);
    }
    if worst.t.is_nan() {
        // nothing resolvable in the interval
        worst.margin = 0.0;
        worst.t = lo;
    }
    ConstraintCheck::new(id, ConstraintKind::Strict, worst.margin, worst.t)
        .with_structure(segments_trend(curve, lo, hi, sign))
}

fn peak_check(curve: &BlendCurve, step: f64, peaks: &[f64], peak_value: f64) -> ConstraintCheck {
    let mut worst = Worst::new();
    let (a, b) = CERTIFY_T_RANGE;
    for t in samples(step, a, b) {
        if peaks.iter().any(|p| (t - p).abs() < PEAK_EXCLUSION) {
            continue;
        }
        worst.push(peak_value - curve.eval(t), t);
    }
    // collars: each peak must be an anchor whose neighbours are strictly lower
    let anchors = curve.anchors();
    let structural = peaks.iter().all(|&p| {
        anchors.iter().position(|a| a.t == p).is_some_and(|i| {
            i > 0
                && i + 1 < anchors.len()
                && anchors[i - 1].value < peak_value
                && anchors[i + 1].value < peak_value
                && anchors[i - 1].t <= p - PEAK_EXCLUSION
                && anchors[i + 1].t >= p + PEAK_EXCLUSION
        })
    });
    ConstraintCheck::new("r_strict_max_off_peaks", ConstraintKind::Strict, worst.margin, worst.t)
        .with_structure(structural)
}

fn smoothness_check(id: &str, curve: &BlendCurve, step: f64) -> ConstraintCheck {
    let (a, b) = CERTIFY_T_RANGE;
    let mut worst = Worst::new();
    for t in samples(step, a, b - 3.0 * step) {
        let v: Vec<f64> = (0..4).map(|k| curve.eval(t + k as f64 * step)).collect();
        let d1 = (v[1] - v[0]) / step;
        let d2 = (v[2] - 2.0 * v[1] + v[0]) / (step * step);
        let d3 = (v[3] - 3.0 * v[2] + 3.0 * v[1] - v[0]) / (step * step * step);
        let m = d1.abs().max(d2.abs()).max(d3.abs());
        worst.push(DERIVATIVE_BOUND - m, t);
    }
    ConstraintCheck::new(id, ConstraintKind::Strict, worst.margin, worst.t)
}

/// Checks every profile constraint on a uniform sample of `[0, 18]`.
///
/// `step` must lie in `(0, 1e-3]`; failures are recorded, never raised.
pub fn certify_profiles(profile: &RadialProfile, step: f64) -> ConstraintReport {
    assert!(step > 0.0 && step <= 1e-3, "certification step must lie in (0, 1e-3]");
    use ConstraintKind::*;
    let r = |t: f64| profile.r(t);
    let phi = |t: f64| profile.phi(t);
    let full = CERTIFY_T_RANGE;
    let rc = profile.r_curve();
    let pc = profile.phi_curve();

    let mut checks = vec![
        bound_check("r_lower_bound", NonStrict, step, full, false, |t| r(t) + 1.0),
        bound_check("r_upper_bound", NonStrict, step, full, false, |t| 2.0 - r(t)),
        bound_check("r_nonpositive_t_le_1", NonStrict, step, (full.0, 1.0), false, |t| -r(t)),
        bound_check("r_nonpositive_t_ge_17", NonStrict, step, (17.0, full.1), false, |t| -r(t)),
        bound_check("r_plateau_3_8", Equality, step, (3.0, 8.0), false, |t| -(r(t) - 1.0).abs()),
        bound_check("r_plateau_10_15", Equality, step, (10.0, 15.0), false, |t| -(r(t) - 1.0).abs()),
    ];

    let peaks = [2.0, 9.0, 16.0];
    let peak_dev = peaks.iter().map(|&p| (r(p) - 2.0).abs()).fold(0.0, f64::max);
    let peak_at = peaks
        .iter()
        .copied()
        .max_by(|a, b| (r(*a) - 2.0).abs().total_cmp(&(r(*b) - 2.0).abs()))
        .unwrap_or(f64::NAN);
    checks.push(ConstraintCheck::new("r_peak_values", Equality, -peak_dev, peak_at));
    checks.push(peak_check(rc, step, &peaks, 2.0));

    for (id, range) in [
        ("r_increasing_1_2", (1.0, 2.0)),
        ("r_increasing_8_9", (8.0, 9.0)),
        ("r_increasing_15_16", (15.0, 16.0)),
    ] {
        checks.push(monotone_check(id, rc, step, range, 1));
    }
    for (id, range) in [
        ("r_decreasing_2_3", (2.0, 3.0)),
        ("r_decreasing_9_10", (9.0, 10.0)),
        ("r_decreasing_16_17", (16.0, 17.0)),
    ] {
        checks.push(monotone_check(id, rc, step, range, -1));
    }

    checks.extend([
        bound_check("phi_below_left", Strict, step, (full.0, 4.0), false, |t| -FRAC_PI_2 - phi(t)),
        bound_check("phi_below_right", Strict, step, (14.0, full.1), false, |t| -FRAC_PI_2 - phi(t)),
        bound_check("phi_above_5_6", Strict, step, (5.0, 6.0), false, |t| phi(t) - (FRAC_PI_2 + 100.0)),
        bound_check("phi_above_12_13", Strict, step, (12.0, 13.0), false, |t| {
            phi(t) - (FRAC_PI_2 + 100.0)
        }),
        bound_check("phi_below_7_10", Strict, step, (7.0, 10.0), true, |t| {
            (100.0 - FRAC_PI_2) - phi(t)
        }),
        // needed for the two pieces of f to agree on 10 < |z| < 11
        bound_check("phi_below_7_11", Strict, step, (7.0, 11.0), true, |t| {
            (100.0 - FRAC_PI_2) - phi(t)
        }),
        bound_check("phi_at_most_108", NonStrict, step, full, false, |t| 108.0 - phi(t)),
        // A = {w = 0, 2 <= |z| <= 16} lies in the closure iff r >= 1 there
        bound_check("annulus_in_closure", NonStrict, step, (2.0, 16.0), false, |t| r(t) - 1.0),
        smoothness_check("r_smooth", rc, step),
        smoothness_check("phi_smooth", pc, step),
    ]);

    ConstraintReport { checks }
}
