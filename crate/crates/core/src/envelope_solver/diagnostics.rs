use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{Axis, Grid3, GridField, Lattice3};
use super::solver::{perron_sweep, DiscFamily, EnvelopeProblem, EnvelopeResult, SolverSettings};
use super::EnvelopeError;
use crate::hartogs_domain::{DomainPoint, HartogsDomain};
use crate::psh_construction::{G_ON_V, G_ON_V_AS_PRINTED};

/// Node-wise maximum over the `(2 radius + 1)^3` box of masked neighbours.
pub fn usc_regularize(field: &GridField, radius: usize) -> GridField {
    let l = field.lattice;
    let [nt, nu, nv] = l.dims();
    let values = (0..l.len())
        .into_par_iter()
        .map(|idx| {
            if !field.mask[idx] {
                return f64::INFINITY;
            }
            let (i, j, k) = l.split(idx);
            let mut m = f64::NEG_INFINITY;
            for a in i.saturating_sub(radius)..=(i + radius).min(nt - 1) {
                for b in j.saturating_sub(radius)..=(j + radius).min(nu - 1) {
                    for c in k.saturating_sub(radius)..=(k + radius).min(nv - 1) {
                        let q = l.index(a, b, c);
                        if field.mask[q] {
                            m = m.max(field.values[q]);
                        }
                    }
                }
            }
            m
        })
        .collect();
    GridField {
        lattice: l,
        mask: field.mask.clone(),
        values,
    }
}

/// Largest value of `field` along approach regions `A_alpha(xi)`, taken on
/// the innermost shell around `xi` that still contains masked nodes.
pub fn nontangential_limsup(
    field: &GridField,
    domain: &HartogsDomain,
    xi: &DomainPoint,
    alphas: &[f64],
) -> Result<f64, EnvelopeError> {
    if alphas.is_empty() || alphas.iter().any(|&a| !(a >= 1.0)) {
        return Err(EnvelopeError::InvalidProblem("alphas must be a nonempty subset of [1, inf)".into()));
    }
    let l = field.lattice;
    let xi = DomainPoint::reduced(xi.t, xi.w);
    let outer = 16.0 * l.diagonal();
    let span = |axis: &Axis, x: f64| {
        let lo = axis.position(x - outer).floor().max(0.0) as usize;
        let hi = (axis.position(x + outer).ceil().max(0.0) as usize).min(axis.n - 1);
        lo..=hi
    };
    let mut nodes = Vec::new();
    for i in span(&l.t, xi.t) {
        for j in span(&l.u, xi.w.re) {
            for k in span(&l.v, xi.w.im) {
                let idx = l.index(i, j, k);
                if !field.mask[idx] {
                    continue;
                }
                let (t, w) = l.point(idx);
                let p = DomainPoint::reduced(t, w);
                let d = p.distance(&xi);
                if d <= outer && d > 0.0 {
                    nodes.push((p, d, field.values[idx]));
                }
            }
        }
    }
    let mut best: Option<f64> = None;
    for &alpha in alphas {
        let mut inside = Vec::new();
        for &(p, d, v) in &nodes {
            if domain.in_approach_region(&p, &xi, alpha)? {
                inside.push((d, v));
            }
        }
        let Some(closest) = inside.iter().map(|e| e.0).reduce(f64::min) else {
            continue;
        };
        // innermost dyadic shell radius that still holds a node
        let mut shell = outer;
        while shell / 2.0 >= closest {
            shell /= 2.0;
        }
        let m = inside
            .iter()
            .filter(|e| e.0 <= shell)
            .map(|e| e.1)
            .fold(f64::NEG_INFINITY, f64::max);
        best = Some(best.map_or(m, |b: f64| b.max(m)));
    }
    best.ok_or(EnvelopeError::NoNodesInRegion)
}

/// Minus the harmonic measure of the arc `[theta1, theta2]` of the unit
/// circle at `z0`, by the trapezoid rule on `n_quad` intervals.
pub fn disc_oracle_harmonic_measure(z0: Complex64, arc: (f64, f64), n_quad: usize) -> f64 {
    assert!(z0.norm() < 1.0, "z0 must lie in the open unit disc");
    assert!(n_quad >= 256, "n_quad must be at least 256");
    let (a, b) = arc;
    let h = (b - a) / n_quad as f64;
    let poisson = |theta: f64| (1.0 - z0.norm_sqr()) / (Complex64::from_polar(1.0, theta) - z0).norm_sqr();
    let mut sum = 0.5 * (poisson(a) + poisson(b));
    for k in 1..n_quad {
        sum += poisson(a + k as f64 * h);
    }
    -sum * h / TAU
}

fn on_arc(w: Complex64, arc: (f64, f64)) -> bool {
    let theta = w.arg();
    arc.1 - arc.0 >= TAU
        || (-1..=1).any(|k| {
            let x = theta + TAU * k as f64;
            x >= arc.0 && x <= arc.1
        })
}

/// The unit disc on an `n x n` lattice over `[-1, 1]^2`, upper bound 0 and
/// obstacle `-1` on the nodes with `|w| >= 1 - eta` and argument in the arc.
pub fn planar_arc_problem(n: usize, arc: (f64, f64), eta: f64, settings: &SolverSettings) -> EnvelopeProblem {
    let h = 2.0 / (n - 1) as f64;
    let lattice = Lattice3 {
        t: Axis { min: 0.0, spacing: 1.0, n: 1 },
        u: Axis { min: -1.0, spacing: h, n },
        v: Axis { min: -1.0, spacing: h, n },
    };
    let mask: Arc<[bool]> = (0..lattice.len())
        .map(|i| lattice.point(i).1.norm() < 1.0 - 1e-12)
        .collect::<Vec<_>>()
        .into();
    let obstacle = (0..lattice.len())
        .map(|i| {
            let w = lattice.point(i).1;
            if mask[i] && w.norm() >= 1.0 - eta && on_arc(w, arc) {
                -1.0
            } else {
                f64::INFINITY
            }
        })
        .collect();
    EnvelopeProblem {
        lattice,
        upper: (0..lattice.len()).map(|i| if mask[i] { 0.0 } else { f64::INFINITY }).collect(),
        obstacle,
        mask,
        family: DiscFamily::planar(settings),
        tol: settings.tol,
        max_iters: settings.max_iters,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSample {
    pub z0: Complex64,
    pub solver: f64,
    pub oracle: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n: usize,
    pub arc: (f64, f64),
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    pub samples: Vec<OracleSample>,
    pub max_error: f64,
}

/// Ten lattice points spread over the disc, used to compare with the oracle.
pub fn oracle_test_points() -> Vec<Complex64> {
    let c = Complex64::new;
    vec![
        c(0.0, 0.0),
        c(0.5, 0.0),
        c(-0.5, 0.0),
        c(0.0, 0.5),
        c(0.0, -0.5),
        c(0.3, 0.3),
        c(-0.4, 0.2),
        c(0.7, -0.1),
        c(-0.2, -0.7),
        c(0.1, 0.8),
    ]
}

/// Solves the planar arc problem and compares with the Poisson integral.
pub fn disc_oracle_comparison(
    n: usize,
    arc: (f64, f64),
    settings: &SolverSettings,
) -> Result<OracleReport, EnvelopeError> {
    let h = 2.0 / (n - 1) as f64;
    let problem = planar_arc_problem(n, arc, h * 2f64.sqrt(), settings);
    let result = perron_sweep(&problem)?;
    let samples: Vec<OracleSample> = oracle_test_points()
        .into_iter()
        .map(|z0| {
            let solver = result.field.at_node(0.0, z0).expect("test points lie in the disc");
            let oracle = disc_oracle_harmonic_measure(z0, arc, 4096);
            OracleSample {
                z0,
                solver,
                oracle,
                error: (solver - oracle).abs(),
            }
        })
        .collect();
    let max_error = samples.iter().map(|s| s.error).fold(0.0, f64::max);
    Ok(OracleReport {
        n,
        arc,
        iterations: result.iterations,
        final_residual: result.final_residual,
        converged: result.converged,
        samples,
        max_error,
    })
}

/// Key numbers of an envelope solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSummary {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub value_at_t9_w0: f64,
    pub min_over_v: Option<f64>,
    pub max_over_v: Option<f64>,
    pub v_nodes: usize,
    pub active_nodes: usize,
}

/// Interior nodes of the grid that lie in `V`.
pub fn v_nodes(grid: &Grid3, domain: &HartogsDomain, delta: f64) -> Vec<usize> {
    (0..grid.lattice.len())
        .filter(|&i| grid.interior[i] && {
            let (t, w) = grid.lattice.point(i);
            domain.in_v_reduced(t, w, delta)
        })
        .collect()
}

pub fn summarize_result(result: &EnvelopeResult, grid: &Grid3, domain: &HartogsDomain, delta: f64) -> EnvelopeSummary {
    let v = v_nodes(grid, domain, delta);
    let vals: Vec<f64> = v.iter().map(|&i| result.field.values[i]).collect();
    EnvelopeSummary {
        iterations: result.iterations,
        residual: result.final_residual,
        converged: result.converged,
        value_at_t9_w0: result.field.at_node(9.0, Complex64::new(0.0, 0.0)).unwrap_or(f64::NAN),
        min_over_v: vals.iter().copied().reduce(f64::min),
        max_over_v: vals.iter().copied().reduce(f64::max),
        v_nodes: v.len(),
        active_nodes: result.field.mask.iter().filter(|&&b| b).count(),
    }
}

/// Separation of the two envelopes on `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub delta: f64,
    pub epsilon: f64,
    pub v_nodes: usize,
    pub no_nodes_in_v: bool,
    pub omega1_proxy_at_t9_w0: f64,
    pub omega2_at_t9_w0: f64,
    pub omega1_proxy_max_over_v: f64,
    pub omega2_min_over_v: f64,
    /// `min over V of (omega2 - omega1_proxy)`.
    pub min_gap: f64,
    /// `min over V of (omega2 - (omega1_proxy + epsilon))`: the proxy plus
    /// `epsilon` bounds every member of the first family from above.
    pub separation_margin: f64,
    pub omega1_bound: f64,
    pub omega2_bound: f64,
    pub omega2_bound_as_printed: f64,
    pub theoretical_margin: f64,
    pub omega1_converged: bool,
    pub omega2_converged: bool,
    pub pass: bool,
}

pub fn gap_report(
    r1: &EnvelopeResult,
    r2: &EnvelopeResult,
    grid: &Grid3,
    domain: &HartogsDomain,
    delta: f64,
    epsilon: f64,
) -> GapReport {
    let v = v_nodes(grid, domain, delta);
    let at9 = |r: &EnvelopeResult| r.field.at_node(9.0, Complex64::new(0.0, 0.0)).unwrap_or(f64::NAN);
    let mut o1_max = f64::NEG_INFINITY;
    let mut o2_min = f64::INFINITY;
    let mut gap = f64::INFINITY;
    for &i in &v {
        let (a, b) = (r1.field.values[i], r2.field.values[i]);
        o1_max = o1_max.max(a);
        o2_min = o2_min.min(b);
        gap = gap.min(b - a);
    }
    let margin = gap - epsilon;
    let no_nodes = v.is_empty();
    GapReport {
        delta,
        epsilon,
        v_nodes: v.len(),
        no_nodes_in_v: no_nodes,
        omega1_proxy_at_t9_w0: at9(r1),
        omega2_at_t9_w0: at9(r2),
        omega1_proxy_max_over_v: o1_max,
        omega2_min_over_v: o2_min,
        min_gap: gap,
        separation_margin: margin,
        omega1_bound: -1.0 + 2.0 * epsilon,
        omega2_bound: G_ON_V,
        omega2_bound_as_printed: G_ON_V_AS_PRINTED,
        theoretical_margin: G_ON_V - (-1.0 + 2.0 * epsilon),
        omega1_converged: r1.converged,
        omega2_converged: r2.converged,
        pass: !no_nodes && margin > 0.0 && r1.converged && r2.converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;
    use approx::assert_abs_diff_eq;

    #[test]
    fn oracle_reference_values() {
        let c0 = Complex64::new(0.0, 0.0);
        assert_abs_diff_eq!(disc_oracle_harmonic_measure(c0, (0.0, PI), 512), -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(disc_oracle_harmonic_measure(c0, (0.0, TAU), 512), -1.0, epsilon = 1e-12);
        let z = Complex64::new(0.5, 0.0);
        let quarter = (-PI / 4.0, PI / 4.0);
        let v = disc_oracle_harmonic_measure(z, quarter, 1024);
        let fine = disc_oracle_harmonic_measure(z, quarter, 4096);
        assert!(v > -1.0 && v < 0.0);
        assert_abs_diff_eq!(v, fine, epsilon = 1e-6);
        // closed form: the harmonic measure of an arc seen from z is
        // (angle subtended at z) / pi - (arc length) / (2 pi)
        let e1 = Complex64::from_polar(1.0, quarter.0);
        let e2 = Complex64::from_polar(1.0, quarter.1);
        let subtended = ((e2 - z) / (e1 - z)).arg();
        assert_abs_diff_eq!(-v, subtended / PI - 0.25, epsilon = 1e-6);
    }

    #[test]
    fn usc_erases_a_dip() {
        let l = Lattice3 {
            t: Axis { min: 0.0, spacing: 1.0, n: 3 },
            u: Axis { min: 0.0, spacing: 1.0, n: 3 },
            v: Axis { min: 0.0, spacing: 1.0, n: 3 },
        };
        let mask: Arc<[bool]> = vec![true; 27].into();
        let mut f = GridField::from_fn(l, mask, |_, _| 2.0);
        assert_eq!(usc_regularize(&f, 1), f);
        f.values[13] = -5.0;
        let g = usc_regularize(&f, 1);
        assert!(g.values.iter().all(|&v| v == 2.0));
    }

    #[test]
    fn usc_twice_equals_radius_two() {
        let l = Lattice3 {
            t: Axis { min: 0.0, spacing: 1.0, n: 7 },
            u: Axis { min: 0.0, spacing: 1.0, n: 6 },
            v: Axis { min: 0.0, spacing: 1.0, n: 5 },
        };
        let mask: Arc<[bool]> = vec![true; l.len()].into();
        let f = GridField::from_fn(l, mask, |t, w| (3.0 * t + 7.0 * w.re - 5.0 * w.im).sin());
        let once = usc_regularize(&f, 1);
        assert!(once.values.iter().zip(&f.values).all(|(a, b)| a >= b));
        assert_eq!(usc_regularize(&once, 1), usc_regularize(&f, 2));
    }

    #[test]
    fn arc_membership_wraps() {
        let arc = (-PI / 4.0, PI / 2.0);
        assert!(on_arc(Complex64::new(0.9, 0.1), arc));
        assert!(on_arc(Complex64::new(0.5, -0.4), arc));
        assert!(!on_arc(Complex64::new(-1.0, 0.0), arc));
        assert!(on_arc(Complex64::new(1.0, -1.0), (3.0 * PI / 2.0, 2.0 * PI)));
        assert!(on_arc(Complex64::new(-1.0, 0.0), (0.0, TAU)));
    }
}
