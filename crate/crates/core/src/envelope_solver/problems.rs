use rayon::prelude::*;

use super::grid::{Grid3, GridField};
use super::solver::{perron_sweep_observed, DiscFamily, EnvelopeProblem, EnvelopeResult, SolverSettings};
use super::EnvelopeError;
use crate::hartogs_domain::HartogsDomain;
use crate::psh_construction::PshWitness;

/// Upper bound of the proxy problem off the closure.
pub const PROXY_ROOF: f64 = 8.0;

/// Default width of the collar around `K`: two cell diagonals.
pub fn default_eta(grid: &Grid3) -> f64 {
    2.0 * grid.lattice.diagonal()
}

fn k_collar(grid: &Grid3, domain: &HartogsDomain, eta: f64, mask: &[bool]) -> Vec<bool> {
    let l = grid.lattice;
    (0..l.len())
        .into_par_iter()
        .map(|idx| {
            mask[idx] && {
                let (t, w) = l.point(idx);
                domain.distance_to_k_reduced(t, w) <= eta
            }
        })
        .collect()
}

/// Envelope of `{u <= 0, u <= -1 near K}` on the interior mask.
pub fn omega2_problem(
    grid: &Grid3,
    domain: &HartogsDomain,
    eta: f64,
    settings: &SolverSettings,
) -> Result<EnvelopeProblem, EnvelopeError> {
    if eta < grid.lattice.diagonal() {
        return Err(EnvelopeError::CollarTooThin {
            eta,
            diagonal: grid.lattice.diagonal(),
        });
    }
    let mask = grid.interior.clone();
    let collar = k_collar(grid, domain, eta, &mask);
    let n = grid.lattice.len();
    Ok(EnvelopeProblem {
        lattice: grid.lattice,
        upper: (0..n).map(|i| if mask[i] { 0.0 } else { f64::INFINITY }).collect(),
        obstacle: collar.iter().map(|&c| if c { -1.0 } else { f64::INFINITY }).collect(),
        mask,
        family: DiscFamily::standard(settings),
        tol: settings.tol,
        max_iters: settings.max_iters,
    })
}

/// Envelope on the enlarged mask with `u <= epsilon` on the closure, `u <= 8`
/// elsewhere, and `u <= -1 + epsilon` near `K`.
pub fn omega1_proxy_problem(
    grid: &Grid3,
    domain: &HartogsDomain,
    epsilon: f64,
    delta: f64,
    eta: f64,
    settings: &SolverSettings,
) -> Result<EnvelopeProblem, EnvelopeError> {
    if !(epsilon > 0.0 && epsilon < 5.0 / 11.0) {
        return Err(EnvelopeError::InvalidProblem("epsilon must lie in (0, 5/11)".into()));
    }
    if (delta - grid.delta).abs() > 1e-15 {
        return Err(EnvelopeError::InvalidProblem(format!(
            "delta {delta} does not match the grid's enlarged mask ({})",
            grid.delta
        )));
    }
    if eta < grid.lattice.diagonal() {
        return Err(EnvelopeError::CollarTooThin {
            eta,
            diagonal: grid.lattice.diagonal(),
        });
    }
    let mask = grid.enlarged.clone();
    let collar = k_collar(grid, domain, eta, &mask);
    let n = grid.lattice.len();
    Ok(EnvelopeProblem {
        lattice: grid.lattice,
        upper: (0..n)
            .map(|i| {
                if !mask[i] {
                    f64::INFINITY
                } else if grid.closure[i] {
                    epsilon
                } else {
                    PROXY_ROOF
                }
            })
            .collect(),
        obstacle: collar
            .iter()
            .map(|&c| if c { -1.0 + epsilon } else { f64::INFINITY })
            .collect(),
        mask,
        family: DiscFamily::standard(settings),
        tol: settings.tol,
        max_iters: settings.max_iters,
    })
}

pub fn solve_omega2(
    grid: &Grid3,
    domain: &HartogsDomain,
    eta: f64,
    settings: &SolverSettings,
) -> Result<EnvelopeResult, EnvelopeError> {
    perron_sweep_observed(&omega2_problem(grid, domain, eta, settings)?, |_, _| {})
}

pub fn solve_omega1_proxy(
    grid: &Grid3,
    domain: &HartogsDomain,
    epsilon: f64,
    delta: f64,
    eta: f64,
    settings: &SolverSettings,
) -> Result<EnvelopeResult, EnvelopeError> {
    perron_sweep_observed(
        &omega1_proxy_problem(grid, domain, epsilon, delta, eta, settings)?,
        |_, _| {},
    )
}

/// The witness `g` sampled at the interior nodes.
pub fn discretized_witness(grid: &Grid3, domain: &HartogsDomain) -> GridField {
    let wit = PshWitness::new(domain);
    GridField::from_fn(grid.lattice, grid.interior.clone(), |t, w| {
        wit.eval_g(&crate::hartogs_domain::DomainPoint::reduced(t, w))
            .expect("g is defined on the interior")
    })
}
