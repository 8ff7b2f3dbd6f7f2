//! Discrete upper envelopes of plurisubharmonic families on the symmetry
//! reduced grid `(|z|, Re w, Im w)`.
//!
//! Every constraint is invariant under rotations of `z`, so fields live on
//! three real coordinates. A test disc through the node `(t, w)` in the
//! direction `(a, b)` is sampled at `(|t + s a|, w + s b)`, `|s| = radius`.

mod diagnostics;
mod edt;
mod grid;
mod problems;
mod solver;

use thiserror::Error;

use crate::hartogs_domain::DomainError;

pub use diagnostics::{
    disc_oracle_comparison, disc_oracle_harmonic_measure, gap_report, nontangential_limsup, oracle_test_points,
    planar_arc_problem, summarize_result, usc_regularize, v_nodes, EnvelopeSummary, GapReport, OracleReport,
    OracleSample,
};
pub use edt::{squared_distance_to, squared_distance_to_in_slices};
pub use grid::{build_grid, Axis, Grid3, GridField, Lattice3, MaskKind, CLASSIFY_TOL};
pub use problems::{
    default_eta, discretized_witness, omega1_proxy_problem, omega2_problem, solve_omega1_proxy, solve_omega2,
    PROXY_ROOF,
};
pub use solver::{
    perron_sweep, perron_sweep_observed, psh_projection_step, DiscFamily, EnvelopeProblem, EnvelopeResult,
    SolvePlan, SolverSettings, DEFAULT_CIRCLE_SAMPLES, DEFAULT_RADII, DEFAULT_WIDE_CLEARANCE, DEFAULT_WIDE_FROM,
};

#[derive(Debug, Error)]
pub enum EnvelopeError {
    #[error("invalid grid range: {0}")]
    InvalidRange(String),
    #[error("invalid envelope problem: {0}")]
    InvalidProblem(String),
    #[error("collar width {eta} is below the grid diagonal {diagonal}")]
    CollarTooThin { eta: f64, diagonal: f64 },
    #[error("no grid node falls in any approach region")]
    NoNodesInRegion,
    #[error(transparent)]
    Domain(#[from] DomainError),
}
