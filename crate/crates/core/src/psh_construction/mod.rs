//! The witness function and numerical plurisubharmonicity testers.
//!
//! On the shells `3 < |z| < 8` and `10 < |z| < 15` the fiber discs avoid
//! `w = 0`, so `arg w` has a continuous branch `h` pinned near `phi(|z|)`.
//! Gluing `0`, `max{0, h}`, `max{100, h}` and `100` over overlapping shells
//! gives a plurisubharmonic `f` with `0 <= f <= 110`, and `g = (f - 110)/110`
//! is the witness for the lower bound on `V`.

mod report;
mod tester;
mod witness;

use thiserror::Error;

pub use report::{psh_stage, witness_report, PshStageReport, SampledBound, WitnessReport, WITNESS_TOL};
pub use tester::{
    disc_directions, disc_fits, levi_min_eig, submean_defect, Direction, Everywhere, PshBatteryConfig,
    PshBatteryReport, PshTestReport, Region, WitnessFunction,
};
pub use witness::{
    branch_arg, in_branch_region, overlap_consistency, sample_fiber_point, sample_interior, BranchValue,
    Piece, PshWitness, BRANCH_SHELLS, F_MAX, F_MIDDLE, G_ON_V, G_ON_V_AS_PRINTED, OVERLAPS, PIECE_BREAKS,
    PIECE_TOL,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PshError {
    #[error("no branch of arg w is defined at |z| = {t}")]
    OutsideBranchRegion { t: f64 },
    #[error("arg w has no representative within pi/2 of phi(|z|) at |z| = {t}; the point is not in the domain")]
    NoRepresentative { t: f64 },
    #[error("overlapping pieces of f disagree by {disagreement:e} at |z| = {t}")]
    PieceMismatch { t: f64, disagreement: f64 },
    #[error("finite-difference stencil of step {step} at |z| = {t} leaves the domain")]
    StencilOutsideDomain { t: f64, step: f64 },
    #[error("test disc of radius {radius} at |z| = {t} leaves the domain")]
    DiscOutsideDomain { t: f64, radius: f64 },
    #[error("disc direction is the zero vector")]
    ZeroDirection,
}
