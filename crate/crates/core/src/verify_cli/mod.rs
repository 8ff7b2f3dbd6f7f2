//! The verification pipeline: profile certification, witness checks, the two
//! envelope solves and the gap report, with JSON and CSV outputs.
//!
//! Exit codes: 0 all checks pass, 1 runtime or configuration error,
//! 2 certification failure, 3 solver non-convergence, 4 separation failure,
//! 5 witness or plurisubharmonicity failure.

mod config;
mod export;
mod pipeline;
mod summary;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::envelope_solver::EnvelopeError;

pub use config::{PipelineConfig, Stage};
pub use export::{export_slice, field_file, read_field, write_field, SliceFormat, SlicePlane};
pub use pipeline::{
    annulus_check, annulus_mask_check, run_pipeline, run_pipeline_logged, AnnulusCheck, AnnulusMaskCheck,
    CertifyStageReport, GridInfo, Omega1StageReport, Omega2StageReport, PipelineOutcome, StageOutcome,
    WitnessDomination, ANNULUS_TOL, BOUND_SLACK, EXIT_CERTIFICATION, EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK,
    EXIT_SEPARATION, EXIT_WITNESS, TIMINGS_FILE,
};
pub use summary::summarize;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown result {0:?}; run the stage that produces it first")]
    UnknownResult(String),
    #[error("{0} is not a valid field file")]
    CorruptResult(PathBuf),
    #[error("stage {0} failed: {1}")]
    Stage(Stage, String),
    #[error(transparent)]
    Envelope(#[from] EnvelopeError),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
