use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::envelope_solver::SolverSettings;

/// Pipeline stages, in the order they run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Certify,
    Psh,
    Witness,
    Omega2,
    Omega1,
    Gap,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Certify,
        Stage::Psh,
        Stage::Witness,
        Stage::Omega2,
        Stage::Omega1,
        Stage::Gap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Certify => "certify",
            Stage::Psh => "psh",
            Stage::Witness => "witness",
            Stage::Omega2 => "omega2",
            Stage::Omega1 => "omega1",
            Stage::Gap => "gap",
        }
    }

    /// Report file written by the stage.
    pub fn report_file(self) -> &'static str {
        match self {
            Stage::Certify => "certify.json",
            Stage::Psh => "psh.json",
            Stage::Witness => "witness.json",
            Stage::Omega2 => "omega2_summary.json",
            Stage::Omega1 => "omega1_summary.json",
            Stage::Gap => "gap.json",
        }
    }

    fn requires(self) -> &'static [Stage] {
        match self {
            Stage::Certify => &[],
            Stage::Gap => &[Stage::Certify, Stage::Omega2, Stage::Omega1],
            _ => &[Stage::Certify],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| CliError::InvalidConfig(format!("unknown stage {s:?}")))
    }
}

/// Everything a pipeline run depends on. Missing JSON fields take the
/// defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub delta: f64,
    pub epsilon: f64,
    pub spacing_t: f64,
    pub spacing_w: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub stages: Vec<Stage>,
    /// JSON anchor table replacing the reference profiles.
    pub profile_file: Option<PathBuf>,
    pub certify_step: f64,
    pub overlap_samples: usize,
    pub witness_samples: usize,
    pub psh_points: usize,
    /// Base radius of the plurisubharmonicity battery; discs of 1, 2 and 4
    /// times this radius are tested.
    pub psh_radius: f64,
    pub solver: SolverSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            delta: 0.05,
            epsilon: 0.1,
            spacing_t: 0.1,
            spacing_w: 0.05,
            seed: 0,
            output_dir: PathBuf::from("plurex-out"),
            stages: Stage::ALL.to_vec(),
            profile_file: None,
            certify_step: 1e-3,
            overlap_samples: 10_000,
            witness_samples: 10_000,
            psh_points: 10_000,
            psh_radius: 0.025,
            solver: SolverSettings::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |s: String| Err(CliError::InvalidConfig(s));
        if !(self.delta > 0.0 && self.delta <= 0.1) {
            return bad(format!("delta = {} must lie in (0, 0.1]", self.delta));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 5.0 / 11.0) {
            return bad(format!("epsilon = {} must lie in (0, 5/11)", self.epsilon));
        }
        for (name, h) in [("spacing_t", self.spacing_t), ("spacing_w", self.spacing_w)] {
            if !(h > 0.0 && h.is_finite()) {
                return bad(format!("{name} = {h} must be positive"));
            }
        }
        if !(self.certify_step > 0.0 && self.certify_step <= 0.1) {
            return bad(format!("certify_step = {} must lie in (0, 0.1]", self.certify_step));
        }
        if !(self.psh_radius > 0.0 && self.psh_radius <= 0.1) {
            return bad(format!("psh_radius = {} must lie in (0, 0.1]", self.psh_radius));
        }
        if self.overlap_samples == 0 || self.witness_samples == 0 || self.psh_points == 0 {
            return bad("sample counts must be positive".into());
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iters == 0 {
            return bad("solver tol and max_iters must be positive".into());
        }
        if self.stages.is_empty() {
            return bad("no stages requested".into());
        }
        Ok(())
    }

    /// Requested stages plus their prerequisites, in run order.
    pub fn resolved_stages(&self) -> Vec<Stage> {
        let mut out: Vec<Stage> = Vec::new();
        for &s in &self.stages {
            out.push(s);
            out.extend_from_slice(s.requires());
        }
        out.sort();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_complete() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!(c.resolved_stages(), Stage::ALL.to_vec());
    }

    #[test]
    fn gap_pulls_in_both_solves() {
        let c = PipelineConfig {
            stages: vec![Stage::Gap],
            ..PipelineConfig::default()
        };
        assert_eq!(
            c.resolved_stages(),
            vec![Stage::Certify, Stage::Omega2, Stage::Omega1, Stage::Gap]
        );
        let c = PipelineConfig {
            stages: vec![Stage::Witness],
            ..PipelineConfig::default()
        };
        assert_eq!(c.resolved_stages(), vec![Stage::Certify, Stage::Witness]);
    }

    #[test]
    fn partial_json_takes_defaults() {
        let c: PipelineConfig = serde_json::from_str(r#"{"epsilon": 0.2, "stages": ["certify"]}"#).unwrap();
        assert_eq!(c.epsilon, 0.2);
        assert_eq!(c.delta, 0.05);
        assert_eq!(c.stages, vec![Stage::Certify]);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"epsilon_typo": 0.2}"#).is_err());
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        for c in [
            PipelineConfig { delta: 0.0, ..PipelineConfig::default() },
            PipelineConfig { delta: 0.2, ..PipelineConfig::default() },
            PipelineConfig { epsilon: 0.5, ..PipelineConfig::default() },
            PipelineConfig { spacing_w: -1.0, ..PipelineConfig::default() },
            PipelineConfig { stages: vec![], ..PipelineConfig::default() },
        ] {
            assert!(matches!(c.validate(), Err(CliError::InvalidConfig(_))), "{c:?}");
        }
    }

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
        assert!("omega3".parse::<Stage>().is_err());
    }
}
