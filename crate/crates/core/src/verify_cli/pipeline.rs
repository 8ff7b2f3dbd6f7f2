use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::{PipelineConfig, Stage};
use super::export::{export_slice, field_file, to_json, write_field, write_text, SliceFormat, SlicePlane};
use super::CliError;
use crate::envelope_solver::{
    build_grid, default_eta, discretized_witness, gap_report, omega1_proxy_problem, omega2_problem, perron_sweep,
    summarize_result, EnvelopeResult, EnvelopeSummary, GapReport, Grid3, MaskKind, SolverSettings,
};
use crate::hartogs_domain::{certify_profiles, ConstraintReport, HartogsDomain, ProfileTable, RadialProfile};
use crate::psh_construction::{psh_stage, witness_report, PshBatteryConfig, PshStageReport, WitnessReport, G_ON_V};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_CERTIFICATION: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_SEPARATION: i32 = 4;
pub const EXIT_WITNESS: i32 = 5;

/// Slack added to the proven bounds on the two envelopes at `(9, 0)`.
pub const BOUND_SLACK: f64 = 0.05;
pub const ANNULUS_TOL: f64 = 1e-12;
pub const TIMINGS_FILE: &str = "timings.json";

/// `A = {(z, 0) : 2 <= |z| <= 16}` sampled along `|z|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusCheck {
    pub t_range: (f64, f64),
    pub step: f64,
    pub samples: usize,
    pub worst_rho: f64,
    pub worst_t: f64,
    pub pass: bool,
}

pub fn annulus_check(domain: &HartogsDomain, step: f64) -> AnnulusCheck {
    let (a, b) = (2.0, 16.0);
    let n = ((b - a) / step).round() as usize;
    let (worst_rho, worst_t) = (0..=n)
        .map(|k| {
            let t = (a + k as f64 * step).min(b);
            (domain.rho_reduced(t, Complex64::new(0.0, 0.0)), t)
        })
        .fold((f64::NEG_INFINITY, a), |acc, x| if x.0 > acc.0 { x } else { acc });
    AnnulusCheck {
        t_range: (a, b),
        step,
        samples: n + 1,
        worst_rho,
        worst_t,
        pass: worst_rho <= ANNULUS_TOL,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyStageReport {
    pub step: f64,
    pub profile_source: String,
    pub profile_error: Option<String>,
    pub profile: Option<ProfileTable>,
    pub constraints: Option<ConstraintReport>,
    pub min_strict_margin: Option<f64>,
    pub annulus: Option<AnnulusCheck>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub dims: [usize; 3],
    pub spacings: [f64; 3],
    pub delta: f64,
    pub interior_nodes: usize,
    pub closure_nodes: usize,
    pub enlarged_nodes: usize,
}

impl GridInfo {
    fn of(grid: &Grid3) -> Self {
        Self {
            dims: grid.lattice.dims(),
            spacings: grid.lattice.spacings(),
            delta: grid.delta,
            interior_nodes: grid.count(MaskKind::Interior),
            closure_nodes: grid.count(MaskKind::Closure),
            enlarged_nodes: grid.count(MaskKind::Enlarged),
        }
    }
}

/// `envelope >= g - tolerance` at every interior node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessDomination {
    pub nodes: usize,
    pub tolerance: f64,
    /// `min (envelope - g)` over the interior nodes.
    pub min_excess: f64,
    pub worst_t: f64,
    pub worst_w: Complex64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Omega2StageReport {
    pub grid: GridInfo,
    pub settings: SolverSettings,
    pub eta: f64,
    pub summary: EnvelopeSummary,
    pub lower_bound_at_t9_w0: f64,
    pub witness_domination: WitnessDomination,
    pub pass: bool,
}

/// Grid nodes of `A_w = {2 <= |z| <= 16} x {w}` with `|w| < delta` that lie
/// outside the enlarged mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusMaskCheck {
    pub nodes: usize,
    pub outside: usize,
    pub max_closure_distance: f64,
    pub pass: bool,
}

pub fn annulus_mask_check(grid: &Grid3) -> AnnulusMaskCheck {
    let l = &grid.lattice;
    let mut nodes = 0;
    let mut outside = 0;
    let mut max_d = 0.0f64;
    for idx in 0..l.len() {
        let (t, w) = l.point(idx);
        if (2.0..=16.0).contains(&t) && w.norm() < grid.delta {
            nodes += 1;
            outside += usize::from(!grid.enlarged[idx]);
            max_d = max_d.max(grid.closure_distance[idx]);
        }
    }
    AnnulusMaskCheck {
        nodes,
        outside,
        max_closure_distance: max_d,
        pass: nodes > 0 && outside == 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Omega1StageReport {
    pub grid: GridInfo,
    pub settings: SolverSettings,
    pub eta: f64,
    pub epsilon: f64,
    pub summary: EnvelopeSummary,
    /// `-1 + 2 epsilon + 0.05`, required at `(9, 0)` and on every node of `V`.
    pub upper_bound: f64,
    pub annulus_in_enlarged: AnnulusMaskCheck,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: Stage,
    pub pass: bool,
    /// Exit code this stage contributes when it fails.
    pub code: i32,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    pub stages: Vec<StageOutcome>,
    pub exit_code: i32,
}

fn load_profile(cfg: &PipelineConfig) -> (String, Result<RadialProfile, String>) {
    match &cfg.profile_file {
        None => ("reference".into(), Ok(RadialProfile::standard())),
        Some(path) => {
            let src = path.display().to_string();
            let parsed = fs::read_to_string(path)
                .map_err(|e| format!("cannot read {src}: {e}"))
                .and_then(|t| serde_json::from_str::<ProfileTable>(&t).map_err(|e| format!("cannot parse {src}: {e}")))
                .and_then(|t| RadialProfile::from_table(t).map_err(|e| e.to_string()));
            (src, parsed)
        }
    }
}

struct Run<'a, L: FnMut(&str)> {
    cfg: &'a PipelineConfig,
    out: &'a Path,
    log: L,
    domain: Option<HartogsDomain>,
    grid: Option<Grid3>,
    omega1: Option<EnvelopeResult>,
    omega2: Option<EnvelopeResult>,
}

impl<L: FnMut(&str)> Run<'_, L> {
    fn write<T: Serialize>(&self, stage: Stage, report: &T) -> Result<(), CliError> {
        write_text(&self.out.join(stage.report_file()), &to_json(report))
    }

    fn domain(&self) -> &HartogsDomain {
        self.domain.as_ref().expect("certify runs first")
    }

    fn grid(&mut self) -> Result<&Grid3, CliError> {
        if self.grid.is_none() {
            let c = self.cfg;
            let g = build_grid(self.domain(), (0.0, 18.0), (-2.6, 2.6), c.spacing_t, c.spacing_w, c.delta)?;
            (self.log)(&format!(
                "grid {:?}: {} interior, {} enlarged nodes",
                g.lattice.dims(),
                g.count(MaskKind::Interior),
                g.count(MaskKind::Enlarged)
            ));
            self.grid = Some(g);
        }
        Ok(self.grid.as_ref().unwrap())
    }

    fn battery(&self) -> PshBatteryConfig {
        PshBatteryConfig {
            n_points: self.cfg.psh_points,
            ..PshBatteryConfig::with_grid_spacing(self.cfg.psh_radius)
        }
    }

    /// Runs one stage and returns `(pass, exit code on failure)`.
    fn stage(&mut self, stage: Stage) -> Result<(bool, i32), CliError> {
        let cfg = self.cfg;
        match stage {
            Stage::Certify => {
                let (source, profile) = load_profile(cfg);
                let report = match profile {
                    Err(e) => CertifyStageReport {
                        step: cfg.certify_step,
                        profile_source: source,
                        profile_error: Some(e),
                        profile: None,
                        constraints: None,
                        min_strict_margin: None,
                        annulus: None,
                        pass: false,
                    },
                    Ok(profile) => {
                        let constraints = certify_profiles(&profile, cfg.certify_step);
                        let domain = HartogsDomain::new(profile);
                        let annulus = annulus_check(&domain, cfg.certify_step);
                        let pass = constraints.all_pass() && annulus.pass;
                        let r = CertifyStageReport {
                            step: cfg.certify_step,
                            profile_source: source,
                            profile_error: None,
                            profile: Some(domain.profile().table()),
                            min_strict_margin: Some(constraints.min_strict_margin()),
                            constraints: Some(constraints),
                            annulus: Some(annulus),
                            pass,
                        };
                        self.domain = Some(domain);
                        r
                    }
                };
                self.write(stage, &report)?;
                Ok((report.pass, EXIT_CERTIFICATION))
            }
            Stage::Psh => {
                let r: PshStageReport = psh_stage(self.domain(), cfg.overlap_samples, &self.battery(), cfg.seed)
                    .map_err(|e| CliError::Stage(stage, e.to_string()))?;
                self.write(stage, &r)?;
                Ok((r.pass, EXIT_WITNESS))
            }
            Stage::Witness => {
                let r: WitnessReport =
                    witness_report(self.domain(), cfg.delta, cfg.witness_samples, cfg.seed, &self.battery())
                        .map_err(|e| CliError::Stage(stage, e.to_string()))?;
                self.write(stage, &r)?;
                Ok((r.pass, EXIT_WITNESS))
            }
            Stage::Omega2 => {
                let grid = self.grid()?.clone();
                let eta = default_eta(&grid);
                let problem = omega2_problem(&grid, self.domain(), eta, &cfg.solver)?;
                let result = perron_sweep(&problem)?;
                let summary = summarize_result(&result, &grid, self.domain(), cfg.delta);
                (self.log)(&format!(
                    "omega2: {} sweeps, residual {:.3e}, value at (9, 0) {}",
                    summary.iterations, summary.residual, summary.value_at_t9_w0
                ));
                let witness_domination = domination(&result, &grid, self.domain(), cfg);
                let lower = G_ON_V - BOUND_SLACK;
                let pass = summary.converged && summary.value_at_t9_w0 >= lower && witness_domination.pass;
                let report = Omega2StageReport {
                    grid: GridInfo::of(&grid),
                    settings: cfg.solver.clone(),
                    eta,
                    lower_bound_at_t9_w0: lower,
                    witness_domination,
                    pass,
                    summary,
                };
                self.write(stage, &report)?;
                write_field(&field_file(self.out, "omega2"), &result.field)?;
                export_slice(self.out, "omega2", SlicePlane::W0, SliceFormat::Csv)?;
                let converged = result.converged;
                self.omega2 = Some(result);
                Ok((pass, if converged { EXIT_SEPARATION } else { EXIT_NOT_CONVERGED }))
            }
            Stage::Omega1 => {
                let grid = self.grid()?.clone();
                let eta = default_eta(&grid);
                let problem = omega1_proxy_problem(&grid, self.domain(), cfg.epsilon, cfg.delta, eta, &cfg.solver)?;
                let result = perron_sweep(&problem)?;
                let summary = summarize_result(&result, &grid, self.domain(), cfg.delta);
                (self.log)(&format!(
                    "omega1 proxy: {} sweeps, residual {:.3e}, value at (9, 0) {}",
                    summary.iterations, summary.residual, summary.value_at_t9_w0
                ));
                let upper = -1.0 + 2.0 * cfg.epsilon + BOUND_SLACK;
                let annulus = annulus_mask_check(&grid);
                let pass = summary.converged
                    && summary.value_at_t9_w0 <= upper
                    && summary.max_over_v.map_or(false, |m| m <= upper)
                    && annulus.pass;
                let report = Omega1StageReport {
                    grid: GridInfo::of(&grid),
                    settings: cfg.solver.clone(),
                    eta,
                    epsilon: cfg.epsilon,
                    upper_bound: upper,
                    annulus_in_enlarged: annulus,
                    pass,
                    summary,
                };
                self.write(stage, &report)?;
                write_field(&field_file(self.out, "omega1"), &result.field)?;
                export_slice(self.out, "omega1", SlicePlane::W0, SliceFormat::Csv)?;
                let converged = result.converged;
                self.omega1 = Some(result);
                Ok((pass, if converged { EXIT_SEPARATION } else { EXIT_NOT_CONVERGED }))
            }
            Stage::Gap => {
                let grid = self.grid()?.clone();
                let (r1, r2) = (self.omega1.as_ref().unwrap(), self.omega2.as_ref().unwrap());
                let r: GapReport = gap_report(r1, r2, &grid, self.domain(), cfg.delta, cfg.epsilon);
                self.write(stage, &r)?;
                let converged = r.omega1_converged && r.omega2_converged;
                Ok((r.pass, if converged { EXIT_SEPARATION } else { EXIT_NOT_CONVERGED }))
            }
        }
    }
}

fn domination(result: &EnvelopeResult, grid: &Grid3, domain: &HartogsDomain, cfg: &PipelineConfig) -> WitnessDomination {
    let g = discretized_witness(grid, domain);
    let h = cfg.spacing_t.max(cfg.spacing_w);
    let tolerance = 10.0 * h * h;
    let mut worst = (f64::INFINITY, 0usize);
    let mut nodes = 0;
    for (i, gv) in g.masked_values() {
        nodes += 1;
        let excess = result.field.values[i] - gv;
        if excess < worst.0 {
            worst = (excess, i);
        }
    }
    let (worst_t, worst_w) = grid.lattice.point(worst.1);
    WitnessDomination {
        nodes,
        tolerance,
        min_excess: worst.0,
        worst_t,
        worst_w,
        pass: nodes > 0 && worst.0 >= -tolerance,
    }
}

fn record_timings(out: &Path, stages: &[StageOutcome]) -> Result<(), CliError> {
    let path = out.join(TIMINGS_FILE);
    let mut timings: BTreeMap<String, f64> = fs::read_to_string(&path)
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    for s in stages {
        timings.insert(s.stage.name().to_string(), s.seconds);
    }
    write_text(&path, &to_json(&timings))
}

/// Runs the requested stages and their prerequisites in order, stopping at
/// the first failing stage. Reports go to `config.output_dir`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome, CliError> {
    run_pipeline_logged(config, |_| {})
}

/// [`run_pipeline`] with progress messages passed to `log`.
pub fn run_pipeline_logged<L: FnMut(&str)>(config: &PipelineConfig, log: L) -> Result<PipelineOutcome, CliError> {
    config.validate()?;
    let out = config.output_dir.as_path();
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut run = Run {
        cfg: config,
        out,
        log,
        domain: None,
        grid: None,
        omega1: None,
        omega2: None,
    };
    let mut stages = Vec::new();
    let mut exit_code = EXIT_OK;
    for stage in config.resolved_stages() {
        (run.log)(&format!("stage {stage}"));
        let start = Instant::now();
        let (pass, code) = run.stage(stage)?;
        let seconds = start.elapsed().as_secs_f64();
        (run.log)(&format!("stage {stage}: {} in {seconds:.1} s", if pass { "pass" } else { "FAIL" }));
        stages.push(StageOutcome {
            stage,
            pass,
            code,
            seconds,
        });
        if !pass {
            exit_code = code;
            break;
        }
    }
    record_timings(out, &stages)?;
    Ok(PipelineOutcome { stages, exit_code })
}
