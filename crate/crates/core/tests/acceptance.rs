//! End-to-end acceptance run on the default configuration. Prints one
//! pass/fail line per criterion and fails if any criterion fails.
//!
//! The default pipeline runs twice (one and two worker threads), which takes
//! roughly 25 minutes on a single core.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use serde_json::Value;

use plurex::envelope_solver::{disc_oracle_comparison, SolverSettings};
use plurex::hartogs_domain::{certify_profiles, HartogsDomain, RadialProfile};
use plurex::psh_construction::{
    overlap_consistency, witness_report, PshBatteryConfig, PshWitness, WitnessFunction, G_ON_V,
};
use plurex::verify_cli::{annulus_check, PipelineConfig, EXIT_OK, TIMINGS_FILE};

struct Ledger {
    failed: Vec<usize>,
}

impl Ledger {
    fn record(&mut self, n: usize, pass: bool, what: &str) {
        let line = format!("criterion {n:>2} {}: {what}\n", if pass { "pass" } else { "FAIL" });
        std::io::stderr().write_all(line.as_bytes()).unwrap();
        if !pass {
            self.failed.push(n);
        }
    }
}

fn read(dir: &Path, file: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(file)).unwrap()).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn run_default(out: &Path, threads: usize) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_plurex"))
        .arg("run")
        .arg("--out")
        .arg(out)
        .env("PLUREX_THREADS", threads.to_string())
        .status()
        .unwrap();
    status.code().unwrap_or(-1)
}

fn identical_outputs(a: &Path, b: &Path) -> (bool, usize, Vec<String>) {
    let names = |d: &Path| -> BTreeSet<String> {
        fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n != TIMINGS_FILE)
            .collect()
    };
    let (na, nb) = (names(a), names(b));
    let mut differing: Vec<String> = na.symmetric_difference(&nb).cloned().collect();
    for n in na.intersection(&nb) {
        if fs::read(a.join(n)).unwrap() != fs::read(b.join(n)).unwrap() {
            differing.push(n.clone());
        }
    }
    (differing.is_empty() && !na.is_empty(), na.len(), differing)
}

#[test]
fn acceptance_criteria() {
    let mut ledger = Ledger { failed: Vec::new() };
    let defaults = PipelineConfig::default();
    let domain = HartogsDomain::default();

    let start = Instant::now();
    let report = certify_profiles(&RadialProfile::standard(), 1e-3);
    let secs = start.elapsed().as_secs_f64();
    let margin = report.min_strict_margin();
    ledger.record(
        1,
        report.all_pass() && margin > 1e-6 && secs < 5.0,
        &format!("profile certification, min strict margin {margin:.3e}, {secs:.2} s"),
    );

    let start = Instant::now();
    let overlap = overlap_consistency(&domain, 10_000, defaults.seed);
    let secs = start.elapsed().as_secs_f64();
    let worst = overlap.checks.iter().map(|c| 1e-9 - c.margin).fold(0.0, f64::max);
    ledger.record(
        2,
        overlap.all_pass() && worst <= 1e-9 && secs < 10.0,
        &format!("overlap consistency, worst disagreement {worst:.3e}, {secs:.2} s"),
    );

    let start = Instant::now();
    let battery = PshBatteryConfig::with_grid_spacing(defaults.psh_radius);
    let g = PshWitness::new(&domain)
        .psh_battery(WitnessFunction::G, &battery, defaults.seed)
        .unwrap();
    let secs = start.elapsed().as_secs_f64();
    ledger.record(
        3,
        g.points_tested == 10_000 && g.submean_pass && g.levi_pass && secs < 60.0,
        &format!(
            "plurisubharmonicity of g, {} points, {} discs, sub-mean defect {:.3e}, Levi min {:.3e}, {secs:.1} s",
            g.points_tested, g.discs_tested, g.worst_submean_defect, g.levi_min_eig
        ),
    );

    let small = PshBatteryConfig {
        n_points: 100,
        ..battery.clone()
    };
    let w = witness_report(&domain, defaults.delta, 10_000, defaults.seed, &small).unwrap();
    let exact = w.g_minus_one_deviation.value <= 1e-12
        && w.g_on_v_deviation.value <= 1e-12
        && w.g_max.value <= 0.0
        && w.g_on_v == G_ON_V;
    ledger.record(
        4,
        exact && w.pass,
        &format!(
            "witness bounds, |g + 1| {:.1e} far out, |g + 1/11| {:.1e} on V, max g {:.4} (printed constant {:.4})",
            w.g_minus_one_deviation.value, w.g_on_v_deviation.value, w.g_max.value, w.g_on_v_as_printed
        ),
    );

    let start = Instant::now();
    let oracle = disc_oracle_comparison(201, (0.0, PI), &SolverSettings::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let oracle_pass = oracle.converged && oracle.max_error < 0.02 && secs < 30.0;

    let tmp = tempfile::tempdir().unwrap();
    let (first, second) = (tmp.path().join("run1"), tmp.path().join("run2"));
    let code = run_default(&first, 1);
    let timings = read(&first, TIMINGS_FILE);
    let have = |file: &str| first.join(file).is_file();

    if have("omega1_summary.json") {
        let o1 = read(&first, "omega1_summary.json");
        let s = &o1["summary"];
        let bound = -1.0 + 2.0 * defaults.epsilon + 0.05;
        let secs = f(&timings["omega1"]);
        let pass = f(&s["value_at_t9_w0"]) <= bound
            && f(&s["max_over_v"]) <= bound
            && s["converged"] == true
            && f(&s["residual"]) < 1e-7
            && s["iterations"].as_u64().unwrap() <= 5000
            && secs <= 600.0;
        ledger.record(
            5,
            pass,
            &format!(
                "omega1 proxy at (9, 0) {:.4}, max over {} V nodes {:.4}, bound {bound:.2}, {} sweeps, residual {:.2e}, {secs:.0} s",
                f(&s["value_at_t9_w0"]),
                s["v_nodes"],
                f(&s["max_over_v"]),
                s["iterations"],
                f(&s["residual"])
            ),
        );
    } else {
        ledger.record(5, false, "omega1 stage did not run");
    }

    if have("omega2_summary.json") {
        let o2 = read(&first, "omega2_summary.json");
        let s = &o2["summary"];
        let dom = &o2["witness_domination"];
        let pass = f(&s["value_at_t9_w0"]) >= G_ON_V - 0.05 && dom["pass"] == true;
        ledger.record(
            6,
            pass,
            &format!(
                "omega2 at (9, 0) {:.4} >= {:.4}, witness domination min excess {:.3e} (tolerance {:.3e}) over {} nodes",
                f(&s["value_at_t9_w0"]),
                G_ON_V - 0.05,
                f(&dom["min_excess"]),
                f(&dom["tolerance"]),
                dom["nodes"]
            ),
        );
    } else {
        ledger.record(6, false, "omega2 stage did not run");
    }

    if have("gap.json") {
        let gap = read(&first, "gap.json");
        ledger.record(
            7,
            f(&gap["min_gap"]) >= 0.5 && code == EXIT_OK,
            &format!(
                "min over V of omega2 - omega1 proxy {:.4}, separation margin {:.4}, exit code {code}",
                f(&gap["min_gap"]),
                f(&gap["separation_margin"])
            ),
        );
    } else {
        ledger.record(7, false, &format!("gap stage did not run, exit code {code}"));
    }

    ledger.record(
        8,
        oracle_pass,
        &format!(
            "disc oracle on 201 x 201, max error {:.4} over {} points, {} sweeps, {secs:.1} s",
            oracle.max_error,
            oracle.samples.len(),
            oracle.iterations
        ),
    );

    let annulus = annulus_check(&domain, 1e-3);
    let mask_check = have("omega1_summary.json").then(|| read(&first, "omega1_summary.json")["annulus_in_enlarged"].clone());
    let mask_pass = mask_check.as_ref().is_some_and(|m| m["pass"] == true);
    ledger.record(
        9,
        annulus.pass && annulus.worst_rho <= 1e-12 && mask_pass,
        &format!(
            "annulus in the closure (max rho {:.2e} over {} samples); flat annuli in the enlarged mask: {}",
            annulus.worst_rho,
            annulus.samples,
            mask_check.map_or("not run".to_string(), |m| format!(
                "{} nodes, {} outside, max closure distance {:.4}",
                m["nodes"], m["outside"], f(&m["max_closure_distance"])
            ))
        ),
    );

    let code2 = run_default(&second, 2);
    let (same, files, differing) = identical_outputs(&first, &second);
    ledger.record(
        10,
        same && code2 == code,
        &format!("two default runs with 1 and 2 worker threads, {files} files compared, differing: {differing:?}"),
    );

    assert!(ledger.failed.is_empty(), "failed criteria: {:?}", ledger.failed);
}
