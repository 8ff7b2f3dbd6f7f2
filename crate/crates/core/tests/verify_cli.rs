use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use serde_json::{json, Value};
use tempfile::TempDir;

use plurex::hartogs_domain::{Anchor, RadialProfile};
use plurex::verify_cli::{
    export_slice, run_pipeline, summarize, CliError, PipelineConfig, SliceFormat, SlicePlane, Stage, EXIT_CERTIFICATION,
    EXIT_ERROR, EXIT_NOT_CONVERGED, EXIT_OK, TIMINGS_FILE,
};

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

fn assert_valid(schema: &str, file: &Path) {
    let schema: Value =
        serde_json::from_str(&fs::read_to_string(schema_dir().join(format!("{schema}.schema.json"))).unwrap()).unwrap();
    let instance: Value = serde_json::from_str(&fs::read_to_string(file).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{}: {errors:?}", file.display());
}

fn coarse_config(out: &Path) -> PipelineConfig {
    PipelineConfig {
        spacing_t: 0.25,
        spacing_w: 0.1,
        delta: 0.1,
        overlap_samples: 500,
        witness_samples: 500,
        psh_points: 200,
        output_dir: out.to_path_buf(),
        ..PipelineConfig::default()
    }
}

/// One full coarse run shared by the tests below.
fn coarse_run() -> &'static (TempDir, i32) {
    static RUN: OnceLock<(TempDir, i32)> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let outcome = run_pipeline(&coarse_config(dir.path())).unwrap();
        (dir, outcome.exit_code)
    })
}

fn plurex() -> Command {
    Command::new(env!("CARGO_BIN_EXE_plurex"))
}

fn write_config(dir: &Path, extra: Value) -> PathBuf {
    let mut cfg = json!({
        "spacing_t": 0.25,
        "spacing_w": 0.1,
        "delta": 0.1,
        "overlap_samples": 500,
        "witness_samples": 500,
        "psh_points": 200
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let path = dir.join("config.json");
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn exit_code(cmd: &mut Command) -> i32 {
    let out = cmd.output().unwrap();
    out.status.code().expect("process exited normally")
}

#[test]
fn coarse_pipeline_passes_every_stage() {
    let (dir, code) = coarse_run();
    assert_eq!(*code, EXIT_OK);
    let table = summarize(dir.path());
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 6, "{table}");
    assert!(rows.iter().all(|r| r.contains(" pass ")), "{table}");
}

#[test]
fn every_report_matches_its_schema() {
    let (dir, _) = coarse_run();
    for (schema, file) in [
        ("certify", "certify.json"),
        ("psh", "psh.json"),
        ("witness", "witness.json"),
        ("omega2_summary", "omega2_summary.json"),
        ("omega1_summary", "omega1_summary.json"),
        ("gap", "gap.json"),
        ("timings", TIMINGS_FILE),
    ] {
        assert_valid(schema, &dir.path().join(file));
    }
}

#[test]
fn slices_export_and_match_the_schema() {
    let (dir, _) = coarse_run();
    let csv = fs::read_to_string(dir.path().join("omega2_slice_w0.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# t,value"));
    let ts: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ts.first(), Some(&0.0));
    assert_eq!(ts.last(), Some(&18.0));

    let p = export_slice(dir.path(), "omega1_proxy", SlicePlane::T(9.0), SliceFormat::Json).unwrap();
    assert_valid("slice", &p);
    let v: Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
    assert_eq!(v["t"], 9.0);
    let n = v["re_w"].as_array().unwrap().len();
    assert_eq!(v["value"].as_array().unwrap().len(), n);
    assert_eq!(v["value"][0].as_array().unwrap().len(), v["im_w"].as_array().unwrap().len());

    let p = export_slice(dir.path(), "omega2", SlicePlane::W0, SliceFormat::Json).unwrap();
    assert_valid("slice", &p);

    assert!(matches!(
        export_slice(dir.path(), "omega7", SlicePlane::W0, SliceFormat::Csv),
        Err(CliError::UnknownResult(_))
    ));
}

#[test]
fn rerunning_reproduces_every_output() {
    let (first, _) = coarse_run();
    let second = tempfile::tempdir().unwrap();
    run_pipeline(&coarse_config(second.path())).unwrap();
    // the shared directory may also hold slices exported by other tests
    let mut names: Vec<_> = fs::read_dir(second.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n != TIMINGS_FILE)
        .collect();
    names.sort();
    assert!(names.len() >= 10);
    for name in names {
        let a = fs::read(first.path().join(&name)).unwrap();
        let b = fs::read(second.path().join(&name)).unwrap();
        assert!(a == b, "{name:?} differs");
    }
}

#[test]
fn summary_after_certification_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig {
        stages: vec![Stage::Certify],
        ..coarse_config(dir.path())
    };
    assert_eq!(run_pipeline(&cfg).unwrap().exit_code, EXIT_OK);
    assert_eq!(summarize(dir.path()).lines().count(), 2);
    let empty = tempfile::tempdir().unwrap();
    assert!(summarize(empty.path()).starts_with("no results"));
}

#[test]
fn invalid_configurations_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in [
        PipelineConfig {
            delta: 0.2,
            ..coarse_config(dir.path())
        },
        PipelineConfig {
            epsilon: 0.5,
            ..coarse_config(dir.path())
        },
        PipelineConfig {
            spacing_w: 0.0,
            ..coarse_config(dir.path())
        },
    ] {
        assert!(matches!(run_pipeline(&cfg), Err(CliError::InvalidConfig(_))));
    }
    let path = dir.path().join("bad.json");
    fs::write(&path, r#"{"spacing": 0.1}"#).unwrap();
    assert!(matches!(PipelineConfig::load(&path), Err(CliError::InvalidConfig(_))));
}

#[test]
fn cli_certify_with_corrupted_profile_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut table = RadialProfile::standard_table();
    for a in table.r.iter_mut().filter(|a| a.t == 9.0) {
        *a = Anchor::new(9.0, 1.9);
    }
    let profile = dir.path().join("profile.json");
    fs::write(&profile, serde_json::to_string(&table).unwrap()).unwrap();
    let out = dir.path().join("out");
    let code = exit_code(plurex().arg("certify").arg("--out").arg(&out).arg("--profile").arg(&profile));
    assert_eq!(code, EXIT_CERTIFICATION);
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("certify.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);

    fs::write(&profile, "{ not json").unwrap();
    let code = exit_code(plurex().arg("certify").arg("--out").arg(&out).arg("--profile").arg(&profile));
    assert_eq!(code, EXIT_CERTIFICATION);
    assert_valid("certify", &out.join("certify.json"));
}

#[test]
fn cli_one_sweep_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), json!({ "output_dir": dir.path().join("out") }));
    let code = exit_code(
        plurex()
            .args(["envelope", "--which", "omega2", "--max-iters", "1", "--config"])
            .arg(&cfg),
    );
    assert_eq!(code, EXIT_NOT_CONVERGED);
}

#[test]
fn cli_large_epsilon_still_separates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), json!({ "epsilon": 0.4 }));
    let code = exit_code(
        plurex()
            .args(["envelope", "--which", "gap", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out),
    );
    assert_eq!(code, EXIT_OK);
    let gap: Value = serde_json::from_str(&fs::read_to_string(out.join("gap.json")).unwrap()).unwrap();
    assert!(gap["separation_margin"].as_f64().unwrap() > 0.0);
    assert!(gap["theoretical_margin"].as_f64().unwrap() > 0.1);
}

#[test]
fn cli_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(exit_code(plurex().args(["certify", "--delta", "0.5", "--out"]).arg(&out)), EXIT_ERROR);
    assert_eq!(
        exit_code(plurex().args(["export", "--result", "omega2", "--out"]).arg(&out)),
        EXIT_ERROR
    );
    assert_eq!(
        exit_code(plurex().args(["certify", "--config"]).arg(dir.path().join("missing.json"))),
        EXIT_ERROR
    );
}

#[test]
fn cli_summarize_and_export() {
    let (dir, _) = coarse_run();
    let out = plurex().arg("summarize").arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 7);
    let out = plurex()
        .args(["export", "--result", "omega2", "--plane", "t=9", "--format", "csv", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let path = PathBuf::from(String::from_utf8(out.stdout).unwrap().trim());
    assert!(fs::read_to_string(path).unwrap().starts_with("# re_w,im_w,value"));
}
