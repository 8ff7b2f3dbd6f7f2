use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::Value;

use super::config::Stage;
use super::pipeline::TIMINGS_FILE;

fn num(v: &Value, path: &[&str]) -> String {
    let mut cur = v;
    for key in path {
        cur = &cur[*key];
    }
    match cur.as_f64() {
        Some(x) if x.abs() >= 1e-3 || x == 0.0 => format!("{x:.4}"),
        Some(x) => format!("{x:.3e}"),
        None => "-".into(),
    }
}

fn key_numbers(stage: Stage, v: &Value) -> String {
    match stage {
        Stage::Certify => format!(
            "min margin {}, max rho on A {}",
            num(v, &["min_strict_margin"]),
            num(v, &["annulus", "worst_rho"])
        ),
        Stage::Psh => format!(
            "sub-mean defect f {} g {}, Levi min f {} g {}",
            num(v, &["f", "worst_submean_defect"]),
            num(v, &["g", "worst_submean_defect"]),
            num(v, &["f", "levi_min_eig"]),
            num(v, &["g", "levi_min_eig"])
        ),
        Stage::Witness => format!(
            "max g {}, g on V {} (printed {})",
            num(v, &["g_max", "value"]),
            num(v, &["g_on_v"]),
            num(v, &["g_on_v_as_printed"])
        ),
        Stage::Omega2 => format!(
            "value at (9,0) {}, min on V {}, sweeps {}",
            num(v, &["summary", "value_at_t9_w0"]),
            num(v, &["summary", "min_over_v"]),
            v["summary"]["iterations"]
        ),
        Stage::Omega1 => format!(
            "value at (9,0) {}, max on V {}, sweeps {}",
            num(v, &["summary", "value_at_t9_w0"]),
            num(v, &["summary", "max_over_v"]),
            v["summary"]["iterations"]
        ),
        Stage::Gap => format!(
            "min gap on V {}, separation margin {}",
            num(v, &["min_gap"]),
            num(v, &["separation_margin"])
        ),
    }
}

/// One line per stage report found in `output_dir`.
pub fn summarize(output_dir: &Path) -> String {
    let timings: Value = fs::read_to_string(output_dir.join(TIMINGS_FILE))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or(Value::Null);
    let mut rows = Vec::new();
    for stage in Stage::ALL {
        let Ok(text) = fs::read_to_string(output_dir.join(stage.report_file())) else {
            continue;
        };
        let (status, numbers) = match serde_json::from_str::<Value>(&text) {
            Ok(v) => (
                if v["pass"].as_bool() == Some(true) { "pass" } else { "FAIL" },
                key_numbers(stage, &v),
            ),
            Err(_) => ("FAIL", "unreadable report".to_string()),
        };
        let secs = timings[stage.name()]
            .as_f64()
            .map_or("-".to_string(), |s| format!("{s:.1} s"));
        rows.push((stage.name(), status, secs, numbers));
    }
    if rows.is_empty() {
        return format!("no results in {}\n", output_dir.display());
    }
    let mut s = String::new();
    writeln!(s, "{:<8} {:<6} {:>9}  key numbers", "stage", "status", "runtime").unwrap();
    for (name, status, secs, numbers) in rows {
        writeln!(s, "{name:<8} {status:<6} {secs:>9}  {numbers}").unwrap();
    }
    s
}
