use std::path::Path;
use std::process::{Command, Output};

use birkhoff_lab::{Scenario, BUNDLED};
use serde_json::Value;

fn lab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_birkhoff-lab"))
        .args(args)
        .env("BIRKHOFF_LAB_OUT", out)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn report(dir: &Path, scenario: &str) -> Value {
    let text = std::fs::read_to_string(dir.join(scenario).join("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn bundled_scenarios_parse_and_are_listed() {
    assert!(BUNDLED.len() >= 8);
    for (name, text) in BUNDLED {
        let s = Scenario::parse(text).unwrap();
        assert_eq!(&s.name, name);
        assert!(!s.anchor.is_empty());
    }
    let tmp = tempfile::tempdir().unwrap();
    let out = lab(&["list"], tmp.path());
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), BUNDLED.len());
}

#[test]
fn describe_known_and_unknown() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lab(&["describe", "theorem_b_spheroid"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Birkhoff sections") && text.contains("verify_birkhoff"));
    assert_eq!(lab(&["describe", "unknown"], tmp.path()).status.code(), Some(2));
}

#[test]
fn chain_table_writes_csv_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lab(&["run", "chain_table_G5"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("chain_table_G5/00_chain_table.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    for (i, row) in rows.iter().enumerate() {
        let g = i as i64 + 1;
        let f: Vec<i64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(&f[..4], &[g, 4 - 8 * g, 1, 8 * g - 4]);
    }
    let r = report(tmp.path(), "chain_table_G5");
    assert_eq!(r["passed"], true);
    assert!(r["anchor"].as_str().unwrap().contains("8G-4"));
}

#[test]
fn missing_seed_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
name = "no_seed"
anchor = "x"
[surface]
kind = "round_sphere"
[[step]]
op = "verify_birkhoff"
annuli = [{ line = "v", value = 1.5707963267948966 }]
n_samples = 10
t_budget = 5.0
l_bound = 4.0
"#;
    let p = write(tmp.path(), "s.toml", text);
    assert_eq!(lab(&["run", &p], tmp.path()).status.code(), Some(2));
}

#[test]
fn unknown_keys_and_bad_tolerances_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let base = "name = \"k\"\nanchor = \"x\"\n[surface]\nkind = \"round_sphere\"\n[[step]]\nop = \"conjugate_points\"\nstart = { u = 0.0, v = 1.5707963267948966 }\nt_max = 4.0\n";
    let p = write(tmp.path(), "a.toml", &format!("{base}colour = 3\n"));
    assert_eq!(lab(&["run", &p], tmp.path()).status.code(), Some(2));
    let p = write(tmp.path(), "b.toml", &format!("{base}tol = -1.0\n"));
    assert_eq!(lab(&["run", &p], tmp.path()).status.code(), Some(2));
    assert_eq!(lab(&["run", "no/such/file.toml"], tmp.path()).status.code(), Some(2));
}

#[test]
fn failed_expectation_exits_one_and_still_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
name = "wrong"
anchor = "x"
[surface]
kind = "round_sphere"
[[step]]
op = "conjugate_points"
start = { u = 0.0, v = 1.5707963267948966 }
t_max = 4.0
expect_first = 3.0
tol = 1e-4
"#;
    let p = write(tmp.path(), "w.toml", text);
    assert_eq!(lab(&["run", &p], tmp.path()).status.code(), Some(1));
    assert_eq!(report(tmp.path(), "wrong")["passed"], false);
}

#[test]
fn numerical_failure_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
name = "sphere_minimizer"
anchor = "x"
[surface]
kind = "round_sphere"
[[step]]
op = "minimizer"
class = [1, 0]
"#;
    let p = write(tmp.path(), "m.toml", text);
    assert_eq!(lab(&["run", &p], tmp.path()).status.code(), Some(3));
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let tmp = tempfile::tempdir().unwrap();
    let text = r#"
name = "det"
anchor = "x"
seed = 99
[surface]
kind = "spheroid"
c = 0.9
[[step]]
op = "verify_birkhoff"
annuli = [{ line = "v", value = 1.5707963267948966 }]
n_samples = 300
t_budget = 12.0
l_bound = 6.0
expect_section = true
"#;
    let p = write(tmp.path(), "d.toml", text);
    let mut reports = Vec::new();
    for threads in ["1", "3"] {
        let dir = tmp.path().join(threads);
        let out = lab(&["run", &p, "--threads", threads, "--out", dir.to_str().unwrap()], tmp.path());
        assert!(out.status.success());
        let mut r = report(&dir, "det");
        r.as_object_mut().unwrap().remove("timings");
        reports.push(r);
    }
    assert_eq!(reports[0], reports[1]);
    let csv = std::fs::read_to_string(tmp.path().join("1/det/00_return_times.csv")).unwrap();
    assert_eq!(csv.lines().count(), 33);
}

#[test]
fn csf_scenario_writes_plot_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = lab(&["run", "flat_circle_extinction"], tmp.path());
    assert!(out.status.success());
    let dir = tmp.path().join("flat_circle_extinction");
    let svg = std::fs::read_to_string(dir.join("00_csf_curves.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.matches("<path").count() == 2);
    let trace = std::fs::read_to_string(dir.join("00_csf_trace.csv")).unwrap();
    assert!(trace.starts_with("s,L,max_k,n\n"));
}

#[test]
fn surgery_subcommand_prints_topology() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write(tmp.path(), "cfg.json", r#"{"genus": 1, "intersection_matrix": [[0, 1], [1, 0]], "pattern": "Chain2G"}"#);
    let out = lab(&["surgery", "--config", &p], tmp.path());
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["euler_char"], -4);
    assert_eq!(v["boundary_components"].as_array().unwrap().len(), 4);
    let bad = write(tmp.path(), "bad.json", r#"{"genus": 1, "intersection_matrix": [[0, 1], [0, 0]]}"#);
    assert_eq!(lab(&["surgery", "--config", &bad], tmp.path()).status.code(), Some(2));
}
