use std::path::Path;
use std::process::{Command, Output};

use okpair::atlas::builtin_source;

fn okpair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_okpair")).args(args).output().expect("run okpair")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn verify_builtins() {
    for name in ["E7", "d8"] {
        let o = okpair(&["verify", "--atlas", name]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        assert!(stdout(&o).contains("PASS"));
    }
}

#[test]
fn verify_reports_perturbed_transition() {
    let dir = tempfile::tempdir().unwrap();
    let src = builtin_source("E7").unwrap().replace("x0 = 1/x1 ;", "x0 = 1/x1 + x1^3 ;");
    let file = write(dir.path(), "perturbed.atlas", &src);
    let o = okpair(&["verify", "--file", &file]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(text.contains("FAIL"), "{text}");
    // Failing identities print their nonzero residual after the label.
    assert!(text.lines().any(|l| l.trim_start().starts_with("FAIL d/dt") && l.contains("x1^")), "{text}");
}

#[test]
fn verify_rejects_malformed_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "bad.atlas", "atlas X\nparams\ntimevar t\nchart U0 vars x y denom (x order 0\n");
    let o = okpair(&["verify", "--file", &file]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
    let o = okpair(&["verify", "--file", &dir.path().join("missing.atlas").to_string_lossy()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_json_parses() {
    let o = okpair(&["verify", "--atlas", "E7", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v.is_object() || v.is_array());
}

#[test]
fn integrate_exact_solution() {
    let o = okpair(&[
        "integrate", "--atlas", "E7", "--chart", "U0", "--param", "alpha=0", "--x0", "0", "--y0", "0", "--t0", "0",
        "--t1", "10", "--json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let y = v["final"]["y"][0].as_f64().unwrap();
    assert!((y - 5.0).abs() < 1e-6, "{y}");
    assert_eq!(v["switches"], 0);
}

#[test]
fn integrate_stationary_path() {
    let o = okpair(&[
        "integrate", "--atlas", "E7", "--chart", "U0", "--param", "alpha=0", "--x0", "1", "--y0", "1", "--t0", "2",
        "--t1", "2", "--json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["samples"], 1);
    assert_eq!(v["final"]["x"][0], 1.0);
}

#[test]
fn integrate_through_pole_switches_charts() {
    let o = okpair(&[
        "integrate", "--atlas", "E7", "--chart", "U0", "--param", "alpha=0", "--x0", "1", "--y0", "1", "--t1", "4",
        "--json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["final"]["chart"], "U2");
    assert!(v["switches"].as_u64().unwrap() >= 1);
}

#[test]
fn integrate_from_polar_locus_fails() {
    let o = okpair(&["integrate", "--atlas", "D8", "--chart", "U0", "--x0", "0", "--y0", "0", "--t0", "1", "--t1", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("polar"), "{}", stderr(&o));
}

#[test]
fn integrate_usage_errors() {
    let missing_param = okpair(&["integrate", "--atlas", "E7", "--chart", "U0", "--x0", "0", "--y0", "0", "--t1", "1"]);
    assert_eq!(missing_param.status.code(), Some(2));
    let bad_chart = okpair(&[
        "integrate", "--atlas", "E7", "--chart", "U7", "--param", "alpha=0", "--x0", "0", "--y0", "0", "--t1", "1",
    ]);
    assert_eq!(bad_chart.status.code(), Some(2));
    let bad_number = okpair(&[
        "integrate", "--atlas", "E7", "--chart", "U0", "--param", "alpha=0", "--x0", "zero", "--y0", "0", "--t1", "1",
    ]);
    assert_eq!(bad_number.status.code(), Some(2));
}

#[test]
fn integrate_writes_trajectory_files() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let json = dir.path().join("traj.json");
    for out in [&csv, &json] {
        let o = okpair(&[
            "integrate", "--atlas", "E7", "--chart", "U0", "--param", "alpha=0.25", "--x0", "0.5", "--y0", "-0.5",
            "--path", "0,0;1,1;2,0", "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.lines().count() > 2);
    assert!(text.lines().next().unwrap().contains("chart"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(v["samples"].as_array().unwrap().len() > 2);
}

#[test]
fn eliminate_outcomes() {
    let o = okpair(&["eliminate", "--system", "II"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("match"));
    let o = okpair(&["eliminate", "--system", "IV"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("residual"));
    let o = okpair(&["eliminate", "--system", "III_D8"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("y0''"), "{}", stdout(&o));
}

#[test]
fn classify_matrix_file() {
    let dir = tempfile::tempdir().unwrap();
    let (m, _) = okpair::lattice::builtin_matrix("E7").unwrap();
    let mut perm: Vec<usize> = (0..m.n).collect();
    perm.reverse();
    let file = write(dir.path(), "e7.json", &m.permuted(&perm).to_json());
    let o = okpair(&["classify", "--file", &file]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("E7~") && text.contains("III*"), "{text}");
    let o = okpair(&["classify", "--file", &file, "--json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["dim"], 2);
    let odd = write(dir.path(), "odd.json", "[[-2, 1], [1, -2]]");
    assert_eq!(okpair(&["classify", "--file", &odd]).status.code(), Some(1));
}

#[test]
fn tables_list_every_type() {
    let o = okpair(&["tables"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("P_III^D8"));
    let rows = text.lines().filter(|l| l.contains('[')).count();
    assert_eq!(rows, 18);
}

#[test]
fn out_flag_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = okpair(&["verify", "--atlas", "E7", "--json", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(!v.is_null());
}
