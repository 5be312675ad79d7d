use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fleetplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fleetplan"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn fleetplan")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn text(out: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr))
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn tiny_case(dir: &Path, seed: &str) {
    let out = fleetplan(&["generate", "--size", "tiny", "--seed", seed, "--out-dir", path(dir)]);
    assert_eq!(code(&out), 0, "{}", text(&out));
}

#[test]
fn generate_then_validate() {
    let tmp = tempfile::tempdir().unwrap();
    let case = tmp.path().join("case");
    tiny_case(&case, "3");
    let out = fleetplan(&["validate", "--case-dir", path(&case)]);
    assert_eq!(code(&out), 0, "{}", text(&out));
    assert!(text(&out).contains("valid:"));
}

#[test]
fn missing_case_is_an_input_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = fleetplan(&["validate", "--case-dir", path(&tmp.path().join("nope"))]);
    assert_eq!(code(&out), 3, "{}", text(&out));
    assert!(text(&out).contains("case.toml"));
}

#[test]
fn invalid_case_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    tiny_case(tmp.path(), "3");
    let toml_path = tmp.path().join("case.toml");
    let t: String = fs::read_to_string(&toml_path)
        .unwrap()
        .lines()
        .map(|l| if l.starts_with("fleet_slots") { "fleet_slots = 0\n".to_string() } else { format!("{l}\n") })
        .collect();
    fs::write(&toml_path, t).unwrap();
    let out = fleetplan(&["validate", "--case-dir", path(tmp.path())]);
    assert_eq!(code(&out), 3, "{}", text(&out));
    assert!(text(&out).contains("fleet_slots"), "{}", text(&out));
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let out = fleetplan(&["run", "--scenario", "9"]);
    assert_eq!(code(&out), 2, "{}", text(&out));
    assert!(text(&out).contains("unknown scenario"));
}

#[test]
fn bad_flag_is_a_usage_error() {
    assert_eq!(code(&fleetplan(&["run", "--format", "pdf"])), 2);
    assert_eq!(code(&fleetplan(&["compare", "only-one.json"])), 2);
}

#[test]
fn run_compare_audit() {
    let tmp = tempfile::tempdir().unwrap();
    let case = tmp.path().join("case");
    tiny_case(&case, "5");
    let res = tmp.path().join("res");
    for s in ["1", "3"] {
        let out = fleetplan(&["run", "--scenario", s, "--case-dir", path(&case), "--out-dir", path(&res)]);
        assert_eq!(code(&out), 0, "{}", text(&out));
        assert!(text(&out).contains("Economic"), "{}", text(&out));
    }
    for f in ["s1.json", "s1_ec.json", "s1_msp.json", "s1_report.md", "s3.json", "s3_coordinated.json"] {
        assert!(res.join(f).exists(), "{f}");
    }

    let out = fleetplan(&["compare", path(&res.join("s1.json")), path(&res.join("s3.json")), "--format", "csv"]);
    assert_eq!(code(&out), 0, "{}", text(&out));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("kpi,unit,s1,s3,delta_pct_s1,delta_pct_s3"), "{table}");
    assert!(table.lines().any(|l| l.starts_with("total_cost,")));

    let out = fleetplan(&["audit", path(&res.join("s1.json")), "--case-dir", path(&case)]);
    assert_eq!(code(&out), 0, "{}", text(&out));
    assert!(text(&out).contains("\"ec\""));

    // Shift every stored value of the provider part; the audit must object.
    let part = res.join("s1_msp.json");
    let mut doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&part).unwrap()).unwrap();
    for v in doc["values"].as_array_mut().unwrap() {
        *v = serde_json::json!(v.as_f64().unwrap() + 0.5);
    }
    fs::write(&part, doc.to_string()).unwrap();
    let out = fleetplan(&["audit", path(&res.join("s1.json")), "--case-dir", path(&case)]);
    assert_eq!(code(&out), 5, "{}", text(&out));
}

#[test]
fn compare_refuses_different_cases() {
    let tmp = tempfile::tempdir().unwrap();
    let mut docs = Vec::new();
    for seed in ["1", "2"] {
        let case = tmp.path().join(format!("case{seed}"));
        tiny_case(&case, seed);
        let res = tmp.path().join(format!("res{seed}"));
        let out = fleetplan(&["run", "--scenario", "2", "--case-dir", path(&case), "--out-dir", path(&res)]);
        assert_eq!(code(&out), 0, "{}", text(&out));
        docs.push(res.join("s2.json"));
    }
    let out = fleetplan(&["compare", path(&docs[0]), path(&docs[1])]);
    assert_eq!(code(&out), 2, "{}", text(&out));
}

#[test]
fn config_file_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    tiny_case(&tmp.path().join("data"), "4");
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "scenario = 5\ncase_dir = data\nmip_gap = 1e-3\n").unwrap();
    let res = tmp.path().join("res");
    let out = fleetplan(&["run", "--config", path(&cfg), "--mip-gap", "1e-5", "--format", "csv", "--out-dir", path(&res)]);
    assert_eq!(code(&out), 0, "{}", text(&out));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(res.join("s5.json")).unwrap()).unwrap();
    assert_eq!(doc["config"]["solver"]["mip_gap"].as_f64(), Some(1e-5));
    assert!(res.join("s5_report.csv").exists());

    fs::write(&cfg, "scenario = 1\ncase_dir = data\npeak_tariff = collective\n").unwrap();
    let out = fleetplan(&["run", "--config", path(&cfg), "--out-dir", path(&res)]);
    assert_eq!(code(&out), 2, "{}", text(&out));
    assert!(text(&out).contains("contradictory"));
}

#[test]
fn unknown_backend_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    tiny_case(tmp.path(), "3");
    let out = Command::new(env!("CARGO_BIN_EXE_fleetplan"))
        .args(["run", "--scenario", "2", "--case-dir", path(tmp.path()), "--out-dir", path(&tmp.path().join("r"))])
        .env("FLEETPLAN_BACKEND", "cplex")
        .output()
        .unwrap();
    assert_ne!(code(&out), 0);
    assert!(text(&out).contains("cplex"), "{}", text(&out));
}
