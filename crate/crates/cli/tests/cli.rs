use std::fs;
use std::process::Command;

fn slicesub() -> Command {
    Command::new(env!("CARGO_BIN_EXE_slicesub"))
}

fn quick_config(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("quick.toml");
    fs::write(
        &path,
        "[network]\nusers_per_cell = 8\n[run]\nwarmup_s = 300.0\nduration_s = 1500.0\nreplications = 2\n",
    )
    .unwrap();
    path
}

#[test]
fn default_config_parses_back() {
    let out = slicesub().arg("default-config").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = slicesub::config::ScenarioConfig::from_toml_str(&text).unwrap();
    assert_eq!(cfg, slicesub::config::ScenarioConfig::default());
}

#[test]
fn grid_plan_has_one_row_per_cell() {
    let out = slicesub().args(["grid", "--isd", "200"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 58);
    assert!(text.starts_with("cell_id,cluster_id,bs_x,bs_y,boresight_rad,freq"));
}

#[test]
fn capstats_then_analytic() {
    let dir = tempfile::tempdir().unwrap();
    let cap = dir.path().join("cap.csv");
    let ind = dir.path().join("ind.csv");
    let ok = slicesub()
        .args(["capstats", "--samples", "200", "--out"])
        .arg(&cap)
        .status()
        .unwrap();
    assert!(ok.success());
    let ok = slicesub()
        .args(["analytic", "--capstats"])
        .arg(&cap)
        .arg("--out")
        .arg(&ind)
        .status()
        .unwrap();
    assert!(ok.success());
    let text = fs::read_to_string(&ind).unwrap();
    assert!(text.starts_with("cell_id,variant,sigma,rho_1,rho_2,rho_3,rho_4,beta_used,gamma_used"));
    assert_eq!(text.lines().count(), 1 + 3 * 57);
}

#[test]
fn simulate_writes_results_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let res = dir.path().join("res.csv");
    let log = dir.path().join("log.csv");
    let ok = slicesub()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&res)
        .arg("--event-log")
        .arg(&log)
        .status()
        .unwrap();
    assert!(ok.success());
    let res = fs::read_to_string(&res).unwrap();
    assert!(res.starts_with("cell_id,sigma_hat,rho_hat_1"));
    assert_eq!(res.lines().count(), 58);
    let log = fs::read_to_string(&log).unwrap();
    assert!(log.starts_with("time,user,kind,cell_id,option"));
    assert!(log.lines().count() > 57 * 8);
}

#[test]
fn sweep_writes_case_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let ok = slicesub()
        .args([
            "sweep", "--case", "c", "--values", "300,600", "--format", "json", "--config",
        ])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(ok.success());
    let rows: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("case_c.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["parameter"], "r0_kbps");
}

#[test]
fn bad_input_is_reported() {
    let out = slicesub()
        .args(["compare", "--case", "z"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(!out.stderr.is_empty());
}
