use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn examples() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples")
}

fn example(name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(examples().join(name)).unwrap()).unwrap()
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema").join(name);
    let s: Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&s).unwrap()
}

fn assert_valid(v: &jsonschema::Validator, doc: &Value) {
    let errs: Vec<String> = v
        .iter_errors(doc)
        .map(|e| format!("{e} at {}", e.instance_path()))
        .collect();
    assert!(errs.is_empty(), "{errs:?}");
}

fn adrc(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adrc"))
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

/// Writes `cfg` into `dir` and runs the command with outputs in `dir/out`.
fn run_with(dir: &TempDir, cmd: &str, cfg: &Value, extra: &[&str]) -> (Output, PathBuf) {
    let path = dir.path().join("config.json");
    fs::write(&path, serde_json::to_string(cfg).unwrap()).unwrap();
    let out = dir.path().join("out");
    (adrc(cmd, &path, &out, extra), out)
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn bundled_configs_match_their_schemas() {
    let scenario = schema("scenario.schema.json");
    let telescope = schema("telescope.schema.json");
    for entry in fs::read_dir(examples()).unwrap() {
        let p = entry.unwrap().path();
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        let doc = read_json(&p);
        if name.starts_with("telescope") {
            assert_valid(&telescope, &doc);
        } else {
            assert_valid(&scenario, &doc);
        }
    }
}

#[test]
fn simulate_bundled_example() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = adrc(
        "simulate",
        &examples().join("sim_T01_w4_on.json"),
        &out,
        &["--duration", "2"],
    );
    assert!(o.status.success(), "{}", stderr(&o));

    let summary = read_json(&out.join("summary.json"));
    assert_valid(&schema("summary.schema.json"), &summary);
    assert_eq!(summary["command"], "simulate");
    let ise = summary["ise"].as_f64().unwrap();
    assert!(ise.is_finite() && ise > 0.0);
    assert_eq!(summary["diverged"], false);

    let csv = fs::read_to_string(out.join("timeseries.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,e1_0,e2_0,z_tilde_0,z_tilde_1,z_tilde_2,u_0,v_0"
    );
    // stride 10 at step 1e-4 over 2 s, plus the initial sample
    assert_eq!(lines.count(), 2001);

    let manifest = read_json(&out.join("manifest.json"));
    assert_valid(&schema("manifest.schema.json"), &manifest);
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(
        manifest["outputs"],
        json!(["timeseries.csv", "summary.json", "manifest.json"])
    );
}

#[test]
fn negative_time_constant_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let mut cfg = example("sim_T01_w4_on.json");
    cfg["plant"]["time_constants"] = json!(-1.0);
    let (o, out) = run_with(&dir, "simulate", &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("plant.time_constants"), "{err}");
    assert!(err.contains("strictly positive"), "{err}");
    assert!(!out.join("summary.json").exists());
}

#[test]
fn zero_bandwidth_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let mut cfg = example("sim_T01_w4_on.json");
    cfg["gains"]["omega"] = json!(0.0);
    let (o, _) = run_with(&dir, "simulate", &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gains.omega"), "{}", stderr(&o));
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let mut cfg = example("sim_T01_w4_on.json");
    cfg["gain"] = json!(1.0);
    let (o, _) = run_with(&dir, "simulate", &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_file() {
    let dir = TempDir::new().unwrap();
    let o = adrc("simulate", &dir.path().join("nope.json"), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn grid_rows_and_determinism() {
    let dir = TempDir::new().unwrap();
    let cfg = example("bandwidth_grid.json");
    let (o, out) = run_with(&dir, "grid", &cfg, &["--duration", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let first = fs::read_to_string(out.join("grid_summary.csv")).unwrap();
    let mut lines = first.lines();
    assert_eq!(
        lines.next().unwrap(),
        "time_constant,omega,rejection,ise,isc,diverged,steps,sup_zeta_bar,lambda_min_qy1,lambda_v,gamma_v,error_bound,certified,error"
    );
    assert_eq!(lines.count(), 12);

    let summary = read_json(&out.join("summary.json"));
    assert_valid(&schema("summary.schema.json"), &summary);
    assert_eq!(summary["rows"].as_array().unwrap().len(), 12);

    let o = adrc(
        "grid",
        &dir.path().join("config.json"),
        &out,
        &["--duration", "0.5", "--parallel", "1"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let second = fs::read_to_string(out.join("grid_summary.csv")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn grid_with_empty_axis_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let mut cfg = example("bandwidth_grid.json");
    cfg["grid"]["time_constants"] = json!([]);
    let (o, _) = run_with(&dir, "grid", &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid.time_constants"), "{}", stderr(&o));
}

#[test]
fn grid_without_section_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let o = adrc(
        "grid",
        &examples().join("sim_T01_w4_on.json"),
        &dir.path().join("out"),
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
}

fn upper_endpoint(report: &Value) -> f64 {
    let iv = report["omega_feasible"].as_array().unwrap();
    assert!(!iv.is_empty());
    iv.iter().map(|i| i["upper"].as_f64().unwrap()).fold(f64::MIN, f64::max)
}

#[test]
fn stability_feasible_interval_shrinks_with_lag() {
    let dir = TempDir::new().unwrap();
    let out01 = dir.path().join("t01");
    let out1 = dir.path().join("t1");
    let o = adrc("stability", &examples().join("stability_T01.json"), &out01, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = adrc("stability", &examples().join("stability_T1.json"), &out1, &[]);
    assert!(o.status.success(), "{}", stderr(&o));

    let r01 = read_json(&out01.join("stability_report.json"));
    let r1 = read_json(&out1.join("stability_report.json"));
    let iv = &r01["omega_feasible"][0];
    assert!(iv["lower"].as_f64().unwrap() < iv["upper"].as_f64().unwrap());
    assert!(upper_endpoint(&r1) < upper_endpoint(&r01));

    let sweep = fs::read_to_string(out01.join("omega_sweep.csv")).unwrap();
    assert_eq!(
        sweep.lines().next().unwrap(),
        "omega,kappa,lambda_min_qy1,qy1_positive_definite,lambda_v,gamma_v,error_bound"
    );
    assert!(sweep.lines().count() > 2);
}

#[test]
fn stability_without_perturbations_has_zero_gamma() {
    let dir = TempDir::new().unwrap();
    let mut cfg = example("stability_T01.json");
    cfg["trajectory"]["amplitude"] = json!(0.0);
    let (o, out) = run_with(&dir, "stability", &cfg, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = read_json(&out.join("stability_report.json"));
    assert_eq!(r["gamma_v"].as_f64().unwrap(), 0.0);
    if r["certified"] == true {
        assert_eq!(r["error_bound"].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn telescope_writes_one_series_per_variant() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = adrc(
        "telescope",
        &examples().join("telescope_50vs.json"),
        &out,
        &["--duration", "0.2"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for m in ["none", "reference_based", "estimate_based"] {
        let csv = fs::read_to_string(out.join(format!("timeseries_{m}.csv"))).unwrap();
        assert!(csv.starts_with("t,e1_0,e1_1,e2_0,e2_1,"));
    }
    let summary = read_json(&out.join("summary.json"));
    assert_valid(&schema("summary.schema.json"), &summary);
    let runs = summary["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    assert!(runs.iter().all(|r| r["ise_per_axis"].as_array().unwrap().len() == 2));
}

#[test]
fn zero_parallelism_is_rejected() {
    let dir = TempDir::new().unwrap();
    let o = adrc(
        "simulate",
        &examples().join("sim_T01_w4_on.json"),
        &dir.path().join("out"),
        &["--parallel", "0"],
    );
    assert_eq!(o.status.code(), Some(2));
}
