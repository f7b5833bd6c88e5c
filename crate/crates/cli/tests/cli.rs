use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chsurf"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(format!("{name}.schema.json"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn assert_valid(name: &str, instance: &Value) {
    let validator = jsonschema::validator_for(&schema(name)).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

fn json_stdout(args: &[&str]) -> Value {
    let out = run(args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_config(dir: &tempfile::TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn ray_reports_fold_and_t0() {
    let out = run(&["ray", "--q", "1.0", "--t-max", "0.5", "--refine", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary = stderr(&out);
    assert!(summary.contains("fold T1 ≈ 0.3849 (T0 = 0.3849)"), "{summary}");
    let csv = String::from_utf8(out.stdout.clone()).unwrap();
    assert!(csv.starts_with("t,min_u,max_u,lambda_min,max_Qsq_gamma,area_gamma,newton_iters\n"));
}

#[test]
fn moduli_genus_two_table() {
    let out = run(&["moduli", "--genus", "2", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout.clone()).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.iter().filter(|r| r.starts_with("V,")).count(), 8);
    assert_eq!(rows.iter().filter(|r| r.starts_with("W,+")).count(), 3);
    assert_eq!(rows.iter().filter(|r| r.starts_with("W,-")).count(), 3);
    assert!(stderr(&out).contains("3 holomorphic"));
}

#[test]
fn expmap_sweep_bounds_positive() {
    let out = run(&["expmap", "--Q0", "0.3", "--sweep", "--nr", "40", "--nalpha", "40"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("Q0,r,alpha,l,k_re,k_im,lower_bound,a,da_dr"));
    let bounds: Vec<f64> = lines.map(|l| l.split(',').nth(6).unwrap().parse().unwrap()).collect();
    assert_eq!(bounds.len(), 1600);
    assert!(bounds.iter().all(|&b| b > 0.0));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write_config(&dir, "");
    let out = run(&["validate", empty.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("missing `command`"));

    let out = run(&["ray", "--q", "-1", "--t-max", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("qsq must be ≥ 0"));

    let out = run(&["ray", "--q", "1", "--t-max", "-0.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("ray precondition"));

    let out = run(&["moduli", "--genus", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn parse_errors_carry_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(&dir, "command = ray\nq = 1\n  broken line\nt_max = 0.5\n");
    let out = run(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 3, column 3"), "{}", stderr(&out));
}

#[test]
fn nonexistence_exits_three() {
    let out = run(&["solve", "--q", "1", "--t", "0.6", "--refine", "1"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn run_applies_overrides_and_writes_output() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("table.md");
    let cfg = write_config(&dir, &format!("# table\ncommand = moduli\ngenus = 5\noutput = {}\n", target.display()));
    let out = run(&["run", cfg.to_str().unwrap(), "genus=2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let table = std::fs::read_to_string(target).unwrap();
    assert!(table.starts_with("## Genus 2"));
}

#[test]
fn json_artifacts_match_schemas() {
    let mesh = json_stdout(&["mesh", "--refine", "1"]);
    assert_valid("mesh", &mesh);
    let solve = json_stdout(&["solve", "--q", "1", "--t", "0.2", "--refine", "1", "--format", "json"]);
    assert_valid("solve", &solve);
    let ray = json_stdout(&["ray", "--q", "2", "--t-max", "0.3", "--refine", "1", "--format", "json"]);
    assert_valid("ray", &ray);
    assert_eq!(ray["status"], "fold_detected");
    let hol = json_stdout(&["holonomy", "--grid-n", "41", "--steps", "2000"]);
    assert_valid("holonomy", &hol);
    let hol = json_stdout(&["holonomy", "--analytic", "--steps", "2000"]);
    assert!(hol["distance_to_identity"].as_f64().unwrap() < 1e-5);
    let toda = json_stdout(&["toda-check", "--example", "mobius", "--grid-n", "41", "--format", "json"]);
    assert_valid("toda-check", &toda);
    let expmap = json_stdout(&["expmap", "--Q0", "0.2", "--r", "0.3", "--alpha", "1", "--format", "json"]);
    assert_valid("expmap", &expmap);
}

#[test]
fn mesh_and_chart_documents_round_trip() {
    let mesh = json_stdout(&["mesh", "--refine", "2"]);
    let parsed = chsurf::surface::SurfaceMesh::from_json(&mesh.to_string()).unwrap();
    assert_eq!(serde_json::to_value(parsed.to_document()).unwrap(), mesh);

    let grid = chsurf::toda::ChartGrid::square(0.4, 21).unwrap();
    let data = chsurf::toda::TodaChartData::r_fuchsian(grid).unwrap();
    let doc: Value = serde_json::from_str(&data.to_json().unwrap()).unwrap();
    assert_valid("chart", &doc);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chart.json");
    std::fs::write(&path, data.to_json().unwrap()).unwrap();
    let from_file = json_stdout(&["toda-check", "--data", path.to_str().unwrap(), "--format", "json"]);
    let from_example = json_stdout(&["toda-check", "--grid-half", "0.4", "--grid-n", "21", "--format", "json"]);
    assert_eq!(from_file, from_example);
}

#[test]
fn identical_config_and_seed_give_identical_csv() {
    let args = ["toda-check", "--example", "r-fuchsian", "--grid-n", "31", "--perturb", "1e-3", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let other = run(&["toda-check", "--example", "r-fuchsian", "--grid-n", "31", "--perturb", "1e-3", "--seed", "8"]);
    assert_ne!(a.stdout, other.stdout);

    let ray = ["ray", "--qsq", "0.25", "--t-max", "0.3", "--refine", "1"];
    assert_eq!(run(&ray).stdout, run(&ray).stdout);
}
