use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nls-masscurve"))
}

fn write_conf(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(cmd: &str, conf: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg(cmd).arg(conf).arg("--out").arg(out).args(extra).output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn error_record(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(text.lines().last().unwrap()).unwrap()
}

#[test]
fn solve_writes_profile_and_scalars() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_conf(tmp.path(), "run.conf", "# cubic in a ball\ndimension = 3\nexponent = 3\nlambda = 0\n");
    let out = tmp.path().join("out");
    let o = run("solve", &conf, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j = read_json(&out.join("groundstate.json"));
    assert!(j["ground_state"]["relative_residual"].as_f64().unwrap() < 1e-8);
    assert_eq!(j["config"]["keys"]["exponent"], "3");
    let csv = std::fs::read_to_string(out.join("groundstate.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap() == "r,u,du");
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("lambda="));
}

#[test]
fn below_first_eigenvalue_exits_with_error_record() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_conf(tmp.path(), "run.conf", "dimension = 3\nexponent = 3\nlambda = -19.7392088\n");
    let o = run("solve", &conf, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_record(&o)["kind"], "below_first_eigenvalue");
}

#[test]
fn malformed_config_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    for text in [
        "dimension = 3\nexponent = 3\nlambda = 0\nlamda = 1\n",
        "dimension 3\n",
        "dimension = 3\nexponent = three\nlambda = 0\n",
    ] {
        let conf = write_conf(tmp.path(), "bad.conf", text);
        let o = run("solve", &conf, &tmp.path().join("out"), &[]);
        assert_eq!(o.status.code(), Some(1));
        assert_eq!(error_record(&o)["kind"], "config");
    }
}

#[test]
fn qnorm_reports_critical_mass_with_uncertainty() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_conf(tmp.path(), "q.conf", "dimension = 2\nexponent = 4\n");
    let out = tmp.path().join("out");
    let o = run("qnorm", &conf, &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    let j = read_json(&out.join("qnorm.json"));
    let m = j["q_mass"].as_f64().unwrap();
    let u = j["q_mass_uncertainty"].as_f64().unwrap();
    assert!((m - 11.70).abs() < 0.01 && u < 0.01, "{m} +/- {u}");
}

#[test]
fn lookup_above_the_maximum_is_empty_with_note() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_conf(
        tmp.path(),
        "sup.conf",
        "dimension = 3\nexponent = 4\nbudget = 32\nmax_refinements = 16\nmass_fraction = 1.1\n",
    );
    let out = tmp.path().join("out");
    let o = run("lookup", &conf, &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    let j = read_json(&out.join("lookup.json"));
    let l = &j["lookups"][0];
    assert_eq!(l["roots"].as_array().unwrap().len(), 0);
    assert!(l["note"].as_str().unwrap().contains("nonexistence"));
    assert!(out.join("masscurve.csv").exists() && out.join("masscurve.gp").exists());
}

#[test]
fn stability_at_half_the_maximum() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_conf(tmp.path(), "sup.conf", "dimension = 3\nexponent = 4\nmass_fraction = 0.5\n");
    let out = tmp.path().join("out");
    let o = run("stability", &conf, &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    let j = read_json(&out.join("stability.json"));
    let verdicts: Vec<&str> = j["classifications"][0]["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["verdict"].as_str().unwrap())
        .collect();
    assert_eq!(verdicts, ["stable", "unstable"]);
    let first = &j["classifications"][0]["verdicts"][0];
    for key in ["lambda", "mass", "slope", "slope_err", "verdict", "nondeg_gap"] {
        assert!(!first[key].is_null(), "missing {key}");
    }
}

#[test]
fn failed_uniqueness_check_exits_four() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_conf(tmp.path(), "plane.conf", "dimension = 2\nexponent = 4\n");
    let o = run("yanagida", &conf, &tmp.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(error_record(&o)["kind"], "check_failed");
}

#[test]
fn region_table_csv_and_discrepancies() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_conf(
        tmp.path(),
        "fam.conf",
        "dimension = 3\nexponent = 3\nregion.p = 2.5, 3, 3.5\nyanagida.divisor = all\n",
    );
    let out = tmp.path().join("out");
    let o = run("yanagida", &conf, &out, &[]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("region.csv")).unwrap();
    assert!(csv.starts_with("p,k,s,in_region_paper,c1,c2,c3,overall"));
    assert_eq!(csv.lines().count(), 1 + 9 * 3);
    let j = read_json(&out.join("region.json"));
    assert!(j["discrepancies"].is_array());
}

#[test]
fn problem_file_and_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    write_conf(tmp.path(), "problem.conf", "dimension = 3\nexponent = 4\nradius = 2\n");
    let conf = write_conf(tmp.path(), "run.conf", "problem = problem.conf\nlambda = 1\n");
    let out = tmp.path().join("out");
    let o = run("solve", &conf, &out, &["--set", "lambda=2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j = read_json(&out.join("groundstate.json"));
    assert_eq!(j["ground_state"]["lambda"].as_f64(), Some(2.0));
    assert_eq!(j["config"]["problem"]["radius"], "2.0");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = write_conf(tmp.path(), "sup.conf", "dimension = 3\nexponent = 4\nbudget = 24\nmax_refinements = 8\n");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(run("trace", &conf, &a, &[]).status.code(), Some(0));
    let o = bin().arg("trace").arg(&conf).arg("--out").arg(&b).env("NLS_MASSCURVE_THREADS", "1").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    for f in ["masscurve.json", "masscurve.csv", "masscurve.gp"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}
