use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn solstab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solstab")).current_dir(dir).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn ground_state_writes_output_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = solstab(dir.path(), &["ground-state", "--d", "1", "--p", "3", "--tol", "1e-10", "--out", "gs.json", "--csv", "gs.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let gs = json(&dir.path().join("gs.json"));
    assert_eq!(gs["format"], "solstab.ground_state");
    let q0 = gs["q"][0].as_f64().unwrap();
    assert!((q0 - 2f64.sqrt()).abs() < 1e-9);
    let m = json(&dir.path().join("gs.manifest.json"));
    assert_eq!(m["command"], "ground-state");
    assert_eq!(m["config"]["profile"]["p"], 3.0);
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    let csv = std::fs::read_to_string(dir.path().join("gs.csv")).unwrap();
    assert!(csv.starts_with("r,Q,dQ\n"));
    assert!(!csv.contains('\r'));
}

#[test]
fn reruns_are_bit_identical_and_cache_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| ["ground-state", "--d", "2", "--p", "2", "--cache-dir", "cache", "--out", out];
    assert_eq!(code(&solstab(dir.path(), &args("a.json"))), 0);
    assert_eq!(code(&solstab(dir.path(), &args("b.json"))), 0);
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(json(&dir.path().join("a.manifest.json"))["ground_state"]["cached"], false);
    assert_eq!(json(&dir.path().join("b.manifest.json"))["ground_state"]["cached"], true);
    assert_eq!(std::fs::read_dir(dir.path().join("cache")).unwrap().count(), 1);

    // Sweeps too, independently of the thread count.
    let scan = |out: &str, jobs: &str| {
        let o = solstab(dir.path(), &["interaction-scan", "--kind", "gradient", "--d", "2", "--p", "2", "--R", "10:15:1", "--jobs", jobs, "--out", out]);
        assert_eq!(code(&o), 0);
        std::fs::read(dir.path().join(out)).unwrap()
    };
    assert_eq!(scan("s1.csv", "1"), scan("s2.csv", "3"));
}

#[test]
fn interaction_scan_csv_contract() {
    let dir = tempfile::tempdir().unwrap();
    let o = solstab(dir.path(), &["interaction-scan", "--kind", "square-square", "--d", "3", "--p", "2", "--R", "8:20:1", "--out", "scan.csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "R,log_integral,predicted_log,residual");
    assert_eq!(lines.len(), 14);
    for l in &lines[1..] {
        let cols: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 4);
        assert!((cols[1] - cols[2] - cols[3]).abs() < 1e-12);
    }
    let fit = json(&dir.path().join("scan.fit.json"));
    assert_eq!(fit["fit"]["model"], "log_log");
}

#[test]
fn verify_exit_code_follows_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["verify", "--case", "sharp", "--d", "1", "--p", "1.5", "--m", "2", "--R", "10:18:2", "--n", "4096"];
    let o = solstab(dir.path(), &base);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(dir.path().join("verify.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), solstab::verifier::CSV_HEADER);
    assert_eq!(csv.lines().count(), 6);
    assert_eq!(json(&dir.path().join("verify.summary.json"))["status"], "PASS");

    // The dist/F(Γ) ratio spreads by about 2 along this sweep, so a tight bracket fails.
    let mut tight = base.to_vec();
    tight.extend(["--bracket", "1.5", "--out", "tight.csv"]);
    let o = solstab(dir.path(), &tight);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&dir.path().join("tight.manifest.json"))["status"], "FAIL");
}

#[test]
fn complex_cases() {
    let dir = tempfile::tempdir().unwrap();
    let o = solstab(dir.path(), &["verify", "--case", "complex-single", "--d", "1", "--p", "3", "--theta", "0.7", "--n", "1024", "--out", "c1.csv"]);
    assert_eq!(code(&o), 0);
    let rep = json(&dir.path().join("c1.summary.json"));
    assert!(rep["gauge_max_change"].as_f64().unwrap() < 1e-10);

    let strict = ["verify", "--case", "complex-multi", "--d", "1", "--p", "3", "--R", "12", "--phases", "0,1.5707963267948966", "--strict", "--n", "4096"];
    assert_eq!(code(&solstab(dir.path(), &strict)), 2);
    let lax = &strict[..strict.len() - 3];
    let o = solstab(dir.path(), &[lax, &["--n", "4096", "--out", "c2.csv"]].concat());
    assert_eq!(code(&o), 0);
    assert_eq!(json(&dir.path().join("c2.summary.json"))["status"], "EXPLORATORY");
}

#[test]
fn sharp_example_snapshot_round_trips_through_decompose() {
    let dir = tempfile::tempdir().unwrap();
    let o = solstab(dir.path(), &["sharp-example", "--d", "1", "--p", "3", "--R", "12", "--n", "4096", "--snapshot", "u.bin"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&dir.path().join("sharp_example.json"));
    assert_eq!(report["format"], "solstab.sharp_example");
    assert!(dir.path().join("u.bin.json").exists());
    let m = json(&dir.path().join("sharp_example.manifest.json"));
    assert_eq!(m["grid"]["n"], 4096);

    let o = solstab(dir.path(), &["decompose", "--input", "u.bin", "--p", "3", "--centers", "-5.8;5.9", "--out", "fit.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let fit = json(&dir.path().join("fit.json"));
    let rho = report["rho_h1"].as_f64().unwrap();
    let dist = fit["norms"]["rho_h1"].as_f64().unwrap();
    assert!((dist / rho - 1.0).abs() < 1e-6, "{dist} vs {rho}");

    let o = solstab(dir.path(), &["decompose", "--input", "u.bin", "--p", "3", "--centers", "0,0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn project_points_and_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let o = solstab(dir.path(), &["project-points", "--points", "0,0;3,1;-2,5;4,-4"]);
    assert_eq!(code(&o), 0);
    let res = json(&dir.path().join("projection.json"));
    assert!(res["result"]["c_achieved"].as_f64().unwrap() > 0.0);
    std::fs::write(dir.path().join("pts.csv"), "x,y\n1,1\n1,1\n").unwrap();
    assert_eq!(code(&solstab(dir.path(), &["project-points", "--input", "pts.csv"])), 2);

    let o = solstab(dir.path(), &["spectrum", "--d", "1", "--p", "3", "--ell", "1", "--n-eigs", "2", "--kappa", "--vectors", "vec.csv"]);
    assert_eq!(code(&o), 0);
    let sp = json(&dir.path().join("spectrum.json"));
    assert!((sp["eigenvalues"][0].as_f64().unwrap() - 3.0).abs() < 1e-3);
    assert!(sp["kappa"]["kappa"].as_f64().unwrap() > 0.0);
    assert!(std::fs::read_to_string(dir.path().join("vec.csv")).unwrap().starts_with("r,phi0,phi1\n"));
}

#[test]
fn special_function_tables() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&solstab(dir.path(), &["special-fn", "--branches", "--log10-s", "-10:-2:1"])), 0);
    let csv = std::fs::read_to_string(dir.path().join("fdp.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "s,linear,log_d1,psi_d2,psi_d3,subquadratic");
    assert_eq!(csv.lines().count(), 10);
    let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(row[0], 1e-10);
    assert_eq!(row[1], 1e-10);
    assert!(row[2] > row[1]);

    assert_eq!(code(&solstab(dir.path(), &["special-fn", "--d", "3", "--p", "2", "--out", "f.csv"])), 0);
    let csv = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    assert!(csv.starts_with("s,psi,F\n"));
}

#[test]
fn usage_and_numerical_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&solstab(dir.path(), &["--help"])), 0);
    assert_eq!(code(&solstab(dir.path(), &["frobnicate"])), 2);
    assert_eq!(code(&solstab(dir.path(), &["ground-state", "--d", "1"])), 2);
    assert_eq!(code(&solstab(dir.path(), &["ground-state", "--d", "1", "--p", "1"])), 2);
    let o = solstab(dir.path(), &["interaction-scan", "--kind", "gradient", "--d", "1", "--p", "3", "--R", "10:5:1"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(code(&solstab(dir.path(), &["verify", "--case", "scaled", "--d", "1", "--p", "3", "--jobs", "0"])), 2);
    // Separation 4 is below the construction's reach.
    let o = solstab(dir.path(), &["sharp-example", "--d", "1", "--p", "3", "--R", "4", "--floor", "0", "--n", "1024"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}
