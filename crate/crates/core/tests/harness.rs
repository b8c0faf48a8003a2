//! End-to-end experiment runs: determinism, golden hashes and sweep shapes.

use losnet_core::harness::{run_experiment, ExperimentSpec, MANIFEST_FILE};

fn read_column(path: &std::path::Path, column: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == column).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

#[test]
fn rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let config = "m = 8\nratio = 4, 16\nd = 50\ntrials = 2\n";
    let ma = run_experiment(&ExperimentSpec::new("dof-scan", config, 7, a.path()).unwrap()).unwrap();
    let mb = run_experiment(&ExperimentSpec::new("dof-scan", config, 7, b.path()).unwrap().with_workers(2)).unwrap();
    assert_eq!(ma.digest, mb.digest);
    let fa = std::fs::read(a.path().join("dof_scan.csv")).unwrap();
    let fb = std::fs::read(b.path().join("dof_scan.csv")).unwrap();
    assert_eq!(fa, fb);
    let other = tempfile::tempdir().unwrap();
    let mc = run_experiment(&ExperimentSpec::new("dof-scan", config, 8, other.path()).unwrap()).unwrap();
    assert_ne!(ma.digest, mc.digest);
}

#[test]
fn regime_map_golden_hash() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_experiment(&ExperimentSpec::new("regime-map", "", 0, dir.path()).unwrap()).unwrap();
    let manifest = std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
    assert!(manifest.contains(&m.digest));
    assert_eq!(m.files[0].file, "regime_map.csv");
    assert_eq!(m.files[0].sha256, "d74393751357d9e70db2e6aff8863639d1528505ccf31c4761e8cda943b21f10");
}

#[test]
fn regime_map_boundaries_at_b_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = "n = 10000\na0_exponent = 0.5, 1.0, 1.25, 1.75, 2.0, 2.25\n";
    run_experiment(&ExperimentSpec::new("regime-map", config, 0, dir.path()).unwrap()).unwrap();
    let labels = read_column(&dir.path().join("regime_map.csv"), "regime");
    assert_eq!(labels, ["R1", "R1", "R3b", "R3a", "R3a", "R2"]);
}

#[test]
fn s_estimate_decreases_with_ratio() {
    let dir = tempfile::tempdir().unwrap();
    run_experiment(&ExperimentSpec::new("s-estimate", "samples = 1000000\n", 3, dir.path()).unwrap()).unwrap();
    let s: Vec<f64> = read_column(&dir.path().join("s_estimate.csv"), "s_value").iter().map(|v| v.parse().unwrap()).collect();
    let se: Vec<f64> = read_column(&dir.path().join("s_estimate.csv"), "std_error").iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(s.len(), 3);
    for k in 1..3 {
        assert!(s[k] + 2.0 * se[k] < s[k - 1], "{s:?} {se:?}");
    }
}

#[test]
fn scheme_sim_closed_form_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let config = "n = 64, 256, 1024\na0_exponent = 3\nh = 1\n";
    run_experiment(&ExperimentSpec::new("scheme-sim", config, 5, dir.path()).unwrap()).unwrap();
    let path = dir.path().join("scheme_sweep.csv");
    let sim = read_column(&path, "T_sim");
    let closed = read_column(&path, "T_closed_form");
    assert_eq!(sim, closed);
    let fit: f64 = read_column(&path, "exponent_fit")[0].parse().unwrap();
    assert!((fit - 0.5).abs() < 0.05, "{fit}");
    let plans = std::fs::read_to_string(dir.path().join("plans.txt")).unwrap();
    assert_eq!(plans.lines().filter(|l| l.starts_with("plan ")).count(), 3);
}

#[test]
fn infeasible_plan_and_bad_output_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_experiment(&ExperimentSpec::new("scheme-sim", "n = 100\na0_exponent = 0.9\n", 0, dir.path()).unwrap())
        .unwrap_err();
    assert_eq!(err.exit_code(), 2);
    let file = dir.path().join("occupied");
    std::fs::write(&file, b"").unwrap();
    let err = run_experiment(&ExperimentSpec::new("regime-map", "", 0, file.join("sub")).unwrap()).unwrap_err();
    assert!(matches!(err, losnet_core::Error::Io(_)));
}
