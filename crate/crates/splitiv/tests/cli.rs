use std::process::{Command, Output};

fn splitiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_splitiv"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn errors_are_reported_as_json() {
    let out = splitiv(&["bounds", "--a", "3", "--b", "2"]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "invalid_parameter");

    let out = splitiv(&["simulate", "--set", "windw=4"]);
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "config");

    let out = splitiv(&["estimate", "--config", "/nonexistent/manifest.json"]);
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "io");
}

#[test]
fn bounds_report() {
    let out = splitiv(&[
        "bounds",
        "--r",
        "2",
        "--a",
        "1",
        "--b",
        "10",
        "--k",
        "1",
        "--mc-trials",
        "10000",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["gamma"]["head"], 0.2);
    assert!(v["monte_carlo"]["ratio"].as_f64().unwrap() <= 1.0);
    assert_eq!(v["corollary_rate"].as_array().unwrap().len(), 3);
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let common = [
        "--set", "n=4000", "--set", "N=100", "--set", "p=8", "--seed", "3",
    ];
    let mut args = vec!["simulate", "--out", csv.to_str().unwrap()];
    args.extend(common);
    assert!(splitiv(&args).status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("t,x1,x2,x3,z1,z2,z3\n"));
    assert_eq!(text.lines().count(), 4001);

    let mut args = vec!["estimate", "--input", csv.to_str().unwrap()];
    args.extend(common);
    let out = splitiv(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["iv"]["theta"].as_array().unwrap().len(), 18);
    assert_eq!(v["n_regression"], 3901);
    // Row-major: entry (1, 1) is rho.
    let rho = v["iv"]["theta"][4].as_f64().unwrap();
    assert!((rho - 28.0).abs() < 2.0, "{rho}");

    // Without an input the same seed reproduces the simulated data set.
    let mut args = vec!["estimate"];
    args.extend(common);
    let again: serde_json::Value = serde_json::from_slice(&splitiv(&args).stdout).unwrap();
    assert_eq!(again["iv"]["theta"], v["iv"]["theta"]);
    assert_eq!(again["ls"]["theta"], v["ls"]["theta"]);
}

#[test]
fn filters_dump() {
    let out = splitiv(&["filters", "--set", "N=20", "--set", "p=4"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next().unwrap(), "filter,k,weight_d0,weight_d1");
    assert_eq!(text.lines().count(), 1 + 3 * 10);
}

#[test]
fn mode_flag_overrides_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let out = splitiv(&[
        "benchmark",
        "--mode",
        "discrete",
        "--trials",
        "3",
        "--set",
        "n=3000",
        "--set",
        "N=40",
        "--set",
        "p=6",
        "--set",
        "bootstrap_resamples=100",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["config"]["mode"], "discrete");
    assert_eq!(summary["reference_kind"], "pseudo_true");
    assert_eq!(summary["eta"], 1.0);
    // Too few trials for densities.
    assert!(!out_dir.join("kde.csv").exists());
    let trials = std::fs::read_to_string(out_dir.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 2 * 3);
}
