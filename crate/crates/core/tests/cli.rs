use std::path::Path;
use std::process::{Command, Output};

fn charpoly(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_charpoly"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CHARPOLY_SEED")
        .output()
        .expect("spawn charpoly")
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn predict_complex_case_prints_kernel_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = charpoly(&["predict", "--kappa20", "0,0", "--z0", "0,0", "--zeta", "1,0", "--zeta", "0,0"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let s = text(&out.stdout);
    assert!(s.contains("kernel_det_ratio  0.6321206"), "{s}");
    assert!(s.contains("complex-exact"), "{s}");
}

#[test]
fn predict_on_boundary_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = charpoly(&["predict", "--kappa20", "1,0", "--z0", "0.5,0", "--zeta", "1,0", "--zeta", "0,0"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("theorem conditions violated (positive det"));
}

#[test]
fn estimate_outside_conditions_exits_1_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["estimate", "--kappa20", "1,0", "--z0", "0.3,0", "--n", "8", "--samples", "1000", "--batches", "8"];
    let out = charpoly(&base, dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", text(&out.stderr));
    let mut forced = base.to_vec();
    forced.push("--force");
    let out = charpoly(&forced, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
}

#[test]
fn bad_configuration_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["predict", "--kappa20", "1.5,0"],
        vec!["predict", "--z0", "1,"],
        vec!["estimate", "--samples", "999"],
        vec!["estimate", "--samples", "1000", "--batches", "7"],
        vec!["estimate", "--dist", "cauchy"],
        vec!["plotdata", "--record", "missing.json"],
        vec!["frobnicate"],
    ] {
        let out = charpoly(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", text(&out.stderr));
    }
    std::fs::write(dir.path().join("c.json"), r#"{"samples": 2000, "colour": "red"}"#).unwrap();
    assert_eq!(charpoly(&["estimate", "--config", "c.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn estimate_writes_record_and_csv_then_plotdata() {
    let dir = tempfile::tempdir().unwrap();
    let out = charpoly(
        &[
            "estimate", "--kappa20", "0.4,0.3", "--z0", "0.2,-0.1", "--zeta-set", "1,0;0,0", "--zeta-set", "0.5,-0.5;0,0",
            "--zeta-set", "1,1;0,0", "--n", "10", "--samples", "2000", "--batches", "8",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let json = dir.path().join("charpoly_result.json");
    let csv = dir.path().join("charpoly_result.csv");
    let record: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(record["schema_version"], 1);
    assert_eq!(record["status"], "complete");
    assert_eq!(record["entries"].as_array().unwrap().len(), 3);
    assert_eq!(record["fits"].as_array().unwrap().len(), 1);
    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().next().unwrap(), "n,zeta_config_id,log_ratio,stderr,predicted_log_mod_C,residual");
    assert_eq!(table.lines().count(), 4);

    let out = charpoly(&["plotdata", "--record", "charpoly_result.json", "--output", "plot.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("plot.csv")).unwrap();
    let rows: Vec<_> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        for field in row.iter() {
            assert!(field.parse::<f64>().unwrap().is_finite());
        }
    }
}

#[test]
fn seed_from_environment_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed_env: Option<&str>, extra: &[&str], name: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_charpoly"));
        cmd.args(["estimate", "--zeta", "1,0", "--zeta", "0,0", "--n", "6", "--samples", "1000", "--batches", "8", "--output", name])
            .args(extra)
            .current_dir(dir.path())
            .env_remove("CHARPOLY_SEED");
        if let Some(s) = seed_env {
            cmd.env("CHARPOLY_SEED", s);
        }
        let out = cmd.output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join(name)).unwrap()).unwrap();
        (v["config"]["seed"].as_u64().unwrap(), v["entries"][0]["ratio"]["log_ratio"].as_f64().unwrap())
    };
    let (s1, r1) = run(Some("77"), &[], "a.json");
    let (s2, r2) = run(None, &["--seed", "77"], "b.json");
    let (s3, _) = run(Some("77"), &["--seed", "5"], "c.json");
    assert_eq!((s1, s2, s3), (77, 77, 5));
    assert_eq!(r1.to_bits(), r2.to_bits());
    let out = Command::new(env!("CARGO_BIN_EXE_charpoly"))
        .args(["predict"])
        .env("CHARPOLY_SEED", "not-a-number")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_quick_subset_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = charpoly(&["verify", "--quick", "--only", "matalg", "--only", "hciz", "--output", "v.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}{}", text(&out.stdout), text(&out.stderr));
    let s = text(&out.stdout);
    assert!(s.contains("suite matalg passed") && s.contains("suite hciz passed"), "{s}");
    assert!(!s.contains("landscape"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("v.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
}

#[test]
fn moments_self_test() {
    let dir = tempfile::tempdir().unwrap();
    for dist in ["gaussian", "rademacher-pair", "uniform-pair"] {
        let out = charpoly(&["moments", "--dist", dist, "--kappa20", "0.3,-0.6", "--samples", "50000"], dir.path());
        assert_eq!(out.status.code(), Some(0), "{dist}: {}", text(&out.stdout));
        assert_eq!(text(&out.stdout).matches("PASS").count(), 4);
    }
}

#[test]
fn help_and_version_exit_0() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(charpoly(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(charpoly(&["--version"], dir.path()).status.code(), Some(0));
}
