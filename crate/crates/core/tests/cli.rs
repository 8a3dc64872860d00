use std::path::PathBuf;
use std::process::{Command, Output};

use comp_oc::cli::Report;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn comp_oc(args: &[&str], out: &std::path::Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_comp-oc"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("COMP_OC_SEED")
        .output()
        .expect("binary runs")
}

fn report(out: &std::path::Path) -> Report {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

fn csv_column(path: &std::path::Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

#[test]
fn example2_reports_convex_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("example2.config.json");
    let out = comp_oc(&["--config", cfg.to_str().unwrap(), "run"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(dir.path());
    let cert = rep.certificate.unwrap();
    assert_eq!(cert.verdict, comp_oc::ocp::Verdict::ConvexOnly);
    assert!(cert.min_eig.abs() <= 1e-10);
    assert!(rep.ledger.is_some() && rep.points.iter().all(|p| p.plan.is_some()));
}

#[test]
fn lq3_meets_tenth() {
    let dir = tempfile::tempdir().unwrap();
    let inst = fixture("lq3.json");
    let out = comp_oc(&["eval", inst.to_str().unwrap(), "--epsilon", "0.1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(dir.path());
    let ev = rep.points[0].evaluation.as_ref().unwrap();
    assert!(ev.weak_err_max <= 0.1);
    assert_eq!(csv_column(&dir.path().join("weak_error.csv"), "weak_err_max"), vec![ev.weak_err_max]);
}

#[test]
fn missing_horizon_exits_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("malformed.config.json");
    let out = comp_oc(&["--config", cfg.to_str().unwrap(), "run"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("horizon"));
}

#[test]
fn unknown_config_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"instance": "x.json", "epsilon": [0.1]}"#).unwrap();
    let out = comp_oc(&["--config", cfg.to_str().unwrap(), "run"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epsilon"));
}

#[test]
fn affine_dynamics_have_linear_features() {
    let dir = tempfile::tempdir().unwrap();
    let inst = fixture("example2.json");
    let out = comp_oc(&["features", inst.to_str().unwrap()], dir.path());
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("features f: (1, 0, 0, 0)"));
}

#[test]
fn fitrate_on_x_squared_decreases_to_its_floor() {
    let dir = tempfile::tempdir().unwrap();
    let inst = fixture("example2.json");
    let out = comp_oc(&["fitrate", inst.to_str().unwrap(), "--widths", "8,16,32,64,128"], dir.path());
    assert!(out.status.success());
    let errs = csv_column(&dir.path().join("fitrate.csv"), "sup_error");
    assert_eq!(errs.len(), 5);
    // The 33-point training grid caps accuracy near 1e-4 on [-2, 2].
    for w in errs.windows(2) {
        assert!(w[1] <= w[0].max(2e-4), "{errs:?}");
    }
    assert!(errs[4] < errs[0]);
}

#[test]
fn epsilon_sweep_doubles_k() {
    let dir = tempfile::tempdir().unwrap();
    let inst = fixture("lq3.json");
    let out = comp_oc(&["sweep", inst.to_str().unwrap(), "--epsilon", "0.5,0.25,0.125"], dir.path());
    assert!(out.status.success());
    let k = csv_column(&dir.path().join("weak_error.csv"), "k_bar");
    assert_eq!(k, vec![1.0, 2.0, 4.0]);
}

#[test]
fn width_sweep_keeps_the_bound_with_measured_delta() {
    let dir = tempfile::tempdir().unwrap();
    let inst = fixture("example2.json");
    let out = comp_oc(&["sweep", inst.to_str().unwrap(), "--epsilon", "0.25", "--widths", "16,64,256"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rep = report(dir.path());
    assert_eq!(rep.points.len(), 3);
    for p in &rep.points {
        let ev = p.evaluation.as_ref().unwrap();
        assert_eq!(Some(ev.width), p.forced_width);
        assert!(ev.weak_err_max <= ev.bound_predicted, "{p:?}");
    }
}

#[test]
fn same_seed_same_hash_and_seed_env_changes_it() {
    let inst = fixture("example2.json");
    let run = |seed: Option<&str>| {
        let dir = tempfile::tempdir().unwrap();
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_comp-oc"));
        cmd.args(["synth", inst.to_str().unwrap(), "--out"]).arg(dir.path());
        match seed {
            Some(s) => cmd.env("COMP_OC_SEED", s),
            None => cmd.env_remove("COMP_OC_SEED"),
        };
        assert!(cmd.output().unwrap().status.success());
        report(dir.path())
    };
    let a = run(None);
    let b = run(None);
    assert_eq!(a.content_hash, b.content_hash);
    assert_eq!(a.content_hash, a.compute_hash());
    let c = run(Some("11"));
    assert_eq!(c.seed, 11);
    assert_ne!(a.content_hash, c.content_hash);
}

#[test]
fn print_config_dumps_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = comp_oc(&["--print-config", "run"], dir.path());
    assert!(out.status.success());
    let cfg: comp_oc::cli::Config = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cfg, comp_oc::cli::Config::default());
}

#[test]
fn infeasible_plan_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.json");
    let inst = fixture("lq3.json");
    std::fs::write(
        &cfg,
        serde_json::json!({"instance": inst, "stages": ["plan"], "epsilons": [0.1], "width_ceiling": 10}).to_string(),
    )
    .unwrap();
    let out = comp_oc(&["--config", cfg.to_str().unwrap(), "run"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn uncertified_instance_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(fixture("example2.json")).unwrap();
    // A concave terminal cost.
    let path = dir.path().join("concave.json");
    std::fs::write(&path, text.replacen("\"1.0\"\n          ]", "\"-1.0\"\n          ]", 1)).unwrap();
    let out = comp_oc(&["certify", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
