use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
seed = 3

[daps1]
d1 = { lo = 0.0, hi = 1.0, step = 0.5 }
a2 = { lo = 0.0, hi = 1.0, step = 0.5 }
theta1 = { lo = 0.0, hi = 1.0, step = 0.5 }
value_draws = 100
infection_draws = 20
chain = { iterations = 300, augmentation = 2, proposal = "independent", proposal_scale = 0.1 }

[aaps1]
d1 = { lo = 0.0, hi = 1.0, step = 0.5 }
a1 = { lo = 0.0, hi = 1.0, step = 0.5 }
draws = 4
value_draws = 50
chain = { iterations = 300, augmentation = 2, proposal = "independent", proposal_scale = 0.1 }

[aaps2]
draws = 20
surface_points = 5
value_draws = 20
chain = { iterations = 300, augmentation = 2, proposal = "independent", proposal_scale = 0.1 }

[daps2]
value_draws = 50
chain = { iterations = 300, augmentation = 2, proposal = "independent", proposal_scale = 0.1 }

[metamodel]
psi_d_hidden = [4]
p_a2_hidden = [4]
psi_a_hidden = [4]
em_iterations = 20

[metamodel.training]
epochs = 5
"#;

fn araps(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_araps"))
        .arg("--run-dir")
        .arg(dir.join("run"))
        .args(args)
        .env_remove("ARAPS_CONFIG")
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let cfg = cfg.to_str().unwrap();

    let ok = araps(dir.path(), &["--config", cfg, "validate"]);
    assert!(ok.status.success(), "{}", text(&ok));
    let bad = araps(dir.path(), &["--config", cfg, "--set", "case.gamma_d=10", "validate"]);
    assert_eq!(bad.status.code(), Some(2), "{}", text(&bad));
    let bad = araps(dir.path(), &["--profile", "huge", "validate"]);
    assert_eq!(bad.status.code(), Some(2));
    let bad = araps(dir.path(), &["--config", cfg, "run", "daps9"]);
    assert_eq!(bad.status.code(), Some(2));
    let dep = araps(dir.path(), &["--config", cfg, "run", "fit_psiD"]);
    assert_eq!(dep.status.code(), Some(3), "{}", text(&dep));
    assert!(text(&dep).contains("daps1"));
    let none = araps(dir.path(), &["summarize"]);
    assert_eq!(none.status.code(), Some(1));
}

#[test]
fn full_run_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();

    let out = Command::new(env!("CARGO_BIN_EXE_araps"))
        .args(["--run-dir", dir.path().join("run").to_str().unwrap(), "--workers", "1", "run", "all"])
        .env("ARAPS_CONFIG", &cfg)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", text(&out));
    assert!(text(&out).contains("solved D2, A2, A1, D1"), "{}", text(&out));

    // the run directory's saved config is picked up without --config
    let again = araps(dir.path(), &["run", "daps2"]);
    assert!(text(&again).contains("up to date"), "{}", text(&again));
    let status = araps(dir.path(), &["validate"]);
    assert_eq!(text(&status).matches("current").count(), 8, "{}", text(&status));

    let summary = araps(dir.path(), &["summarize"]);
    assert!(summary.status.success());
    let json: serde_json::Value = serde_json::from_slice(&summary.stdout).unwrap();
    let d1 = json["d1_star"]["d1_star"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&d1));

    let report = araps(dir.path(), &["report"]);
    assert!(report.status.success());
    assert!(String::from_utf8_lossy(&report.stdout).starts_with('#'));

    let sweep = araps(dir.path(), &["sweep", "omega_d2", "--values", "0.5,1.5", "--until", "daps1"]);
    assert!(sweep.status.success(), "{}", text(&sweep));
    let table = String::from_utf8_lossy(&sweep.stdout);
    assert_eq!(table.lines().count(), 3, "{table}");
    assert!(table.starts_with("omega_d2,deploy_area"));
    let unknown = araps(dir.path(), &["sweep", "omega", "--values", "1"]);
    assert_eq!(unknown.status.code(), Some(2));
}
