use araps::pipeline::{
    run_sweep, summarize, PipelineConfig, PipelineError, Runner, Stage, Status, SweepSpec,
};

const TINY: &str = r#"
seed = 7

[daps1]
d1 = { lo = 0.0, hi = 1.0, step = 0.5 }
a2 = { lo = 0.0, hi = 1.0, step = 0.5 }
theta1 = { lo = 0.0, hi = 1.0, step = 0.5 }
value_draws = 200
infection_draws = 50
chain = { iterations = 400, augmentation = 2, proposal = "independent", proposal_scale = 0.1 }

[aaps1]
d1 = { lo = 0.0, hi = 1.0, step = 0.5 }
a1 = { lo = 0.0, hi = 1.0, step = 0.5 }
draws = 6
value_draws = 100
chain = { iterations = 300, augmentation = 2, proposal = "independent", proposal_scale = 0.1 }

[aaps2]
draws = 30
surface_points = 5
value_draws = 50
chain = { iterations = 300, augmentation = 2, proposal = "independent", proposal_scale = 0.1 }

[daps2]
value_draws = 100
chain = { iterations = 300, augmentation = 2, proposal = "independent", proposal_scale = 0.1 }

[metamodel]
psi_d_hidden = [8]
p_a2_hidden = [8]
psi_a_hidden = [8]
em_iterations = 50

[metamodel.training]
epochs = 20
"#;

fn tiny() -> PipelineConfig {
    PipelineConfig::from_toml(TINY, &[]).unwrap()
}

#[test]
fn profiles_and_overrides() {
    let desk = PipelineConfig::from_toml("", &[]).unwrap();
    assert_eq!(desk.daps1.chain.augmentation, 40);
    assert_eq!(desk.aaps1.chain.augmentation, 80);
    assert_eq!(desk.aaps2.chain.augmentation, 120);
    assert_eq!(desk.daps2.chain.augmentation, 20);
    assert_eq!(desk.aaps1.draws, 30);
    let paper = PipelineConfig::from_toml("profile = \"paper\"", &[]).unwrap();
    assert_eq!(paper.aaps1.draws, 100);
    assert_eq!(paper.aaps2.draws, 10_000);
    let c = PipelineConfig::from_toml(TINY, &["case.omega_d2=1.3".into(), "seed=9".into()]).unwrap();
    assert_eq!(c.case.omega_d2, 1.3);
    assert_eq!(c.seed, 9);
    let round = PipelineConfig::from_toml(&c.to_toml(), &[]).unwrap();
    assert_eq!(round, c);
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = |text: &str, o: &[&str]| {
        let o: Vec<String> = o.iter().map(|s| s.to_string()).collect();
        PipelineConfig::from_toml(text, &o).unwrap_err()
    };
    assert_eq!(bad("[case]\ngamma_d = 100.0", &[]).exit_code(), 2);
    assert_eq!(bad("[case]\nbogus = 1.0", &[]).exit_code(), 2);
    assert_eq!(bad("", &["daps1.d1.step=0.3"]).exit_code(), 2);
    assert_eq!(bad("", &["nope.x=1"]).exit_code(), 2);
    assert_eq!(bad("profile = \"huge\"", &[]).exit_code(), 2);
}

#[test]
fn missing_dependency_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = Runner::new(dir.path(), tiny()).unwrap();
    let err = r.run_stage(Stage::Daps2).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("fit_psiD"), "{err}");
    assert!(matches!(summarize(dir.path()), Err(PipelineError::Manifest(_))));
}

#[test]
fn full_run_is_deterministic_and_tracked() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ra = Runner::new(a.path(), tiny()).unwrap();
    let solution = ra.run_all(false).unwrap();
    let order: Vec<&str> = solution.order().into_iter().map(|(_, d)| d).collect();
    assert_eq!(order, ["D2", "A2", "A1", "D1"]);
    for s in Stage::ALL {
        assert_eq!(ra.status(s), Status::Current, "{s}");
    }
    let sa = summarize(a.path()).unwrap();
    let d1 = sa.d1_star.as_ref().unwrap().d1_star;
    assert!((0.0..=1.0).contains(&d1));
    assert_eq!(&sa.outputs, &ra.manifest().stages.values().flat_map(|r| r.outputs.clone()).collect());
    let mut rb = Runner::new(b.path(), tiny()).unwrap();
    rb.run_all(false).unwrap();
    let sb = summarize(b.path()).unwrap();
    assert_eq!(sa, sb);

    // a second run skips everything; forcing one stage reproduces its digests
    let before = ra.manifest().clone();
    ra.run_all(false).unwrap();
    assert_eq!(ra.manifest().stages, before.stages);
    ra.run_stage(Stage::Aaps2).unwrap();
    assert_eq!(
        ra.manifest().stages["aaps2"].outputs,
        before.stages["aaps2"].outputs
    );

    // tampering with an output makes it and its consumers stale
    std::fs::write(a.path().join("aaps1_draws.csv"), "d1,a1\n").unwrap();
    assert!(matches!(ra.status(Stage::Aaps1), Status::Stale(_)));
    assert!(matches!(ra.status(Stage::Daps2), Status::Stale(_)));
    let err = ra.run_stage(Stage::FitPA2).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(matches!(summarize(a.path()), Err(PipelineError::Manifest(_))));
}

#[test]
fn changed_settings_only_invalidate_downstream() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = Runner::new(dir.path(), tiny()).unwrap();
    r.ensure(Stage::Daps1, false).unwrap();
    r.ensure(Stage::FitPsiD, false).unwrap();
    let mut cfg = tiny();
    cfg.case.t_a = 1.0;
    let r2 = Runner::new(dir.path(), cfg).unwrap();
    assert_eq!(r2.status(Stage::Daps1), Status::Current);
    let mut cfg = tiny();
    cfg.case.omega_d2 = 1.3;
    let r3 = Runner::new(dir.path(), cfg).unwrap();
    assert!(matches!(r3.status(Stage::Daps1), Status::Stale(_)));
    assert!(matches!(r3.status(Stage::FitPsiD), Status::Stale(_)));
}

#[test]
fn zero_attack_means_no_infections() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig::from_toml(TINY, &["daps1.a2={ lo = 0.0, hi = 0.0, step = 0.5 }".into()]).unwrap();
    let mut r = Runner::new(dir.path(), cfg).unwrap();
    r.run_stage(Stage::Daps1).unwrap();
    let s = summarize(dir.path()).unwrap();
    assert_eq!(s.d2_policy.unwrap().mean_expected_theta2, 0.0);
}

#[test]
fn sweeps_reuse_untouched_stages() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny();
    let mut base = Runner::new(dir.path(), cfg.clone()).unwrap();
    base.ensure(Stage::Daps1, false).unwrap();

    let empty = SweepSpec::parse("omega_d2", "").unwrap();
    assert!(run_sweep(dir.path(), &cfg, &empty, Stage::Daps1, false).unwrap().is_empty());
    let unknown = SweepSpec::parse("omega", "1").unwrap();
    assert_eq!(run_sweep(dir.path(), &cfg, &unknown, Stage::Daps1, false).unwrap_err().exit_code(), 2);

    let spec = SweepSpec::parse("t_d,t_a", "1:1.2,1.2:1").unwrap();
    assert!(!spec.affects(Stage::Daps1));
    assert!(spec.affects(Stage::Aaps1) && spec.affects(Stage::Daps2));
    let rows = run_sweep(dir.path(), &cfg, &spec, Stage::Daps1, false).unwrap();
    assert_eq!(rows.len(), 2);
    let base_digest = &base.manifest().stages["daps1"].outputs;
    for r in &rows {
        let m = araps::pipeline::Manifest::load(&r.dir).unwrap();
        assert_eq!(&m.stages["daps1"].outputs, base_digest);
        assert!(r.deploy_area.is_some() && r.no_attack_area.is_none());
    }
    assert!(dir.path().join("sweeps/t_d+t_a/trend.csv").exists());

    let spec = SweepSpec::parse("omega_d2", "0.4,1.7").unwrap();
    let rows = run_sweep(dir.path(), &cfg, &spec, Stage::Daps1, false).unwrap();
    let m = araps::pipeline::Manifest::load(&rows[0].dir).unwrap();
    assert_ne!(&m.stages["daps1"].outputs, base_digest);
}
