use super::*;
use crate::data::{make_synthetic, split_indices, LabelRule, LeafSpec, SyntheticSpec};

fn leaves_spec(leaves: &[(&str, usize, LabelRule)], noise: f64) -> SyntheticSpec {
    SyntheticSpec {
        attributes: vec!["g".into()],
        dim: 2,
        noise,
        leaves: leaves
            .iter()
            .map(|(c, n, rule)| LeafSpec {
                categories: vec![c.to_string()],
                n: *n,
                rule: rule.clone(),
            })
            .collect(),
        exclude_group_features: false,
    }
}

fn constants() -> (Dataset, ExperimentConfig) {
    let spec = leaves_spec(
        &[
            ("A", 30, LabelRule::Constant { label: 1 }),
            ("B", 10, LabelRule::Constant { label: 0 }),
        ],
        0.0,
    );
    let ds = make_synthetic(&spec, 4).unwrap();
    let mut cfg = ExperimentConfig::new(
        HierarchySpec::attribute_order(vec!["g".into()]),
        vec![LearnerSpec::Constant],
        EpsilonSpec::constant(0.0),
    );
    cfg.test_fraction = 0.25;
    (ds, cfg)
}

#[test]
fn single_trial_erm_is_hand_checkable() {
    let (ds, mut cfg) = constants();
    cfg.trials = 1;
    cfg.methods = vec![Method::Erm];
    let report = run_experiment_on(&cfg, &ds, Exec::Sequential).unwrap();
    assert_eq!(report.groups.len(), 3);
    // Training majority is label 1, so B is always wrong and A always right.
    let (_, test) = split_indices(ds.len(), &SplitSpec { test_fraction: 0.25, seed: 0, trial_index: 0 }).unwrap();
    let b_test = test.iter().filter(|&&i| ds.row(i).category("g") == Some("B")).count();
    let row = |g: &str| report.row(Method::Erm, "constant", g).unwrap();
    assert_eq!(row("A").mean_error, Some(0.0));
    assert_eq!(row("B").mean_error, if b_test > 0 { Some(1.0) } else { None });
    assert_eq!(row("ALL").mean_error, Some(b_test as f64 / test.len() as f64));
    assert_eq!(row("ALL").mean_n_g, 10.0);
    assert_eq!(row("ALL").stderr, None);
}

#[test]
fn report_shape_and_aggregates() {
    let (ds, mut cfg) = constants();
    cfg.methods = Method::ALL.to_vec();
    cfg.learners = vec![LearnerSpec::Constant, LearnerSpec::tree(2)];
    let report = run_experiment_on(&cfg, &ds, Exec::Parallel).unwrap();
    let tree = cfg.hierarchy.build(ds.attributes()).unwrap();
    assert_eq!(report.groups.len(), 5 * 2 * tree.len());
    for m in Method::ALL {
        for l in report.learners() {
            let ids: Vec<&str> = report.rows(m, &l).map(|r| r.group_id.as_str()).collect();
            let expected: Vec<&str> = tree.nodes().iter().map(|n| n.group.id.as_str()).collect();
            assert_eq!(ids, expected);
        }
    }
    for r in &report.groups {
        let present: Vec<f64> = r.trial_errors.iter().flatten().copied().collect();
        assert_eq!(r.trials_present, present.len());
        assert_eq!(r.trial_errors.len(), 10);
        if present.is_empty() {
            assert!(r.mean_error.is_none());
            continue;
        }
        let k = present.len() as f64;
        let mean = present.iter().sum::<f64>() / k;
        assert!((r.mean_error.unwrap() - mean).abs() < 1e-12);
        if present.len() > 1 {
            let var = present.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
            assert!((r.stderr.unwrap() - (var / k).sqrt()).abs() < 1e-12);
        }
    }
    assert!(report.trials.iter().all(|t| t.mgl_guarantee_violations == Some(0)));
    let mut csv = Vec::new();
    report.write_csv_to(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 1 + report.groups.len());
    assert!(text.starts_with("method,learner,group_id,depth,mean_error,stderr,mean_n_g,trials_present\n"));
}

#[test]
fn deterministic_across_execution_modes() {
    let (ds, mut cfg) = constants();
    cfg.learners = vec![LearnerSpec::bagged(3, 2, 1)];
    let render = |exec| {
        let r = run_experiment_on(&cfg, &ds, exec).unwrap();
        let mut out = Vec::new();
        r.write_csv_to(&mut out).unwrap();
        (out, serde_json::to_string(&r).unwrap())
    };
    let a = render(Exec::Parallel);
    assert_eq!(a, render(Exec::Parallel));
    assert_eq!(a, render(Exec::Sequential));
}

#[test]
fn planted_leaves_favour_mgl_tree() {
    let spec = leaves_spec(
        &[
            ("A", 300, LabelRule::Linear { weights: vec![1.0, 0.0], bias: 0.0 }),
            ("B", 60, LabelRule::Linear { weights: vec![-1.0, 0.0], bias: 0.0 }),
        ],
        0.0,
    );
    let ds = make_synthetic(&spec, 2).unwrap();
    let mut cfg = ExperimentConfig::new(
        HierarchySpec::attribute_order(vec!["g".into()]),
        vec![LearnerSpec::logistic()],
        EpsilonSpec::Scaled { c: 0.1 },
    );
    cfg.trials = 5;
    let report = run_experiment_on(&cfg, &ds, Exec::Parallel).unwrap();
    for g in ["A", "B"] {
        let mgl = report.row(Method::MglTree, "logistic", g).unwrap().mean_error.unwrap();
        let erm = report.row(Method::Erm, "logistic", g).unwrap().mean_error.unwrap();
        assert!(mgl <= erm, "{g}: {mgl} > {erm}");
    }
    let deltas = compare(&report, Method::MglTree, Method::Erm).unwrap();
    let b = deltas.iter().find(|d| d.group_id == "B").unwrap();
    assert!(b.delta.unwrap() < 0.0);
}

#[test]
fn compare_contracts() {
    let (ds, cfg) = constants();
    let report = run_experiment_on(&cfg, &ds, Exec::Parallel).unwrap();
    let same = compare(&report, Method::Erm, Method::Erm).unwrap();
    assert_eq!(same.len(), 3);
    assert!(same.iter().all(|d| d.delta.is_none_or(|x| x == 0.0)));
    let d = compare(&report, Method::MglTree, Method::Erm).unwrap();
    assert!(d.windows(2).all(|w| w[0].delta.unwrap() <= w[1].delta.unwrap()));
    assert_eq!(d[0].group_id, "B");
    assert!(d[0].delta.unwrap() < 0.0);
    assert!(matches!(compare(&report, Method::Decoupled, Method::Erm), Err(Error::Config(_))));
    let mut out = Vec::new();
    write_compare_csv(&d, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 1 + 3);
    assert!(text.lines().all(|l| l.split(',').count() == 7));
}

#[test]
fn failures_name_method_and_trial() {
    let spec = leaves_spec(
        &[
            ("A", 20, LabelRule::Constant { label: 0 }),
            ("B", 20, LabelRule::Constant { label: 0 }),
            ("C", 80, LabelRule::Constant { label: 1 }),
        ],
        0.0,
    );
    let ds = make_synthetic(&spec, 0).unwrap();
    let mut cfg = ExperimentConfig::new(
        HierarchySpec::attribute_order(vec!["g".into()]),
        vec![LearnerSpec::Constant],
        EpsilonSpec::constant(0.0),
    );
    cfg.prepend_cap = Some(1);
    match run_experiment_on(&cfg, &ds, Exec::Sequential) {
        Err(Error::Trial { method, trial, source }) => {
            assert_eq!(method, "prepend[constant]");
            assert_eq!(trial, 0);
            assert!(matches!(*source, Error::PrependCap { .. }));
        }
        other => panic!("expected trial error, got {other:?}"),
    }
}

#[test]
fn config_validation_and_json() {
    let (_, cfg) = constants();
    let json = serde_json::to_string(&cfg).unwrap();
    let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(cfg, back);
    let minimal = r#"{"hierarchy":{"attribute_order":["g"]},"learners":[{"kind":"constant"}],"epsilon":{"kind":"constant","value":"inf"}}"#;
    let parsed: ExperimentConfig = serde_json::from_str(minimal).unwrap();
    assert_eq!(parsed.trials, 10);
    assert_eq!(parsed.test_fraction, 0.2);
    assert_eq!(parsed.methods, default_methods());
    assert!(serde_json::from_str::<ExperimentConfig>(&minimal.replace("\"learners\"", "\"bogus\":1,\"learners\"")).is_err());
    for bad in [
        ExperimentConfig { trials: 0, ..cfg.clone() },
        ExperimentConfig { test_fraction: 1.0, ..cfg.clone() },
        ExperimentConfig { methods: vec![], ..cfg.clone() },
        ExperimentConfig { methods: vec![Method::Erm, Method::Erm], ..cfg.clone() },
        ExperimentConfig { learners: vec![], ..cfg.clone() },
    ] {
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }
    assert!(Method::parse("mgl_tree").is_ok());
    assert!(Method::parse("boosting").is_err());
}
