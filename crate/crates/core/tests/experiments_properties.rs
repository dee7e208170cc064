use burstsim::experiments::{
    dynkin_residual, limit_marginals, parse_config, run_trajectory_convergence, DynkinSettings, InitialLaw,
    Simulator, TrajectoryConvergenceConfig,
};
use burstsim::metrics::{w1_empirical, w1_null_scale, SampleSet};
use burstsim::model::{build_gene_model, GeneModelParams, Rate};
use burstsim::test_functions::{Bump, TestFunction};

fn saturating_gene(scale: f64) -> GeneModelParams {
    GeneModelParams::new(1.0, Rate::saturating(1.0, 2.0, 1.0, 0).unwrap(), 1.0, scale).unwrap()
}

#[test]
fn standard_errors_shrink_like_one_over_root_n() {
    let (_, limit) = build_gene_model(&saturating_gene(50.0)).unwrap();
    let bump = Bump::new(vec![1.0], 0.8, 1.0);
    let fs: [&dyn TestFunction; 1] = [&bump];
    let settings = DynkinSettings::default();
    let se = |reps: usize| {
        dynkin_residual(Simulator::Pdmp(&limit), &fs, &[1.0], 1.0, reps, 31, &settings).unwrap()[0].std_error
    };
    let ratio = se(500) / se(2000);
    assert!((1.6..=2.4).contains(&ratio), "ratio {ratio}");
}

#[test]
fn independent_limit_ensembles_agree_in_law() {
    let (_, limit) = build_gene_model(&saturating_gene(50.0)).unwrap();
    let initial = InitialLaw::Point { x: vec![0.5] };
    let times = [0.5, 2.0];
    let a = limit_marginals(&limit, &initial, &times, 4000, 1).unwrap();
    let b = limit_marginals(&limit, &initial, &times, 4000, 2).unwrap();
    for (j, t) in times.iter().enumerate() {
        let sa = SampleSet::scalars(a.column(j, 0, 0..a.replicas())).unwrap();
        let sb = SampleSet::scalars(b.column(j, 0, 0..b.replicas())).unwrap();
        let w1 = w1_empirical(&sa, &sb).unwrap();
        let scale = w1_null_scale(&sa, &sb).unwrap();
        assert!(w1 < 3.0 * scale, "t = {t}: W1 {w1} vs null scale {scale}");
    }
}

#[test]
fn reports_regenerate_byte_for_byte() {
    let cfg: TrajectoryConvergenceConfig = parse_config(
        r#"{"model": {"kind": "gene", "gene": {"r": 1, "lambda": 1, "c": {"kind": "constant", "value": 2}}},
            "scales": [5, 20], "times": [0.5, 1], "replicas": 300, "bootstrap": 20, "projections": 8}"#,
    )
    .unwrap();
    let render = |seed| {
        let mut buf = Vec::new();
        run_trajectory_convergence(&cfg, seed).unwrap().report(seed).write_csv(&mut buf).unwrap();
        buf
    };
    let first = render(17);
    assert_eq!(first, render(17));
    assert_ne!(first, render(18));
}
