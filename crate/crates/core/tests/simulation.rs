use proptest::prelude::*;

use retroscore::simulation::{
    generate_case_control, replicate_rng, run_scenario, scenario_preset, RandomEffectLaw, RunConfig, SimMethod,
    SimulationScenario,
};

/// Under a matched design (n1/n = p) with no covariate effects, the
/// retrospective and prospective RS statistics agree on average.
#[test]
fn matched_design_rs_statistics_coincide() {
    let p: f64 = 0.25;
    let sc = SimulationScenario {
        label: "matched".into(),
        k: None,
        alpha_p: (p / (1.0 - p)).ln(),
        beta: vec![0.0, 0.0],
        gamma: vec![0.0; 10],
        sqrt_theta: 0.0,
        mafs: (1..=10).map(|j| j as f64 / 31.0).collect(),
        n0: 1500,
        n1: 500,
        random_effect_law: RandomEffectLaw::StandardNormal,
    };
    let out = run_scenario(&sc, &[SimMethod::RsAlphaP, SimMethod::RsFitted], &RunConfig::new(500, 0.05, 31)).unwrap();
    let diffs: Vec<f64> = out
        .replicates
        .iter()
        .filter_map(|r| Some(r.outcome(SimMethod::RsAlphaP)?.statistic - r.outcome(SimMethod::RsFitted)?.statistic))
        .collect();
    assert!(diffs.len() >= 490, "{} usable replicates", diffs.len());
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    assert!(mean.abs() <= 0.05, "mean difference {mean}");
}

#[test]
fn worker_count_does_not_change_results() {
    let mut sc = scenario_preset("D2", 1).unwrap();
    sc.n0 = 400;
    sc.n1 = 400;
    let methods = [SimMethod::Fs, SimMethod::RsAlphaP, SimMethod::SsFitted, SimMethod::RsMax];
    let mut cfg = RunConfig::new(12, 0.05, 2024);
    cfg.workers = 1;
    let serial = run_scenario(&sc, &methods, &cfg).unwrap();
    cfg.workers = 3;
    let parallel = run_scenario(&sc, &methods, &cfg).unwrap();
    assert_eq!(serial.replicates, parallel.replicates);
    assert_eq!(serial.table, parallel.table);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quotas_are_always_exact(
        seed in any::<u64>(),
        n0 in 1usize..60,
        n1 in 1usize..60,
        alpha_p in -3.0f64..1.0,
        sqrt_theta in 0.0f64..0.6,
    ) {
        let mut sc = scenario_preset("C3", 1).unwrap();
        sc.n0 = n0;
        sc.n1 = n1;
        sc.alpha_p = alpha_p;
        sc.sqrt_theta = sqrt_theta;
        let g = generate_case_control(&sc, &mut replicate_rng(seed, 0)).unwrap();
        prop_assert_eq!(g.dataset.n0(), n0);
        prop_assert_eq!(g.dataset.n1(), n1);
        prop_assert_eq!(g.dataset.d().iter().filter(|&&d| d == 1).count(), n1);
        prop_assert!(g.draws >= (n0 + n1) as u64);
        prop_assert!(g.dataset.y().iter().all(|&v| v == 0.0 || v == 1.0 || v == 2.0));
    }
}
