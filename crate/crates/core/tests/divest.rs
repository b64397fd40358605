use ambistop::learning::{simulate_paths, LearningMode, ScenarioSampling, SimulationOptions};
use ambistop::lsmc::{apply_policy, closure_histogram, fit_policy, lsmc_value, tree_oracle_divest, LsmcConfig};
use ambistop::scenario::{ClosureCost, DivestModel, DivestModelParts, NoiseLaw, Revenue, ScenarioSet};
use ambistop::SimplexPoint;
use nalgebra::DMatrix;

fn small(noise: NoiseLaw) -> DivestModel {
    DivestModel::new(DivestModelParts {
        scenarios: ScenarioSet::new(["up", "down"]).unwrap(),
        phi: DMatrix::from_element(1, 1, 0.6),
        vol: DMatrix::from_element(1, 1, 0.5),
        mu_paths: vec![vec![vec![0.5]; 4], vec![vec![-0.8]; 4]],
        signal_means: vec![vec![0.0; 4], vec![1.0; 4]],
        sigma_s: 1.0 / 3f64.sqrt(),
        beta: 0.9,
        revenue: Revenue::Linear { intercept: 0.2, coefficients: vec![1.0] },
        closure_cost: ClosureCost::Constant(-0.5),
        factor_noise: noise,
        signal_noise: noise,
    })
    .unwrap()
}

#[test]
fn lsmc_is_close_to_the_tree() {
    let m = small(NoiseLaw::ThreePoint);
    let q = SimplexPoint::uniform(2);
    let oracle = tree_oracle_divest(&m, &q).unwrap();
    let sol = lsmc_value(&m, &q, &LsmcConfig { n_paths: 20_000, ..LsmcConfig::default() }).unwrap();
    assert!((sol.value - oracle).abs() < 4.0 * sol.std_error, "{} vs {oracle}", sol.value);
    // the regression policy is suboptimal, never better than the oracle by much
    assert!(sol.value < oracle + 4.0 * sol.std_error);
}

#[test]
fn value_is_at_least_the_salvage() {
    let m = small(NoiseLaw::Gaussian);
    for w in [0.1, 0.5, 0.9] {
        let q = SimplexPoint::make_simplex(&[w, 1.0 - w]).unwrap();
        let sol = lsmc_value(&m, &q, &LsmcConfig { n_paths: 4000, ..LsmcConfig::default() }).unwrap();
        assert!(sol.value >= 0.5 - 3.0 * sol.std_error);
    }
}

#[test]
fn revealed_beats_learning_beats_frozen() {
    let m = small(NoiseLaw::Gaussian);
    let q = SimplexPoint::uniform(2);
    let run = |mode| lsmc_value(&m, &q, &LsmcConfig { n_paths: 20_000, mode, ..LsmcConfig::default() }).unwrap();
    let (rev, learn, frozen) = (run(LearningMode::Revealed), run(LearningMode::Learning), run(LearningMode::Frozen));
    assert!(rev.value >= learn.value - rev.ci_half_width() - learn.ci_half_width());
    assert!(learn.value >= frozen.value - learn.ci_half_width() - frozen.ci_half_width());
}

#[test]
fn histogram_rows_sum_to_scenario_mass() {
    let m = small(NoiseLaw::Gaussian);
    let q = SimplexPoint::uniform(2);
    let sol = lsmc_value(&m, &q, &LsmcConfig { n_paths: 4000, ..LsmcConfig::default() }).unwrap();
    let h = closure_histogram(&sol, m.horizon(), 2);
    assert_eq!(h.len(), m.horizon() + 1);
    let total: f64 = h.iter().flatten().sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn stratified_and_mixture_agree_on_average() {
    let m = small(NoiseLaw::Gaussian);
    let q = SimplexPoint::make_simplex(&[0.7, 0.3]).unwrap();
    let base = LsmcConfig { n_paths: 20_000, ..LsmcConfig::default() };
    let mix = lsmc_value(&m, &q, &base).unwrap();
    let strat = lsmc_value(&m, &q, &LsmcConfig { sampling: ScenarioSampling::Stratified, ..base }).unwrap();
    let tol = 4.0 * (mix.std_error.powi(2) + strat.std_error.powi(2)).sqrt();
    assert!(tol > 0.0 && (mix.value - strat.value).abs() < tol, "{} vs {}", mix.value, strat.value);
}

#[test]
fn policies_transfer_between_priors() {
    let m = small(NoiseLaw::Gaussian);
    let p = SimplexPoint::uniform(2);
    let cfg = LsmcConfig { n_paths: 4000, seed: 3, ..LsmcConfig::default() };
    let opts = SimulationOptions::default();
    let own = simulate_paths(&m, &p, cfg.n_paths, cfg.seed, opts).unwrap();
    let fitted = fit_policy(&m, &own, &cfg).unwrap();
    let again = apply_policy(&m, &fitted.policy, &own);
    assert_eq!(again.value, fitted.value);
    // the fitted policy is optimal in sample, so a policy fitted elsewhere
    // does no better on the same paths
    let q = SimplexPoint::make_simplex(&[0.9, 0.1]).unwrap();
    let other = fit_policy(&m, &simulate_paths(&m, &q, cfg.n_paths, cfg.seed, opts).unwrap(), &cfg).unwrap();
    let moved = apply_policy(&m, &other.policy, &own);
    assert!(moved.value <= fitted.value + 3.0 * fitted.std_error);
}
