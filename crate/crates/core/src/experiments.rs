//! Reproducible pipelines for the stock and divestment studies and the
//! small-instance certification, producing long-format result tables.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::AmbiguityFunction;
use crate::error::{Error, Result};
use crate::fd::{
    extract_boundary, price_drift_prior, scenario_expectations, solve_vi_with, stock_value_with, FdConfig, FdGrid,
};
use crate::learning::{simulate_paths, LearningMode, ScenarioSampling, SimulationOptions};
use crate::lsmc::{apply_policy, closure_histogram, fit_policy, lsmc_value, DivestSolution, LsmcConfig};
use crate::minimax::{
    dual_value, outer_minimize, primal_value, InnerOutcome, InnerSolver, OuterConfig, OuterResult, SmallInstance,
};
use crate::scenario::{DivestModel, GbmStockModel, SimplexPoint};

/// One long-format result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub param_name: String,
    pub param_value: f64,
    pub quantity: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn push(&mut self, experiment: &str, param_name: &str, param_value: f64, quantity: &str, value: f64) {
        self.rows.push(ResultRow {
            experiment: experiment.to_string(),
            param_name: param_name.to_string(),
            param_value,
            quantity: quantity.to_string(),
            value,
        });
    }

    pub fn extend(&mut self, other: ResultTable) {
        self.rows.extend(other.rows);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `(param_value, value)` pairs for one quantity, in row order.
    pub fn series(&self, experiment: &str, quantity: &str) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.experiment == experiment && r.quantity == quantity)
            .map(|r| (r.param_value, r.value))
            .collect()
    }

    pub fn get(&self, experiment: &str, param_value: f64, quantity: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.experiment == experiment && r.quantity == quantity && r.param_value == param_value)
            .map(|r| r.value)
    }

    /// Experiments present, in order of first appearance.
    pub fn experiments(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.experiment) {
                out.push(r.experiment.clone());
            }
        }
        out
    }

    pub fn subset(&self, experiment: &str) -> ResultTable {
        ResultTable { rows: self.rows.iter().filter(|r| r.experiment == experiment).cloned().collect() }
    }
}

/// Inner solver for the stock: finite differences under `P^q`.
pub struct StockSolver {
    pub model: GbmStockModel,
    pub grid: FdGrid,
    pub config: FdConfig,
}

impl StockSolver {
    pub fn new(model: GbmStockModel, nx: usize, nt: usize) -> Result<Self> {
        let grid = FdGrid::centered(&model, nx, nt)?;
        Ok(Self { model, grid, config: FdConfig::default() })
    }
}

impl InnerSolver for StockSolver {
    fn n_scenarios(&self) -> usize {
        self.model.n_scenarios()
    }

    fn solve(&self, q: &SimplexPoint) -> Result<InnerOutcome> {
        let surface = solve_vi_with(&self.model, q, &self.grid, &self.config)?;
        let value = self.model.s0() + surface.value_at(0, self.model.x0());
        let expectations = scenario_expectations(&self.model, &surface, &self.config)?;
        Ok(InnerOutcome { value, expectations: Some(expectations) })
    }

    fn value(&self, q: &SimplexPoint) -> Result<f64> {
        stock_value_with(&self.model, q, &self.grid, &self.config)
    }
}

/// Inner solver for the divestment problem: least-squares Monte Carlo with
/// scenario-stratified paths, so that every prior reuses the same noise.
pub struct DivestSolver {
    pub model: DivestModel,
    pub config: LsmcConfig,
}

impl DivestSolver {
    pub fn new(model: DivestModel, mut config: LsmcConfig) -> Self {
        config.sampling = ScenarioSampling::Stratified;
        Self { model, config }
    }
}

impl InnerSolver for DivestSolver {
    fn n_scenarios(&self) -> usize {
        self.model.n_scenarios()
    }

    fn solve(&self, q: &SimplexPoint) -> Result<InnerOutcome> {
        let sol = lsmc_value(&self.model, q, &self.config)?;
        let expectations = sol.scenario_values.iter().map(|v| v.unwrap_or(f64::NAN)).collect();
        Ok(InnerOutcome { value: sol.value, expectations: Some(expectations) })
    }
}

/// Parameters of the stock study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StockSpec {
    pub s0: f64,
    pub r: f64,
    pub horizon: f64,
    pub drifts: Vec<f64>,
    pub prior: Vec<f64>,
    pub sigma: f64,
    pub lambdas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub nx: usize,
    pub nt: usize,
}

impl Default for StockSpec {
    fn default() -> Self {
        Self {
            s0: 1.0,
            r: 0.02,
            horizon: 5.0,
            drifts: vec![-0.05, 0.05, 0.15],
            prior: vec![1.0 / 3.0; 3],
            sigma: 0.3,
            lambdas: vec![-5.0, -2.0, -1.0, -0.5, 0.5, 0.9],
            sigmas: vec![0.10, 0.15, 0.20, 0.25, 0.30],
            nx: 201,
            nt: 100,
        }
    }
}

impl StockSpec {
    pub fn model(&self, sigma: f64) -> Result<GbmStockModel> {
        GbmStockModel::new(self.s0, sigma, self.r, self.horizon, self.drifts.clone())
    }

    pub fn prior(&self) -> Result<SimplexPoint> {
        SimplexPoint::make_simplex(&self.prior)
    }

    fn check(&self) -> Result<()> {
        if self.lambdas.is_empty() || self.sigmas.is_empty() {
            return Err(Error::InvalidParameter("parameter lists must be non-empty".into()));
        }
        Ok(())
    }
}

/// Dual value of the stock problem for one distortion and volatility.
pub fn stock_dual(spec: &StockSpec, f: &AmbiguityFunction, sigma: f64) -> Result<OuterResult> {
    let solver = StockSolver::new(spec.model(sigma)?, spec.nx, spec.nt)?;
    outer_minimize(&solver, f, &spec.prior()?, &OuterConfig::default())
}

fn nondecreasing(values: &[f64], tol: f64) -> bool {
    values.windows(2).all(|w| w[1] >= w[0] - tol)
}

/// Dual value and minimising prior as functions of the power exponent.
pub fn run_stock_ambiguity_sweep(spec: &StockSpec) -> Result<ResultTable> {
    spec.check()?;
    let results: Vec<Result<OuterResult>> = spec
        .lambdas
        .par_iter()
        .map(|l| stock_dual(spec, &AmbiguityFunction::power(*l)?, spec.sigma))
        .collect();
    let mut table = ResultTable::default();
    let mut values = Vec::new();
    for (l, res) in spec.lambdas.iter().zip(results) {
        let res = res?;
        table.push("fig2", "lambda", *l, "value", res.value);
        for (i, q) in res.q_star.weights().iter().enumerate() {
            table.push("fig2", "lambda", *l, &format!("q{}", i + 1), *q);
        }
        values.push(res.value);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|a, b| spec.lambdas[*a].total_cmp(&spec.lambdas[*b]));
    let sorted: Vec<f64> = order.iter().map(|i| values[*i]).collect();
    let ok = nondecreasing(&sorted, 1e-4);
    table.push("fig2", "lambda", 0.0, "nondecreasing_in_lambda", if ok { 1.0 } else { 0.0 });
    Ok(table)
}

/// Dual value over a volatility grid for every exponent.
pub fn run_sigma_sweep(spec: &StockSpec) -> Result<ResultTable> {
    spec.check()?;
    let jobs: Vec<(f64, f64)> = spec.lambdas.iter().flat_map(|l| spec.sigmas.iter().map(move |s| (*l, *s))).collect();
    let results: Vec<Result<OuterResult>> =
        jobs.par_iter().map(|(l, s)| stock_dual(spec, &AmbiguityFunction::power(*l)?, *s)).collect();
    let mut table = ResultTable::default();
    let mut by_lambda: Vec<Vec<f64>> = vec![Vec::new(); spec.lambdas.len()];
    for (k, ((l, s), res)) in jobs.iter().zip(results).enumerate() {
        let res = res?;
        table.push("fig3", "sigma", *s, &format!("value_lambda={l}"), res.value);
        by_lambda[k / spec.sigmas.len()].push(res.value);
    }
    let mut order: Vec<usize> = (0..spec.sigmas.len()).collect();
    order.sort_by(|a, b| spec.sigmas[*a].total_cmp(&spec.sigmas[*b]));
    for (l, vals) in spec.lambdas.iter().zip(&by_lambda) {
        let decreasing: Vec<f64> = order.iter().map(|i| -vals[*i]).collect();
        let ok = nondecreasing(&decreasing, 1e-4);
        table.push("fig3", "sigma", 0.0, &format!("nonincreasing_lambda={l}"), if ok { 1.0 } else { 0.0 });
    }
    Ok(table)
}

fn boundary_rows(model: &GbmStockModel, grid: &FdGrid, q: &SimplexPoint, experiment: &str, tag: &str) -> Result<ResultTable> {
    let surface = solve_vi_with(model, q, grid, &FdConfig::default())?;
    let prior = price_drift_prior(model, q)?;
    let mut t = ResultTable::default();
    for (n, b) in extract_boundary(&surface).iter().enumerate() {
        if let Some(x) = b {
            let time = grid.t(n);
            t.push(experiment, "t", time, &format!("boundary{tag}"), x.exp());
            t.push(experiment, "t", time, &format!("drift{tag}"), prior.gamma_drift(time, *x));
        }
    }
    t.push(experiment, "t", 0.0, &format!("value{tag}"), model.s0() + surface.value_at(0, model.x0()));
    Ok(t)
}

/// Exercise boundary in price units and the filtered drift on it under the
/// reference prior, without ambiguity.
pub fn run_prior_boundary(spec: &StockSpec) -> Result<ResultTable> {
    let model = spec.model(spec.sigma)?;
    let grid = FdGrid::centered(&model, spec.nx, spec.nt)?;
    boundary_rows(&model, &grid, &spec.prior()?, "fig1", "")
}

/// Exercise boundary and filtered drift for the minimising prior at each
/// exponent.
pub fn run_stock_boundaries(spec: &StockSpec) -> Result<ResultTable> {
    spec.check()?;
    let model = spec.model(spec.sigma)?;
    let grid = FdGrid::centered(&model, spec.nx, spec.nt)?;
    let results: Vec<Result<ResultTable>> = spec
        .lambdas
        .par_iter()
        .map(|l| {
            let res = stock_dual(spec, &AmbiguityFunction::power(*l)?, spec.sigma)?;
            boundary_rows(&model, &grid, &res.q_star, "fig4", &format!("_lambda={l}"))
        })
        .collect();
    let mut table = ResultTable::default();
    for r in results {
        table.extend(r?);
    }
    Ok(table)
}

/// All four stock pipelines, `fig1` to `fig4`.
pub fn run_stock_pipelines(spec: &StockSpec) -> Result<ResultTable> {
    let mut table = run_prior_boundary(spec)?;
    table.extend(run_stock_ambiguity_sweep(spec)?);
    table.extend(run_sigma_sweep(spec)?);
    table.extend(run_stock_boundaries(spec)?);
    Ok(table)
}

/// Parameters of the divestment study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivestSpec {
    pub prior: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub lsmc: LsmcConfig,
    /// Exponent whose closure histogram is reported next to the neutral
    /// and revealed ones.
    pub histogram_lambda: f64,
    /// Outer search settings; the tolerance sits above the Monte Carlo
    /// noise floor of the inner values.
    pub outer: OuterConfig,
}

impl Default for DivestSpec {
    fn default() -> Self {
        Self {
            prior: vec![0.25; 4],
            lambdas: vec![-5.0, -2.0, -1.0, -0.5, 0.5, 0.9],
            lsmc: LsmcConfig { n_paths: 8_000, ..LsmcConfig::default() },
            histogram_lambda: -2.0,
            outer: OuterConfig { tol: 1e-4, max_evaluations: 300, ..OuterConfig::default() },
        }
    }
}

/// Output of the divestment pipeline: the value table plus closure
/// histograms `(mode, [step][scenario] frequency)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DivestReport {
    pub table: ResultTable,
    pub histograms: Vec<(String, Vec<Vec<f64>>)>,
}

fn mode_solution(model: &DivestModel, p: &SimplexPoint, cfg: &LsmcConfig, mode: LearningMode) -> Result<DivestSolution> {
    lsmc_value(model, p, &LsmcConfig { mode, sampling: ScenarioSampling::Mixture, ..cfg.clone() })
}

/// Policy fitted on paths drawn from `q` and evaluated on paths drawn from
/// `p` with the same noise.
pub fn policy_under_reference(
    model: &DivestModel,
    q: &SimplexPoint,
    p: &SimplexPoint,
    cfg: &LsmcConfig,
) -> Result<DivestSolution> {
    let opts = SimulationOptions { mode: LearningMode::Learning, sampling: ScenarioSampling::Mixture };
    let train = simulate_paths(model, q, cfg.n_paths, cfg.seed, opts)?;
    let fitted = fit_policy(model, &train, &LsmcConfig { sampling: ScenarioSampling::Mixture, ..cfg.clone() })?;
    let eval = simulate_paths(model, p, cfg.n_paths, cfg.seed, opts)?;
    Ok(apply_policy(model, &fitted.policy, &eval))
}

/// Revealed, learning and frozen values under the reference prior, the
/// ambiguity sweep and closure-time histograms.
pub fn run_divest_pipeline(model: &DivestModel, spec: &DivestSpec) -> Result<DivestReport> {
    if spec.lambdas.is_empty() {
        return Err(Error::InvalidParameter("parameter lists must be non-empty".into()));
    }
    let p = SimplexPoint::make_simplex(&spec.prior)?;
    let mut table = ResultTable::default();
    let mut histograms = Vec::new();
    let (n, horizon) = (model.n_scenarios(), model.horizon());

    for (mode, name) in
        [(LearningMode::Revealed, "revealed"), (LearningMode::Learning, "learning"), (LearningMode::Frozen, "frozen")]
    {
        let sol = mode_solution(model, &p, &spec.lsmc, mode)?;
        table.push("fig5", "mode", 0.0, &format!("{name}_value"), sol.value);
        table.push("fig5", "mode", 0.0, &format!("{name}_ci"), sol.ci_half_width());
        table.push("fig5", "mode", 0.0, &format!("{name}_mean_closure"), sol.mean_stop_time());
        if mode != LearningMode::Frozen {
            histograms.push((name.to_string(), closure_histogram(&sol, horizon, n)));
        }
    }

    let solver = DivestSolver::new(model.clone(), spec.lsmc.clone());
    let results: Vec<Result<(OuterResult, DivestSolution)>> = spec
        .lambdas
        .par_iter()
        .map(|l| {
            let res = outer_minimize(&solver, &AmbiguityFunction::power(*l)?, &p, &spec.outer)?;
            let under_p = policy_under_reference(model, &res.q_star, &p, &spec.lsmc)?;
            Ok((res, under_p))
        })
        .collect();
    for (l, r) in spec.lambdas.iter().zip(results) {
        let (res, under_p) = r?;
        table.push("fig5", "lambda", *l, "value", res.value);
        for (i, q) in res.q_star.weights().iter().enumerate() {
            table.push("fig5", "lambda", *l, &format!("q{}", i + 1), *q);
        }
        table.push("fig5", "lambda", *l, "mean_closure", under_p.mean_stop_time());
        if *l == spec.histogram_lambda {
            histograms.push((format!("ambiguity_lambda={l}"), closure_histogram(&under_p, horizon, n)));
        }
    }
    for (mode, h) in &histograms {
        for (t, row) in h.iter().enumerate() {
            for (s, freq) in row.iter().enumerate() {
                table.push(&format!("fig6_{mode}"), "year", t as f64, &format!("scenario{}", s + 1), *freq);
            }
        }
    }
    Ok(DivestReport { table, histograms })
}

/// Randomised small instances used by the certification run:
/// `(scenarios, periods, branching)`.
pub const CERTIFICATION_SHAPES: [(usize, usize, usize); 5] = [(2, 2, 2), (3, 2, 2), (2, 3, 2), (3, 3, 2), (3, 2, 3)];

/// Distortions checked on every certification instance.
pub fn certification_functions() -> Vec<AmbiguityFunction> {
    vec![
        AmbiguityFunction::Power { lambda: -2.0 },
        AmbiguityFunction::Power { lambda: -0.5 },
        AmbiguityFunction::Power { lambda: 0.5 },
        AmbiguityFunction::Exponential { gamma: 1.0 },
    ]
}

fn function_code(f: &AmbiguityFunction) -> (&'static str, f64) {
    match f {
        AmbiguityFunction::Power { lambda } => ("power", *lambda),
        AmbiguityFunction::Log => ("log", 0.0),
        AmbiguityFunction::Exponential { gamma } => ("exponential", *gamma),
    }
}

/// Minimax certification on randomised small instances.
pub fn run_minimax_check(seed: u64, grid_step: f64) -> Result<ResultTable> {
    let mut table = ResultTable::default();
    for (i, (n, periods, branching)) in CERTIFICATION_SHAPES.iter().enumerate() {
        let inst = SmallInstance::random(seed.wrapping_add(i as u64), *n, *periods, *branching)?;
        let p = SimplexPoint::uniform(*n);
        for f in certification_functions() {
            let d = dual_value(&inst, &p, &f, grid_step)?;
            let primal = primal_value(&inst, &p, &f)?;
            let (kind, param) = function_code(&f);
            let prefix = format!("{kind}({param})");
            let c = &d.certificate;
            for (q, v) in [
                ("min_max", c.min_max),
                ("max_min", c.max_min),
                ("gap", c.gap),
                ("saddle_violation", c.max_violation),
                ("primal", primal.value),
                ("pure_max_min", c.pure_max_min),
                ("inequalities", c.inequalities_checked as f64),
            ] {
                table.push("minimax_check", "instance", i as f64, &format!("{prefix}_{q}"), v);
            }
        }
    }
    Ok(table)
}

/// Posterior diagnostics on simulated learning paths: per step and
/// scenario the mean posterior and its standard error, and the share of
/// paths whose posterior on the true scenario exceeds 0.99 at the horizon.
pub fn run_filter_sim(model: &DivestModel, q: &SimplexPoint, n_paths: usize, seed: u64) -> Result<ResultTable> {
    let bundle = simulate_paths(model, q, n_paths, seed, SimulationOptions::default())?;
    let mut table = ResultTable::default();
    let n = model.n_scenarios();
    for t in 0..=model.horizon() {
        for i in 0..n {
            let xs: Vec<f64> = (0..n_paths).map(|p| bundle.pi(p, t)[i]).collect();
            let mean = xs.iter().sum::<f64>() / n_paths as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_paths as f64 - 1.0).max(1.0);
            table.push("filter_sim", "t", t as f64, &format!("mean_pi{}", i + 1), mean);
            table.push("filter_sim", "t", t as f64, &format!("se_pi{}", i + 1), (var / n_paths as f64).sqrt());
        }
    }
    let h = model.horizon();
    let hits = (0..n_paths).filter(|p| bundle.pi(*p, h)[bundle.theta(*p)] > 0.99).count();
    table.push("filter_sim", "t", h as f64, "share_concentrated", hits as f64 / n_paths as f64);
    Ok(table)
}

/// Largest standardised change of the mean posterior between consecutive
/// steps, `|mean_{t+1} - mean_t| / se(difference)`.
pub fn martingale_statistic(model: &DivestModel, q: &SimplexPoint, n_paths: usize, seed: u64) -> Result<f64> {
    let bundle = simulate_paths(model, q, n_paths, seed, SimulationOptions::default())?;
    let mut worst: f64 = 0.0;
    for t in 0..model.horizon() {
        for i in 0..model.n_scenarios() {
            let d: Vec<f64> = (0..n_paths).map(|p| bundle.pi(p, t + 1)[i] - bundle.pi(p, t)[i]).collect();
            let mean = d.iter().sum::<f64>() / n_paths as f64;
            let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n_paths as f64 - 1.0);
            let se = (var / n_paths as f64).sqrt();
            if se > 0.0 {
                worst = worst.max(mean.abs() / se);
            } else if mean != 0.0 {
                worst = f64::INFINITY;
            }
        }
    }
    Ok(worst)
}
