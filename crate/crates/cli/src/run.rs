//! Dispatch from a parsed command line to the experiment pipelines.

use std::path::{Path, PathBuf};

use ambistop::experiments::{
    run_divest_pipeline, run_filter_sim, run_minimax_check, run_stock_pipelines, stock_dual, DivestSpec, ResultTable,
    StockSpec,
};
use ambistop::lsmc::LsmcConfig;
use ambistop::minimax::OuterConfig;
use ambistop::scenario::{ClosureCost, DivestModel, DivestModelParts, NoiseLaw, Revenue, ScenarioSet};
use ambistop::{AmbiguityFunction, SimplexPoint};
use nalgebra::DMatrix;

use crate::args::{Command, Overrides, RunConfig};
use crate::error::CliError;
use crate::output::emit_results;
use crate::scenarios::{load_scenarios, DivestSettings};

/// Runs the configured experiment and returns its result table without
/// writing anything.
pub fn compute(cfg: &RunConfig) -> Result<ResultTable, CliError> {
    let mut o = Overrides::new(&cfg.overrides)?;
    let table = match &cfg.command {
        Command::Stock { lambda, sigma } => {
            let spec = stock_spec(&mut o, *sigma)?;
            o.finish()?;
            match lambda {
                Some(l) => single_stock(&spec, *l)?,
                None => run_stock_pipelines(&spec)?,
            }
        }
        Command::Divest { scenarios, lambda } => {
            let model = divest_model(scenarios, &mut o)?;
            let spec = divest_spec(&mut o, cfg.seed, *lambda, model.n_scenarios())?;
            o.finish()?;
            run_divest_pipeline(&model, &spec)?.table
        }
        Command::MinimaxCheck { grid_step } => {
            o.finish()?;
            run_minimax_check(cfg.seed, *grid_step)?
        }
        Command::FilterSim { scenarios } => {
            let model = match scenarios {
                Some(path) => divest_model(path, &mut o)?,
                None => separated_signal_model(o.take_or("spacing", 1.0)?, o.take_or("horizon", 10)?)?,
            };
            let n_paths = o.take_or("n_paths", 10_000usize)?;
            o.finish()?;
            run_filter_sim(&model, &SimplexPoint::uniform(model.n_scenarios()), n_paths, cfg.seed)?
        }
    };
    Ok(table)
}

/// Computes and writes the results, returning the files written.
pub fn run(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let table = compute(cfg)?;
    emit_results(&table, &cfg.out)
}

fn stock_spec(o: &mut Overrides, sigma: Option<f64>) -> Result<StockSpec, CliError> {
    let d = StockSpec::default();
    let drifts = o.take_list("drifts")?.unwrap_or(d.drifts);
    let prior = match o.take_list("prior")? {
        Some(p) => p,
        None => vec![1.0 / drifts.len() as f64; drifts.len()],
    };
    Ok(StockSpec {
        s0: o.take_or("s0", d.s0)?,
        r: o.take_or("r", d.r)?,
        horizon: o.take_or("horizon", d.horizon)?,
        drifts,
        prior,
        sigma: sigma.unwrap_or(d.sigma),
        lambdas: o.take_list("lambdas")?.unwrap_or(d.lambdas),
        sigmas: o.take_list("sigmas")?.unwrap_or(d.sigmas),
        nx: o.take_or("nx", d.nx)?,
        nt: o.take_or("nt", d.nt)?,
    })
}

fn single_stock(spec: &StockSpec, lambda: f64) -> Result<ResultTable, CliError> {
    let res = stock_dual(spec, &AmbiguityFunction::power(lambda)?, spec.sigma)?;
    let mut t = ResultTable::default();
    t.push("stock", "lambda", lambda, "value", res.value);
    for (i, q) in res.q_star.weights().iter().enumerate() {
        t.push("stock", "lambda", lambda, &format!("q{}", i + 1), *q);
    }
    t.push("stock", "lambda", lambda, "evaluations", res.evaluations as f64);
    Ok(t)
}

/// Loads a scenario file and attaches the model settings from overrides.
pub fn divest_model(path: &Path, o: &mut Overrides) -> Result<DivestModel, CliError> {
    let pack = load_scenarios(path)?;
    DivestSettings::from_overrides(o)?.build(&pack)
}

fn divest_spec(o: &mut Overrides, seed: u64, lambda: Option<f64>, n: usize) -> Result<DivestSpec, CliError> {
    let d = DivestSpec::default();
    let lsmc = LsmcConfig {
        n_paths: o.take_or("n_paths", d.lsmc.n_paths)?,
        basis_degree: o.take_or("basis_degree", d.lsmc.basis_degree)?,
        seed,
        ..d.lsmc
    };
    Ok(DivestSpec {
        prior: o.take_list("prior")?.unwrap_or_else(|| vec![1.0 / n as f64; n]),
        lambdas: match lambda {
            Some(l) => vec![l],
            None => o.take_list("lambdas")?.unwrap_or(d.lambdas),
        },
        histogram_lambda: lambda.unwrap_or(o.take_or("histogram_lambda", d.histogram_lambda)?),
        outer: OuterConfig {
            tol: o.take_or("outer_tol", d.outer.tol)?,
            max_evaluations: o.take_or("max_evaluations", d.outer.max_evaluations)?,
            ..d.outer
        },
        lsmc,
    })
}

/// Three scenarios whose signal means sit `spacing` noise standard
/// deviations apart; one zero-mean factor.
pub fn separated_signal_model(spacing: f64, horizon: usize) -> Result<DivestModel, CliError> {
    let n = 3;
    let parts = DivestModelParts {
        scenarios: ScenarioSet::new((0..n).map(|i| format!("s{}", i + 1)))?,
        phi: DMatrix::from_element(1, 1, 0.5),
        vol: DMatrix::from_element(1, 1, 1.0),
        mu_paths: vec![vec![vec![0.0]; horizon + 1]; n],
        signal_means: (0..n).map(|i| vec![spacing * i as f64; horizon + 1]).collect(),
        sigma_s: 1.0,
        beta: 0.95,
        revenue: Revenue::constant(1.0, 1),
        closure_cost: ClosureCost::Constant(0.0),
        factor_noise: NoiseLaw::Gaussian,
        signal_noise: NoiseLaw::Gaussian,
    };
    Ok(DivestModel::new(parts)?)
}
