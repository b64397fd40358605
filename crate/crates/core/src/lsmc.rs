//! Least-squares Monte Carlo for the divestment problem.
//!
//! The owner collects the revenue `g(X_t)` each step and may close the asset
//! at any step `tau` in `0..=T`, paying `K(tau)`. With discount factor
//! `beta` the realised reward of a path is
//! `sum_{t=1}^{tau} beta^t g(X_t) - beta^tau K(tau)`. The decision state is
//! the risk-factor deviation `X~_t` together with the posterior `pi_t`, and
//! the continuation value is regressed on polynomials of that state.

use std::sync::atomic::{AtomicBool, Ordering};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::{posterior_update, simulate_paths, LearningMode, PathBundle, PosteriorState, ScenarioSampling, SimulationOptions};
use crate::scenario::{DivestModel, NoiseLaw, SimplexPoint};

const CHUNK: usize = 4096;
const RIDGE: f64 = 1e-8;

/// Settings of the regression-based solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsmcConfig {
    pub n_paths: usize,
    /// Total degree of the polynomial basis, 1 to 3.
    pub basis_degree: usize,
    pub seed: u64,
    pub stop_tolerance: f64,
    pub mode: LearningMode,
    pub sampling: ScenarioSampling,
}

impl Default for LsmcConfig {
    fn default() -> Self {
        Self {
            n_paths: 20_000,
            basis_degree: 2,
            seed: 0,
            stop_tolerance: 0.0,
            mode: LearningMode::Learning,
            sampling: ScenarioSampling::Mixture,
        }
    }
}

impl LsmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 100 {
            return Err(Error::InvalidParameter(format!("need at least 100 paths, got {}", self.n_paths)));
        }
        if !(1..=3).contains(&self.basis_degree) {
            return Err(Error::InvalidParameter(format!("basis degree must be 1, 2 or 3, got {}", self.basis_degree)));
        }
        if !(self.stop_tolerance >= 0.0) {
            return Err(Error::InvalidParameter("stop tolerance must be non-negative".into()));
        }
        Ok(())
    }

    fn simulation(&self) -> SimulationOptions {
        SimulationOptions { mode: self.mode, sampling: self.sampling }
    }
}

/// Exponent vectors of all monomials of total degree `<= degree` in `dim`
/// variables, constant first.
fn monomials(dim: usize, degree: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![0u8; dim]];
    let mut frontier = vec![vec![0u8; dim]];
    for _ in 0..degree {
        let mut next = Vec::new();
        for e in &frontier {
            // only raise variables at or after the last raised one, so each
            // monomial is produced once
            let last = e.iter().rposition(|x| *x > 0).unwrap_or(0);
            for v in last..dim {
                let mut f = e.clone();
                f[v] += 1;
                next.push(f);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Fitted continuation value for one time step and one group of paths.
#[derive(Debug, Clone, PartialEq)]
struct Fit {
    vars: Vec<usize>,
    centre: Vec<f64>,
    scale: Vec<f64>,
    exponents: Vec<Vec<u8>>,
    coefficients: Vec<f64>,
}

impl Fit {
    fn features_into(&self, state: &[f64], z: &mut Vec<f64>, out: &mut Vec<f64>) {
        z.clear();
        z.extend(self.vars.iter().zip(self.centre.iter().zip(&self.scale)).map(|(v, (c, s))| (state[*v] - c) / s));
        out.clear();
        for e in &self.exponents {
            let mut m = 1.0;
            for (k, x) in e.iter().zip(z.iter()) {
                for _ in 0..*k {
                    m *= x;
                }
            }
            out.push(m);
        }
    }

    fn predict(&self, state: &[f64]) -> f64 {
        let mut z = Vec::with_capacity(self.vars.len());
        let mut phi = Vec::with_capacity(self.exponents.len());
        self.features_into(state, &mut z, &mut phi);
        phi.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }
}

/// Exercise policy estimated by backward regression.
#[derive(Debug, Clone, PartialEq)]
pub struct DivestPolicy {
    mode: LearningMode,
    stop_tolerance: f64,
    /// `fits[t][group]`; `None` where no path of that group was available.
    fits: Vec<Vec<Option<Fit>>>,
    /// Scenario prior of the paths the policy was fitted on.
    prior: Vec<f64>,
}

impl DivestPolicy {
    /// Whether the owner closes at `t` in the given state.
    pub fn stops(&self, model: &DivestModel, t: usize, group: usize, state: &[f64]) -> bool {
        if t == model.horizon() {
            return true;
        }
        match &self.fits[t][group] {
            Some(fit) => -model.closure_cost(t) >= fit.predict(state) - self.stop_tolerance,
            None => false,
        }
    }

    /// Scenario prior the policy was fitted under; its posterior inputs are
    /// posteriors started from this prior.
    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn mode(&self) -> LearningMode {
        self.mode
    }
}

/// Result of a least-squares Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct DivestSolution {
    pub value: f64,
    pub std_error: f64,
    pub stop_times: Vec<usize>,
    pub thetas: Vec<usize>,
    pub weights: Vec<f64>,
    pub path_values: Vec<f64>,
    /// Mean realised reward per true scenario; `None` if no path had it.
    pub scenario_values: Vec<Option<f64>>,
    pub policy: DivestPolicy,
}

impl DivestSolution {
    /// Half-width of the 95% normal confidence interval.
    pub fn ci_half_width(&self) -> f64 {
        1.96 * self.std_error
    }

    pub fn mean_stop_time(&self) -> f64 {
        weighted_mean(self.stop_times.iter().map(|t| *t as f64), &self.weights)
    }
}

static RIDGE_WARNED: AtomicBool = AtomicBool::new(false);

fn weighted_mean(values: impl Iterator<Item = f64>, weights: &[f64]) -> f64 {
    let (s, w) = values.zip(weights).fold((0.0, 0.0), |(s, w), (v, wi)| (s + wi * v, w + wi));
    s / w
}

fn state_vector(bundle: &PathBundle, path: usize, t: usize, out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(bundle.x_tilde(path, t));
    let pi = bundle.pi(path, t);
    out.extend_from_slice(&pi[..pi.len() - 1]);
}

fn group_of(mode: LearningMode, bundle: &PathBundle, path: usize) -> usize {
    match mode {
        LearningMode::Revealed => bundle.theta(path),
        _ => 0,
    }
}

/// Weighted least squares of `y` on monomials of the state for the paths in
/// `members`. Constant state components are dropped. Returns the fit and
/// its fitted values on `members`.
fn regress(
    bundle: &PathBundle,
    t: usize,
    members: &[usize],
    y: &[f64],
    degree: usize,
) -> Result<Option<(Fit, Vec<f64>)>> {
    let w = bundle.weights();
    let total: f64 = members.iter().map(|p| w[*p]).sum();
    if total <= 0.0 {
        return Ok(None);
    }
    let mut state = Vec::new();
    state_vector(bundle, members[0], t, &mut state);
    let dim = state.len();
    let m = members.len();
    let mut states = Vec::with_capacity(m * dim);
    for p in members {
        state_vector(bundle, *p, t, &mut state);
        states.extend_from_slice(&state);
    }

    let mut mean = vec![0.0; dim];
    for (row, p) in states.chunks_exact(dim).zip(members) {
        for (mu, s) in mean.iter_mut().zip(row) {
            *mu += w[*p] * s;
        }
    }
    mean.iter_mut().for_each(|mu| *mu /= total);
    let mut var = vec![0.0; dim];
    for (row, p) in states.chunks_exact(dim).zip(members) {
        for ((v, s), mu) in var.iter_mut().zip(row).zip(&mean) {
            *v += w[*p] * (s - mu) * (s - mu);
        }
    }
    let mut vars = Vec::new();
    let mut centre = Vec::new();
    let mut scale = Vec::new();
    for j in 0..dim {
        let sd = (var[j] / total).sqrt();
        if sd > 1e-10 {
            vars.push(j);
            centre.push(mean[j]);
            scale.push(sd);
        }
    }
    let exponents = monomials(vars.len(), degree);
    let mut fit = Fit { vars, centre, scale, exponents, coefficients: Vec::new() };
    let k = fit.exponents.len();

    // row-major design blocks of at most CHUNK rows
    let design: Vec<Vec<f64>> = states
        .par_chunks(CHUNK * dim)
        .map(|rows| {
            let mut x = Vec::with_capacity(rows.len() / dim * k);
            let mut z = Vec::with_capacity(dim);
            let mut phi = Vec::with_capacity(k);
            for row in rows.chunks_exact(dim) {
                fit.features_into(row, &mut z, &mut phi);
                x.extend_from_slice(&phi);
            }
            x
        })
        .collect();
    let partials: Vec<(Vec<f64>, Vec<f64>)> = design
        .par_iter()
        .zip(members.par_chunks(CHUNK))
        .map(|(x, idx)| {
            let mut a = vec![0.0; k * k];
            let mut b = vec![0.0; k];
            for (phi, p) in x.chunks_exact(k).zip(idx) {
                let wp = w[*p];
                if wp == 0.0 {
                    continue;
                }
                for r in 0..k {
                    let wr = wp * phi[r];
                    b[r] += wr * y[*p];
                    for (ac, pc) in a[r * k..r * k + r + 1].iter_mut().zip(&phi[..=r]) {
                        *ac += wr * pc;
                    }
                }
            }
            (a, b)
        })
        .collect();
    let mut a = DMatrix::<f64>::zeros(k, k);
    let mut b = DVector::<f64>::zeros(k);
    for (pa, pb) in partials {
        for r in 0..k {
            b[r] += pb[r];
            for c in 0..=r {
                a[(r, c)] += pa[r * k + c];
            }
        }
    }
    for r in 0..k {
        for c in 0..r {
            a[(c, r)] = a[(r, c)];
        }
    }
    a /= total;
    b /= total;

    let solution = match a.clone().cholesky() {
        Some(ch) => ch.solve(&b),
        None => {
            if RIDGE_WARNED.swap(true, Ordering::Relaxed) {
                log::debug!("regression at step {t} is rank deficient; adding ridge penalty {RIDGE}");
            } else {
                log::warn!("regression at step {t} is rank deficient; adding ridge penalty {RIDGE} (further occurrences logged at debug level)");
            }
            let ridged = a + DMatrix::<f64>::identity(k, k) * RIDGE;
            ridged.cholesky().ok_or(Error::RegressionSingular(t))?.solve(&b)
        }
    };
    if solution.iter().any(|c| !c.is_finite()) {
        return Err(Error::RegressionSingular(t));
    }
    let fitted: Vec<f64> = design
        .iter()
        .flat_map(|x| x.chunks_exact(k))
        .map(|phi| phi.iter().zip(solution.iter()).map(|(a, c)| a * c).sum())
        .collect();
    fit.coefficients = solution.iter().copied().collect();
    Ok(Some((fit, fitted)))
}

fn n_groups(mode: LearningMode, model: &DivestModel) -> usize {
    match mode {
        LearningMode::Revealed => model.n_scenarios(),
        _ => 1,
    }
}

/// Realised revenue of every path at step `t`.
fn revenues(model: &DivestModel, bundle: &PathBundle, t: usize) -> Vec<f64> {
    (0..bundle.n_paths()).map(|p| model.revenue_at(bundle.theta(p), t, bundle.x_tilde(p, t))).collect()
}

/// Estimates the exercise policy by backward induction on `bundle` and
/// returns it with the in-sample realised rewards.
pub fn fit_policy(model: &DivestModel, bundle: &PathBundle, cfg: &LsmcConfig) -> Result<DivestSolution> {
    cfg.validate()?;
    let horizon = model.horizon();
    let n = bundle.n_paths();
    let beta = model.beta();
    let groups = n_groups(cfg.mode, model);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); groups];
    for p in 0..n {
        members[group_of(cfg.mode, bundle, p)].push(p);
    }

    let mut future = vec![-model.closure_cost(horizon); n];
    let mut stop_times = vec![horizon; n];
    let mut fits = vec![vec![None; groups]; horizon + 1];
    for t in (0..horizon).rev() {
        let g = revenues(model, bundle, t + 1);
        let realised: Vec<f64> = (0..n).map(|p| beta * (g[p] + future[p])).collect();
        let salvage = -model.closure_cost(t);
        for (grp, idx) in members.iter().enumerate() {
            if idx.is_empty() {
                continue;
            }
            let fit = regress(bundle, t, idx, &realised, cfg.basis_degree)?;
            for (i, p) in idx.iter().enumerate() {
                let stop = match &fit {
                    Some((_, fitted)) => salvage >= fitted[i] - cfg.stop_tolerance,
                    None => false,
                };
                if stop {
                    future[*p] = salvage;
                    stop_times[*p] = t;
                } else {
                    future[*p] = realised[*p];
                }
            }
            fits[t][grp] = fit.map(|(f, _)| f);
        }
    }
    let prior = bundle.pi(0, 0).to_vec();
    let policy = DivestPolicy { mode: cfg.mode, stop_tolerance: cfg.stop_tolerance, fits, prior };
    Ok(summarise(model, bundle, stop_times, future, policy))
}

fn summarise(
    model: &DivestModel,
    bundle: &PathBundle,
    stop_times: Vec<usize>,
    path_values: Vec<f64>,
    policy: DivestPolicy,
) -> DivestSolution {
    let w = bundle.weights();
    let total: f64 = w.iter().sum();
    let value = weighted_mean(path_values.iter().copied(), w);
    let n = path_values.len() as f64;
    // standard error of the ratio estimator sum(w y) / sum(w)
    let var = path_values.iter().zip(w).map(|(y, wi)| (wi * (y - value)).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let std_error = (var * n).sqrt() / total;

    let mut sums = vec![(0.0, 0usize); model.n_scenarios()];
    for (p, y) in path_values.iter().enumerate() {
        let s = &mut sums[bundle.theta(p)];
        s.0 += y;
        s.1 += 1;
    }
    let scenario_values = sums.iter().map(|(s, c)| (*c > 0).then(|| s / *c as f64)).collect();
    DivestSolution {
        value,
        std_error,
        stop_times,
        thetas: bundle.thetas().to_vec(),
        weights: w.to_vec(),
        path_values,
        scenario_values,
        policy,
    }
}

/// Runs a fitted policy forward on (possibly different) paths.
pub fn apply_policy(model: &DivestModel, policy: &DivestPolicy, bundle: &PathBundle) -> DivestSolution {
    let beta = model.beta();
    // Posteriors on `bundle` start from its own prior. The policy reads
    // posteriors started from the prior it was fitted under, which follow
    // from the same observations by reweighting with the prior ratio.
    let start = bundle.pi(0, 0);
    let ratio: Vec<f64> = policy.prior.iter().zip(start).map(|(a, b)| if *b > 0.0 { a / b } else { 0.0 }).collect();
    let reweight = ratio.iter().any(|r| (r - 1.0).abs() > 1e-15);
    let k = model.n_factors();
    let results: Vec<(usize, f64)> = (0..bundle.n_paths())
        .into_par_iter()
        .map(|p| {
            let grp = group_of(policy.mode, bundle, p);
            let mut state = Vec::new();
            let mut reward = 0.0;
            let mut disc = 1.0;
            for t in 0..=model.horizon() {
                if t > 0 {
                    disc *= beta;
                    reward += disc * model.revenue_at(bundle.theta(p), t, bundle.x_tilde(p, t));
                }
                state_vector(bundle, p, t, &mut state);
                if reweight {
                    let pi = bundle.pi(p, t);
                    let z: f64 = pi.iter().zip(&ratio).map(|(a, r)| a * r).sum();
                    for (i, s) in state[k..].iter_mut().enumerate() {
                        *s = if z > 0.0 { pi[i] * ratio[i] / z } else { policy.prior[i] };
                    }
                }
                if policy.stops(model, t, grp, &state) {
                    return (t, reward - disc * model.closure_cost(t));
                }
            }
            unreachable!("the policy always stops at the horizon")
        })
        .collect();
    let (stops, values) = results.into_iter().unzip();
    summarise(model, bundle, stops, values, policy.clone())
}

/// Value of the divestment problem when the scenario prior is `q`.
pub fn lsmc_value(model: &DivestModel, q: &SimplexPoint, cfg: &LsmcConfig) -> Result<DivestSolution> {
    cfg.validate()?;
    let bundle = simulate_paths(model, q, cfg.n_paths, cfg.seed, cfg.simulation())?;
    fit_policy(model, &bundle, cfg)
}

/// Weighted frequency of closure per (step, true scenario); rows are steps
/// `0..=horizon`.
pub fn closure_histogram(solution: &DivestSolution, horizon: usize, n_scenarios: usize) -> Vec<Vec<f64>> {
    let mut h = vec![vec![0.0; n_scenarios]; horizon + 1];
    let total: f64 = solution.weights.iter().sum();
    for ((t, th), w) in solution.stop_times.iter().zip(&solution.thetas).zip(&solution.weights) {
        h[*t][*th] += w / total;
    }
    h
}

/// Upper bound on the number of leaves the exact oracle will visit.
const ORACLE_LEAF_LIMIT: f64 = 5e7;

/// Exact value by dynamic programming over the full tree of the discrete
/// noise. Requires the three-point law for both factor and signal noise.
pub fn tree_oracle_divest(model: &DivestModel, q: &SimplexPoint) -> Result<f64> {
    let (horizon, n, k) = (model.horizon(), model.n_scenarios(), model.n_factors());
    if horizon > 4 || n > 3 || k > 2 {
        return Err(Error::StateSpaceTooLarge(format!("T = {horizon}, N = {n}, K = {k} (limits 4, 3, 2)")));
    }
    let leaves = ((3f64.powi(k as i32)) * n as f64 * 3.0).powi(horizon as i32);
    if leaves > ORACLE_LEAF_LIMIT {
        return Err(Error::StateSpaceTooLarge(format!("{leaves} leaves")));
    }
    if model.factor_noise() != NoiseLaw::ThreePoint || model.signal_noise() != NoiseLaw::ThreePoint {
        return Err(Error::InvalidParameter("the tree oracle needs three-point factor and signal noise".into()));
    }
    if q.len() != n {
        return Err(Error::DimensionMismatch("prior does not match the scenarios".into()));
    }
    let (nodes, probs) = NoiseLaw::ThreePoint.atoms().expect("discrete law");
    let mut shocks: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    for _ in 0..k {
        shocks = shocks
            .into_iter()
            .flat_map(|(e, p)| {
                nodes.iter().zip(probs.iter()).map(move |(z, pz)| {
                    let mut f = e.clone();
                    f.push(*z);
                    (f, p * pz)
                })
            })
            .collect();
    }
    let ctx = Oracle { model, shocks, nodes, probs };
    ctx.value(0, &PosteriorState::prior(q.clone()), &vec![0.0; k])
}

struct Oracle<'a> {
    model: &'a DivestModel,
    shocks: Vec<(Vec<f64>, f64)>,
    nodes: &'static [f64; 3],
    probs: &'static [f64; 3],
}

impl Oracle<'_> {
    fn value(&self, t: usize, post: &PosteriorState, x: &[f64]) -> Result<f64> {
        let m = self.model;
        let salvage = -m.closure_cost(t);
        if t == m.horizon() {
            return Ok(salvage);
        }
        let k = x.len();
        let mut cont = 0.0;
        for (eps, pe) in &self.shocks {
            let next: Vec<f64> =
                (0..k).map(|a| (0..k).map(|b| m.phi()[(a, b)] * x[b] + m.vol()[(a, b)] * eps[b]).sum()).collect();
            for (i, pi_i) in post.pi.weights().iter().enumerate() {
                if *pi_i == 0.0 {
                    continue;
                }
                let g = m.revenue_at(i, t + 1, &next);
                for (eta, ph) in self.nodes.iter().zip(self.probs.iter()) {
                    let s = m.signal_mean(i, t + 1) + m.sigma_s() * eta;
                    let updated = posterior_update(post, m, s)?;
                    cont += pi_i * pe * ph * m.beta() * (g + self.value(t + 1, &updated, &next)?);
                }
            }
        }
        Ok(salvage.max(cont))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ClosureCost, DivestModelParts, Revenue, ScenarioSet};

    fn model(revenue: Revenue, cost: ClosureCost, noise: NoiseLaw) -> DivestModel {
        DivestModel::new(DivestModelParts {
            scenarios: ScenarioSet::numbered(2).unwrap(),
            phi: DMatrix::from_element(1, 1, 0.6),
            vol: DMatrix::from_element(1, 1, 0.5),
            mu_paths: vec![vec![vec![0.5]; 4], vec![vec![-0.8]; 4]],
            signal_means: vec![vec![0.0; 4], vec![1.0; 4]],
            sigma_s: 1.0,
            beta: 0.9,
            revenue,
            closure_cost: cost,
            factor_noise: noise,
            signal_noise: noise,
        })
        .unwrap()
    }

    #[test]
    fn monomial_counts() {
        assert_eq!(monomials(2, 2).len(), 6);
        assert_eq!(monomials(3, 3).len(), 20);
        assert_eq!(monomials(0, 3).len(), 1);
        let m = monomials(2, 2);
        let mut sorted = m.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), m.len());
    }

    #[test]
    fn salvage_only_stops_at_once() {
        let m = model(Revenue::constant(0.0, 1), ClosureCost::Constant(-3.0), NoiseLaw::Gaussian);
        let cfg = LsmcConfig { n_paths: 500, ..Default::default() };
        let sol = lsmc_value(&m, &SimplexPoint::uniform(2), &cfg).unwrap();
        assert!(sol.stop_times.iter().all(|t| *t == 0));
        assert!((sol.value - 3.0).abs() < 1e-12);
        let h = closure_histogram(&sol, m.horizon(), 2);
        assert!((h[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let three = model(Revenue::constant(0.0, 1), ClosureCost::Constant(-3.0), NoiseLaw::ThreePoint);
        assert!((tree_oracle_divest(&three, &SimplexPoint::uniform(2)).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn positive_revenue_never_stops() {
        let m = model(Revenue::constant(2.0, 1), ClosureCost::Constant(0.0), NoiseLaw::Gaussian);
        let cfg = LsmcConfig { n_paths: 500, ..Default::default() };
        let sol = lsmc_value(&m, &SimplexPoint::uniform(2), &cfg).unwrap();
        assert!(sol.stop_times.iter().all(|t| *t == 3));
        let expected = 2.0 * (0.9 + 0.81 + 0.729);
        assert!((sol.value - expected).abs() < 1e-10);
    }

    #[test]
    fn single_deterministic_scenario_oracle() {
        let mut parts = model(
            Revenue::Linear { intercept: 0.0, coefficients: vec![1.0] },
            ClosureCost::Schedule(vec![0.0, -1.0, -2.0, 0.0]),
            NoiseLaw::ThreePoint,
        )
        .parts()
        .clone();
        parts.vol = DMatrix::from_element(1, 1, 1e-9);
        parts.mu_paths = vec![vec![vec![1.0], vec![1.0], vec![-0.5], vec![3.0]]; 2];
        let m = DivestModel::new(parts).unwrap();
        let b: f64 = 0.9;
        let candidates = [0.0, b * 1.0 + b * 1.0, b + b * b * -0.5 + b * b * 2.0, b - 0.5 * b * b + 3.0 * b.powi(3)];
        let best = candidates.iter().cloned().fold(f64::MIN, f64::max);
        let v = tree_oracle_divest(&m, &SimplexPoint::vertex(2, 0)).unwrap();
        assert!((v - best).abs() < 1e-6, "{v} vs {best}");
    }

    #[test]
    fn oracle_rejects_large_instances() {
        let m = model(Revenue::constant(0.0, 1), ClosureCost::Constant(0.0), NoiseLaw::Gaussian);
        assert!(matches!(tree_oracle_divest(&m, &SimplexPoint::uniform(2)), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn applying_a_policy_to_its_own_paths_reproduces_the_fit() {
        let m = model(
            Revenue::Linear { intercept: 0.2, coefficients: vec![1.0] },
            ClosureCost::Constant(-0.5),
            NoiseLaw::Gaussian,
        );
        let q = SimplexPoint::uniform(2);
        let cfg = LsmcConfig { n_paths: 2000, seed: 4, ..Default::default() };
        let bundle = simulate_paths(&m, &q, cfg.n_paths, cfg.seed, cfg.simulation()).unwrap();
        let fitted = fit_policy(&m, &bundle, &cfg).unwrap();
        let applied = apply_policy(&m, &fitted.policy, &bundle);
        assert_eq!(fitted.stop_times, applied.stop_times);
        for (a, b) in fitted.path_values.iter().zip(&applied.path_values) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn frozen_policy_transfers_path_by_path() {
        let m = model(
            Revenue::Linear { intercept: 0.2, coefficients: vec![1.0] },
            ClosureCost::Constant(-0.5),
            NoiseLaw::Gaussian,
        );
        let q = SimplexPoint::make_simplex(&[0.8, 0.2]).unwrap();
        let p = SimplexPoint::uniform(2);
        let cfg = LsmcConfig { n_paths: 2000, seed: 9, mode: LearningMode::Frozen, ..Default::default() };
        let on_q = simulate_paths(&m, &q, cfg.n_paths, cfg.seed, cfg.simulation()).unwrap();
        let on_p = simulate_paths(&m, &p, cfg.n_paths, cfg.seed, cfg.simulation()).unwrap();
        let fitted = fit_policy(&m, &on_q, &cfg).unwrap();
        assert_eq!(fitted.policy.prior(), q.weights());
        // frozen decisions depend on the factors only, which do not depend
        // on the prior
        let applied = apply_policy(&m, &fitted.policy, &on_p);
        assert_eq!(fitted.stop_times, applied.stop_times);
    }

    #[test]
    fn config_validation() {
        assert!(LsmcConfig { n_paths: 10, ..Default::default() }.validate().is_err());
        assert!(LsmcConfig { basis_degree: 4, ..Default::default() }.validate().is_err());
    }
}
