//! Bayesian learning of the scenario.
//!
//! Two filters are provided. The continuous-time drift filter for a stock
//! whose drift is one of finitely many values gives the normalising factor
//! `F_m(t, x)` and the posterior drift `Gamma(t, x) = d/dx log F_m * sigma^2`.
//! The discrete-time filter updates the posterior scenario probabilities of
//! the divestment model after each noisy signal; it is also used to simulate
//! whole learning paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{DivestModel, NoiseLaw, SimplexPoint};

/// Finite prior on the drift of a log-price `X` with volatility `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftPrior {
    mus: Vec<f64>,
    weights: SimplexPoint,
    sigma: f64,
    x0: f64,
}

impl DriftPrior {
    pub fn new(mus: Vec<f64>, weights: SimplexPoint, sigma: f64, x0: f64) -> Result<Self> {
        if mus.len() != weights.len() {
            return Err(Error::DimensionMismatch(format!("{} drifts, {} weights", mus.len(), weights.len())));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        if mus.iter().any(|m| !m.is_finite()) || !x0.is_finite() {
            return Err(Error::NonFinite("drift prior"));
        }
        Ok(Self { mus, weights, sigma, x0 })
    }

    pub fn mus(&self) -> &[f64] {
        &self.mus
    }
    pub fn weights(&self) -> &SimplexPoint {
        &self.weights
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn x0(&self) -> f64 {
        self.x0
    }

    fn exponents(&self, t: f64, x: f64) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let s2 = self.sigma * self.sigma;
        self.mus
            .iter()
            .zip(self.weights.weights())
            .filter(|(_, w)| **w > 0.0)
            .map(move |(mu, w)| (*w, *mu, -t * mu * mu / (2.0 * s2) + mu * (x - self.x0 + 0.5 * s2 * t) / s2))
    }

    /// `log F_m(t, x)`.
    pub fn log_f_m(&self, t: f64, x: f64) -> f64 {
        let m = self.exponents(t, x).map(|e| e.2).fold(f64::NEG_INFINITY, f64::max);
        m + self.exponents(t, x).map(|(w, _, e)| w * (e - m).exp()).sum::<f64>().ln()
    }

    /// `F_m(t, x) = sum_theta P[theta] exp(-t mu^2 / (2 sigma^2) + mu (x - X0 + sigma^2 t / 2) / sigma^2)`.
    pub fn f_m(&self, t: f64, x: f64) -> f64 {
        self.log_f_m(t, x).exp()
    }

    /// Posterior mean of the drift given `X_t = x`.
    pub fn gamma_drift(&self, t: f64, x: f64) -> f64 {
        let m = self.exponents(t, x).map(|e| e.2).fold(f64::NEG_INFINITY, f64::max);
        let (num, den) = self.exponents(t, x).fold((0.0, 0.0), |(n, d), (w, mu, e)| {
            let k = w * (e - m).exp();
            (n + mu * k, d + k)
        });
        num / den
    }
}

/// Posterior scenario probabilities after `t` signals.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorState {
    pub pi: SimplexPoint,
    pub t: usize,
}

impl PosteriorState {
    pub fn prior(pi: SimplexPoint) -> Self {
        Self { pi, t: 0 }
    }
}

/// Bayes update of `pi` in the log domain; returns the normalised posterior.
fn bayes(pi: &[f64], log_lik: &[f64], out: &mut [f64]) -> bool {
    let mut m = f64::NEG_INFINITY;
    for (p, l) in pi.iter().zip(log_lik) {
        if *p > 0.0 {
            m = m.max(p.ln() + l);
        }
    }
    if !m.is_finite() {
        return false;
    }
    let mut total = 0.0;
    for ((o, p), l) in out.iter_mut().zip(pi).zip(log_lik) {
        *o = if *p > 0.0 { (p.ln() + l - m).exp() } else { 0.0 };
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
    true
}

/// Incorporates the signal observed at step `state.t + 1`.
pub fn posterior_update(state: &PosteriorState, model: &DivestModel, s: f64) -> Result<PosteriorState> {
    let t = state.t + 1;
    if t > model.horizon() {
        return Err(Error::InvalidParameter(format!("no signal after the horizon {}", model.horizon())));
    }
    let ll = model.signal_log_likelihood(t, s);
    let mut out = vec![0.0; ll.len()];
    if !bayes(state.pi.weights(), &ll, &mut out) {
        return Err(Error::DegenerateUpdate(t));
    }
    Ok(PosteriorState { pi: SimplexPoint::from_weights(out)?, t })
}

/// Smallest index whose cumulative probability reaches `u`.
pub fn sample_scenario(pi: &SimplexPoint, u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in pi.weights().iter().enumerate() {
        acc += w;
        if *w > 0.0 && acc >= u {
            return i;
        }
    }
    pi.support().last().copied().unwrap_or(0)
}

/// How the posterior process is formed along simulated paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LearningMode {
    /// Bayesian updates from the signal.
    #[default]
    Learning,
    /// The true scenario is known from the start: `pi = e_Theta`.
    Revealed,
    /// No learning: `pi` stays at the prior.
    Frozen,
}

/// How the true scenario is assigned to paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ScenarioSampling {
    /// Drawn from the prior with an independent uniform; all weights 1.
    #[default]
    Mixture,
    /// Path `k` gets scenario `k mod N` with importance weight
    /// `N * q_Theta`. Keeps the paths fixed when the prior changes.
    Stratified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimulationOptions {
    pub mode: LearningMode,
    pub sampling: ScenarioSampling,
}

/// Simulated paths of the divestment state.
///
/// Time index `t` runs over `0..=T`; signals exist for `t >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    n_paths: usize,
    horizon: usize,
    n_factors: usize,
    n_scenarios: usize,
    x_tilde: Vec<f64>,
    pi: Vec<f64>,
    signals: Vec<f64>,
    theta: Vec<usize>,
    weights: Vec<f64>,
}

impl PathBundle {
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }
    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn n_factors(&self) -> usize {
        self.n_factors
    }
    pub fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }
    pub fn x_tilde(&self, path: usize, t: usize) -> &[f64] {
        let k = self.n_factors;
        let start = (path * (self.horizon + 1) + t) * k;
        &self.x_tilde[start..start + k]
    }
    pub fn pi(&self, path: usize, t: usize) -> &[f64] {
        let n = self.n_scenarios;
        let start = (path * (self.horizon + 1) + t) * n;
        &self.pi[start..start + n]
    }
    pub fn signal(&self, path: usize, t: usize) -> f64 {
        assert!(t >= 1, "no signal is observed at t = 0");
        self.signals[path * self.horizon + t - 1]
    }
    pub fn theta(&self, path: usize) -> usize {
        self.theta[path]
    }
    pub fn thetas(&self) -> &[usize] {
        &self.theta
    }
    /// Importance weight of a path; weights average to one.
    pub fn weight(&self, path: usize) -> f64 {
        self.weights[path]
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

const STREAM_FACTOR: u64 = 0;
const STREAM_SIGNAL: u64 = 1;
const STREAM_SCENARIO: u64 = 2;

/// Independent random stream for one kind of noise on one path.
pub(crate) fn stream(seed: u64, kind: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((kind << 48) | path as u64);
    rng
}

fn draw(law: NoiseLaw, rng: &mut ChaCha8Rng) -> f64 {
    match law {
        NoiseLaw::Gaussian => rng.sample(StandardNormal),
        NoiseLaw::ThreePoint => {
            let u: f64 = rng.random();
            let idx = if u < NoiseLaw::THREE_POINT_PROBS[0] {
                0
            } else if u < NoiseLaw::THREE_POINT_PROBS[0] + NoiseLaw::THREE_POINT_PROBS[1] {
                1
            } else {
                2
            };
            NoiseLaw::THREE_POINT_NODES[idx]
        }
    }
}

struct PathRow {
    x_tilde: Vec<f64>,
    pi: Vec<f64>,
    signals: Vec<f64>,
    theta: usize,
    weight: f64,
}

fn simulate_one(model: &DivestModel, q: &SimplexPoint, seed: u64, path: usize, opts: SimulationOptions) -> PathRow {
    let n = model.n_scenarios();
    let k = model.n_factors();
    let horizon = model.horizon();
    let mut u_rng = stream(seed, STREAM_SCENARIO, path);
    let (theta, weight) = match opts.sampling {
        ScenarioSampling::Mixture => (sample_scenario(q, u_rng.random()), 1.0),
        ScenarioSampling::Stratified => {
            let th = path % n;
            (th, n as f64 * q.get(th))
        }
    };

    let mut eps_rng = stream(seed, STREAM_FACTOR, path);
    let mut eta_rng = stream(seed, STREAM_SIGNAL, path);
    let phi = model.phi();
    let vol = model.vol();

    let mut x_tilde = vec![0.0; (horizon + 1) * k];
    let mut pi = vec![0.0; (horizon + 1) * n];
    let mut signals = vec![0.0; horizon];
    match opts.mode {
        LearningMode::Revealed => pi[theta] = 1.0,
        _ => pi[..n].copy_from_slice(q.weights()),
    }
    let mut eps = vec![0.0; k];
    for t in 1..=horizon {
        eps.iter_mut().for_each(|e| *e = draw(model.factor_noise(), &mut eps_rng));
        let (prev, cur) = x_tilde.split_at_mut(t * k);
        let prev = &prev[(t - 1) * k..];
        for (a, c) in cur[..k].iter_mut().enumerate() {
            *c = (0..k).map(|b| phi[(a, b)] * prev[b] + vol[(a, b)] * eps[b]).sum();
        }

        let s = model.signal_mean(theta, t) + model.sigma_s() * draw(model.signal_noise(), &mut eta_rng);
        signals[t - 1] = s;
        let (prev, cur) = pi.split_at_mut(t * n);
        let prev = &prev[(t - 1) * n..];
        let cur = &mut cur[..n];
        match opts.mode {
            LearningMode::Learning => {
                let ll = model.signal_log_likelihood(t, s);
                // the true scenario always has positive likelihood, so the
                // update cannot degenerate on simulated signals
                if !bayes(prev, &ll, cur) {
                    cur.copy_from_slice(prev);
                }
            }
            _ => cur.copy_from_slice(prev),
        }
    }
    PathRow { x_tilde, pi, signals, theta, weight }
}

/// Simulates `n_paths` paths of `(X~, pi, S, Theta)` with prior `q`.
///
/// Each path uses its own random streams derived from `seed`, so results do
/// not depend on thread scheduling and the same noise is reused when `q`
/// changes.
pub fn simulate_paths(
    model: &DivestModel,
    q: &SimplexPoint,
    n_paths: usize,
    seed: u64,
    opts: SimulationOptions,
) -> Result<PathBundle> {
    if n_paths == 0 {
        return Err(Error::InvalidParameter("at least one path is required".into()));
    }
    if q.len() != model.n_scenarios() {
        return Err(Error::DimensionMismatch(format!(
            "prior has {} entries, model has {} scenarios",
            q.len(),
            model.n_scenarios()
        )));
    }
    let rows: Vec<PathRow> = (0..n_paths).into_par_iter().map(|p| simulate_one(model, q, seed, p, opts)).collect();
    let mut bundle = PathBundle {
        n_paths,
        horizon: model.horizon(),
        n_factors: model.n_factors(),
        n_scenarios: model.n_scenarios(),
        x_tilde: Vec::with_capacity(n_paths * (model.horizon() + 1) * model.n_factors()),
        pi: Vec::with_capacity(n_paths * (model.horizon() + 1) * model.n_scenarios()),
        signals: Vec::with_capacity(n_paths * model.horizon()),
        theta: Vec::with_capacity(n_paths),
        weights: Vec::with_capacity(n_paths),
    };
    for row in rows {
        bundle.x_tilde.extend(row.x_tilde);
        bundle.pi.extend(row.pi);
        bundle.signals.extend(row.signals);
        bundle.theta.push(row.theta);
        bundle.weights.push(row.weight);
    }
    Ok(bundle)
}

/// Learning paths with the scenario drawn from `q`.
pub fn simulate_learning_paths(model: &DivestModel, q: &SimplexPoint, n_paths: usize, seed: u64) -> Result<PathBundle> {
    simulate_paths(model, q, n_paths, seed, SimulationOptions::default())
}
