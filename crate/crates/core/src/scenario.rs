//! Finite scenario sets, probability vectors on the scenario simplex, and the
//! two problem instances: a geometric Brownian stock with ambiguous drift and
//! a divestment model driven by VAR(1) risk factors and a noisy scenario
//! signal.

use std::collections::HashSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the unit-sum invariant of [`SimplexPoint`].
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// Named, ordered set of scenarios.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSet {
    labels: Vec<String>,
}

impl ScenarioSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidParameter("scenario set is empty".into()));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::InvalidParameter(format!("duplicate scenario label {l:?}")));
            }
        }
        Ok(Self { labels })
    }

    /// Scenarios labelled `1..=n`.
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((1..=n).map(|i| i.to_string()))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// A probability vector over a finite scenario set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint(Vec<f64>);

impl SimplexPoint {
    /// Clips negative entries to zero and renormalises.
    pub fn make_simplex(raw: &[f64]) -> Result<Self> {
        if raw.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("simplex weights"));
        }
        let clipped: Vec<f64> = raw.iter().map(|w| w.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroMass);
        }
        Ok(Self(clipped.into_iter().map(|w| w / total).collect()))
    }

    /// Accepts weights that already satisfy the simplex invariants.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter("empty probability vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("simplex weights"));
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidParameter("negative probability".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE * weights.len() as f64 {
            return Err(Error::InvalidParameter(format!("probabilities sum to {total}")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n >= 1);
        Self(vec![1.0 / n as f64; n])
    }

    pub fn vertex(n: usize, i: usize) -> Self {
        assert!(i < n);
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        Self(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn l1_distance(&self, other: &SimplexPoint) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    /// `(1 - t) * self + t * other`.
    pub fn blend(&self, other: &SimplexPoint, t: f64) -> SimplexPoint {
        let w = self.0.iter().zip(&other.0).map(|(a, b)| (1.0 - t) * a + t * b).collect::<Vec<_>>();
        SimplexPoint::make_simplex(&w).expect("blend of simplex points has mass")
    }

    /// Expectation of `values` under this measure; zero-weight entries are skipped.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.0.iter().zip(values).filter(|(w, _)| **w > 0.0).map(|(w, v)| w * v).sum()
    }

    pub fn support(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(i, _)| i).collect()
    }
}

/// Black–Scholes stock whose drift depends on the unknown scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmStockModel {
    s0: f64,
    sigma: f64,
    r: f64,
    horizon: f64,
    drifts: Vec<f64>,
}

impl GbmStockModel {
    pub fn new(s0: f64, sigma: f64, r: f64, horizon: f64, drifts: Vec<f64>) -> Result<Self> {
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::InvalidParameter(format!("s0 must be positive, got {s0}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        if !r.is_finite() {
            return Err(Error::NonFinite("discount rate"));
        }
        if drifts.is_empty() {
            return Err(Error::InvalidParameter("no drift scenarios".into()));
        }
        if drifts.iter().any(|b| !b.is_finite()) {
            return Err(Error::NonFinite("drifts"));
        }
        Ok(Self { s0, sigma, r, horizon, drifts })
    }

    /// T = 5 years, r = 2%, b = (-5%, 5%, 15%), S0 = 1.
    pub fn reference(sigma: f64) -> Result<Self> {
        Self::new(1.0, sigma, 0.02, 5.0, vec![-0.05, 0.05, 0.15])
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.s0, sigma, self.r, self.horizon, self.drifts.clone())
    }

    pub fn with_drifts(&self, drifts: Vec<f64>) -> Result<Self> {
        Self::new(self.s0, self.sigma, self.r, self.horizon, drifts)
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn drifts(&self) -> &[f64] {
        &self.drifts
    }
    pub fn n_scenarios(&self) -> usize {
        self.drifts.len()
    }
    pub fn x0(&self) -> f64 {
        self.s0.ln()
    }

    /// Log-price drifts `b - sigma^2 / 2`.
    pub fn log_drifts(&self) -> Vec<f64> {
        let c = 0.5 * self.sigma * self.sigma;
        self.drifts.iter().map(|b| b - c).collect()
    }
}

/// Law of the i.i.d. standardised noise in the divestment model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum NoiseLaw {
    #[default]
    Gaussian,
    /// Three-point law on `{-sqrt 3, 0, sqrt 3}` with probabilities
    /// `(1/6, 2/3, 1/6)`; matches the first four Gaussian moments.
    ThreePoint,
}

impl NoiseLaw {
    pub const THREE_POINT_NODES: [f64; 3] = [-1.732_050_807_568_877_2, 0.0, 1.732_050_807_568_877_2];
    pub const THREE_POINT_PROBS: [f64; 3] = [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];

    /// Support and probabilities, for discrete laws.
    pub fn atoms(self) -> Option<(&'static [f64; 3], &'static [f64; 3])> {
        match self {
            NoiseLaw::Gaussian => None,
            NoiseLaw::ThreePoint => Some((&Self::THREE_POINT_NODES, &Self::THREE_POINT_PROBS)),
        }
    }

    /// Log-density (Gaussian, up to the common constant) or log-mass of a
    /// standardised residual.
    pub fn log_weight(self, z: f64) -> f64 {
        match self {
            NoiseLaw::Gaussian => -0.5 * z * z,
            NoiseLaw::ThreePoint => Self::THREE_POINT_NODES
                .iter()
                .zip(Self::THREE_POINT_PROBS)
                .find(|(node, _)| (z - **node).abs() < 1e-7)
                .map_or(f64::NEG_INFINITY, |(_, p)| p.ln()),
        }
    }
}

/// Per-step revenue of the asset as a function of the risk-factor vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Revenue {
    Linear { intercept: f64, coefficients: Vec<f64> },
}

impl Revenue {
    pub fn constant(c: f64, n_factors: usize) -> Self {
        Revenue::Linear { intercept: c, coefficients: vec![0.0; n_factors] }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Revenue::Linear { intercept, coefficients } => {
                intercept + coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
            }
        }
    }

    fn n_factors(&self) -> usize {
        match self {
            Revenue::Linear { coefficients, .. } => coefficients.len(),
        }
    }
}

/// Cost paid on closure; negative values are salvage proceeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ClosureCost {
    Constant(f64),
    Schedule(Vec<f64>),
}

impl ClosureCost {
    pub fn at(&self, t: usize) -> f64 {
        match self {
            ClosureCost::Constant(k) => *k,
            ClosureCost::Schedule(ks) => ks[t.min(ks.len() - 1)],
        }
    }
}

/// Building blocks of a [`DivestModel`], validated by [`DivestModel::new`].
#[derive(Debug, Clone)]
pub struct DivestModelParts {
    pub scenarios: ScenarioSet,
    pub phi: DMatrix<f64>,
    pub vol: DMatrix<f64>,
    /// `mu_paths[i][t]` is the K-vector of factor means under scenario `i`.
    pub mu_paths: Vec<Vec<Vec<f64>>>,
    /// `signal_means[i][t]`.
    pub signal_means: Vec<Vec<f64>>,
    pub sigma_s: f64,
    pub beta: f64,
    pub revenue: Revenue,
    pub closure_cost: ClosureCost,
    pub factor_noise: NoiseLaw,
    pub signal_noise: NoiseLaw,
}

/// Divestment problem: VAR(1) risk factors around scenario mean paths, a
/// noisy scalar signal of the scenario, running revenue and a closure cost.
#[derive(Debug, Clone)]
pub struct DivestModel {
    parts: DivestModelParts,
    horizon: usize,
    n_factors: usize,
}

impl DivestModel {
    pub fn new(parts: DivestModelParts) -> Result<Self> {
        let n = parts.scenarios.len();
        let k = parts.phi.nrows();
        if parts.phi.ncols() != k || parts.vol.nrows() != k || parts.vol.ncols() != k || k == 0 {
            return Err(Error::DimensionMismatch("phi and vol must be K x K".into()));
        }
        if parts.vol.clone().lu().determinant().abs() < 1e-14 {
            return Err(Error::InvalidParameter("volatility matrix is singular".into()));
        }
        if !(parts.sigma_s > 0.0 && parts.sigma_s.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma_s must be positive, got {}", parts.sigma_s)));
        }
        if !(parts.beta > 0.0 && parts.beta <= 1.0) {
            return Err(Error::InvalidParameter(format!("beta must lie in (0, 1], got {}", parts.beta)));
        }
        if parts.mu_paths.len() != n || parts.signal_means.len() != n {
            return Err(Error::DimensionMismatch("one mean path per scenario required".into()));
        }
        let steps = parts.signal_means[0].len();
        if steps < 2 {
            return Err(Error::InvalidParameter("horizon must be at least one step".into()));
        }
        for i in 0..n {
            if parts.signal_means[i].len() != steps || parts.mu_paths[i].len() != steps {
                return Err(Error::DimensionMismatch(format!("scenario {i} has a different horizon")));
            }
            if parts.mu_paths[i].iter().any(|m| m.len() != k) {
                return Err(Error::DimensionMismatch(format!("scenario {i} factor means are not length {k}")));
            }
        }
        if parts.revenue.n_factors() != k {
            return Err(Error::DimensionMismatch("revenue coefficients do not match factor count".into()));
        }
        if let ClosureCost::Schedule(ks) = &parts.closure_cost {
            if ks.len() != steps {
                return Err(Error::DimensionMismatch("closure cost schedule must cover 0..=T".into()));
            }
        }
        Ok(Self { horizon: steps - 1, n_factors: k, parts })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn n_factors(&self) -> usize {
        self.n_factors
    }
    pub fn n_scenarios(&self) -> usize {
        self.parts.scenarios.len()
    }
    pub fn scenarios(&self) -> &ScenarioSet {
        &self.parts.scenarios
    }
    pub fn phi(&self) -> &DMatrix<f64> {
        &self.parts.phi
    }
    pub fn vol(&self) -> &DMatrix<f64> {
        &self.parts.vol
    }
    pub fn factor_mean(&self, scenario: usize, t: usize) -> &[f64] {
        &self.parts.mu_paths[scenario][t]
    }
    pub fn signal_mean(&self, scenario: usize, t: usize) -> f64 {
        self.parts.signal_means[scenario][t]
    }
    pub fn sigma_s(&self) -> f64 {
        self.parts.sigma_s
    }
    pub fn beta(&self) -> f64 {
        self.parts.beta
    }
    pub fn revenue(&self) -> &Revenue {
        &self.parts.revenue
    }
    pub fn closure_cost(&self, t: usize) -> f64 {
        self.parts.closure_cost.at(t)
    }
    pub fn factor_noise(&self) -> NoiseLaw {
        self.parts.factor_noise
    }
    pub fn signal_noise(&self) -> NoiseLaw {
        self.parts.signal_noise
    }
    pub fn parts(&self) -> &DivestModelParts {
        &self.parts
    }

    /// Revenue at step `t` when the stochastic factor part is `x_tilde` and
    /// the scenario is `scenario`.
    pub fn revenue_at(&self, scenario: usize, t: usize, x_tilde: &[f64]) -> f64 {
        let mean = self.factor_mean(scenario, t);
        let x: Vec<f64> = x_tilde.iter().zip(mean).map(|(a, b)| a + b).collect();
        self.parts.revenue.eval(&x)
    }

    /// Unnormalised Gaussian signal weights `exp(-(s - mu_i)^2 / (2 sigma_s^2))`.
    pub fn signal_likelihood(&self, t: usize, s: f64) -> Vec<f64> {
        (0..self.n_scenarios())
            .map(|i| {
                let z = (s - self.signal_mean(i, t)) / self.sigma_s();
                (-0.5 * z * z).exp()
            })
            .collect()
    }

    /// Log-likelihood of signal `s` at step `t` per scenario under the
    /// model's signal noise law (constants common to all scenarios dropped).
    pub fn signal_log_likelihood(&self, t: usize, s: f64) -> Vec<f64> {
        (0..self.n_scenarios())
            .map(|i| self.signal_noise().log_weight((s - self.signal_mean(i, t)) / self.sigma_s()))
            .collect()
    }
}
