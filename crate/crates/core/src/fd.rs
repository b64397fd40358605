//! Finite differences for the stock-selling problem with drift learning.
//!
//! Writing the value of the stock as `S_0 + v(0, log S_0)`, the excess value
//! `v(t, x)` solves the obstacle problem
//!
//! ```text
//! max{ v_t + sigma^2/2 v_xx + Gamma v_x - r v + e^x (Gamma - r + sigma^2/2), -v } = 0,   v(T, .) = 0,
//! ```
//!
//! where `Gamma(t, x)` is the posterior drift of `X = log S` under the
//! scenario weights `q`. The solver uses a theta scheme in time, central
//! differences in space and projected SOR for the complementarity problem.

use crate::error::{Error, Result};
use crate::learning::DriftPrior;
use crate::scenario::{GbmStockModel, SimplexPoint};

/// Uniform space-time grid on `[x_min, x_max] x [0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FdGrid {
    x_min: f64,
    x_max: f64,
    nx: usize,
    nt: usize,
    horizon: f64,
}

impl FdGrid {
    pub fn new(x_min: f64, x_max: f64, nx: usize, nt: usize, horizon: f64) -> Result<Self> {
        if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidParameter(format!("empty space interval [{x_min}, {x_max}]")));
        }
        if nx < 3 || nt < 1 {
            return Err(Error::InvalidParameter(format!("grid needs nx >= 3 and nt >= 1, got {nx} x {nt}")));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { x_min, x_max, nx, nt, horizon })
    }

    /// Grid on `log S_0 +- 6 sigma sqrt(T)`. `nx` is rounded up to an odd
    /// number so that `log S_0` is a node.
    pub fn centered(model: &GbmStockModel, nx: usize, nt: usize) -> Result<Self> {
        let half = 6.0 * model.sigma() * model.horizon().sqrt();
        let nx = if nx.is_multiple_of(2) { nx + 1 } else { nx };
        Self::new(model.x0() - half, model.x0() + half, nx, nt, model.horizon())
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nt(&self) -> usize {
        self.nt
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }
    pub fn dt(&self) -> f64 {
        self.horizon / self.nt as f64
    }
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }
    pub fn t(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    /// Same domain with both resolutions doubled.
    pub fn refined(&self) -> Self {
        Self { nx: 2 * self.nx - 1, nt: 2 * self.nt, ..self.clone() }
    }
}

/// Numerical settings of the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct FdConfig {
    /// 0.5 is Crank–Nicolson, 1.0 fully implicit.
    pub theta: f64,
    pub omega: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Allow stopping only at whole years instead of at every time.
    pub bermudan: bool,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self { theta: 0.5, omega: 1.5, tolerance: 1e-9, max_iterations: 10_000, bermudan: false }
    }
}

/// Excess value `v(t_n, x_i)` on the grid together with the continuation
/// region.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSurface {
    grid: FdGrid,
    values: Vec<f64>,
    continuation: Vec<bool>,
}

impl ValueSurface {
    pub fn grid(&self) -> &FdGrid {
        &self.grid
    }
    pub fn value(&self, n: usize, i: usize) -> f64 {
        self.values[n * self.grid.nx + i]
    }
    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n * self.grid.nx..(n + 1) * self.grid.nx]
    }
    pub fn is_continuation(&self, n: usize, i: usize) -> bool {
        self.continuation[n * self.grid.nx + i]
    }
    pub fn continuation_row(&self, n: usize) -> &[bool] {
        &self.continuation[n * self.grid.nx..(n + 1) * self.grid.nx]
    }

    /// Linear interpolation of `v(t_n, x)` in `x`.
    pub fn value_at(&self, n: usize, x: f64) -> f64 {
        interpolate(&self.grid, self.row(n), x)
    }
}

fn interpolate(grid: &FdGrid, row: &[f64], x: f64) -> f64 {
    let s = ((x - grid.x_min) / grid.dx()).clamp(0.0, (grid.nx - 1) as f64);
    let i = (s.floor() as usize).min(grid.nx - 2);
    let w = s - i as f64;
    (1.0 - w) * row[i] + w * row[i + 1]
}

/// Exercise dates allowed by the configuration, as time indices.
fn exercise_steps(grid: &FdGrid, cfg: &FdConfig) -> Vec<bool> {
    (0..=grid.nt)
        .map(|n| {
            if !cfg.bermudan {
                return true;
            }
            let t = grid.t(n);
            (t - t.round()).abs() < 1e-9 * grid.horizon.max(1.0)
        })
        .collect()
}

/// Excess value far from the centre, where the posterior has settled on a
/// single drift `b`: the best of stopping at any later exercise date.
fn asymptote(b: f64, r: f64, x: f64, t: f64, horizon: f64, bermudan: bool) -> f64 {
    let growth = |d: f64| (x + (b - r) * (d - t)).exp() - x.exp();
    if b >= r {
        return growth(horizon);
    }
    if bermudan {
        let next = t.ceil().min(horizon);
        growth(next)
    } else {
        0.0
    }
}

struct Tridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiagonal {
    fn new(n: usize) -> Self {
        Self { lower: vec![0.0; n], diag: vec![0.0; n], upper: vec![0.0; n] }
    }

    fn solve(&self, rhs: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
        let n = rhs.len();
        scratch.clear();
        scratch.resize(n, 0.0);
        let c = scratch;
        let mut denom = self.diag[0];
        c[0] = self.upper[0] / denom;
        out[0] = rhs[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - self.lower[i] * c[i - 1];
            c[i] = self.upper[i] / denom;
            out[i] = (rhs[i] - self.lower[i] * out[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            out[i] -= c[i] * out[i + 1];
        }
    }

    /// Projected SOR for `A v >= rhs, v >= 0, (A v - rhs) v = 0`.
    fn psor(&self, rhs: &[f64], v: &mut [f64], cfg: &FdConfig, step: usize) -> Result<()> {
        let n = rhs.len();
        for _ in 0..cfg.max_iterations {
            let mut change: f64 = 0.0;
            for i in 0..n {
                let mut r = rhs[i];
                if i > 0 {
                    r -= self.lower[i] * v[i - 1];
                }
                if i + 1 < n {
                    r -= self.upper[i] * v[i + 1];
                }
                let gs = r / self.diag[i];
                let new = (v[i] + cfg.omega * (gs - v[i])).max(0.0);
                change = change.max((new - v[i]).abs());
                v[i] = new;
            }
            if change < cfg.tolerance {
                return Ok(());
            }
        }
        Err(Error::NoConvergence { step, iterations: cfg.max_iterations })
    }
}

/// Spatial operator `L v = sigma^2/2 v_xx + drift v_x - r v` at interior
/// node `i` as (lower, diag, upper) weights.
fn stencil(sigma: f64, r: f64, drift: f64, dx: f64) -> (f64, f64, f64) {
    let diff = 0.5 * sigma * sigma / (dx * dx);
    let adv = drift / (2.0 * dx);
    (diff - adv, -2.0 * diff - r, diff + adv)
}

/// Drift of the log-price and running reward at one node.
type Coefficients = dyn Fn(f64, f64) -> (f64, f64) + Sync;

/// What happens at a node after the linear step.
#[derive(Clone, Copy)]
enum NodeRule<'a> {
    /// Project onto `v >= 0` if the time is an exercise date.
    Obstacle,
    /// Force `v = 0` on the given stopping set.
    Fixed(&'a [bool]),
}

#[allow(clippy::too_many_arguments)]
fn backward_step(
    grid: &FdGrid,
    sigma: f64,
    r: f64,
    coeff: &Coefficients,
    n: usize,
    next: &[f64],
    boundary: (f64, f64),
    rule: NodeRule<'_>,
    project: bool,
    cfg: &FdConfig,
    out: &mut [f64],
) -> Result<()> {
    let m = grid.nx - 2;
    let (dx, dt, th) = (grid.dx(), grid.dt(), cfg.theta);
    let (t_now, t_next) = (grid.t(n), grid.t(n + 1));
    let mut a = Tridiagonal::new(m);
    let mut rhs = vec![0.0; m];
    for k in 0..m {
        let i = k + 1;
        let x = grid.x(i);
        let (mu_next, f_next) = coeff(t_next, x);
        let (l1, d1, u1) = stencil(sigma, r, mu_next, dx);
        let explicit = l1 * next[i - 1] + d1 * next[i] + u1 * next[i + 1];
        let (mu_now, f_now) = coeff(t_now, x);
        let (l0, d0, u0) = stencil(sigma, r, mu_now, dx);
        a.lower[k] = -th * dt * l0;
        a.diag[k] = 1.0 - th * dt * d0;
        a.upper[k] = -th * dt * u0;
        rhs[k] = next[i] + (1.0 - th) * dt * explicit + dt * (th * f_now + (1.0 - th) * f_next);
    }
    rhs[0] -= a.lower[0] * boundary.0;
    rhs[m - 1] -= a.upper[m - 1] * boundary.1;
    a.lower[0] = 0.0;
    a.upper[m - 1] = 0.0;

    if let NodeRule::Fixed(stop) = rule {
        for k in 0..m {
            if stop[k + 1] {
                a.lower[k] = 0.0;
                a.upper[k] = 0.0;
                a.diag[k] = 1.0;
                rhs[k] = 0.0;
            }
        }
    }

    let mut scratch = Vec::with_capacity(m);
    let interior = &mut out[1..grid.nx - 1];
    a.solve(&rhs, interior, &mut scratch);
    if project && interior.iter().any(|v| *v < 0.0) {
        interior.iter_mut().for_each(|v| *v = v.max(0.0));
        a.psor(&rhs, interior, cfg, n)?;
    }
    out[0] = boundary.0;
    out[grid.nx - 1] = boundary.1;
    Ok(())
}

fn check_inputs(model: &GbmStockModel, q: &SimplexPoint, grid: &FdGrid) -> Result<()> {
    if q.len() != model.n_scenarios() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} drift scenarios",
            q.len(),
            model.n_scenarios()
        )));
    }
    if (grid.horizon - model.horizon()).abs() > 1e-12 {
        return Err(Error::DimensionMismatch("grid horizon differs from the model horizon".into()));
    }
    let x0 = model.x0();
    if !(grid.x_min < x0 && x0 < grid.x_max) {
        return Err(Error::InvalidParameter("log S0 lies outside the grid".into()));
    }
    Ok(())
}

/// Prior over the drift `b` of the stock price; the filter of such a prior
/// returns `E[b | X_t = x]`.
pub fn price_drift_prior(model: &GbmStockModel, q: &SimplexPoint) -> Result<DriftPrior> {
    DriftPrior::new(model.drifts().to_vec(), q.clone(), model.sigma(), model.x0())
}

/// Extreme drifts among scenarios with positive weight.
fn drift_range(model: &GbmStockModel, q: &SimplexPoint) -> (f64, f64) {
    q.support().iter().map(|i| model.drifts()[*i]).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| {
        (lo.min(b), hi.max(b))
    })
}

/// Solves the obstacle problem with the default configuration.
pub fn solve_vi(model: &GbmStockModel, q: &SimplexPoint, grid: &FdGrid) -> Result<ValueSurface> {
    solve_vi_with(model, q, grid, &FdConfig::default())
}

pub fn solve_vi_with(model: &GbmStockModel, q: &SimplexPoint, grid: &FdGrid, cfg: &FdConfig) -> Result<ValueSurface> {
    check_inputs(model, q, grid)?;
    let prior = price_drift_prior(model, q)?;
    let (sigma, r) = (model.sigma(), model.r());
    let half_var = 0.5 * sigma * sigma;
    let coeff = move |t: f64, x: f64| {
        let b = prior.gamma_drift(t, x);
        (b - half_var, x.exp() * (b - r))
    };
    let (b_lo, b_hi) = drift_range(model, q);
    let exercise = exercise_steps(grid, cfg);
    let nx = grid.nx;

    let mut values = vec![0.0; (grid.nt + 1) * nx];
    let mut continuation = vec![false; (grid.nt + 1) * nx];
    for n in (0..grid.nt).rev() {
        let t = grid.t(n);
        let bc = (
            asymptote(b_lo, r, grid.x_min, t, grid.horizon, cfg.bermudan),
            asymptote(b_hi, r, grid.x_max, t, grid.horizon, cfg.bermudan),
        );
        let (head, tail) = values.split_at_mut((n + 1) * nx);
        let next = &tail[..nx];
        let now = &mut head[n * nx..];
        backward_step(grid, sigma, r, &coeff, n, next, bc, NodeRule::Obstacle, exercise[n], cfg, now)?;
        for i in 0..nx {
            continuation[n * nx + i] = !exercise[n] || now[i] > 0.0;
        }
    }
    Ok(ValueSurface { grid: grid.clone(), values, continuation })
}

/// `S_0 + v(0, log S_0)`: the optimal expected discounted sale price under
/// the scenario weights `q`.
pub fn stock_value(model: &GbmStockModel, q: &SimplexPoint, grid: &FdGrid) -> Result<f64> {
    stock_value_with(model, q, grid, &FdConfig::default())
}

pub fn stock_value_with(model: &GbmStockModel, q: &SimplexPoint, grid: &FdGrid, cfg: &FdConfig) -> Result<f64> {
    let surface = solve_vi_with(model, q, grid, cfg)?;
    Ok(model.s0() + surface.value_at(0, model.x0()))
}

/// Expected discounted sale price `E^theta[e^{-r tau} S_tau]` in every
/// scenario when the stopping rule is the one encoded in `surface`.
///
/// Each expectation solves the linear equation with the scenario's own drift
/// in the continuation region and zero in the stopping region.
pub fn scenario_expectations(model: &GbmStockModel, surface: &ValueSurface, cfg: &FdConfig) -> Result<Vec<f64>> {
    let grid = surface.grid();
    let (sigma, r) = (model.sigma(), model.r());
    let nx = grid.nx;
    model
        .drifts()
        .iter()
        .map(|&b| {
            let mu = b - 0.5 * sigma * sigma;
            let coeff = move |_t: f64, x: f64| (mu, x.exp() * (b - r));
            let mut next = vec![0.0; nx];
            let mut now = vec![0.0; nx];
            for n in (0..grid.nt).rev() {
                let t = grid.t(n);
                let edge = |i: usize, x: f64| {
                    if surface.is_continuation(n, i) {
                        (x + (b - r) * (grid.horizon - t)).exp() - x.exp()
                    } else {
                        0.0
                    }
                };
                let bc = (edge(0, grid.x_min), edge(nx - 1, grid.x_max));
                let stop: Vec<bool> = surface.continuation_row(n).iter().map(|c| !c).collect();
                backward_step(grid, sigma, r, &coeff, n, &next, bc, NodeRule::Fixed(&stop), false, cfg, &mut now)?;
                std::mem::swap(&mut next, &mut now);
            }
            Ok(model.s0() + interpolate(grid, &next, model.x0()))
        })
        .collect()
}

/// Continuation-region boundary per time step: the smallest log-price from
/// which the holder keeps the stock. `None` if the row is all stop or all
/// continue.
pub fn extract_boundary(surface: &ValueSurface) -> Vec<Option<f64>> {
    let grid = surface.grid();
    (0..=grid.nt)
        .map(|n| {
            let row = surface.continuation_row(n);
            if row.iter().all(|c| *c) || row.iter().all(|c| !*c) {
                return None;
            }
            row.windows(2).position(|w| w[0] != w[1]).map(|i| if row[i + 1] { grid.x(i + 1) } else { grid.x(i) })
        })
        .collect()
}

/// Exact backward induction on a recombining trinomial tree for the log
/// price under its posterior drift. Stopping is allowed at every tree date.
pub fn tree_oracle_value(model: &GbmStockModel, q: &SimplexPoint, n_steps: usize) -> Result<f64> {
    if n_steps == 0 {
        return Err(Error::InvalidParameter("tree needs at least one step".into()));
    }
    if q.len() != model.n_scenarios() {
        return Err(Error::DimensionMismatch("weights do not match the drift scenarios".into()));
    }
    let prior = price_drift_prior(model, q)?;
    let sigma = model.sigma();
    let dt = model.horizon() / n_steps as f64;
    let dx = sigma * (3.0 * dt).sqrt();
    let disc = (-model.r() * dt).exp();
    let x0 = model.x0();

    let mut values: Vec<f64> = (0..=2 * n_steps).map(|j| (x0 + (j as f64 - n_steps as f64) * dx).exp()).collect();
    for n in (0..n_steps).rev() {
        let t = n as f64 * dt;
        let mut layer = Vec::with_capacity(2 * n + 1);
        for j in 0..=2 * n {
            let x = x0 + (j as f64 - n as f64) * dx;
            let drift = prior.gamma_drift(t, x) - 0.5 * sigma * sigma;
            let nu = drift * dt / dx;
            let pu = 0.5 * (1.0 / 3.0 + nu * nu + nu);
            let pd = 0.5 * (1.0 / 3.0 + nu * nu - nu);
            let pm = 1.0 - pu - pd;
            if pm < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "tree too coarse: drift {drift} gives negative middle probability"
                )));
            }
            // children of node j at layer n are j, j+1, j+2 at layer n+1
            let cont = disc * (pd * values[j] + pm * values[j + 1] + pu * values[j + 2]);
            layer.push(x.exp().max(cont));
        }
        values = layer;
    }
    Ok(values[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(b: f64) -> GbmStockModel {
        GbmStockModel::new(1.0, 0.3, 0.02, 5.0, vec![b]).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn grid_is_centered_on_spot() {
        let m = GbmStockModel::reference(0.3).unwrap();
        let g = FdGrid::centered(&m, 200, 100).unwrap();
        assert_eq!(g.nx(), 201);
        assert!((g.x(100) - m.x0()).abs() < 1e-12);
        assert!(FdGrid::new(1.0, 0.0, 10, 10, 1.0).is_err());
        assert!(FdGrid::new(0.0, 1.0, 2, 10, 1.0).is_err());
    }

    #[test]
    fn negative_running_reward_stops_immediately() {
        let m = GbmStockModel::new(1.0, 0.3, 0.02, 5.0, vec![-0.05, 0.0, 0.01]).unwrap();
        let q = SimplexPoint::uniform(3);
        let g = FdGrid::centered(&m, 201, 100).unwrap();
        let s = solve_vi(&m, &q, &g).unwrap();
        assert!(s.values.iter().all(|v| *v == 0.0));
        assert!(extract_boundary(&s).iter().all(Option::is_none));
        assert_eq!(stock_value(&m, &q, &g).unwrap(), 1.0);
        assert_eq!(tree_oracle_value(&m, &q, 25).unwrap(), 1.0);
    }

    #[test]
    fn single_scenario_matches_closed_form() {
        let m = single(0.15);
        let q = SimplexPoint::uniform(1);
        let g = FdGrid::centered(&m, 201, 100).unwrap();
        let exact = (0.13f64 * 5.0).exp();
        let fd = stock_value(&m, &q, &g).unwrap();
        assert!(rel(fd, exact) < 0.01, "fd {fd} vs {exact}");
        let tree = tree_oracle_value(&m, &q, 25).unwrap();
        assert!(rel(tree, exact) < 0.01, "tree {tree} vs {exact}");
        let s = solve_vi(&m, &q, &g).unwrap();
        for n in 0..g.nt() {
            assert!(s.continuation_row(n).iter().all(|c| *c));
        }
        assert!(extract_boundary(&s)[..g.nt()].iter().all(Option::is_none));
    }

    #[test]
    fn reference_instance_has_a_boundary() {
        let m = GbmStockModel::reference(0.3).unwrap();
        let q = SimplexPoint::uniform(3);
        let g = FdGrid::centered(&m, 301, 200).unwrap();
        let s = solve_vi(&m, &q, &g).unwrap();
        assert!(s.values.iter().all(|v| *v >= 0.0));
        assert!(s.row(g.nt()).iter().all(|v| *v == 0.0));
        let b = extract_boundary(&s);
        assert!(b[g.nt() / 2].is_some());
        let v = model_value(&m, &q, &g);
        assert!(v > 1.0);
        let tree = tree_oracle_value(&m, &q, 200).unwrap();
        assert!(rel(v, tree) < 0.01, "fd {v} vs tree {tree}");
    }

    fn model_value(m: &GbmStockModel, q: &SimplexPoint, g: &FdGrid) -> f64 {
        stock_value(m, q, g).unwrap()
    }

    #[test]
    fn scenario_expectations_mix_to_value() {
        let m = GbmStockModel::reference(0.3).unwrap();
        let q = SimplexPoint::make_simplex(&[0.2, 0.5, 0.3]).unwrap();
        let g = FdGrid::centered(&m, 301, 200).unwrap();
        let s = solve_vi(&m, &q, &g).unwrap();
        let e = scenario_expectations(&m, &s, &FdConfig::default()).unwrap();
        let v = 1.0 + s.value_at(0, m.x0());
        assert!((q.expectation(&e) - v).abs() < 2e-3 * v, "{e:?} vs {v}");
        assert!(e[0] < e[1] && e[1] < e[2]);
    }

    #[test]
    fn bermudan_is_below_american() {
        let m = GbmStockModel::reference(0.3).unwrap();
        let q = SimplexPoint::uniform(3);
        let g = FdGrid::centered(&m, 201, 200).unwrap();
        let cfg = FdConfig { bermudan: true, ..FdConfig::default() };
        let berm = stock_value_with(&m, &q, &g, &cfg).unwrap();
        let amer = stock_value(&m, &q, &g).unwrap();
        assert!(berm <= amer + 1e-9 && berm >= 1.0, "{berm} {amer}");
    }
}
