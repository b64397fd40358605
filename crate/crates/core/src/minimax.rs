//! Outer minimisation over scenario priors and brute-force certification of
//! the minimax equality on small trees.
//!
//! The smooth objective of the best stopping rule equals
//! `inf_Q sup_tau G(tau, Q)`. [`outer_minimize`] computes the right-hand side
//! for any inner optimal-stopping solver. On an explicit finite tree
//! [`dual_value`] enumerates every stopping rule, evaluates `G` on a simplex
//! grid and checks the saddle inequalities.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use serde::{Deserialize, Serialize};

use crate::ambiguity::{AmbiguityFunction, ExtendedValue};
use crate::error::{Error, Result};
use crate::scenario::SimplexPoint;

/// Result of solving the classical stopping problem under the mixture `P^q`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerOutcome {
    /// `sup_tau E^{P^q}[Y_tau]`.
    pub value: f64,
    /// `E^theta[Y_tau*]` for every scenario, when the solver provides them.
    pub expectations: Option<Vec<f64>>,
}

/// Optimal stopping solver for a given scenario prior. Must be
/// deterministic in `q`.
pub trait InnerSolver: Sync {
    fn n_scenarios(&self) -> usize;
    fn solve(&self, q: &SimplexPoint) -> Result<InnerOutcome>;

    /// `sup_tau E^{P^q}[Y_tau]` alone; override when the per-scenario
    /// expectations cost extra.
    fn value(&self, q: &SimplexPoint) -> Result<f64> {
        self.solve(q).map(|o| o.value)
    }
}

/// Settings of the derivative-free outer search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterConfig {
    /// Relative spread of simplex values at which a restart has converged.
    pub tol: f64,
    pub max_evaluations: usize,
    /// Lower bound on every searched probability.
    pub floor: f64,
    /// Edge length of the initial Nelder–Mead simplex in softmax coordinates.
    pub initial_step: f64,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self { tol: 1e-7, max_evaluations: 500, floor: 1e-8, initial_step: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterResult {
    pub q_star: SimplexPoint,
    /// `G(tau_{q*}, q*)`.
    pub value: f64,
    /// Inner value at `q*`.
    pub inner_value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Maps unconstrained coordinates to a floored probability vector on the
/// support of the reference prior.
struct Parametrisation {
    support: Vec<usize>,
    n: usize,
    floor: f64,
}

impl Parametrisation {
    fn to_simplex(&self, z: &[f64]) -> SimplexPoint {
        let m = self.support.len();
        let mut logits: Vec<f64> = z.to_vec();
        logits.push(0.0);
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let s: f64 = e.iter().sum();
        let mass = 1.0 - m as f64 * self.floor;
        let mut w = vec![0.0; self.n];
        for (k, idx) in self.support.iter().enumerate() {
            w[*idx] = self.floor + mass * e[k] / s;
        }
        SimplexPoint::make_simplex(&w).expect("softmax weights are positive")
    }

    fn coordinates_of(&self, q: &SimplexPoint) -> Vec<f64> {
        let m = self.support.len();
        let mass = 1.0 - m as f64 * self.floor;
        let y: Vec<f64> =
            self.support.iter().map(|i| ((q.get(*i) - self.floor).max(self.floor) / mass).ln()).collect();
        let last = y[m - 1];
        y[..m - 1].iter().map(|v| v - last).collect()
    }
}

/// Minimises `q -> G(tau_q, q) = R(q, sup_tau E^{P^q}[Y_tau])` over the
/// probability simplex.
///
/// Nelder–Mead runs in softmax coordinates from three starting points: the
/// reference prior, a point close to the worst scenario, and the
/// barycentre. Objective values are cached, so repeated points cost nothing.
pub fn outer_minimize(
    inner: &dyn InnerSolver,
    f: &AmbiguityFunction,
    p: &SimplexPoint,
    cfg: &OuterConfig,
) -> Result<OuterResult> {
    if p.len() != inner.n_scenarios() {
        return Err(Error::DimensionMismatch(format!(
            "prior has {} entries, solver has {} scenarios",
            p.len(),
            inner.n_scenarios()
        )));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidParameter("outer tolerance must be positive".into()));
    }
    let support = p.support();
    if support.len() == 1 {
        let value = inner.value(p)?;
        let g = f.r_value(p, p, value)?;
        return Ok(OuterResult {
            q_star: p.clone(),
            value: g.finite().ok_or(Error::NonFinite("dual value"))?,
            inner_value: value,
            evaluations: 1,
            converged: true,
        });
    }
    let par = Parametrisation { support: support.clone(), n: p.len(), floor: cfg.floor };
    let mut search = Search { inner, f, p, par: &par, cache: HashMap::new(), evaluations: 0 };

    let worst = match inner.solve(p)?.expectations {
        Some(e) => *support.iter().min_by(|a, b| e[**a].total_cmp(&e[**b])).expect("non-empty support"),
        None => {
            let mut best = (support[0], f64::INFINITY);
            for i in &support {
                let q = p.blend(&SimplexPoint::vertex(p.len(), *i), 0.9);
                let v = inner.value(&q)?;
                if v < best.1 {
                    best = (*i, v);
                }
            }
            best.0
        }
    };
    search.evaluations += 1;
    let mut uniform = vec![0.0; p.len()];
    support.iter().for_each(|i| uniform[*i] = 1.0);
    let starts = [
        p.clone(),
        p.blend(&SimplexPoint::vertex(p.len(), worst), 0.9),
        SimplexPoint::make_simplex(&uniform)?,
    ];

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut converged = false;
    for start in &starts {
        if search.evaluations >= cfg.max_evaluations {
            break;
        }
        let z0 = par.coordinates_of(start);
        let (z, v, ok) = nelder_mead(&mut search, z0, cfg)?;
        converged |= ok;
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((z, v));
        }
    }
    let (z, v) = best.expect("at least one restart ran");
    if !converged {
        return Err(Error::BudgetExhausted(search.evaluations));
    }
    let q_star = par.to_simplex(&z);
    let inner_value = inner.value(&q_star)?;
    Ok(OuterResult { q_star, value: v, inner_value, evaluations: search.evaluations, converged })
}

struct Search<'a> {
    inner: &'a dyn InnerSolver,
    f: &'a AmbiguityFunction,
    p: &'a SimplexPoint,
    par: &'a Parametrisation,
    cache: HashMap<Vec<u64>, f64>,
    evaluations: usize,
}

impl Search<'_> {
    fn objective(&mut self, z: &[f64]) -> Result<f64> {
        let q = self.par.to_simplex(z);
        let key: Vec<u64> = q.weights().iter().map(|w| w.to_bits()).collect();
        if let Some(v) = self.cache.get(&key) {
            return Ok(*v);
        }
        self.evaluations += 1;
        let s = self.inner.value(&q)?;
        let (v, _) = self.f.r_value(&q, self.p, s)?.sentinel();
        self.cache.insert(key, v);
        Ok(v)
    }
}

fn nelder_mead(search: &mut Search<'_>, z0: Vec<f64>, cfg: &OuterConfig) -> Result<(Vec<f64>, f64, bool)> {
    let d = z0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let f0 = search.objective(&z0)?;
    simplex.push((z0.clone(), f0));
    for i in 0..d {
        let mut z = z0.clone();
        z[i] += cfg.initial_step;
        let v = search.objective(&z)?;
        simplex.push((z, v));
    }
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (lo, hi) = (simplex[0].1, simplex[d].1);
        if hi - lo <= cfg.tol * (1.0 + lo.abs()) {
            return Ok((simplex[0].0.clone(), lo, true));
        }
        if search.evaluations >= cfg.max_evaluations {
            return Ok((simplex[0].0.clone(), lo, false));
        }
        let centroid: Vec<f64> =
            (0..d).map(|j| simplex[..d].iter().map(|(z, _)| z[j]).sum::<f64>() / d as f64).collect();
        let towards = |t: f64, worst: &[f64]| -> Vec<f64> {
            centroid.iter().zip(worst).map(|(c, w)| c + t * (w - c)).collect()
        };
        let worst = simplex[d].0.clone();
        let reflected = towards(-1.0, &worst);
        let fr = search.objective(&reflected)?;
        if fr < simplex[0].1 {
            let expanded = towards(-2.0, &worst);
            let fe = search.objective(&expanded)?;
            simplex[d] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[d - 1].1 {
            simplex[d] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < simplex[d].1 {
            let c = towards(-0.5, &worst);
            let v = search.objective(&c)?;
            (c, v)
        } else {
            let c = towards(0.5, &worst);
            let v = search.objective(&c)?;
            (c, v)
        };
        if fc < fr.min(simplex[d].1) {
            simplex[d] = (contracted, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let z: Vec<f64> = best.iter().zip(&entry.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
            let v = search.objective(&z)?;
            *entry = (z, v);
        }
    }
}

const MAX_PERIODS: usize = 4;
const MAX_NODES: usize = 64;
const MAX_SCENARIOS: usize = 3;
const MAX_RULES: usize = 200_000;

/// One information node of a [`SmallInstance`].
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub period: usize,
    pub payoff: f64,
    pub children: Vec<usize>,
    /// `transitions[theta][c]`: probability of moving to `children[c]`
    /// under scenario `theta`.
    pub transitions: Vec<Vec<f64>>,
}

/// Finite stopping problem on an information tree shared by all scenarios;
/// scenarios differ only in their transition probabilities. Node 0 is the
/// root and leaves are forced stops.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallInstance {
    n_scenarios: usize,
    periods: usize,
    nodes: Vec<TreeNode>,
}

impl SmallInstance {
    pub fn new(n_scenarios: usize, nodes: Vec<TreeNode>) -> Result<Self> {
        if n_scenarios == 0 || n_scenarios > MAX_SCENARIOS {
            return Err(Error::StateSpaceTooLarge(format!("{n_scenarios} scenarios (limit {MAX_SCENARIOS})")));
        }
        if nodes.is_empty() || nodes.len() > MAX_NODES {
            return Err(Error::StateSpaceTooLarge(format!("{} nodes (limit {MAX_NODES})", nodes.len())));
        }
        let periods = nodes.iter().map(|n| n.period).max().unwrap_or(0);
        if periods + 1 > MAX_PERIODS {
            return Err(Error::StateSpaceTooLarge(format!("{} decision dates (limit {MAX_PERIODS})", periods + 1)));
        }
        if nodes[0].period != 0 {
            return Err(Error::InvalidParameter("node 0 must be the root".into()));
        }
        let mut parents = vec![0usize; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            if !node.payoff.is_finite() {
                return Err(Error::NonFinite("payoff"));
            }
            if node.children.is_empty() {
                continue;
            }
            if node.transitions.len() != n_scenarios {
                return Err(Error::DimensionMismatch(format!("node {i} needs one transition row per scenario")));
            }
            for row in &node.transitions {
                if row.len() != node.children.len() || row.iter().any(|p| *p < 0.0) {
                    return Err(Error::InvalidParameter(format!("node {i} has invalid transition probabilities")));
                }
                if (row.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!("node {i} transitions do not sum to one")));
                }
            }
            for c in &node.children {
                if *c <= i || *c >= nodes.len() || nodes[*c].period != node.period + 1 {
                    return Err(Error::InvalidParameter(format!("node {i} has an invalid child {c}")));
                }
                parents[*c] += 1;
            }
        }
        if parents[1..].iter().any(|n| *n != 1) {
            return Err(Error::InvalidParameter("every non-root node needs exactly one parent".into()));
        }
        Ok(Self { n_scenarios, periods, nodes })
    }

    /// Complete tree with `periods` transitions (so `periods + 1` decision
    /// dates) and `branching` children per node, payoffs uniform on `[0.5, 2]` and random transition
    /// probabilities bounded away from zero.
    pub fn random(seed: u64, n_scenarios: usize, periods: usize, branching: usize) -> Result<Self> {
        if branching == 0 {
            return Err(Error::InvalidParameter("branching must be positive".into()));
        }
        if periods + 1 > MAX_PERIODS {
            return Err(Error::StateSpaceTooLarge(format!("{} decision dates (limit {MAX_PERIODS})", periods + 1)));
        }
        let count: usize = (0..=periods).map(|k| branching.pow(k as u32)).sum();
        if count > MAX_NODES {
            return Err(Error::StateSpaceTooLarge(format!("{count} nodes (limit {MAX_NODES})")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nodes: Vec<TreeNode> = Vec::with_capacity(count);
        nodes.push(TreeNode { period: 0, payoff: rng.random_range(0.5..2.0), children: vec![], transitions: vec![] });
        let mut frontier = vec![0usize];
        for period in 1..=periods {
            let mut next = Vec::new();
            for parent in frontier {
                for _ in 0..branching {
                    let id = nodes.len();
                    nodes.push(TreeNode {
                        period,
                        payoff: rng.random_range(0.5..2.0),
                        children: vec![],
                        transitions: vec![],
                    });
                    nodes[parent].children.push(id);
                    next.push(id);
                }
                nodes[parent].transitions = (0..n_scenarios)
                    .map(|_| {
                        let raw: Vec<f64> = (0..branching).map(|_| rng.random_range(0.1..1.0)).collect();
                        let s: f64 = raw.iter().sum();
                        raw.iter().map(|r| r / s).collect()
                    })
                    .collect();
            }
            frontier = next;
        }
        Self::new(n_scenarios, nodes)
    }

    /// Copy of `self` with every payoff replaced by `c`.
    pub fn with_constant_payoff(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.nodes.iter_mut().for_each(|n| n.payoff = c);
        out
    }

    pub fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }
    /// Number of transitions from the root to the leaves.
    pub fn periods(&self) -> usize {
        self.periods
    }
    pub fn decision_dates(&self) -> usize {
        self.periods + 1
    }
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Probability of reaching every node under scenario `theta`.
    pub fn reach_probabilities(&self, theta: usize) -> Vec<f64> {
        let mut reach = vec![0.0; self.nodes.len()];
        reach[0] = 1.0;
        for (i, node) in self.nodes.iter().enumerate() {
            for (c, child) in node.children.iter().enumerate() {
                reach[*child] = reach[i] * node.transitions[theta][c];
            }
        }
        reach
    }

    fn count_rules(&self, node: usize) -> f64 {
        let n = &self.nodes[node];
        if n.children.is_empty() {
            1.0
        } else {
            1.0 + n.children.iter().map(|c| self.count_rules(*c)).product::<f64>()
        }
    }

    /// Number of pure stopping rules: `1 + prod_children` at each inner
    /// node and 1 at a leaf.
    pub fn rule_count(&self) -> f64 {
        self.count_rules(0)
    }
}

/// Pure stopping rule: `stop[node]` says whether to stop when `node` is
/// reached. Entries below a stopping node are irrelevant and kept `false`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StoppingRule {
    pub stop: Vec<bool>,
}

impl StoppingRule {
    /// `E^theta[Y_tau]` for every scenario.
    pub fn scenario_values(&self, inst: &SmallInstance) -> Vec<f64> {
        (0..inst.n_scenarios).map(|th| self.value_from(inst, 0, th)).collect()
    }

    fn value_from(&self, inst: &SmallInstance, node: usize, theta: usize) -> f64 {
        let n = &inst.nodes[node];
        if self.stop[node] || n.children.is_empty() {
            return n.payoff;
        }
        n.children.iter().zip(&n.transitions[theta]).map(|(c, p)| p * self.value_from(inst, *c, theta)).sum()
    }
}

/// Every pure adapted stopping rule of the instance.
pub fn enumerate_stopping_rules(inst: &SmallInstance) -> Result<Vec<StoppingRule>> {
    let count = inst.rule_count();
    if count > MAX_RULES as f64 {
        return Err(Error::StateSpaceTooLarge(format!("{count} stopping rules (limit {MAX_RULES})")));
    }
    Ok(rules_below(inst, 0).into_iter().map(|stop| StoppingRule { stop }).collect())
}

fn rules_below(inst: &SmallInstance, node: usize) -> Vec<Vec<bool>> {
    let n = &inst.nodes[node];
    let mut stop_here = vec![false; inst.nodes.len()];
    stop_here[node] = true;
    if n.children.is_empty() {
        return vec![stop_here];
    }
    let mut combos: Vec<Vec<bool>> = vec![vec![false; inst.nodes.len()]];
    for c in &n.children {
        let sub = rules_below(inst, *c);
        combos = combos
            .iter()
            .flat_map(|base| {
                sub.iter().map(move |s| base.iter().zip(s).map(|(a, b)| *a || *b).collect::<Vec<bool>>())
            })
            .collect();
    }
    combos.insert(0, stop_here);
    combos
}

/// Best pure rule for the smooth objective.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalResult {
    pub value: f64,
    pub rule: usize,
    pub scenario_values: Vec<f64>,
}

/// `sup_tau v^{-1}(sum_theta p_theta v(E^theta[Y_tau]))` over pure rules.
pub fn primal_value(inst: &SmallInstance, p: &SimplexPoint, f: &AmbiguityFunction) -> Result<PrimalResult> {
    let rules = enumerate_stopping_rules(inst)?;
    let mut best: Option<PrimalResult> = None;
    for (k, rule) in rules.iter().enumerate() {
        let v = rule.scenario_values(inst);
        if let ExtendedValue::Finite(ce) = f.smooth_objective(p, &v) {
            if best.as_ref().is_none_or(|b| ce > b.value) {
                best = Some(PrimalResult { value: ce, rule: k, scenario_values: v });
            }
        }
    }
    best.ok_or(Error::NonFinite("smooth objective of every stopping rule"))
}

/// Stopping rule that stops at each node with a prescribed unconditional
/// weight; weights along every root-to-leaf path sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomizedStoppingRule {
    pub weights: Vec<f64>,
}

impl RandomizedStoppingRule {
    pub fn new(inst: &SmallInstance, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != inst.nodes.len() {
            return Err(Error::DimensionMismatch("one weight per node required".into()));
        }
        if weights.iter().any(|w| !(-1e-12..=1.0 + 1e-12).contains(w)) {
            return Err(Error::InvalidParameter("stopping weights must lie in [0, 1]".into()));
        }
        let rule = Self { weights };
        let mut stack = vec![(0usize, 0.0)];
        while let Some((node, acc)) = stack.pop() {
            let acc = acc + rule.weights[node];
            let n = &inst.nodes[node];
            if n.children.is_empty() {
                if (acc - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!("stopping weights sum to {acc} on a path")));
                }
            } else {
                stack.extend(n.children.iter().map(|c| (*c, acc)));
            }
        }
        Ok(rule)
    }

    pub fn from_pure(inst: &SmallInstance, rule: &StoppingRule) -> Self {
        let mut weights = vec![0.0; inst.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let n = &inst.nodes[node];
            if rule.stop[node] || n.children.is_empty() {
                weights[node] = 1.0;
            } else {
                stack.extend(n.children.iter().copied());
            }
        }
        Self { weights }
    }

    /// Convex combination of pure rules.
    pub fn mixture(inst: &SmallInstance, parts: &[(&StoppingRule, f64)]) -> Result<Self> {
        let mut weights = vec![0.0; inst.nodes.len()];
        for (rule, a) in parts {
            for (w, x) in weights.iter_mut().zip(Self::from_pure(inst, rule).weights) {
                *w += a * x;
            }
        }
        Self::new(inst, weights)
    }

    /// `E^theta[sum_t f_t Y_t]` for every scenario.
    pub fn scenario_values(&self, inst: &SmallInstance) -> Vec<f64> {
        (0..inst.n_scenarios)
            .map(|th| {
                let reach = inst.reach_probabilities(th);
                inst.nodes.iter().enumerate().map(|(i, n)| reach[i] * self.weights[i] * n.payoff).sum()
            })
            .collect()
    }
}

/// `G` evaluated on a randomised rule: `R(q, sum_theta q_theta E^theta[sum_t f_t Y_t])`.
pub fn randomized_g(
    inst: &SmallInstance,
    rule: &RandomizedStoppingRule,
    q: &SimplexPoint,
    p: &SimplexPoint,
    f: &AmbiguityFunction,
) -> Result<ExtendedValue> {
    f.g_value(q, p, &rule.scenario_values(inst))
}

/// Uniform barycentric grid with spacing `step` on the simplex in `n`
/// dimensions.
pub fn simplex_grid(n: usize, step: f64) -> Result<Vec<SimplexPoint>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidParameter(format!("grid step must lie in (0, 1], got {step}")));
    }
    let m = (1.0 / step).round() as usize;
    if ((m as f64) * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("1 / {step} is not an integer")));
    }
    let mut out = Vec::new();
    let mut current = vec![0usize; n];
    compositions(m, 0, &mut current, &mut out);
    out.into_iter()
        .map(|c| SimplexPoint::from_weights(c.iter().map(|k| *k as f64 / m as f64).collect()))
        .collect()
}

fn compositions(left: usize, idx: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let n = current.len();
    if idx == n - 1 {
        current[idx] = left;
        out.push(current.clone());
        return;
    }
    for k in 0..=left {
        current[idx] = k;
        compositions(left - k, idx + 1, current, out);
    }
}

/// Evidence that `(tau*, q*)` is a saddle point of `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleCertificate {
    /// Closed-form minimiser of `G(tau*, .)`.
    pub q_star: SimplexPoint,
    /// Randomised optimal rule as a mixture of pure rules `(index, weight)`.
    pub tau_star: Vec<(usize, f64)>,
    /// `max_tau min_q G` over randomised rules, `= G(tau*, q*)`.
    pub max_min: f64,
    /// `min_q max_tau G` over the grid.
    pub min_max: f64,
    pub gap: f64,
    /// Largest violation of either saddle inequality (0 if none).
    pub max_violation: f64,
    pub inequalities_checked: usize,
    /// Best pure-rule value of `min_q G` over the grid.
    pub pure_max_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualResult {
    /// Grid min-max value.
    pub value: f64,
    /// Grid point attaining the min-max.
    pub q_grid: SimplexPoint,
    pub certificate: SaddleCertificate,
}

/// Value vectors of all pure rules, keeping only rules that are not
/// dominated in every scenario by another rule.
fn pareto(vectors: &[Vec<f64>]) -> Vec<usize> {
    let mut keep = Vec::new();
    'outer: for (i, v) in vectors.iter().enumerate() {
        for (j, w) in vectors.iter().enumerate() {
            if i == j {
                continue;
            }
            let ge = w.iter().zip(v).all(|(a, b)| a >= b);
            let gt = w.iter().zip(v).any(|(a, b)| a > b);
            if ge && (gt || j < i) {
                continue 'outer;
            }
        }
        keep.push(i);
    }
    keep
}

/// Maximiser of a concave function on `[0, 1]` given its derivative.
fn bisect_max(deriv: impl Fn(f64) -> f64, hi: f64) -> f64 {
    if hi <= 0.0 {
        return 0.0;
    }
    if deriv(0.0) <= 0.0 {
        return 0.0;
    }
    if deriv(hi) >= 0.0 {
        return hi;
    }
    let (mut a, mut b) = (0.0, hi);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if deriv(m) > 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn gradient(f: &AmbiguityFunction, p: &SimplexPoint, x: &[f64]) -> Vec<f64> {
    f.marginal_weights(p, x).unwrap_or_else(|| vec![0.0; x.len()])
}

/// Maximises the certainty equivalent over the triangle spanned by `a`,
/// `b`, `c` (an edge if `c` is `None`); returns barycentric weights.
fn face_max(f: &AmbiguityFunction, p: &SimplexPoint, a: &[f64], b: &[f64], c: Option<&[f64]>) -> (Vec<f64>, f64) {
    let ab = sub(b, a);
    let point = |s: f64, u: f64, ac: &[f64]| -> Vec<f64> {
        a.iter().zip(&ab).zip(ac).map(|((x, d1), d2)| x + s * d1 + u * d2).collect()
    };
    match c {
        None => {
            let zero = vec![0.0; a.len()];
            let s = bisect_max(|s| dot(&gradient(f, p, &point(s, 0.0, &zero)), &ab), 1.0);
            let x = point(s, 0.0, &zero);
            let v = f.smooth_objective(p, &x).finite().unwrap_or(f64::NEG_INFINITY);
            (vec![1.0 - s, s], v)
        }
        Some(c) => {
            let ac = sub(c, a);
            let best_u = |s: f64| bisect_max(|u| dot(&gradient(f, p, &point(s, u, &ac)), &ac), 1.0 - s);
            let envelope = |s: f64| {
                let u = best_u(s);
                let g = gradient(f, p, &point(s, u, &ac));
                let ds = dot(&g, &ab);
                if u >= 1.0 - s && s < 1.0 {
                    ds - dot(&g, &ac)
                } else {
                    ds
                }
            };
            let s = bisect_max(envelope, 1.0);
            let u = best_u(s);
            let x = point(s, u, &ac);
            let v = f.smooth_objective(p, &x).finite().unwrap_or(f64::NEG_INFINITY);
            (vec![1.0 - s - u, s, u], v)
        }
    }
}

/// Maximiser of the certainty equivalent over the convex hull of the
/// value vectors `vs[k]`, as a mixture `(k, weight)`.
fn hull_maximum(f: &AmbiguityFunction, p: &SimplexPoint, vs: &[Vec<f64>], idx: &[usize]) -> (Vec<(usize, f64)>, f64) {
    let n = p.len();
    let ce = |x: &[f64]| f.smooth_objective(p, x).finite().unwrap_or(f64::NEG_INFINITY);
    let mut candidates: Vec<(Vec<(usize, f64)>, f64)> = idx.iter().map(|k| (vec![(*k, 1.0)], ce(&vs[*k]))).collect();
    if n >= 2 {
        let edges: Vec<(usize, usize)> =
            (0..idx.len()).flat_map(|i| (i + 1..idx.len()).map(move |j| (i, j))).collect();
        candidates.extend(edges.par_iter().map(|(i, j)| {
            let (w, v) = face_max(f, p, &vs[idx[*i]], &vs[idx[*j]], None);
            (vec![(idx[*i], w[0]), (idx[*j], w[1])], v)
        }).collect::<Vec<_>>());
    }
    if n >= 3 {
        let tris: Vec<(usize, usize, usize)> = (0..idx.len())
            .flat_map(|i| (i + 1..idx.len()).flat_map(move |j| (j + 1..idx.len()).map(move |k| (i, j, k))))
            .collect();
        candidates.extend(tris.par_iter().map(|(i, j, k)| {
            let (w, v) = face_max(f, p, &vs[idx[*i]], &vs[idx[*j]], Some(&vs[idx[*k]]));
            (vec![(idx[*i], w[0]), (idx[*j], w[1]), (idx[*k], w[2])], v)
        }).collect::<Vec<_>>());
    }
    let mut best = candidates.swap_remove(0);
    for c in candidates {
        if c.1 > best.1 {
            best = c;
        }
    }
    best.0.retain(|(_, w)| *w > 0.0);
    best
}

/// Brute-force dual: min-max of `G` over all stopping rules and a simplex
/// grid, with a certified saddle point over randomised rules.
pub fn dual_value(inst: &SmallInstance, p: &SimplexPoint, f: &AmbiguityFunction, grid_step: f64) -> Result<DualResult> {
    if grid_step > 0.02 {
        return Err(Error::InvalidParameter(format!("grid step {grid_step} is coarser than 0.02")));
    }
    if p.len() != inst.n_scenarios {
        return Err(Error::DimensionMismatch("prior does not match the instance".into()));
    }
    let rules = enumerate_stopping_rules(inst)?;
    let vectors: Vec<Vec<f64>> = rules.iter().map(|r| r.scenario_values(inst)).collect();
    let front = pareto(&vectors);
    // grid points that charge a scenario outside the prior's support are
    // not admissible measures
    let grid: Vec<SimplexPoint> = simplex_grid(p.len(), grid_step)?
        .into_iter()
        .filter(|q| q.weights().iter().zip(p.weights()).all(|(qi, pi)| *qi == 0.0 || *pi > 0.0))
        .collect();

    let g = |v: &[f64], q: &SimplexPoint| -> Result<ExtendedValue> { f.g_value(q, p, v) };

    // min over grid of max over rules
    let per_q: Vec<Result<ExtendedValue>> = grid
        .par_iter()
        .map(|q| {
            let s = front.iter().map(|k| q.expectation(&vectors[*k])).fold(f64::NEG_INFINITY, f64::max);
            f.r_value(q, p, s)
        })
        .collect();
    let mut min_max = ExtendedValue::PosInf;
    let mut q_grid = grid[0].clone();
    for (q, v) in grid.iter().zip(per_q) {
        let v = v?;
        if v < min_max {
            min_max = v;
            q_grid = q.clone();
        }
    }
    let min_max = min_max.finite().ok_or(Error::NonFinite("grid min-max"))?;

    // pure max-min over the grid
    let pure: Vec<Result<f64>> = front
        .par_iter()
        .map(|k| {
            let mut m = ExtendedValue::PosInf;
            for q in &grid {
                let v = g(&vectors[*k], q)?;
                if v < m {
                    m = v;
                }
            }
            Ok(m.finite().unwrap_or(f64::NEG_INFINITY))
        })
        .collect();
    let mut pure_max_min = f64::NEG_INFINITY;
    for v in pure {
        pure_max_min = pure_max_min.max(v?);
    }

    // randomised saddle point
    let (tau_star, hull_ce) = hull_maximum(f, p, &vectors, &front);
    let mut v_star = vec![0.0; p.len()];
    for (k, w) in &tau_star {
        for (a, b) in v_star.iter_mut().zip(&vectors[*k]) {
            *a += w * b;
        }
    }
    let q_star = f.minimizing_measure(p, &v_star)?;
    let g_star = g(&v_star, &q_star)?.finite().ok_or(Error::NonFinite("saddle value"))?;
    debug_assert!((g_star - hull_ce).abs() <= 1e-9 * hull_ce.abs().max(1.0));

    let mut violation: f64 = 0.0;
    let mut checked = 0;
    for v in &vectors {
        let gv = g(v, &q_star)?;
        checked += 1;
        match gv {
            ExtendedValue::Finite(x) => violation = violation.max(x - g_star),
            ExtendedValue::PosInf => violation = f64::INFINITY,
            ExtendedValue::NegInf => {}
        }
    }
    let lower: Vec<Result<f64>> = grid
        .par_iter()
        .map(|q| {
            Ok(match g(&v_star, q)? {
                ExtendedValue::Finite(x) => (g_star - x).max(0.0),
                ExtendedValue::PosInf => 0.0,
                ExtendedValue::NegInf => f64::INFINITY,
            })
        })
        .collect();
    for l in lower {
        violation = violation.max(l?);
        checked += 1;
    }

    let certificate = SaddleCertificate {
        q_star,
        tau_star,
        max_min: g_star,
        min_max,
        gap: (min_max - g_star).abs(),
        max_violation: violation,
        inequalities_checked: checked,
        pure_max_min,
    };
    Ok(DualResult { value: min_max, q_grid, certificate })
}

/// Inner solver over the pure rules of a small instance.
pub struct SmallInstanceSolver {
    vectors: Vec<Vec<f64>>,
    n_scenarios: usize,
}

impl SmallInstanceSolver {
    pub fn new(inst: &SmallInstance) -> Result<Self> {
        let rules = enumerate_stopping_rules(inst)?;
        Ok(Self { vectors: rules.iter().map(|r| r.scenario_values(inst)).collect(), n_scenarios: inst.n_scenarios })
    }
}

impl InnerSolver for SmallInstanceSolver {
    fn n_scenarios(&self) -> usize {
        self.n_scenarios
    }

    fn solve(&self, q: &SimplexPoint) -> Result<InnerOutcome> {
        let (k, value) = self
            .vectors
            .iter()
            .map(|v| q.expectation(v))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, v)| if v > best.1 { (k, v) } else { best });
        Ok(InnerOutcome { value, expectations: Some(self.vectors[k].clone()) })
    }
}
