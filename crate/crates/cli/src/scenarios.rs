//! Scenario mean-path files.
//!
//! Long format, one row per `(scenario, step, factor)`:
//!
//! ```text
//! scenario,t,factor_index,mu,signal_mu
//! CP,0,0,60,100
//! CP,0,1,25,100
//! ```
//!
//! Steps run from 0 to the horizon without gaps. `signal_mu` is repeated on
//! every factor row of a step and must agree across them.

use std::collections::BTreeMap;
use std::path::Path;

use ambistop::scenario::{ClosureCost, DivestModel, DivestModelParts, NoiseLaw, Revenue, ScenarioSet};
use nalgebra::DMatrix;

use crate::args::Overrides;
use crate::error::CliError;

pub const SCENARIO_HEADER: [&str; 5] = ["scenario", "t", "factor_index", "mu", "signal_mu"];

/// Scenario means read from disk, before any model parameters are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPack {
    pub labels: Vec<String>,
    /// `mu_paths[i][t][k]`.
    pub mu_paths: Vec<Vec<Vec<f64>>>,
    /// `signal_means[i][t]`.
    pub signal_means: Vec<Vec<f64>>,
}

impl ScenarioPack {
    pub fn n_scenarios(&self) -> usize {
        self.labels.len()
    }

    pub fn horizon(&self) -> usize {
        self.signal_means[0].len() - 1
    }

    pub fn n_factors(&self) -> usize {
        self.mu_paths[0][0].len()
    }
}

#[derive(Default)]
struct Partial {
    // (t, k) -> mu
    mu: BTreeMap<(usize, usize), f64>,
    // t -> (signal mean, first line where it was seen)
    signal: BTreeMap<usize, (f64, usize)>,
}

pub fn load_scenarios(path: &Path) -> Result<ScenarioPack, CliError> {
    let schema = |line: usize, message: String| CliError::Schema { path: path.to_path_buf(), line, message };
    let mismatch = |message: String| CliError::LengthMismatch { path: path.to_path_buf(), message };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => schema(1, format!("{other:?}")),
        })?;

    let mut labels: Vec<String> = Vec::new();
    let mut partial: Vec<Partial> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(idx + 1, |p| p.line() as usize);
            schema(line, e.to_string())
        })?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if idx == 0 {
            let header: Vec<&str> = record.iter().collect();
            if header != SCENARIO_HEADER {
                return Err(schema(1, format!("expected header `{}`", SCENARIO_HEADER.join(","))));
            }
            continue;
        }
        if record.len() != 5 {
            return Err(schema(line, format!("expected 5 fields, found {}", record.len())));
        }
        let label = &record[0];
        if label.is_empty() {
            return Err(schema(line, "empty scenario label".into()));
        }
        let t: usize = record[1].parse().map_err(|_| schema(line, format!("bad step `{}`", &record[1])))?;
        let k: usize = record[2].parse().map_err(|_| schema(line, format!("bad factor index `{}`", &record[2])))?;
        let number = |field: &str, name: &str| -> Result<f64, CliError> {
            field
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| schema(line, format!("bad {name} `{field}`")))
        };
        let mu = number(&record[3], "mu")?;
        let signal = number(&record[4], "signal_mu")?;

        let i = match labels.iter().position(|l| l == label) {
            Some(i) => i,
            None => {
                labels.push(label.to_string());
                partial.push(Partial::default());
                labels.len() - 1
            }
        };
        let entry = &mut partial[i];
        if entry.mu.insert((t, k), mu).is_some() {
            return Err(schema(line, format!("duplicate row for scenario {label}, t={t}, factor {k}")));
        }
        match entry.signal.get(&t) {
            Some((s, first)) if *s != signal => {
                return Err(schema(
                    line,
                    format!("signal_mu {signal} disagrees with {s} given on line {first} for scenario {label}, t={t}"),
                ));
            }
            Some(_) => {}
            None => {
                entry.signal.insert(t, (signal, line));
            }
        }
    }
    if labels.is_empty() {
        return Err(schema(1, "no scenario rows".into()));
    }

    let mut mu_paths = Vec::with_capacity(labels.len());
    let mut signal_means = Vec::with_capacity(labels.len());
    let mut shape: Option<(usize, usize)> = None;
    for (label, p) in labels.iter().zip(&partial) {
        let steps = p.signal.len();
        let k = p.mu.keys().map(|(_, k)| k + 1).max().unwrap_or(0);
        if p.signal.keys().copied().ne(0..steps) {
            return Err(mismatch(format!("scenario {label} does not cover steps 0..{} without gaps", steps - 1)));
        }
        if p.mu.len() != steps * k {
            return Err(mismatch(format!("scenario {label} has {} rows, expected {} steps x {k} factors", p.mu.len(), steps)));
        }
        match shape {
            None => shape = Some((steps, k)),
            Some((s0, k0)) if (s0, k0) != (steps, k) => {
                return Err(mismatch(format!(
                    "scenario {label} has horizon {} and {k} factors, expected horizon {} and {k0} factors",
                    steps - 1,
                    s0 - 1
                )));
            }
            Some(_) => {}
        }
        if steps < 2 {
            return Err(mismatch(format!("scenario {label} has no transitions")));
        }
        mu_paths.push((0..steps).map(|t| (0..k).map(|j| p.mu[&(t, j)]).collect()).collect());
        signal_means.push(p.signal.values().map(|(s, _)| *s).collect());
    }
    Ok(ScenarioPack { labels, mu_paths, signal_means })
}

/// Model parameters that the scenario file does not carry. Defaults match
/// the shipped synthetic pack: the first factor is the output price, the
/// others are unit input costs, and closing recovers nothing but costs 30%
/// of the capital outlay.
#[derive(Debug, Clone, PartialEq)]
pub struct DivestSettings {
    pub phi: f64,
    pub vol: Vec<f64>,
    pub sigma_s: f64,
    pub beta: f64,
    pub intercept: f64,
    pub coefficients: Option<Vec<f64>>,
    pub capital: f64,
    pub salvage_fraction: f64,
    pub noise: NoiseLaw,
}

impl Default for DivestSettings {
    fn default() -> Self {
        Self {
            phi: 0.8,
            vol: vec![2.0],
            sigma_s: 5.0,
            beta: 0.95,
            intercept: -5.0,
            coefficients: None,
            capital: 300.0,
            salvage_fraction: 0.3,
            noise: NoiseLaw::Gaussian,
        }
    }
}

impl DivestSettings {
    /// Reads `phi`, `vol`, `sigma_s`, `beta`, `intercept`, `coefficients`,
    /// `capital`, `salvage_fraction` and `noise` (`gaussian` or
    /// `three_point`).
    pub fn from_overrides(o: &mut Overrides) -> Result<Self, CliError> {
        let d = Self::default();
        let noise = match o.take::<String>("noise")?.as_deref() {
            None | Some("gaussian") => NoiseLaw::Gaussian,
            Some("three_point") => NoiseLaw::ThreePoint,
            Some(other) => return Err(CliError::Usage(format!("unknown noise law `{other}`"))),
        };
        Ok(Self {
            phi: o.take_or("phi", d.phi)?,
            vol: o.take_list("vol")?.unwrap_or(d.vol),
            sigma_s: o.take_or("sigma_s", d.sigma_s)?,
            beta: o.take_or("beta", d.beta)?,
            intercept: o.take_or("intercept", d.intercept)?,
            coefficients: o.take_list("coefficients")?,
            capital: o.take_or("capital", d.capital)?,
            salvage_fraction: o.take_or("salvage_fraction", d.salvage_fraction)?,
            noise,
        })
    }

    pub fn build(&self, pack: &ScenarioPack) -> Result<DivestModel, CliError> {
        let k = pack.n_factors();
        let vol = match self.vol.len() {
            1 => vec![self.vol[0]; k],
            n if n == k => self.vol.clone(),
            n => return Err(CliError::Usage(format!("vol has {n} entries for {k} factors"))),
        };
        let coefficients = match &self.coefficients {
            Some(c) if c.len() == k => c.clone(),
            Some(c) => return Err(CliError::Usage(format!("coefficients has {} entries for {k} factors", c.len()))),
            None => (0..k).map(|j| if j == 0 { 1.0 } else { -1.0 }).collect(),
        };
        let parts = DivestModelParts {
            scenarios: ScenarioSet::new(pack.labels.iter().cloned())?,
            phi: DMatrix::identity(k, k) * self.phi,
            vol: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vol)),
            mu_paths: pack.mu_paths.clone(),
            signal_means: pack.signal_means.clone(),
            sigma_s: self.sigma_s,
            beta: self.beta,
            revenue: Revenue::Linear { intercept: self.intercept, coefficients },
            closure_cost: ClosureCost::Constant(-self.salvage_fraction * self.capital),
            factor_noise: self.noise,
            signal_noise: self.noise,
        };
        Ok(DivestModel::new(parts)?)
    }
}
