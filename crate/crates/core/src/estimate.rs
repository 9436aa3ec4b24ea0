//! Outcome functionals and estimators of intervened means.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::oracle::DiscreteScenario;
use crate::scenario::Scenario;
use crate::simulate::{simulate_interventional, simulate_joint, simulate_many, Draw};
use crate::trajectory::{Selector, Trajectory};
use crate::weights::{deviation_compensator, weight_path_product};

#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeKind {
    /// 1 if no event of `of` by `t`.
    Survival {
        of: Selector,
    },
    /// Number of events of `of` by `t`, optionally capped.
    Count {
        of: Selector,
        cap: Option<usize>,
    },
    /// 1 if the first event of `of` happens by `min(threshold, t)`.
    FirstEventBefore {
        of: Selector,
        threshold: f64,
    },
    Constant(f64),
}

/// `Ẏ_t`, a function of the trajectory up to `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeFunctional {
    pub kind: OutcomeKind,
    pub t: f64,
}

impl OutcomeFunctional {
    pub fn new(kind: OutcomeKind, t: f64, horizon: f64) -> Result<Self> {
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::Config(format!(
                "outcome time {t} is outside [0, {horizon}]"
            )));
        }
        Ok(OutcomeFunctional { kind, t })
    }

    pub fn value(&self, traj: &Trajectory) -> f64 {
        let events = traj.history_at(self.t);
        let count = |of: &Selector| events.iter().filter(|e| of.matches(e)).count();
        match &self.kind {
            OutcomeKind::Survival { of } => (count(of) == 0) as u8 as f64,
            OutcomeKind::Count { of, cap } => count(of).min(cap.unwrap_or(usize::MAX)) as f64,
            OutcomeKind::FirstEventBefore { of, threshold } => {
                events.iter().any(|e| of.matches(e) && e.t <= *threshold) as u8 as f64
            }
            OutcomeKind::Constant(c) => *c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub method: String,
    pub estimand: String,
    pub value: f64,
    pub se: f64,
    pub n: usize,
    pub seed: Option<u64>,
    pub scenario_hash: Option<String>,
}

impl EstimateReport {
    pub fn csv_header() -> &'static str {
        "method,estimand,value,se,n,seed,scenario_hash"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.method,
            self.estimand,
            self.value,
            self.se,
            self.n,
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.scenario_hash.clone().unwrap_or_default()
        )
    }
}

/// Sample mean and its standard error.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn estimand(scenario: &Scenario) -> String {
    format!("E[Y~_{{{}}}]", scenario.outcome.t)
}

fn report(scenario: &Scenario, method: &str, values: &[f64], seed: Option<u64>) -> EstimateReport {
    let (value, se) = mean_se(values);
    EstimateReport {
        method: method.into(),
        estimand: estimand(scenario),
        value,
        se,
        n: values.len(),
        seed,
        scenario_hash: scenario.hash(),
    }
}

pub enum Weights<'a> {
    /// The weight process from the scenario's own compensator.
    True,
    /// `1 / ∏ P̂(A_k = a_k | past)` from fitted discrete atoms.
    EstimatedDiscrete(&'a FittedAtoms),
}

/// `(1/n) Σ W_t Y_t` over observed draws.
pub fn ipw_estimate(
    scenario: &Scenario,
    sample: &[Draw],
    weights: Weights<'_>,
) -> Result<EstimateReport> {
    if sample.is_empty() {
        return Err(Error::Domain(
            "estimate undefined for an empty sample".into(),
        ));
    }
    let t = scenario.outcome.t;
    let values: Vec<f64> = match weights {
        Weights::True => sample
            .par_iter()
            .enumerate()
            .map(|(i, d)| {
                let path = weight_path_product(scenario, &d.baseline, &d.trajectory).map_err(
                    |e| match e {
                        Error::Positivity { violation, .. } => Error::Positivity {
                            subject: Some(i),
                            violation,
                        },
                        other => other,
                    },
                )?;
                let w = path.at(t);
                Ok(if w == 0.0 {
                    0.0
                } else {
                    w * scenario.outcome.value(&d.trajectory)
                })
            })
            .collect::<Result<_>>()?,
        Weights::EstimatedDiscrete(fit) => {
            let ds = scenario.discrete.as_ref().ok_or_else(|| {
                Error::Unsupported("estimated discrete weights need a discrete scenario".into())
            })?;
            sample
                .iter()
                .map(|d| {
                    let w = fit.weight(ds, ds.values_of(&d.trajectory), t)?;
                    Ok(w * scenario.outcome.value(&d.trajectory))
                })
                .collect::<Result<_>>()?
        }
    };
    let method = match weights {
        Weights::True => "ipw",
        Weights::EstimatedDiscrete(_) => "ipw-estimated",
    };
    Ok(report(scenario, method, &values, None))
}

/// Mean outcome over draws of the intervened process.
pub fn gformula_mc(scenario: &Scenario, n: usize, seed: u64) -> Result<EstimateReport> {
    if n == 0 {
        return Err(Error::Domain("estimate undefined for n = 0".into()));
    }
    let draws = simulate_many(n, |i| simulate_interventional(scenario, seed, i))?;
    let values: Vec<f64> = draws
        .iter()
        .map(|d| scenario.outcome.value(&d.trajectory))
        .collect();
    Ok(report(scenario, "gformula", &values, Some(seed)))
}

/// Mean outcome of the potential arm of joint draws.
pub fn joint_potential_mean(scenario: &Scenario, n: usize, seed: u64) -> Result<EstimateReport> {
    if n == 0 {
        return Err(Error::Domain("estimate undefined for n = 0".into()));
    }
    let draws = simulate_many(n, |i| simulate_joint(scenario, seed, i))?;
    let values: Vec<f64> = draws
        .iter()
        .map(|d| scenario.outcome.value(&d.potential))
        .collect();
    Ok(report(scenario, "joint", &values, Some(seed)))
}

/// Empirical treatment probabilities among regime followers, per history cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedAtoms {
    /// For each variable index, `cell -> (followers, followers with value 1)`.
    counts: HashMap<(usize, usize), (usize, usize)>,
}

impl FittedAtoms {
    /// `P̂(A_k = 1 | cell)`.
    pub fn prob_one(&self, ds: &DiscreteScenario, k: usize, cell: usize) -> Result<f64> {
        match self.counts.get(&(k, cell)) {
            Some((n, ones)) if *n > 0 => Ok(*ones as f64 / *n as f64),
            _ => Err(Error::EstimatedPositivity {
                variable: k,
                cell: ds.cell_label(k, cell),
                reason: "was never reached by a regime follower".into(),
            }),
        }
    }

    /// `I(follows the regime up to t) / ∏_{θ_k <= t} P̂(A_k = a_k | past)`.
    pub fn weight(&self, ds: &DiscreteScenario, values: u64, t: f64) -> Result<f64> {
        let mut w = 1.0;
        for (k, v) in ds.variables().iter().enumerate() {
            let Some(a) = v.regime else { continue };
            if v.time > t {
                break;
            }
            if ((values >> k) & 1 == 1) != a {
                return Ok(0.0);
            }
            let cell = ds.cell(k, values);
            let p1 = self.prob_one(ds, k, cell)?;
            let p = if a { p1 } else { 1.0 - p1 };
            if p == 0.0 {
                return Err(Error::EstimatedPositivity {
                    variable: k,
                    cell: ds.cell_label(k, cell),
                    reason: "has fitted probability 0 for the regime value".into(),
                });
            }
            w /= p;
        }
        Ok(w)
    }
}

/// Fits `P̂(A_k = 1 | past)` as empirical frequencies among followers. Every
/// follower cell with positive probability under `skeleton` must be reached.
pub fn fit_discrete_atoms(sample: &[Draw], skeleton: &DiscreteScenario) -> Result<FittedAtoms> {
    let mut counts: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    for d in sample {
        let values = skeleton.values_of(&d.trajectory);
        for (k, v) in skeleton.variables().iter().enumerate() {
            if v.regime.is_none() {
                continue;
            }
            if !skeleton.follows_regime_upto(values, k) {
                break;
            }
            let e = counts
                .entry((k, skeleton.cell(k, values)))
                .or_insert((0, 0));
            e.0 += 1;
            e.1 += ((values >> k) & 1) as usize;
        }
    }
    let fit = FittedAtoms { counts };
    let vars = skeleton.variables();
    for values in 0..skeleton.num_worlds() as u64 {
        let mut prefix = 1.0;
        for (k, v) in vars.iter().enumerate() {
            if prefix == 0.0 || !skeleton.follows_regime_upto(values, k) {
                break;
            }
            if v.regime.is_some() {
                fit.prob_one(skeleton, k, skeleton.cell(k, values))?;
            }
            let p1 = v.table[skeleton.cell(k, values)];
            prefix *= if (values >> k) & 1 == 1 { p1 } else { 1.0 - p1 };
        }
    }
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResidualTarget {
    /// `N^sel_t - Λ^sel_t`.
    Component(Selector),
    /// `𝕹^J_t - 𝚲^J_t`.
    Deviation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualPoint {
    pub t: f64,
    pub mean: f64,
    pub se: f64,
}

/// Mean martingale residual at each grid time, using the scenario's model
/// as the working compensator.
pub fn martingale_residuals(
    scenario: &Scenario,
    sample: &[Draw],
    target: ResidualTarget,
    grid: &[f64],
) -> Result<Vec<ResidualPoint>> {
    if sample.is_empty() {
        return Err(Error::Domain(
            "residuals undefined for an empty sample".into(),
        ));
    }
    let rows: Vec<Vec<f64>> = sample
        .par_iter()
        .map(|d| match target {
            ResidualTarget::Component(sel) => grid
                .iter()
                .map(|t| {
                    let n = d.trajectory.count(&scenario.space, &sel, *t)? as f64;
                    Ok(n - scenario
                        .model
                        .compensator_path(&sel, &d.baseline, &d.trajectory, *t)?)
                })
                .collect(),
            ResidualTarget::Deviation => {
                let lambda = deviation_compensator(scenario, &d.baseline, &d.trajectory)?;
                Ok(grid.iter().map(|t| lambda.residual_at(*t)).collect())
            }
        })
        .collect::<Result<_>>()?;
    Ok(grid
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            let (mean, se) = mean_se(&col);
            ResidualPoint { t: *t, mean, se }
        })
        .collect())
}
