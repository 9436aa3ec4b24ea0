//! Exact answers for discrete scenarios by enumeration.
//!
//! A discrete scenario is a sequence of binary variables at increasing
//! times. Each variable is an event (or not) of one component at its time,
//! with probability given by a table over all earlier variables. Variables
//! carrying a regime value are treatment decisions; their component is the
//! intervention target. Enumerating all `2^n` worlds gives the g-formula and
//! the IPW identity exactly.

use rayon::prelude::*;
use serde::Serialize;

use crate::compensator::{
    check_regularity, AtomRule, AtomTime, CompensatorModel, ComponentRule, Condition, DslComponent,
    Keyed,
};
use crate::error::{Error, Result};
use crate::estimate::{
    gformula_mc, ipw_estimate, joint_potential_mean, OutcomeFunctional, Weights,
};
use crate::intervention::{InterventionKind, InterventionSpec};
use crate::scenario::Scenario;
use crate::simulate::{simulate_many, simulate_observed};
use crate::trajectory::{Baseline, ComponentId, Event, MarkSpace, Selector, Trajectory};
use crate::weights::weight_path_product;

pub const ENUMERATION_CAP: usize = 22;

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteVariable {
    pub component: String,
    pub time: f64,
    /// `P(variable = 1 | earlier variables)`, earliest variable most significant.
    pub table: Vec<f64>,
    /// Regime value for treatment variables.
    pub regime: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteScenario {
    horizon: f64,
    variables: Vec<DiscreteVariable>,
    space: MarkSpace,
    components: Vec<ComponentId>,
    treatment: ComponentId,
}

impl DiscreteScenario {
    pub fn new(horizon: f64, variables: Vec<DiscreteVariable>) -> Result<Self> {
        if variables.len() > ENUMERATION_CAP {
            return Err(Error::EnumerationTooLarge {
                needed: variables.len(),
                cap: ENUMERATION_CAP,
            });
        }
        let mut labels: Vec<String> = Vec::new();
        for v in &variables {
            if !labels.contains(&v.component) {
                labels.push(v.component.clone());
            }
        }
        let space = MarkSpace::simple(&labels)?;
        let mut last = 0.0;
        for (i, v) in variables.iter().enumerate() {
            if !(v.time > last && v.time <= horizon) {
                return Err(Error::Config(format!(
                    "variable {i} at t = {} must come after the previous one and by the horizon {horizon}",
                    v.time
                )));
            }
            last = v.time;
            if v.table.len() != 1usize << i {
                return Err(Error::Config(format!(
                    "variable {i} needs a table of {} entries, got {}",
                    1usize << i,
                    v.table.len()
                )));
            }
            if v.table.iter().any(|p| !(*p >= 0.0 && *p <= 1.0)) {
                return Err(Error::Config(format!(
                    "variable {i} has probabilities outside [0, 1]"
                )));
            }
        }
        let treated: Vec<&DiscreteVariable> =
            variables.iter().filter(|v| v.regime.is_some()).collect();
        let Some(first) = treated.first() else {
            return Err(Error::Config(
                "a discrete scenario needs at least one treatment variable".into(),
            ));
        };
        let treatment = space.component(&first.component)?;
        for v in &variables {
            let same = v.component == first.component;
            if same != v.regime.is_some() {
                return Err(Error::Config(format!(
                    "all variables of `{}` need a regime value and no other variable may have one",
                    first.component
                )));
            }
        }
        let components = variables
            .iter()
            .map(|v| space.component(&v.component))
            .collect::<Result<_>>()?;
        Ok(DiscreteScenario {
            horizon,
            variables,
            space,
            components,
            treatment,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn variables(&self) -> &[DiscreteVariable] {
        &self.variables
    }

    pub fn space(&self) -> &MarkSpace {
        &self.space
    }

    pub fn treatment_component(&self) -> ComponentId {
        self.treatment
    }

    pub fn num_worlds(&self) -> usize {
        1usize << self.variables.len()
    }

    /// Table cell of variable `k` in world `values` (bit `m` is variable `m`).
    pub fn cell(&self, k: usize, values: u64) -> usize {
        (0..k).fold(0, |acc, m| (acc << 1) | ((values >> m) & 1) as usize)
    }

    pub fn cell_label(&self, k: usize, cell: usize) -> String {
        let parts: Vec<String> = (0..k)
            .map(|m| {
                let bit = (cell >> (k - 1 - m)) & 1;
                format!(
                    "{}@{}={}",
                    self.variables[m].component, self.variables[m].time, bit
                )
            })
            .collect();
        if parts.is_empty() {
            "(empty history)".into()
        } else {
            parts.join(",")
        }
    }

    fn p_one(&self, k: usize, values: u64) -> f64 {
        self.variables[k].table[self.cell(k, values)]
    }

    pub fn trajectory(&self, values: u64) -> Trajectory {
        let events = self
            .variables
            .iter()
            .enumerate()
            .filter(|(i, _)| (values >> i) & 1 == 1)
            .map(|(i, v)| Event::new(v.time, self.space.marks_of(self.components[i])[0]))
            .collect();
        Trajectory::new(self.horizon, events).expect("variable times are increasing")
    }

    /// World bits read off a trajectory; events at other times are ignored.
    pub fn values_of(&self, traj: &Trajectory) -> u64 {
        self.variables.iter().enumerate().fold(0, |acc, (i, v)| {
            let hit = traj
                .events()
                .iter()
                .any(|e| e.t == v.time && e.component() == self.components[i]);
            acc | ((hit as u64) << i)
        })
    }

    pub fn follows_regime_upto(&self, values: u64, upto: usize) -> bool {
        self.variables[..upto]
            .iter()
            .enumerate()
            .all(|(i, v)| v.regime.is_none_or(|a| ((values >> i) & 1 == 1) == a))
    }

    /// The scenario as a compensator model of atoms at the variable times.
    pub fn to_model(&self) -> Result<CompensatorModel> {
        let mut rules: Vec<DslComponent> = (0..self.space.num_components())
            .map(|_| DslComponent {
                rate: None,
                atoms: Vec::new(),
                kernel: Keyed::constant(vec![1.0]),
            })
            .collect();
        for (i, v) in self.variables.iter().enumerate() {
            let keys = (0..i)
                .map(|m| Condition::IntervalCountAtLeast {
                    of: Selector::Component(self.components[m]),
                    from: self.variables[m].time,
                    to: self.variables[m + 1].time,
                    n: 1,
                })
                .collect();
            rules[self.components[i].0 as usize].atoms.push(AtomRule {
                time: AtomTime::Absolute(v.time),
                prob: Keyed {
                    keys,
                    table: v.table.clone(),
                },
            });
        }
        CompensatorModel::new(
            self.space.clone(),
            self.horizon,
            rules.into_iter().map(ComponentRule::Dsl).collect(),
        )
    }

    /// The regime as a static intervention on the treatment component.
    pub fn intervention(&self) -> Result<InterventionSpec> {
        let mark = self.space.marks_of(self.treatment)[0];
        let events = self
            .variables
            .iter()
            .filter(|v| v.regime == Some(true))
            .map(|v| (v.time, mark))
            .collect();
        InterventionSpec::new(
            &self.space,
            self.treatment,
            InterventionKind::Static { events },
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedWorld {
    pub values: u64,
    pub probability: f64,
    pub follower: bool,
    /// `1 / ∏ P(A_k = a_k | past)` for followers, 0 otherwise.
    pub weight: f64,
    /// `∏ P(L | past)` over non-treatment variables, for followers.
    pub regime_probability: f64,
    pub y: f64,
}

pub fn enumerate(ds: &DiscreteScenario, outcome: &OutcomeFunctional) -> Vec<EnumeratedWorld> {
    (0..ds.num_worlds() as u64)
        .into_par_iter()
        .map(|values| {
            let mut probability = 1.0;
            let mut treat = 1.0;
            let mut other = 1.0;
            for (k, v) in ds.variables.iter().enumerate() {
                let p1 = ds.p_one(k, values);
                let p = if (values >> k) & 1 == 1 { p1 } else { 1.0 - p1 };
                probability *= p;
                if v.regime.is_some() {
                    treat *= p;
                } else {
                    other *= p;
                }
            }
            let follower = ds.follows_regime_upto(values, ds.variables.len());
            EnumeratedWorld {
                values,
                probability,
                follower,
                weight: if follower { 1.0 / treat } else { 0.0 },
                regime_probability: if follower { other } else { 0.0 },
                y: outcome.value(&ds.trajectory(values)),
            }
        })
        .collect()
}

/// Fails if the regime has probability zero, or if a reachable history that
/// follows the regime so far gives the next regime value probability zero.
pub fn check_positivity(ds: &DiscreteScenario) -> Result<()> {
    let n = ds.variables.len();
    let mut follow_mass = 0.0;
    let mut first: Option<(usize, usize)> = None;
    for values in 0..ds.num_worlds() as u64 {
        let mut prefix = 1.0;
        for k in 0..n {
            let p1 = ds.p_one(k, values);
            if let Some(a) = ds.variables[k].regime {
                let p_regime = if a { p1 } else { 1.0 - p1 };
                if prefix > 0.0 && p_regime == 0.0 && ds.follows_regime_upto(values, k) {
                    let found = (k, ds.cell(k, values));
                    if first.is_none_or(|f| found < f) {
                        first = Some(found);
                    }
                }
            }
            prefix *= if (values >> k) & 1 == 1 { p1 } else { 1.0 - p1 };
        }
        if ds.follows_regime_upto(values, n) {
            follow_mass += prefix;
        }
    }
    if follow_mass == 0.0 {
        return Err(Error::RegimeUnreachable);
    }
    if let Some((k, cell)) = first {
        return Err(Error::DiscretePositivity {
            variable: k,
            cell: ds.cell_label(k, cell),
        });
    }
    Ok(())
}

/// `Σ_worlds Ẏ ∏ P(L | past)` with treatment forced to the regime.
pub fn oracle_g_formula(ds: &DiscreteScenario, outcome: &OutcomeFunctional) -> Result<f64> {
    check_positivity(ds)?;
    Ok(enumerate(ds, outcome)
        .iter()
        .filter(|w| w.follower)
        .map(|w| w.y * w.regime_probability)
        .sum())
}

/// `E[W* Y]` with `W* = I(follower) / ∏ P(A_k = a_k | past)`.
pub fn oracle_ipw(ds: &DiscreteScenario, outcome: &OutcomeFunctional) -> Result<f64> {
    check_positivity(ds)?;
    Ok(enumerate(ds, outcome)
        .iter()
        .filter(|w| w.follower && w.probability > 0.0)
        .map(|w| w.probability * w.weight * w.y)
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub g_formula: f64,
    pub ipw: f64,
    pub max_weight: f64,
    pub worlds: usize,
    pub positivity: String,
}

pub fn oracle_report(ds: &DiscreteScenario, outcome: &OutcomeFunctional) -> Result<OracleReport> {
    let worlds = enumerate(ds, outcome);
    let max_weight = worlds
        .iter()
        .filter(|w| w.follower && w.probability > 0.0)
        .map(|w| w.weight)
        .fold(0.0, f64::max);
    Ok(OracleReport {
        g_formula: oracle_g_formula(ds, outcome)?,
        ipw: oracle_ipw(ds, outcome)?,
        max_weight,
        worlds: worlds.len(),
        positivity: "ok".into(),
    })
}

/// All trajectories of an atoms-only model with their probabilities.
pub fn enumerate_model(
    model: &CompensatorModel,
    baseline: &Baseline,
    cap: usize,
) -> Result<Vec<(Trajectory, f64)>> {
    if !model.is_atoms_only() {
        return Err(Error::Unsupported(
            "enumeration needs a model made only of rule-language atoms".into(),
        ));
    }
    let mut out = Vec::new();
    explore(model, baseline, Vec::new(), 0.0, 1.0, cap, &mut out)?;
    Ok(out)
}

fn explore(
    model: &CompensatorModel,
    baseline: &Baseline,
    history: Vec<Event>,
    s: f64,
    prob: f64,
    cap: usize,
    out: &mut Vec<(Trajectory, f64)>,
) -> Result<()> {
    let plans = model.plans(baseline, &history, s)?;
    let mut times: Vec<f64> = plans
        .iter()
        .flat_map(|p| p.atoms.iter().map(|a| a.t))
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut survive = prob;
    for t in times {
        let mut total = 0.0;
        for (ci, plan) in plans.iter().enumerate() {
            let mass = plan.atom_at(t);
            if mass <= 0.0 {
                continue;
            }
            total += mass;
            let c = ComponentId(ci as u16);
            let probs = model.mark_probs(c, baseline, &history, t);
            for (m, p) in model.space().marks_of(c).iter().zip(probs) {
                if p > 0.0 {
                    let mut next = history.clone();
                    next.push(Event::new(t, *m));
                    explore(model, baseline, next, t, survive * mass * p, cap, out)?;
                }
            }
        }
        survive *= (1.0 - total).max(0.0);
        if survive == 0.0 {
            return Ok(());
        }
    }
    if out.len() >= cap {
        return Err(Error::EnumerationTooLarge {
            needed: out.len() + 1,
            cap,
        });
    }
    out.push((Trajectory::new(model.horizon(), history)?, survive));
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossCheckReport {
    pub worlds: usize,
    /// Largest relative difference between `W_T` from the weight process and `1 / ∏ P`.
    pub max_weight_rel_diff: f64,
    /// Largest absolute difference between `exp(log_density)` and the world probability.
    pub max_density_abs_diff: f64,
    pub ok: bool,
}

/// Compares the continuous-time machinery with the enumeration, world by world.
pub fn cross_check_continuous(
    ds: &DiscreteScenario,
    outcome: &OutcomeFunctional,
) -> Result<CrossCheckReport> {
    let scenario = Scenario::from_discrete(ds.clone(), outcome.clone())?;
    check_regularity(&scenario.model, &scenario.interventions).map_err(Error::Regularity)?;
    let baseline = Baseline::default();
    let mut max_w: f64 = 0.0;
    let mut max_d: f64 = 0.0;
    let worlds = enumerate(ds, outcome);
    for w in &worlds {
        let traj = ds.trajectory(w.values);
        let density = scenario.model.log_density(&baseline, &traj)?.exp();
        max_d = max_d.max((density - w.probability).abs());
        if w.probability == 0.0 {
            continue;
        }
        let wt = weight_path_product(&scenario, &baseline, &traj)?.at(ds.horizon());
        let diff = if w.follower {
            ((wt - w.weight) / w.weight).abs()
        } else {
            wt.abs()
        };
        max_w = max_w.max(diff);
    }
    Ok(CrossCheckReport {
        worlds: worlds.len(),
        max_weight_rel_diff: max_w,
        max_density_abs_diff: max_d,
        ok: max_w <= 1e-12 && max_d <= 1e-12,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McCheck {
    pub oracle: f64,
    pub ipw: (f64, f64),
    pub g_formula: (f64, f64),
    pub joint: (f64, f64),
    /// Every estimate is within `3 SE` of the oracle.
    pub ok: bool,
}

/// IPW on observed draws, Monte Carlo g-formula and the joint potential mean
/// against the exact value.
pub fn cross_check_mc(
    ds: &DiscreteScenario,
    outcome: &OutcomeFunctional,
    n: usize,
    seed: u64,
) -> Result<McCheck> {
    let scenario = Scenario::from_discrete(ds.clone(), outcome.clone())?;
    let oracle = oracle_g_formula(ds, outcome)?;
    let sample = simulate_many(n, |i| simulate_observed(&scenario, seed, i))?;
    let ipw = ipw_estimate(&scenario, &sample, Weights::True)?;
    let g = gformula_mc(&scenario, n, seed.wrapping_add(1))?;
    let joint = joint_potential_mean(&scenario, n, seed.wrapping_add(2))?;
    let within = |v: f64, se: f64| (v - oracle).abs() <= 3.0 * se;
    Ok(McCheck {
        oracle,
        ipw: (ipw.value, ipw.se),
        g_formula: (g.value, g.se),
        joint: (joint.value, joint.se),
        ok: within(ipw.value, ipw.se) && within(g.value, g.se) && within(joint.value, joint.se),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::OutcomeKind;

    fn demo() -> DiscreteScenario {
        DiscreteScenario::new(
            4.0,
            vec![
                DiscreteVariable {
                    component: "l".into(),
                    time: 1.0,
                    table: vec![0.5],
                    regime: None,
                },
                DiscreteVariable {
                    component: "a".into(),
                    time: 2.0,
                    table: vec![0.3, 0.7],
                    regime: Some(true),
                },
                DiscreteVariable {
                    component: "y".into(),
                    time: 3.0,
                    table: vec![0.2, 0.4, 0.5, 0.8],
                    regime: None,
                },
            ],
        )
        .unwrap()
    }

    fn y_outcome(ds: &DiscreteScenario) -> OutcomeFunctional {
        let y = ds.space().selector("y").unwrap();
        OutcomeFunctional::new(
            OutcomeKind::Count {
                of: y,
                cap: Some(1),
            },
            4.0,
            4.0,
        )
        .unwrap()
    }

    #[test]
    fn demo_oracle_values() {
        let ds = demo();
        let out = y_outcome(&ds);
        let g = oracle_g_formula(&ds, &out).unwrap();
        let ipw = oracle_ipw(&ds, &out).unwrap();
        assert!((g - 0.6).abs() < 1e-15);
        assert!((ipw - g).abs() < 1e-12);
        let report = oracle_report(&ds, &out).unwrap();
        assert_eq!(report.worlds, 8);
        assert!((report.max_weight - 1.0 / 0.3).abs() < 1e-12);
    }

    #[test]
    fn constant_outcome_gives_one() {
        let ds = demo();
        let one = OutcomeFunctional::new(OutcomeKind::Constant(1.0), 4.0, 4.0).unwrap();
        assert!((oracle_g_formula(&ds, &one).unwrap() - 1.0).abs() < 1e-15);
        assert!((oracle_ipw(&ds, &one).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_conditional_probability_is_reported_with_its_cell() {
        let mut vars = demo().variables().to_vec();
        vars[1].table = vec![0.3, 0.0];
        let ds = DiscreteScenario::new(4.0, vars).unwrap();
        match oracle_ipw(&ds, &y_outcome(&ds)) {
            Err(Error::DiscretePositivity { variable, cell }) => {
                assert_eq!(variable, 1);
                assert_eq!(cell, "l@1=1");
            }
            other => panic!("expected a positivity error, got {other:?}"),
        }
        let mut vars = demo().variables().to_vec();
        vars[1].table = vec![0.0, 0.0];
        let ds = DiscreteScenario::new(4.0, vars).unwrap();
        assert!(matches!(
            oracle_g_formula(&ds, &y_outcome(&ds)),
            Err(Error::RegimeUnreachable)
        ));
    }

    #[test]
    fn too_many_variables_are_refused() {
        let vars: Vec<DiscreteVariable> = (0..23)
            .map(|i| DiscreteVariable {
                component: "a".into(),
                time: 1.0 + i as f64,
                table: vec![0.5; 1 << i.min(0)],
                regime: Some(true),
            })
            .collect();
        assert!(matches!(
            DiscreteScenario::new(30.0, vars),
            Err(Error::EnumerationTooLarge {
                needed: 23,
                cap: 22
            })
        ));
    }

    #[test]
    fn continuous_machinery_reproduces_the_enumeration() {
        let ds = demo();
        let report = cross_check_continuous(&ds, &y_outcome(&ds)).unwrap();
        assert!(report.ok, "{report:?}");
    }

    #[test]
    fn model_enumeration_sums_to_one() {
        let ds = demo();
        let model = ds.to_model().unwrap();
        let all = enumerate_model(&model, &Baseline::default(), 1 << 20).unwrap();
        assert_eq!(all.len(), 8);
        let total: f64 = all.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
