//! Simulation of observed, interventional and joint trajectories.
//!
//! Observed and interventional draws use the total survival of all
//! components and then choose the component and mark in proportion to
//! their atoms or rates. The joint draw couples the observed process with
//! its potential outcome: while the two arms agree, intervened components and
//! the non-intervened block get their own uniforms, and the block's draws are
//! shared by both arms. Once the arms disagree the potential arm continues
//! from its own survival function.

use rayon::prelude::*;

use crate::compensator::HazardSegmentPlan;
use crate::error::{Error, Result};
use crate::intervention::{deviation_time, intervention_plan, DeviationTimes};
use crate::rng::{RandomizerStream, Role};
use crate::scenario::Scenario;
use crate::trajectory::{Baseline, ComponentId, Event, MarkId, Trajectory};

/// `inf{t > s : U(s, t) <= ξ}` for the plan's survival function, or
/// `f64::INFINITY` if survival stays above `ξ` up to the plan end.
pub fn inverse_transform_time(plan: &HazardSegmentPlan, xi: f64) -> f64 {
    let target = xi.ln();
    let mut l = 0.0;
    let mut a = plan.from;
    let mut seg = 0;
    let mut continuous = |a: f64, b: f64, l: &mut f64| -> Option<f64> {
        while seg < plan.segments.len() && plan.segments[seg].end <= a {
            seg += 1;
        }
        let mut k = seg;
        while k < plan.segments.len() && plan.segments[k].start < b {
            let s = &plan.segments[k];
            let lo = s.start.max(a);
            let hi = s.end.min(b);
            if s.rate > 0.0 && hi > lo {
                let next = *l - s.rate * (hi - lo);
                if next <= target {
                    return Some((lo + (*l - target) / s.rate).min(hi));
                }
                *l = next;
            }
            k += 1;
        }
        None
    };
    for atom in &plan.atoms {
        if let Some(t) = continuous(a, atom.t, &mut l) {
            return t;
        }
        l += crate::compensator::log1m(atom.mass);
        if l <= target {
            return atom.t;
        }
        a = atom.t;
    }
    continuous(a, plan.to, &mut l).unwrap_or(f64::INFINITY)
}

/// Index drawn in proportion to `weights`.
fn pick(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let last = weights.iter().rposition(|w| *w > 0.0).unwrap_or(0);
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u * total < acc {
            return i;
        }
    }
    last
}

fn merged(plans: &[HazardSegmentPlan]) -> HazardSegmentPlan {
    let refs: Vec<&HazardSegmentPlan> = plans.iter().collect();
    HazardSegmentPlan::merge(&refs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub baseline: Baseline,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointRealization {
    pub baseline: Baseline,
    pub observed: Trajectory,
    pub potential: Trajectory,
    pub deviation: DeviationTimes,
}

impl JointRealization {
    /// Observed and potential trajectories coincide strictly before `τ^J`.
    pub fn is_consistent(&self) -> bool {
        let tau = self.deviation.overall;
        self.observed.history_before(tau) == self.potential.history_before(tau)
    }
}

struct Sim<'a> {
    scenario: &'a Scenario,
    baseline: Baseline,
    rng: RandomizerStream,
}

impl<'a> Sim<'a> {
    fn new(scenario: &'a Scenario, seed: u64, subject: u64) -> Self {
        let mut rng = RandomizerStream::new(seed, subject);
        let baseline = scenario
            .baseline_law
            .draw(rng.uniform(0, Role::Baseline))
            .clone();
        Sim {
            scenario,
            baseline,
            rng,
        }
    }

    fn explode(&self, events: &[Event]) -> Error {
        let space = &self.scenario.space;
        let (c, count) = space
            .component_ids()
            .map(|c| (c, events.iter().filter(|e| e.component() == c).count()))
            .max_by_key(|(_, n)| *n)
            .expect("at least one component");
        Error::Explosion {
            cap: self.scenario.explosion_cap,
            component: space.component_name(c).to_string(),
            count,
        }
    }

    fn push(&self, traj: &mut Trajectory, e: Event) -> Result<()> {
        traj.push(e);
        if traj.len() > self.scenario.explosion_cap {
            return Err(self.explode(traj.events()));
        }
        Ok(())
    }

    /// Component and mark of an event of `comps` at `t`, in proportion to
    /// atoms at `t` if any, rates otherwise.
    fn choose(
        &self,
        comps: &[ComponentId],
        plans: &[HazardSegmentPlan],
        history: &[Event],
        t: f64,
        u: f64,
    ) -> MarkId {
        let model = &self.scenario.model;
        let at_atom = plans.iter().any(|p| p.atom_at(t) > 0.0);
        let mut marks = Vec::new();
        let mut weights = Vec::new();
        for (c, plan) in comps.iter().zip(plans) {
            let mass = if at_atom {
                plan.atom_at(t)
            } else {
                plan.rate_at(t)
            };
            if mass <= 0.0 {
                continue;
            }
            let probs = model.mark_probs(*c, &self.baseline, history, t);
            for (m, p) in self.scenario.space.marks_of(*c).iter().zip(probs) {
                marks.push(*m);
                weights.push(mass * p);
            }
        }
        marks[pick(&weights, u)]
    }

    fn block_plans(
        &self,
        comps: &[ComponentId],
        history: &[Event],
        s: f64,
    ) -> Result<Vec<HazardSegmentPlan>> {
        comps
            .iter()
            .map(|c| self.scenario.model.plan(*c, &self.baseline, history, s))
            .collect()
    }

    fn observed(mut self) -> Result<Draw> {
        let comps: Vec<ComponentId> = self.scenario.space.component_ids().collect();
        let mut traj = Trajectory::empty(self.scenario.horizon());
        let mut s = 0.0;
        for round in 1.. {
            let plans = self.block_plans(&comps, traj.events(), s)?;
            let t = inverse_transform_time(
                &merged(&plans),
                self.rng.uniform(round, Role::ObservedTime),
            );
            if !t.is_finite() {
                break;
            }
            let u = self.rng.uniform(round, Role::ObservedMark);
            let mark = self.choose(&comps, &plans, traj.events(), t, u);
            self.push(&mut traj, Event::new(t, mark))?;
            s = t;
        }
        Ok(Draw {
            baseline: self.baseline,
            trajectory: traj,
        })
    }

    /// Next event of the potential process from its own survival function.
    fn potential_step(
        &mut self,
        history: &[Event],
        s: f64,
        time_u: f64,
        mark_u: f64,
    ) -> Result<Option<Event>> {
        let rest = self.scenario.not_intervened();
        let horizon = self.scenario.horizon();
        let mut plans = self.block_plans(&rest, history, s)?;
        let mut forced: Vec<Vec<Event>> = Vec::new();
        for iv in &self.scenario.interventions {
            let (plan, events) = intervention_plan(iv, &self.baseline, history, s, horizon);
            plans.push(plan);
            forced.push(events);
        }
        let t = inverse_transform_time(&merged(&plans), time_u);
        if !t.is_finite() {
            return Ok(None);
        }
        let hits: Vec<Event> = forced
            .iter()
            .flatten()
            .filter(|e| e.t == t)
            .copied()
            .collect();
        let rest_atom = plans[..rest.len()].iter().any(|p| p.atom_at(t) > 0.0);
        if hits.len() > 1 || (hits.len() == 1 && rest_atom) {
            return Err(Error::Tie {
                t,
                first: "intervention".into(),
                second: if rest_atom {
                    "non-intervened atom".into()
                } else {
                    "intervention".into()
                },
            });
        }
        if let Some(e) = hits.first() {
            return Ok(Some(*e));
        }
        Ok(Some(Event::new(
            t,
            self.choose(&rest, &plans[..rest.len()], history, t, mark_u),
        )))
    }

    fn interventional(mut self) -> Result<Draw> {
        let mut traj = Trajectory::empty(self.scenario.horizon());
        let mut s = 0.0;
        for round in 1.. {
            let tu = self.rng.uniform(round, Role::InterventionalTime);
            let mu = self.rng.uniform(round, Role::InterventionalMark);
            match self.potential_step(traj.events(), s, tu, mu)? {
                Some(e) => {
                    self.push(&mut traj, e)?;
                    s = e.t;
                }
                None => break,
            }
        }
        Ok(Draw {
            baseline: self.baseline,
            trajectory: traj,
        })
    }

    /// Next observed event from per-component draws for intervened components
    /// and one block draw for the rest. Also returns the block candidate.
    fn observed_step(
        &mut self,
        round: u64,
        history: &[Event],
        s: f64,
    ) -> Result<(Option<Event>, Option<Event>)> {
        let rest = self.scenario.not_intervened();
        let mut best: Option<(f64, usize)> = None;
        let mut candidates = Vec::new();
        for (i, iv) in self.scenario.interventions.iter().enumerate() {
            let plan = self
                .scenario
                .model
                .plan(iv.target, &self.baseline, history, s)?;
            let t = inverse_transform_time(
                &plan,
                self.rng.uniform(round, Role::ComponentTime(iv.target)),
            );
            candidates.push((t, i, plan));
        }
        let rest_plans = self.block_plans(&rest, history, s)?;
        let t_rest = inverse_transform_time(
            &merged(&rest_plans),
            self.rng.uniform(round, Role::RestTime),
        );
        let rest_event = if t_rest.is_finite() {
            let u = self.rng.uniform(round, Role::RestMark);
            Some(Event::new(
                t_rest,
                self.choose(&rest, &rest_plans, history, t_rest, u),
            ))
        } else {
            None
        };
        let space = &self.scenario.space;
        let name = |i: usize| {
            space
                .component_name(self.scenario.interventions[i].target)
                .to_string()
        };
        for (t, i, _) in &candidates {
            if !t.is_finite() {
                continue;
            }
            if *t == t_rest {
                return Err(Error::Tie {
                    t: *t,
                    first: name(*i),
                    second: "non-intervened block".into(),
                });
            }
            if let Some((bt, bi)) = best {
                if bt == *t {
                    return Err(Error::Tie {
                        t: *t,
                        first: name(bi),
                        second: name(*i),
                    });
                }
            }
            if best.is_none_or(|(bt, _)| *t < bt) {
                best = Some((*t, *i));
            }
        }
        let observed = match best {
            Some((t, i)) if t < t_rest => {
                let target = self.scenario.interventions[i].target;
                let probs = self
                    .scenario
                    .model
                    .mark_probs(target, &self.baseline, history, t);
                let u = self.rng.uniform(round, Role::ComponentMark(target));
                let marks = space.marks_of(target);
                Some(Event::new(t, marks[pick(&probs, u)]))
            }
            _ => rest_event,
        };
        Ok((observed, rest_event))
    }

    fn joint(mut self) -> Result<JointRealization> {
        let horizon = self.scenario.horizon();
        let mut obs = Trajectory::empty(horizon);
        let mut pot = Trajectory::empty(horizon);
        let (mut s_obs, mut s_pot) = (0.0, 0.0);
        let mut agree = true;
        let (mut obs_done, mut pot_done) = (false, false);
        for round in 1.. {
            if obs_done && pot_done {
                break;
            }
            if agree {
                let (observed, rest_event) = self.observed_step(round, obs.events(), s_obs)?;
                let mut next_forced: Option<Event> = None;
                for iv in &self.scenario.interventions {
                    let (_, events) =
                        intervention_plan(iv, &self.baseline, pot.events(), s_pot, horizon);
                    if let Some(e) = events.first() {
                        match next_forced {
                            Some(f) if f.t == e.t => {
                                return Err(Error::Tie {
                                    t: e.t,
                                    first: "intervention".into(),
                                    second: "intervention".into(),
                                })
                            }
                            Some(f) if f.t < e.t => {}
                            _ => next_forced = Some(*e),
                        }
                    }
                }
                let potential = match (next_forced, rest_event) {
                    (Some(f), Some(r)) if f.t == r.t => {
                        return Err(Error::Tie {
                            t: f.t,
                            first: "intervention".into(),
                            second: "non-intervened block".into(),
                        })
                    }
                    (Some(f), Some(r)) => Some(if f.t < r.t { f } else { r }),
                    (f, r) => f.or(r),
                };
                agree = observed == potential;
                match observed {
                    Some(e) => {
                        self.push(&mut obs, e)?;
                        s_obs = e.t;
                    }
                    None => obs_done = true,
                }
                match potential {
                    Some(e) => {
                        self.push(&mut pot, e)?;
                        s_pot = e.t;
                    }
                    None => pot_done = true,
                }
            } else {
                if !obs_done {
                    match self.observed_step(round, obs.events(), s_obs)?.0 {
                        Some(e) => {
                            self.push(&mut obs, e)?;
                            s_obs = e.t;
                        }
                        None => obs_done = true,
                    }
                }
                if !pot_done {
                    let tu = self.rng.uniform(round, Role::PotentialTime);
                    let mu = self.rng.uniform(round, Role::PotentialMark);
                    match self.potential_step(pot.events(), s_pot, tu, mu)? {
                        Some(e) => {
                            self.push(&mut pot, e)?;
                            s_pot = e.t;
                        }
                        None => pot_done = true,
                    }
                }
            }
        }
        let deviation = deviation_time(&self.scenario.interventions, &self.baseline, &obs);
        Ok(JointRealization {
            baseline: self.baseline,
            observed: obs,
            potential: pot,
            deviation,
        })
    }
}

/// One observed trajectory for `(seed, subject)`.
pub fn simulate_observed(scenario: &Scenario, seed: u64, subject: u64) -> Result<Draw> {
    Sim::new(scenario, seed, subject).observed()
}

/// One trajectory of the intervened process for `(seed, subject)`.
pub fn simulate_interventional(scenario: &Scenario, seed: u64, subject: u64) -> Result<Draw> {
    Sim::new(scenario, seed, subject).interventional()
}

/// Observed and potential trajectories on a common probability space.
pub fn simulate_joint(scenario: &Scenario, seed: u64, subject: u64) -> Result<JointRealization> {
    Sim::new(scenario, seed, subject).joint()
}

/// Runs `f` for subjects `0..n` in parallel, keeping subject order.
pub fn simulate_many<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..n as u64).into_par_iter().map(f).collect()
}
