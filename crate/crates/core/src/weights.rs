//! Deviation-time compensators and the inverse probability weight process.
//!
//! For an intervened component `j` with observed compensator `Λ^j` and
//! intervention `n^j`, the compensator of the deviation counting process
//! `𝕹^j = I(τ^j <= t)` is built along the observed history and stopped at
//! `τ^J`:
//!
//! * the continuous part is the continuous part of `Λ^j`;
//! * an atom of `Λ^j` where `n^j` has no event contributes its mass;
//! * an event of `n^j` with mark `x` contributes `1 - ΔΛ^j(t, {x})`.
//!
//! With several interventions the compensators add. The weight is
//! `W_t = I(τ^J > t) exp(𝚲^c_t) / ∏_{s<=t} (1 - Δ𝚲_s)`, which equals the
//! stochastic exponential of `𝕂 = -∫ (d𝕹 - d𝚲) / (1 - Δ𝚲)`.

use std::fmt;
use std::io::Write;

use crate::compensator::{log1m, Atom, HazardSegmentPlan, Segment};
use crate::error::{Error, Result};
use crate::intervention::{deviation_time, evaluate, DeviationTimes};
use crate::scenario::Scenario;
use crate::trajectory::{Baseline, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct DeviationCompensator {
    pub tau: DeviationTimes,
    /// `min(τ^J, T)`; the compensator is constant afterwards.
    pub end: f64,
    pub segments: Vec<Segment>,
    pub atoms: Vec<Atom>,
}

impl DeviationCompensator {
    /// Continuous part `𝚲^c_t`.
    pub fn continuous_at(&self, t: f64) -> f64 {
        self.segments
            .iter()
            .map(|s| (s.end.min(t) - s.start).max(0.0) * s.rate)
            .sum()
    }

    pub fn atoms_upto(&self, t: f64) -> impl Iterator<Item = &Atom> {
        self.atoms.iter().filter(move |a| a.t <= t)
    }

    /// `𝚲^J_t`.
    pub fn value_at(&self, t: f64) -> f64 {
        self.continuous_at(t) + self.atoms_upto(t).map(|a| a.mass).sum::<f64>()
    }

    /// `Σ_{s <= t} log(1 - Δ𝚲_s)`.
    pub fn atoms_logprod(&self, t: f64) -> f64 {
        self.atoms_upto(t).map(|a| log1m(a.mass)).sum()
    }

    /// `𝕹^J_t - 𝚲^J_t`.
    pub fn residual_at(&self, t: f64) -> f64 {
        (self.tau.overall <= t) as u8 as f64 - self.value_at(t)
    }

    /// Times where the weight can change: rate changes, atoms, `τ^J` and the horizon.
    pub fn breakpoints(&self, horizon: f64) -> Vec<f64> {
        let mut b: Vec<f64> = vec![0.0, horizon];
        b.extend(self.segments.iter().map(|s| s.end));
        b.extend(self.atoms.iter().map(|a| a.t));
        if self.tau.overall <= horizon {
            b.push(self.tau.overall);
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

fn restricted(plan: &HazardSegmentPlan, a: f64, b: f64) -> HazardSegmentPlan {
    HazardSegmentPlan {
        from: a,
        to: b,
        segments: plan
            .segments
            .iter()
            .filter(|s| s.end > a && s.start < b)
            .map(|s| Segment {
                start: s.start.max(a),
                end: s.end.min(b),
                rate: s.rate,
            })
            .collect(),
        atoms: plan.atoms_in(a, b).copied().collect(),
    }
}

/// `𝚲^J` along the observed trajectory, stopped at `τ^J`.
pub fn deviation_compensator(
    scenario: &Scenario,
    baseline: &Baseline,
    traj: &Trajectory,
) -> Result<DeviationCompensator> {
    let horizon = scenario.horizon();
    let model = &scenario.model;
    let tau = deviation_time(&scenario.interventions, baseline, traj);
    let end = tau.overall.min(horizon);
    let natural: Vec<_> = scenario
        .interventions
        .iter()
        .map(|iv| evaluate(iv, baseline, traj.events(), horizon))
        .collect();
    let events = traj.events();
    let mut segments = Vec::new();
    let mut atoms = Vec::new();
    let mut prev = 0.0;
    for idx in 0..=events.len() {
        let upper = events.get(idx).map_or(horizon, |e| e.t).min(end);
        if upper > prev {
            let history = &events[..idx];
            let mut pieces = Vec::new();
            for (iv, nat) in scenario.interventions.iter().zip(&natural) {
                let plan = restricted(
                    &model.plan(iv.target, baseline, history, prev)?,
                    prev,
                    upper,
                );
                let mut own: Vec<Atom> = Vec::new();
                for a in &plan.atoms {
                    if !nat.iter().any(|e| e.t == a.t) {
                        own.push(*a);
                    }
                }
                for e in nat.iter().filter(|e| e.t > prev && e.t <= upper) {
                    let p = plan.atom_at(e.t) * model.mark_prob(e.mark, baseline, history, e.t);
                    own.push(Atom {
                        t: e.t,
                        mass: 1.0 - p,
                    });
                }
                own.sort_by(|x, y| x.t.total_cmp(&y.t));
                pieces.push(HazardSegmentPlan { atoms: own, ..plan });
            }
            let refs: Vec<&HazardSegmentPlan> = pieces.iter().collect();
            if !refs.is_empty() {
                let m = HazardSegmentPlan::merge(&refs);
                segments.extend(m.segments.into_iter().filter(|s| s.end > s.start));
                atoms.extend(m.atoms);
            }
        }
        if upper >= end {
            break;
        }
        prev = upper;
    }
    Ok(DeviationCompensator {
        tau,
        end,
        segments,
        atoms,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositivityViolation {
    pub t: f64,
    pub mass: f64,
}

impl fmt::Display for PositivityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "deviation compensator has an atom of mass {} at t = {}, so the regime has zero conditional probability there",
            self.mass, self.t
        )
    }
}

/// Every atom of `𝚲^J` on `(0, τ^J ∧ T]`, including the one at `τ^J`, is
/// below 1 and the continuous part is finite.
pub fn positivity_check(
    lambda: &DeviationCompensator,
) -> std::result::Result<(), PositivityViolation> {
    if let Some(a) = lambda.atoms.iter().find(|a| a.mass >= 1.0) {
        return Err(PositivityViolation {
            t: a.t,
            mass: a.mass,
        });
    }
    if let Some(s) = lambda.segments.iter().find(|s| !s.rate.is_finite()) {
        return Err(PositivityViolation {
            t: s.start,
            mass: f64::INFINITY,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightPoint {
    pub t: f64,
    pub lambda_c: f64,
    pub atoms_logprod: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightPath {
    pub lambda: DeviationCompensator,
    pub points: Vec<WeightPoint>,
}

impl WeightPath {
    /// `W_t` evaluated exactly from the compensator.
    pub fn at(&self, t: f64) -> f64 {
        if self.lambda.tau.overall <= t {
            return 0.0;
        }
        (self.lambda.continuous_at(t) - self.lambda.atoms_logprod(t)).exp()
    }

    pub fn last(&self) -> f64 {
        self.points.last().map_or(1.0, |p| p.w)
    }

    pub fn tau(&self) -> f64 {
        self.lambda.tau.overall
    }
}

fn checked_compensator(
    scenario: &Scenario,
    baseline: &Baseline,
    traj: &Trajectory,
) -> Result<DeviationCompensator> {
    let lambda = deviation_compensator(scenario, baseline, traj)?;
    positivity_check(&lambda).map_err(|violation| Error::Positivity {
        subject: None,
        violation,
    })?;
    Ok(lambda)
}

/// Weight path from the product formula, evaluated at every breakpoint.
pub fn weight_path_product(
    scenario: &Scenario,
    baseline: &Baseline,
    traj: &Trajectory,
) -> Result<WeightPath> {
    let lambda = checked_compensator(scenario, baseline, traj)?;
    let horizon = scenario.horizon();
    let mut path = WeightPath {
        lambda,
        points: Vec::new(),
    };
    for t in path.lambda.breakpoints(horizon) {
        let point = WeightPoint {
            t,
            lambda_c: path.lambda.continuous_at(t),
            atoms_logprod: path.lambda.atoms_logprod(t),
            w: path.at(t),
        };
        path.points.push(point);
    }
    Ok(path)
}

/// Weight path from the recursion `W_t = W_{t-} (1 + Δ𝕂_t)` with
/// exponential growth `exp(d𝚲^c)` between breakpoints.
pub fn weight_path_sde(
    scenario: &Scenario,
    baseline: &Baseline,
    traj: &Trajectory,
) -> Result<Vec<(f64, f64)>> {
    let lambda = checked_compensator(scenario, baseline, traj)?;
    let tau = lambda.tau.overall;
    let mut w = 1.0;
    let mut prev = 0.0;
    let mut out = vec![(0.0, 1.0)];
    for t in lambda.breakpoints(scenario.horizon()).into_iter().skip(1) {
        w *= (lambda.continuous_at(t) - lambda.continuous_at(prev)).exp();
        let jump = lambda
            .atoms
            .iter()
            .find(|a| a.t == t)
            .map_or(0.0, |a| a.mass);
        let dn = (t == tau) as u8 as f64;
        let dk = -(dn - jump) / (1.0 - jump);
        w *= 1.0 + dk;
        out.push((t, w));
        prev = t;
    }
    Ok(out)
}

/// Likelihood ratio `c^{N_t} e^{-(c-1)t}` of a rate-`c` Poisson process
/// against a unit-rate one.
pub fn poisson_ip_weight(c: f64, count: usize, t: f64) -> f64 {
    c.powi(count as i32) * (-(c - 1.0) * t).exp()
}

/// Writes `subject_id,t,Lambda_c,Lambda_atoms_logprod,W` rows.
pub fn write_weight_dump<W: Write>(out: W, paths: &[(u64, &WeightPath)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["subject_id", "t", "Lambda_c", "Lambda_atoms_logprod", "W"])?;
    for (id, path) in paths {
        for p in &path.points {
            w.write_record([
                id.to_string(),
                p.t.to_string(),
                p.lambda_c.to_string(),
                p.atoms_logprod.to_string(),
                p.w.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
