//! Predictable interventions and deviation times.
//!
//! An intervention replaces the counting process of one target component by
//! a predictable functional `n(φ)` of the rest of the trajectory. Every
//! built-in kind decides the event at time `u` from events strictly before `u`.

use crate::compensator::{Atom, HazardSegmentPlan, Keyed};
use crate::error::{Error, Result};
use crate::trajectory::{Baseline, ComponentId, Event, MarkId, MarkSpace, Selector, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleEntry {
    At(f64),
    After { of: Selector, delay: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InterventionKind {
    /// Fixed events.
    Static { events: Vec<(f64, MarkId)> },
    /// One event `delay` after every event of `source`.
    DelayedCopy {
        source: Selector,
        delay: f64,
        mark: MarkId,
    },
    /// `delay` after each visit, `mark` if `trigger` fired in the `window`
    /// before the visit, otherwise `otherwise` (or nothing).
    Triggered {
        trigger: Selector,
        window: f64,
        visit: Selector,
        delay: f64,
        mark: MarkId,
        otherwise: Option<MarkId>,
    },
    /// Events at scheduled times with a history-dependent mark.
    Kernel {
        schedule: Vec<ScheduleEntry>,
        assign: Keyed<MarkId>,
    },
    /// No events at all.
    Prevent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterventionSpec {
    pub target: ComponentId,
    pub kind: InterventionKind,
}

impl InterventionSpec {
    pub fn new(space: &MarkSpace, target: ComponentId, kind: InterventionKind) -> Result<Self> {
        let spec = InterventionSpec { target, kind };
        spec.validate(space)?;
        Ok(spec)
    }

    pub fn validate(&self, space: &MarkSpace) -> Result<()> {
        space.check_selector(&Selector::Component(self.target))?;
        let target = space.component_name(self.target).to_string();
        let own = |m: &MarkId| {
            if m.component == self.target {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "mark `{}` does not belong to intervention target `{target}`",
                    space.mark_label(*m)
                )))
            }
        };
        let positive = |x: f64, what: &str| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{what} of the intervention on `{target}` must be positive, got {x}"
                )))
            }
        };
        match &self.kind {
            InterventionKind::Static { events } => {
                let mut last = 0.0;
                for (t, m) in events {
                    own(m)?;
                    if !(*t > last && t.is_finite()) {
                        return Err(Error::Config(format!(
                            "static times on `{target}` must increase from 0"
                        )));
                    }
                    last = *t;
                }
            }
            InterventionKind::DelayedCopy { delay, mark, .. } => {
                own(mark)?;
                positive(*delay, "delay")?;
            }
            InterventionKind::Triggered {
                window,
                delay,
                mark,
                otherwise,
                ..
            } => {
                own(mark)?;
                if let Some(o) = otherwise {
                    own(o)?;
                }
                positive(*delay, "delay")?;
                positive(*window, "window")?;
            }
            InterventionKind::Kernel { schedule, assign } => {
                for entry in schedule {
                    match entry {
                        ScheduleEntry::At(t) => positive(*t, "scheduled time")?,
                        ScheduleEntry::After { delay, .. } => positive(*delay, "delay")?,
                    }
                }
                if assign.table.len() != 1usize << assign.keys.len() {
                    return Err(Error::Config(format!(
                        "mark table of `{target}` has the wrong size"
                    )));
                }
                assign.table.iter().try_for_each(own)?;
            }
            InterventionKind::Prevent => {}
        }
        Ok(())
    }
}

/// `n_t(φ)`: intervention events in `(0, t]` computed from `history`.
pub fn evaluate(
    spec: &InterventionSpec,
    baseline: &Baseline,
    history: &[Event],
    t: f64,
) -> Vec<Event> {
    let mut out: Vec<Event> = Vec::new();
    match &spec.kind {
        InterventionKind::Static { events } => {
            out.extend(
                events
                    .iter()
                    .filter(|(u, _)| *u <= t)
                    .map(|(u, m)| Event::new(*u, *m)),
            );
        }
        InterventionKind::DelayedCopy {
            source,
            delay,
            mark,
        } => {
            for e in history.iter().filter(|e| source.matches(e)) {
                let u = e.t + delay;
                if u <= t {
                    out.push(Event::new(u, *mark));
                }
            }
        }
        InterventionKind::Triggered {
            trigger,
            window,
            visit,
            delay,
            mark,
            otherwise,
        } => {
            for v in history.iter().filter(|e| visit.matches(e)) {
                let u = v.t + delay;
                if u > t {
                    continue;
                }
                let fired = history
                    .iter()
                    .any(|e| trigger.matches(e) && e.t > v.t - window && e.t < v.t);
                match (fired, otherwise) {
                    (true, _) => out.push(Event::new(u, *mark)),
                    (false, Some(o)) => out.push(Event::new(u, *o)),
                    (false, None) => {}
                }
            }
        }
        InterventionKind::Kernel { schedule, assign } => {
            let mut times = Vec::new();
            for entry in schedule {
                match entry {
                    ScheduleEntry::At(u) => times.push(*u),
                    ScheduleEntry::After { of, delay } => {
                        times.extend(
                            history
                                .iter()
                                .filter(|e| of.matches(e))
                                .map(|e| e.t + delay),
                        );
                    }
                }
            }
            for u in times.into_iter().filter(|u| *u <= t) {
                out.push(Event::new(u, *assign.get(baseline, history, u)));
            }
        }
        InterventionKind::Prevent => {}
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    out.dedup_by(|b, a| a.t == b.t);
    out
}

/// Intervention events in `(s, T]` as probability-one atoms, with their marks,
/// from the history frozen at `s`.
pub fn intervention_plan(
    spec: &InterventionSpec,
    baseline: &Baseline,
    history: &[Event],
    s: f64,
    horizon: f64,
) -> (HazardSegmentPlan, Vec<Event>) {
    let events: Vec<Event> = evaluate(spec, baseline, history, horizon)
        .into_iter()
        .filter(|e| e.t > s)
        .collect();
    let plan = HazardSegmentPlan {
        from: s,
        to: horizon,
        segments: Vec::new(),
        atoms: events.iter().map(|e| Atom { t: e.t, mass: 1.0 }).collect(),
    };
    (plan, events)
}

/// Checks `n_t(φ) = n_t(φ|_{t-})` at every grid time and every event time of
/// the trajectory. Returns the first time where they differ.
pub fn predictability_check(
    spec: &InterventionSpec,
    baseline: &Baseline,
    traj: &Trajectory,
    grid: &[f64],
) -> Result<()> {
    let mut times: Vec<f64> = grid
        .iter()
        .copied()
        .chain(traj.events().iter().map(|e| e.t))
        .filter(|t| *t >= 0.0 && *t <= traj.horizon())
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    for t in times {
        let full = evaluate(spec, baseline, traj.events(), t);
        let before = evaluate(spec, baseline, traj.history_before(t), t);
        if full != before {
            return Err(Error::NotPredictable { t });
        }
    }
    Ok(())
}

/// Deviation times `τ^j` per intervention and their minimum `τ^J`;
/// `f64::INFINITY` when the trajectory never deviates.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationTimes {
    pub per_intervention: Vec<f64>,
    pub overall: f64,
}

pub fn deviation_time(
    specs: &[InterventionSpec],
    baseline: &Baseline,
    traj: &Trajectory,
) -> DeviationTimes {
    let per_intervention: Vec<f64> = specs
        .iter()
        .map(|spec| {
            let natural = evaluate(spec, baseline, traj.events(), traj.horizon());
            let observed = traj.component_events(spec.target);
            first_difference(&observed, &natural)
        })
        .collect();
    let overall = per_intervention
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    DeviationTimes {
        per_intervention,
        overall,
    }
}

fn first_difference(a: &[Event], b: &[Event]) -> f64 {
    for i in 0..a.len().max(b.len()) {
        match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) if x == y => continue,
            (Some(x), Some(y)) => return x.t.min(y.t),
            (Some(x), None) => return x.t,
            (None, Some(y)) => return y.t,
            (None, None) => unreachable!(),
        }
    }
    f64::INFINITY
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> MarkSpace {
        MarkSpace::new(&[("l", vec!["l"]), ("a", vec!["a0", "a1"]), ("v", vec!["v"])]).unwrap()
    }

    #[test]
    fn delayed_copy_shifts_source_events() {
        let s = space();
        let l = s.mark("l").unwrap();
        let a1 = s.mark("a1").unwrap();
        let spec = InterventionSpec::new(
            &s,
            s.component("a").unwrap(),
            InterventionKind::DelayedCopy {
                source: Selector::Mark(l),
                delay: 0.5,
                mark: a1,
            },
        )
        .unwrap();
        let traj = Trajectory::new(5.0, vec![Event::new(1.0, l), Event::new(3.0, l)]).unwrap();
        let out = evaluate(&spec, &Baseline::default(), traj.events(), 5.0);
        assert_eq!(out, vec![Event::new(1.5, a1), Event::new(3.5, a1)]);
        assert_eq!(
            evaluate(&spec, &Baseline::default(), traj.events(), 1.49),
            vec![]
        );
    }

    #[test]
    fn triggered_uses_open_window_before_the_visit() {
        let s = space();
        let (l, a0, a1, v) = (
            s.mark("l").unwrap(),
            s.mark("a0").unwrap(),
            s.mark("a1").unwrap(),
            s.mark("v").unwrap(),
        );
        let spec = InterventionSpec::new(
            &s,
            s.component("a").unwrap(),
            InterventionKind::Triggered {
                trigger: Selector::Mark(l),
                window: 1.0,
                visit: Selector::Mark(v),
                delay: 0.1,
                mark: a1,
                otherwise: Some(a0),
            },
        )
        .unwrap();
        let traj = Trajectory::new(
            5.0,
            vec![
                Event::new(1.0, l),
                Event::new(1.5, v),
                Event::new(2.5, v),
                Event::new(4.0, v),
            ],
        )
        .unwrap();
        let out = evaluate(&spec, &Baseline::default(), traj.events(), 5.0);
        assert_eq!(
            out,
            vec![
                Event::new(1.6, a1),
                Event::new(2.6, a0),
                Event::new(4.1, a0)
            ]
        );
    }

    #[test]
    fn prevent_deviates_at_first_target_event() {
        let s = space();
        let a = s.component("a").unwrap();
        let spec = InterventionSpec::new(&s, a, InterventionKind::Prevent).unwrap();
        let l = s.mark("l").unwrap();
        let a0 = s.mark("a0").unwrap();
        let traj = Trajectory::new(5.0, vec![Event::new(1.0, l), Event::new(2.0, a0)]).unwrap();
        let d = deviation_time(std::slice::from_ref(&spec), &Baseline::default(), &traj);
        assert_eq!(d.overall, 2.0);
        let none = Trajectory::new(5.0, vec![Event::new(1.0, l)]).unwrap();
        assert_eq!(
            deviation_time(&[spec], &Baseline::default(), &none).overall,
            f64::INFINITY
        );
    }

    #[test]
    fn wrong_mark_at_the_right_time_is_a_deviation() {
        let s = space();
        let a = s.component("a").unwrap();
        let (a0, a1) = (s.mark("a0").unwrap(), s.mark("a1").unwrap());
        let spec = InterventionSpec::new(
            &s,
            a,
            InterventionKind::Static {
                events: vec![(2.0, a1), (3.0, a1)],
            },
        )
        .unwrap();
        let traj = Trajectory::new(5.0, vec![Event::new(2.0, a1), Event::new(3.0, a0)]).unwrap();
        assert_eq!(
            deviation_time(std::slice::from_ref(&spec), &Baseline::default(), &traj).overall,
            3.0
        );
        let missing = Trajectory::new(5.0, vec![Event::new(2.0, a1)]).unwrap();
        assert_eq!(
            deviation_time(&[spec], &Baseline::default(), &missing).overall,
            3.0
        );
    }

    #[test]
    fn zero_delay_copy_is_caught_by_the_predictability_check() {
        let s = space();
        let l = s.mark("l").unwrap();
        let a1 = s.mark("a1").unwrap();
        let spec = InterventionSpec {
            target: s.component("a").unwrap(),
            kind: InterventionKind::DelayedCopy {
                source: Selector::Mark(l),
                delay: 0.0,
                mark: a1,
            },
        };
        assert!(spec.validate(&s).is_err());
        let traj = Trajectory::new(5.0, vec![Event::new(1.25, l), Event::new(3.0, l)]).unwrap();
        let grid = [0.5, 1.0, 2.0];
        match predictability_check(&spec, &Baseline::default(), &traj, &grid) {
            Err(Error::NotPredictable { t }) => assert_eq!(t, 1.25),
            other => panic!("expected a counterexample, got {other:?}"),
        }
        let ok = InterventionSpec {
            kind: InterventionKind::DelayedCopy {
                source: Selector::Mark(l),
                delay: 0.5,
                mark: a1,
            },
            ..spec
        };
        predictability_check(&ok, &Baseline::default(), &traj, &grid).unwrap();
    }
}
