//! Marked point process trajectories on a finite mark space.
//!
//! A trajectory is a finite, strictly increasing list of `(t, mark)` events
//! in `(0, T]`. Every mark belongs to exactly one component, and counting
//! queries take a [`Selector`] naming either a whole component or one mark.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComponentId(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MarkId {
    pub id: u16,
    pub component: ComponentId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub mark: MarkId,
}

impl Event {
    pub fn new(t: f64, mark: MarkId) -> Self {
        Event { t, mark }
    }

    pub fn component(&self) -> ComponentId {
        self.mark.component
    }
}

/// Either every mark of a component or a single mark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Selector {
    Component(ComponentId),
    Mark(MarkId),
}

impl Selector {
    pub fn matches(&self, e: &Event) -> bool {
        match self {
            Selector::Component(c) => e.mark.component == *c,
            Selector::Mark(m) => e.mark == *m,
        }
    }

    pub fn component(&self) -> ComponentId {
        match self {
            Selector::Component(c) => *c,
            Selector::Mark(m) => m.component,
        }
    }

    /// Whether the two selectors can match a common event.
    pub fn overlaps(&self, other: &Selector) -> bool {
        match (self, other) {
            (Selector::Mark(a), Selector::Mark(b)) => a == b,
            _ => self.component() == other.component(),
        }
    }
}

/// Component and mark labels. Mark labels are globally unique; a mark may
/// share its label with its own component.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkSpace {
    components: Vec<String>,
    component_marks: Vec<Vec<MarkId>>,
    marks: Vec<String>,
    mark_component: Vec<ComponentId>,
}

impl MarkSpace {
    pub fn new<S: AsRef<str>>(components: &[(S, Vec<S>)]) -> Result<Self> {
        let mut space = MarkSpace {
            components: Vec::new(),
            component_marks: Vec::new(),
            marks: Vec::new(),
            mark_component: Vec::new(),
        };
        for (ci, (name, marks)) in components.iter().enumerate() {
            let name = name.as_ref();
            if name.is_empty() {
                return Err(Error::Config("empty component name".into()));
            }
            if space.components.iter().any(|c| c == name) {
                return Err(Error::Config(format!("duplicate component `{name}`")));
            }
            if marks.is_empty() {
                return Err(Error::Config(format!("component `{name}` has no marks")));
            }
            let cid = ComponentId(ci as u16);
            space.components.push(name.to_string());
            let mut ids = Vec::new();
            for m in marks {
                let m = m.as_ref();
                if space.marks.iter().any(|x| x == m) {
                    return Err(Error::Config(format!("duplicate mark label `{m}`")));
                }
                let id = MarkId {
                    id: space.marks.len() as u16,
                    component: cid,
                };
                space.marks.push(m.to_string());
                space.mark_component.push(cid);
                ids.push(id);
            }
            space.component_marks.push(ids);
        }
        for (mi, m) in space.marks.iter().enumerate() {
            if let Some(ci) = space.components.iter().position(|c| c == m) {
                if ci != space.mark_component[mi].0 as usize {
                    return Err(Error::Config(format!(
                        "mark `{m}` clashes with the name of another component"
                    )));
                }
            }
        }
        Ok(space)
    }

    /// One single-mark component per label, with the mark named like the component.
    pub fn simple<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let comps: Vec<(&str, Vec<&str>)> = labels
            .iter()
            .map(|l| (l.as_ref(), vec![l.as_ref()]))
            .collect();
        MarkSpace::new(&comps)
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn num_marks(&self) -> usize {
        self.marks.len()
    }

    pub fn component_ids(&self) -> impl Iterator<Item = ComponentId> {
        (0..self.components.len()).map(|c| ComponentId(c as u16))
    }

    pub fn component(&self, name: &str) -> Result<ComponentId> {
        self.components
            .iter()
            .position(|c| c == name)
            .map(|i| ComponentId(i as u16))
            .ok_or_else(|| Error::UnknownLabel(name.to_string()))
    }

    pub fn mark(&self, label: &str) -> Result<MarkId> {
        self.marks
            .iter()
            .position(|m| m == label)
            .map(|i| MarkId {
                id: i as u16,
                component: self.mark_component[i],
            })
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Resolves a component name first, then a mark label.
    pub fn selector(&self, label: &str) -> Result<Selector> {
        if let Ok(c) = self.component(label) {
            return Ok(Selector::Component(c));
        }
        self.mark(label).map(Selector::Mark)
    }

    pub fn check_selector(&self, sel: &Selector) -> Result<()> {
        let ok = match sel {
            Selector::Component(c) => (c.0 as usize) < self.components.len(),
            Selector::Mark(m) => {
                (m.id as usize) < self.marks.len()
                    && self.mark_component[m.id as usize] == m.component
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "selector {sel:?} is not in the mark space"
            )))
        }
    }

    pub fn component_name(&self, c: ComponentId) -> &str {
        &self.components[c.0 as usize]
    }

    pub fn mark_label(&self, m: MarkId) -> &str {
        &self.marks[m.id as usize]
    }

    pub fn selector_label(&self, sel: &Selector) -> &str {
        match sel {
            Selector::Component(c) => self.component_name(*c),
            Selector::Mark(m) => self.mark_label(*m),
        }
    }

    pub fn marks_of(&self, c: ComponentId) -> &[MarkId] {
        &self.component_marks[c.0 as usize]
    }

    /// Position of `m` within its component's mark list.
    pub fn mark_index(&self, m: MarkId) -> usize {
        self.marks_of(m.component)
            .iter()
            .position(|x| *x == m)
            .expect("mark belongs to its component")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestrictMode {
    /// Keep events with `t_i <= t`.
    At,
    /// Keep events with `t_i < t`.
    StrictlyBefore,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectoryViolation {
    InvalidHorizon(f64),
    NonFinite { index: usize },
    NonPositiveTime { index: usize, t: f64 },
    BeyondHorizon { index: usize, t: f64, horizon: f64 },
    NotIncreasing { index: usize, t: f64, previous: f64 },
    ForeignMark { index: usize },
}

impl fmt::Display for TrajectoryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrajectoryViolation::InvalidHorizon(h) => {
                write!(f, "horizon {h} must be positive and finite")
            }
            TrajectoryViolation::NonFinite { index } => {
                write!(f, "event {index} has a non-finite time")
            }
            TrajectoryViolation::NonPositiveTime { index, t } => {
                write!(f, "event {index} at t = {t} is not in (0, T]")
            }
            TrajectoryViolation::BeyondHorizon { index, t, horizon } => {
                write!(f, "event {index} at t = {t} is after the horizon {horizon}")
            }
            TrajectoryViolation::NotIncreasing { index, t, previous } => {
                write!(
                    f,
                    "event {index} at t = {t} does not follow the previous event at {previous}"
                )
            }
            TrajectoryViolation::ForeignMark { index } => {
                write!(f, "event {index} carries a mark outside the mark space")
            }
        }
    }
}

impl std::error::Error for TrajectoryViolation {}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    horizon: f64,
    events: Vec<Event>,
}

impl Trajectory {
    pub fn empty(horizon: f64) -> Self {
        Trajectory {
            horizon,
            events: Vec::new(),
        }
    }

    pub fn new(horizon: f64, events: Vec<Event>) -> Result<Self> {
        let traj = Trajectory { horizon, events };
        traj.validate()?;
        Ok(traj)
    }

    pub fn validate(&self) -> std::result::Result<(), TrajectoryViolation> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(TrajectoryViolation::InvalidHorizon(self.horizon));
        }
        let mut previous = 0.0;
        for (index, e) in self.events.iter().enumerate() {
            if !e.t.is_finite() {
                return Err(TrajectoryViolation::NonFinite { index });
            }
            if e.t <= 0.0 {
                return Err(TrajectoryViolation::NonPositiveTime { index, t: e.t });
            }
            if e.t > self.horizon {
                return Err(TrajectoryViolation::BeyondHorizon {
                    index,
                    t: e.t,
                    horizon: self.horizon,
                });
            }
            if index > 0 && e.t <= previous {
                return Err(TrajectoryViolation::NotIncreasing {
                    index,
                    t: e.t,
                    previous,
                });
            }
            previous = e.t;
        }
        Ok(())
    }

    pub fn validate_marks(
        &self,
        space: &MarkSpace,
    ) -> std::result::Result<(), TrajectoryViolation> {
        for (index, e) in self.events.iter().enumerate() {
            if space.check_selector(&Selector::Mark(e.mark)).is_err() {
                return Err(TrajectoryViolation::ForeignMark { index });
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub(crate) fn push(&mut self, e: Event) {
        debug_assert!(e.t > self.events.last().map_or(0.0, |l| l.t) && e.t <= self.horizon);
        self.events.push(e);
    }

    /// Events with `t_i <= s`, as a prefix slice.
    pub fn history_at(&self, s: f64) -> &[Event] {
        let n = self.events.partition_point(|e| e.t <= s);
        &self.events[..n]
    }

    /// Events with `t_i < s`, as a prefix slice.
    pub fn history_before(&self, s: f64) -> &[Event] {
        let n = self.events.partition_point(|e| e.t < s);
        &self.events[..n]
    }

    pub fn restrict(&self, t: f64, mode: RestrictMode) -> Result<Trajectory> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::Domain(format!(
                "restriction time {t} is outside [0, {}]",
                self.horizon
            )));
        }
        let events = match mode {
            RestrictMode::At => self.history_at(t),
            RestrictMode::StrictlyBefore => self.history_before(t),
        };
        Ok(Trajectory {
            horizon: self.horizon,
            events: events.to_vec(),
        })
    }

    /// `N^sel_t`, counting events at or before `t`.
    pub fn count(&self, space: &MarkSpace, sel: &Selector, t: f64) -> Result<usize> {
        space.check_selector(sel)?;
        Ok(count_in(self.history_at(t), sel))
    }

    /// Events matching `sel` in `[from, to)`.
    pub fn window_count(&self, sel: &Selector, from: f64, to: f64) -> usize {
        self.events
            .iter()
            .filter(|e| e.t >= from && e.t < to && sel.matches(e))
            .count()
    }

    pub fn first_time(&self, sel: &Selector) -> Option<f64> {
        self.events.iter().find(|e| sel.matches(e)).map(|e| e.t)
    }

    /// Sub-trajectory of a single component.
    pub fn component_events(&self, c: ComponentId) -> Vec<Event> {
        self.events
            .iter()
            .filter(|e| e.component() == c)
            .copied()
            .collect()
    }

    pub fn to_json(&self, space: &MarkSpace) -> String {
        let rows: Vec<JsonEvent> = self
            .events
            .iter()
            .map(|e| JsonEvent {
                t: e.t,
                mark: space.mark_label(e.mark).to_string(),
            })
            .collect();
        serde_json::to_string(&rows).expect("trajectory serializes")
    }

    pub fn from_json(space: &MarkSpace, horizon: f64, text: &str) -> Result<Trajectory> {
        let rows: Vec<JsonEvent> = serde_json::from_str(text)?;
        let events = rows
            .into_iter()
            .map(|r| Ok(Event::new(r.t, space.mark(&r.mark)?)))
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(horizon, events)
    }
}

pub(crate) fn count_in(events: &[Event], sel: &Selector) -> usize {
    events.iter().filter(|e| sel.matches(e)).count()
}

#[derive(Serialize, Deserialize)]
struct JsonEvent {
    t: f64,
    mark: String,
}

#[derive(Deserialize)]
struct CsvEvent {
    subject_id: u64,
    t: f64,
    mark: String,
}

/// Writes an event log with columns `subject_id,t,mark`.
pub fn write_event_log<W: Write>(
    out: W,
    space: &MarkSpace,
    subjects: &[(u64, &Trajectory)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["subject_id", "t", "mark"])?;
    for (id, traj) in subjects {
        for e in traj.events() {
            w.write_record([
                id.to_string(),
                e.t.to_string(),
                space.mark_label(e.mark).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads an event log; rows may appear in any order within a subject.
pub fn read_event_log<R: Read>(
    input: R,
    space: &MarkSpace,
    horizon: f64,
) -> Result<Vec<(u64, Trajectory)>> {
    let mut r = csv::Reader::from_reader(input);
    let mut by_subject: BTreeMap<u64, Vec<Event>> = BTreeMap::new();
    for row in r.deserialize() {
        let row: CsvEvent = row?;
        let mark = space.mark(&row.mark)?;
        by_subject
            .entry(row.subject_id)
            .or_default()
            .push(Event::new(row.t, mark));
    }
    by_subject
        .into_iter()
        .map(|(id, mut events)| {
            events.sort_by(|a, b| a.t.total_cmp(&b.t));
            Ok((id, Trajectory::new(horizon, events)?))
        })
        .collect()
}

/// Baseline covariates `L_0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Baseline(pub Vec<f64>);

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> MarkSpace {
        MarkSpace::new(&[("a", vec!["a0", "a1"]), ("y", vec!["y"])]).unwrap()
    }

    fn traj(space: &MarkSpace) -> Trajectory {
        let a1 = space.mark("a1").unwrap();
        let y = space.mark("y").unwrap();
        Trajectory::new(
            3.0,
            vec![Event::new(0.5, a1), Event::new(1.0, y), Event::new(2.0, a1)],
        )
        .unwrap()
    }

    #[test]
    fn restriction_modes_differ_only_at_event_times() {
        let s = space();
        let tr = traj(&s);
        assert_eq!(tr.restrict(1.0, RestrictMode::At).unwrap().len(), 2);
        assert_eq!(
            tr.restrict(1.0, RestrictMode::StrictlyBefore)
                .unwrap()
                .len(),
            1
        );
        assert_eq!(tr.restrict(1.5, RestrictMode::At).unwrap().len(), 2);
        assert_eq!(
            tr.restrict(1.5, RestrictMode::StrictlyBefore)
                .unwrap()
                .len(),
            2
        );
    }

    #[test]
    fn restrict_at_zero_is_empty_and_at_horizon_is_identity() {
        let s = space();
        let tr = traj(&s);
        assert!(tr.restrict(0.0, RestrictMode::At).unwrap().is_empty());
        assert_eq!(tr.restrict(3.0, RestrictMode::At).unwrap(), tr);
        assert!(matches!(
            tr.restrict(3.5, RestrictMode::At),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            tr.restrict(-0.1, RestrictMode::At),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn counting_is_right_continuous() {
        let s = space();
        let tr = traj(&s);
        let a = Selector::Component(s.component("a").unwrap());
        assert_eq!(tr.count(&s, &a, 0.49).unwrap(), 0);
        assert_eq!(tr.count(&s, &a, 0.5).unwrap(), 1);
        assert_eq!(tr.count(&s, &a, 3.0).unwrap(), 2);
        let bogus = Selector::Component(ComponentId(9));
        assert!(matches!(tr.count(&s, &bogus, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn window_count_is_half_open() {
        let s = space();
        let tr = traj(&s);
        let a = Selector::Component(s.component("a").unwrap());
        assert_eq!(tr.window_count(&a, 0.5, 2.0), 1);
        assert_eq!(tr.window_count(&a, 0.5, 2.0001), 2);
    }

    #[test]
    fn validation_rejects_bad_event_lists() {
        let s = space();
        let y = s.mark("y").unwrap();
        let tie = Trajectory::new(2.0, vec![Event::new(1.0, y), Event::new(1.0, y)]);
        assert!(matches!(
            tie,
            Err(Error::Trajectory(TrajectoryViolation::NotIncreasing {
                index: 1,
                ..
            }))
        ));
        let zero = Trajectory::new(2.0, vec![Event::new(0.0, y)]);
        assert!(matches!(
            zero,
            Err(Error::Trajectory(
                TrajectoryViolation::NonPositiveTime { .. }
            ))
        ));
        let late = Trajectory::new(2.0, vec![Event::new(2.5, y)]);
        assert!(matches!(
            late,
            Err(Error::Trajectory(TrajectoryViolation::BeyondHorizon { .. }))
        ));
        assert!(Trajectory::new(2.0, vec![Event::new(2.0, y)]).is_ok());
    }

    #[test]
    fn selectors_resolve_components_before_marks() {
        let s = MarkSpace::simple(&["l", "a"]).unwrap();
        assert_eq!(
            s.selector("a").unwrap(),
            Selector::Component(ComponentId(1))
        );
        let m = space();
        assert_eq!(
            m.selector("a1").unwrap(),
            Selector::Mark(m.mark("a1").unwrap())
        );
        assert!(matches!(m.selector("nope"), Err(Error::UnknownLabel(_))));
        assert!(MarkSpace::new(&[("a", vec!["y"]), ("y", vec!["z"])]).is_err());
    }

    #[test]
    fn json_and_csv_round_trip() {
        let s = space();
        let tr = traj(&s);
        let text = tr.to_json(&s);
        assert_eq!(Trajectory::from_json(&s, 3.0, &text).unwrap(), tr);

        let mut buf = Vec::new();
        write_event_log(&mut buf, &s, &[(7, &tr), (2, &Trajectory::empty(3.0))]).unwrap();
        let back = read_event_log(buf.as_slice(), &s, 3.0).unwrap();
        assert_eq!(back, vec![(7, tr)]);
    }
}
