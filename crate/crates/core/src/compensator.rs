//! Compensators of the observed marked point process.
//!
//! Each component carries a predictable rule. Given the baseline, a frozen
//! history up to `s` and the horizon, a rule produces a
//! [`HazardSegmentPlan`]: piecewise-constant rates plus atoms on `(s, T]`.
//! Survival is the product integral over the plan, `exp(-∫ rate) ∏ (1 - atom)`,
//! taken over the merged plan of several components when they share atoms.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::intervention::{InterventionKind, InterventionSpec, ScheduleEntry};
use crate::trajectory::{Baseline, ComponentId, Event, MarkId, MarkSpace, Selector, Trajectory};

/// Predicates of the rule language. All of them read only events strictly
/// before the evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    CountAtLeast {
        of: Selector,
        n: usize,
    },
    /// At least `n` events of `of` in `[t - window, t)`.
    WindowCountAtLeast {
        of: Selector,
        window: f64,
        n: usize,
    },
    /// At least `n` events of `of` in `[from, to)`, counted before `t`.
    IntervalCountAtLeast {
        of: Selector,
        from: f64,
        to: f64,
        n: usize,
    },
    BaselineEquals {
        index: usize,
        value: f64,
    },
}

impl Condition {
    pub fn holds(&self, baseline: &Baseline, history: &[Event], t: f64) -> bool {
        let count = |of: &Selector, lo: f64, hi: f64| {
            history
                .iter()
                .filter(|e| e.t < t && e.t >= lo && e.t < hi && of.matches(e))
                .count()
        };
        match self {
            Condition::CountAtLeast { of, n } => count(of, f64::NEG_INFINITY, f64::INFINITY) >= *n,
            Condition::WindowCountAtLeast { of, window, n } => {
                count(of, t - window, f64::INFINITY) >= *n
            }
            Condition::IntervalCountAtLeast { of, from, to, n } => count(of, *from, *to) >= *n,
            Condition::BaselineEquals { index, value } => baseline.0.get(*index) == Some(value),
        }
    }

    fn window(&self) -> Option<f64> {
        match self {
            Condition::WindowCountAtLeast { window, .. } => Some(*window),
            _ => None,
        }
    }
}

/// A table indexed by the truth values of its keys, first key most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Keyed<T> {
    pub keys: Vec<Condition>,
    pub table: Vec<T>,
}

impl<T> Keyed<T> {
    pub fn constant(value: T) -> Self {
        Keyed {
            keys: Vec::new(),
            table: vec![value],
        }
    }

    pub fn cell(&self, baseline: &Baseline, history: &[Event], t: f64) -> usize {
        self.keys.iter().fold(0, |acc, k| {
            (acc << 1) | k.holds(baseline, history, t) as usize
        })
    }

    pub fn get(&self, baseline: &Baseline, history: &[Event], t: f64) -> &T {
        &self.table[self.cell(baseline, history, t)]
    }

    fn check_shape(&self, what: &str) -> Result<()> {
        if self.keys.len() > 20 || self.table.len() != 1usize << self.keys.len() {
            return Err(Error::Config(format!(
                "{what}: table has {} entries but {} keys need {}",
                self.table.len(),
                self.keys.len(),
                1usize << self.keys.len().min(20)
            )));
        }
        Ok(())
    }
}

/// Piecewise-constant base rate times `factor` for every multiplier whose
/// condition holds.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRule {
    /// `(start, rate)` pairs; the first start is 0 and each applies on `(start, next]`.
    pub base: Vec<(f64, f64)>,
    pub multipliers: Vec<(Condition, f64)>,
}

impl RateRule {
    pub fn constant(rate: f64) -> Self {
        RateRule {
            base: vec![(0.0, rate)],
            multipliers: Vec::new(),
        }
    }

    pub fn rate_at(&self, baseline: &Baseline, history: &[Event], t: f64) -> f64 {
        let i = self.base.partition_point(|(start, _)| *start < t);
        let mut r = self.base[i.saturating_sub(1)].1;
        for (cond, factor) in &self.multipliers {
            if cond.holds(baseline, history, t) {
                r *= factor;
            }
        }
        r
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.base.is_empty() || self.base[0].0 != 0.0 {
            return Err(Error::Config(format!("rate of `{name}` must start at 0")));
        }
        if self.base.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Config(format!(
                "rate pieces of `{name}` must have increasing starts"
            )));
        }
        let bad = |x: f64| !(x.is_finite() && x >= 0.0);
        if self.base.iter().any(|(_, r)| bad(*r)) || self.multipliers.iter().any(|(_, f)| bad(*f)) {
            return Err(Error::Config(format!(
                "rates of `{name}` must be finite and non-negative"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AtomTime {
    Absolute(f64),
    /// An atom `delay` after every event of `of`.
    After {
        of: Selector,
        delay: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomRule {
    pub time: AtomTime,
    pub prob: Keyed<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DslComponent {
    pub rate: Option<RateRule>,
    pub atoms: Vec<AtomRule>,
    /// Mark probabilities over the component's marks.
    pub kernel: Keyed<Vec<f64>>,
}

impl DslComponent {
    fn conditions(&self) -> impl Iterator<Item = &Condition> {
        let rate = self
            .rate
            .iter()
            .flat_map(|r| r.multipliers.iter().map(|(c, _)| c));
        let atoms = self.atoms.iter().flat_map(|a| a.prob.keys.iter());
        rate.chain(atoms).chain(self.kernel.keys.iter())
    }

    fn plan(
        &self,
        baseline: &Baseline,
        history: &[Event],
        s: f64,
        horizon: f64,
    ) -> Result<HazardSegmentPlan> {
        let mut segments = Vec::new();
        if let Some(rate) = &self.rate {
            let mut cuts = vec![s, horizon];
            cuts.extend(rate.base.iter().map(|(b, _)| *b));
            let windows: Vec<f64> = self.conditions().filter_map(Condition::window).collect();
            for w in windows {
                cuts.extend(history.iter().map(|e| e.t + w));
            }
            cuts.retain(|c| *c >= s && *c <= horizon);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            // Conditions are constant inside a segment; the midpoint avoids
            // rounding at window expiries.
            for w in cuts.windows(2) {
                let r = rate.rate_at(baseline, history, 0.5 * (w[0] + w[1]));
                segments.push(Segment {
                    start: w[0],
                    end: w[1],
                    rate: r,
                });
            }
        }
        let mut atoms: BTreeMap<u64, f64> = BTreeMap::new();
        let mut add = |u: f64, rule: &AtomRule| {
            if u > s && u <= horizon {
                let p = *rule.prob.get(baseline, history, u);
                if p > 0.0 {
                    *atoms.entry(u.to_bits()).or_insert(0.0) += p;
                }
            }
        };
        for rule in &self.atoms {
            match rule.time {
                AtomTime::Absolute(u) => add(u, rule),
                AtomTime::After { of, delay } => {
                    for e in history.iter().filter(|e| of.matches(e)) {
                        add(e.t + delay, rule);
                    }
                }
            }
        }
        let atoms = atoms
            .into_iter()
            .map(|(bits, mass)| Atom {
                t: f64::from_bits(bits),
                mass,
            })
            .collect();
        let plan = HazardSegmentPlan {
            from: s,
            to: horizon,
            segments,
            atoms,
        };
        plan.validate()?;
        Ok(plan)
    }
}

/// Extension hook for rules outside the rule language. Models using one are
/// not enumerable.
pub trait CompensatorKernel: fmt::Debug + Send + Sync {
    fn plan(
        &self,
        baseline: &Baseline,
        history: &[Event],
        s: f64,
        horizon: f64,
    ) -> Result<HazardSegmentPlan>;
    fn mark_probs(&self, baseline: &Baseline, history: &[Event], t: f64) -> Vec<f64>;
}

#[derive(Debug, Clone)]
pub enum ComponentRule {
    Dsl(DslComponent),
    Custom(Arc<dyn CompensatorKernel>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub t: f64,
    pub mass: f64,
}

/// Rates on contiguous segments covering `(from, to]` and atoms in `(from, to]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardSegmentPlan {
    pub from: f64,
    pub to: f64,
    pub segments: Vec<Segment>,
    pub atoms: Vec<Atom>,
}

impl HazardSegmentPlan {
    pub fn empty(from: f64, to: f64) -> Self {
        HazardSegmentPlan {
            from,
            to,
            segments: Vec::new(),
            atoms: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut at = self.from;
        for seg in &self.segments {
            if seg.start != at || seg.end < seg.start || !(seg.rate.is_finite() && seg.rate >= 0.0)
            {
                return Err(Error::Model(format!("malformed rate segment {seg:?}")));
            }
            at = seg.end;
        }
        if !self.segments.is_empty() && at != self.to {
            return Err(Error::Model(
                "rate segments do not reach the plan end".into(),
            ));
        }
        let mut last = self.from;
        for a in &self.atoms {
            if a.t <= last || a.t > self.to {
                return Err(Error::Model(format!(
                    "atom at {} is out of order or range",
                    a.t
                )));
            }
            if !(a.mass >= 0.0 && a.mass <= 1.0 + 1e-12) {
                return Err(Error::Model(format!(
                    "atom mass {} at t = {} is not in [0, 1]",
                    a.mass, a.t
                )));
            }
            last = a.t;
        }
        Ok(())
    }

    /// Rate in force at `t`, left-continuous.
    pub fn rate_at(&self, t: f64) -> f64 {
        let i = self.segments.partition_point(|s| s.end < t);
        match self.segments.get(i) {
            Some(seg) if seg.start < t => seg.rate,
            _ => 0.0,
        }
    }

    pub fn atom_at(&self, t: f64) -> f64 {
        self.atoms
            .binary_search_by(|a| a.t.total_cmp(&t))
            .map(|i| self.atoms[i].mass)
            .unwrap_or(0.0)
    }

    /// `∫_(a, b] rate`.
    pub fn continuous_between(&self, a: f64, b: f64) -> f64 {
        self.segments
            .iter()
            .map(|s| (s.end.min(b) - s.start.max(a)).max(0.0) * s.rate)
            .sum()
    }

    pub fn atoms_in(&self, a: f64, b: f64) -> impl Iterator<Item = &Atom> {
        self.atoms.iter().filter(move |x| x.t > a && x.t <= b)
    }

    /// Log survival over `(a, b)`, or over `(a, b]` when `closed`.
    pub fn log_survival(&self, a: f64, b: f64, closed: bool) -> f64 {
        let mut l = -self.continuous_between(a, b);
        for atom in self
            .atoms
            .iter()
            .filter(|x| x.t > a && (x.t < b || (closed && x.t == b)))
        {
            l += log1m(atom.mass);
        }
        l
    }

    pub fn survival(&self, a: f64, b: f64) -> f64 {
        self.log_survival(a, b, true).exp()
    }

    /// Sum of several plans over the same interval: rates add, simultaneous atoms add.
    pub fn merge(plans: &[&HazardSegmentPlan]) -> HazardSegmentPlan {
        let Some(first) = plans.first() else {
            return HazardSegmentPlan::empty(0.0, 0.0);
        };
        let (from, to) = (first.from, first.to);
        let mut cuts: Vec<f64> = vec![from, to];
        for p in plans {
            cuts.extend(p.segments.iter().map(|s| s.end));
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let any_rate = plans.iter().any(|p| !p.segments.is_empty());
        let segments = if any_rate {
            cuts.windows(2)
                .map(|w| Segment {
                    start: w[0],
                    end: w[1],
                    rate: plans.iter().map(|p| p.rate_at(w[1])).sum(),
                })
                .collect()
        } else {
            Vec::new()
        };
        let mut atoms: BTreeMap<u64, f64> = BTreeMap::new();
        for p in plans {
            for a in &p.atoms {
                *atoms.entry(a.t.to_bits()).or_insert(0.0) += a.mass;
            }
        }
        HazardSegmentPlan {
            from,
            to,
            segments,
            atoms: atoms
                .into_iter()
                .map(|(b, mass)| Atom {
                    t: f64::from_bits(b),
                    mass,
                })
                .collect(),
        }
    }
}

pub(crate) fn log1m(p: f64) -> f64 {
    if p >= 1.0 {
        f64::NEG_INFINITY
    } else {
        (-p).ln_1p()
    }
}

/// `Λ((s, t] × sel)` split into its continuous part and its atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct Cumulative {
    pub continuous: f64,
    pub atoms: Vec<Atom>,
}

impl Cumulative {
    pub fn total(&self) -> f64 {
        self.continuous + self.atoms.iter().map(|a| a.mass).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct CompensatorModel {
    space: MarkSpace,
    horizon: f64,
    components: Vec<ComponentRule>,
}

impl CompensatorModel {
    pub fn new(space: MarkSpace, horizon: f64, components: Vec<ComponentRule>) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Config(format!("horizon {horizon} must be positive")));
        }
        if components.len() != space.num_components() {
            return Err(Error::Config("one rule per component is required".into()));
        }
        for (i, rule) in components.iter().enumerate() {
            let c = ComponentId(i as u16);
            let name = space.component_name(c);
            let ComponentRule::Dsl(d) = rule else {
                continue;
            };
            if let Some(r) = &d.rate {
                r.validate(name)?;
            }
            for a in &d.atoms {
                a.prob.check_shape(name)?;
                if a.prob.table.iter().any(|p| !(*p >= 0.0 && *p <= 1.0)) {
                    return Err(Error::Config(format!(
                        "atom probabilities of `{name}` must lie in [0, 1]"
                    )));
                }
                match a.time {
                    AtomTime::Absolute(t) if !(t > 0.0 && t.is_finite()) => {
                        return Err(Error::Config(format!(
                            "atom time {t} of `{name}` must be positive"
                        )));
                    }
                    AtomTime::After { delay, .. } if !(delay > 0.0 && delay.is_finite()) => {
                        return Err(Error::Config(format!(
                            "atom delay of `{name}` must be positive"
                        )));
                    }
                    _ => {}
                }
            }
            d.kernel.check_shape(name)?;
            let k = space.marks_of(c).len();
            for row in &d.kernel.table {
                let sum: f64 = row.iter().sum();
                if row.len() != k || row.iter().any(|p| *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!(
                        "mark probabilities of `{name}` must be {k} non-negative numbers summing to 1"
                    )));
                }
            }
            for cond in d.conditions() {
                if let Condition::WindowCountAtLeast { window, .. } = cond {
                    if !(*window > 0.0 && window.is_finite()) {
                        return Err(Error::Config(format!(
                            "window of `{name}` must be positive"
                        )));
                    }
                }
            }
        }
        Ok(CompensatorModel {
            space,
            horizon,
            components,
        })
    }

    pub fn space(&self) -> &MarkSpace {
        &self.space
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn rule(&self, c: ComponentId) -> &ComponentRule {
        &self.components[c.0 as usize]
    }

    pub fn set_rule(&mut self, c: ComponentId, rule: ComponentRule) {
        self.components[c.0 as usize] = rule;
    }

    /// Same model with every rate multiplied by `factor`.
    pub fn scale_rates(&self, factor: f64) -> Self {
        let mut m = self.clone();
        for rule in &mut m.components {
            if let ComponentRule::Dsl(d) = rule {
                if let Some(r) = &mut d.rate {
                    for (_, rate) in &mut r.base {
                        *rate *= factor;
                    }
                }
            }
        }
        m
    }

    /// True when every component is a rule-language component without rates.
    pub fn is_atoms_only(&self) -> bool {
        self.components.iter().all(|r| match r {
            ComponentRule::Dsl(d) => d
                .rate
                .as_ref()
                .is_none_or(|r| r.base.iter().all(|(_, x)| *x == 0.0)),
            ComponentRule::Custom(_) => false,
        })
    }

    /// Plan for component `c` on `(s, T]` given the history up to `s`.
    pub fn plan(
        &self,
        c: ComponentId,
        baseline: &Baseline,
        history: &[Event],
        s: f64,
    ) -> Result<HazardSegmentPlan> {
        match self.rule(c) {
            ComponentRule::Dsl(d) => d.plan(baseline, history, s, self.horizon),
            ComponentRule::Custom(k) => {
                let p = k.plan(baseline, history, s, self.horizon)?;
                p.validate()?;
                Ok(p)
            }
        }
    }

    pub fn plans(
        &self,
        baseline: &Baseline,
        history: &[Event],
        s: f64,
    ) -> Result<Vec<HazardSegmentPlan>> {
        self.space
            .component_ids()
            .map(|c| self.plan(c, baseline, history, s))
            .collect()
    }

    pub fn mark_probs(
        &self,
        c: ComponentId,
        baseline: &Baseline,
        history: &[Event],
        t: f64,
    ) -> Vec<f64> {
        match self.rule(c) {
            ComponentRule::Dsl(d) => d.kernel.get(baseline, history, t).clone(),
            ComponentRule::Custom(k) => k.mark_probs(baseline, history, t),
        }
    }

    pub fn mark_prob(&self, m: MarkId, baseline: &Baseline, history: &[Event], t: f64) -> f64 {
        let probs = self.mark_probs(m.component, baseline, history, t);
        probs[self.space.mark_index(m)]
    }

    fn selector_weight(
        &self,
        sel: &Selector,
        baseline: &Baseline,
        history: &[Event],
        t: f64,
    ) -> f64 {
        match sel {
            Selector::Component(_) => 1.0,
            Selector::Mark(m) => self.mark_prob(*m, baseline, history, t),
        }
    }

    /// `Λ((s, t] × sel)` with the history frozen at `s`.
    pub fn cumulative(
        &self,
        sel: &Selector,
        baseline: &Baseline,
        traj: &Trajectory,
        s: f64,
        t: f64,
    ) -> Result<Cumulative> {
        self.space.check_selector(sel)?;
        if !(0.0 <= s && s <= t && t <= self.horizon) {
            return Err(Error::Domain(format!(
                "need 0 <= s <= t <= T, got s = {s}, t = {t}"
            )));
        }
        self.cumulative_frozen(sel, baseline, traj.history_at(s), s, t)
    }

    pub(crate) fn cumulative_frozen(
        &self,
        sel: &Selector,
        baseline: &Baseline,
        history: &[Event],
        s: f64,
        t: f64,
    ) -> Result<Cumulative> {
        let plan = self.plan(sel.component(), baseline, history, s)?;
        let continuous = plan
            .segments
            .iter()
            .filter(|seg| seg.start < t)
            .map(|seg| {
                let end = seg.end.min(t);
                (end - seg.start)
                    * seg.rate
                    * self.selector_weight(sel, baseline, history, 0.5 * (seg.start + end))
            })
            .sum();
        let atoms = plan
            .atoms_in(s, t)
            .map(|a| Atom {
                t: a.t,
                mass: a.mass * self.selector_weight(sel, baseline, history, a.t),
            })
            .collect();
        Ok(Cumulative { continuous, atoms })
    }

    /// `Λ^sel_t` along the trajectory's own history.
    pub fn compensator_path(
        &self,
        sel: &Selector,
        baseline: &Baseline,
        traj: &Trajectory,
        t: f64,
    ) -> Result<f64> {
        let mut total = 0.0;
        let mut prev = 0.0;
        let events = traj.events();
        for i in 0..=events.len() {
            let next = events.get(i).map_or(self.horizon, |e| e.t).min(t);
            if next > prev {
                total += self
                    .cumulative_frozen(sel, baseline, &events[..i], prev, next)?
                    .total();
            }
            if next >= t {
                break;
            }
            prev = next;
        }
        Ok(total)
    }

    /// `P(no event of `components` in (s, t] | history at s)` from the merged plan.
    pub fn survival(
        &self,
        components: &[ComponentId],
        baseline: &Baseline,
        history: &[Event],
        s: f64,
        t: f64,
    ) -> Result<f64> {
        let plans = components
            .iter()
            .map(|c| self.plan(*c, baseline, history, s))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&HazardSegmentPlan> = plans.iter().collect();
        Ok(HazardSegmentPlan::merge(&refs).survival(s, t))
    }

    /// Log density of the trajectory with respect to the product of counting
    /// measure at atoms, Lebesgue measure elsewhere and counting measure on marks.
    /// Returns `-inf` for impossible trajectories.
    pub fn log_density(&self, baseline: &Baseline, traj: &Trajectory) -> Result<f64> {
        let events = traj.events();
        let mut lp = 0.0;
        let mut prev = 0.0;
        for (i, e) in events.iter().enumerate() {
            let history = &events[..i];
            let plans = self.plans(baseline, history, prev)?;
            let refs: Vec<&HazardSegmentPlan> = plans.iter().collect();
            lp += HazardSegmentPlan::merge(&refs).log_survival(prev, e.t, false);
            let own = &plans[e.component().0 as usize];
            let mass = own.atom_at(e.t);
            lp += if mass > 0.0 {
                mass.ln()
            } else {
                own.rate_at(e.t).ln()
            };
            lp += self.mark_prob(e.mark, baseline, history, e.t).ln();
            if lp == f64::NEG_INFINITY {
                return Ok(lp);
            }
            prev = e.t;
        }
        let plans = self.plans(baseline, events, prev)?;
        let refs: Vec<&HazardSegmentPlan> = plans.iter().collect();
        lp += HazardSegmentPlan::merge(&refs).log_survival(prev, self.horizon, true);
        Ok(lp)
    }
}

/// Where a potential atom sits: a fixed time, or a delay after events of a selector.
#[derive(Debug, Clone, PartialEq)]
pub enum AtomLocation {
    Time(f64),
    After { source: String, delay: f64 },
}

impl fmt::Display for AtomLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AtomLocation::Time(t) => write!(f, "t = {t}"),
            AtomLocation::After { source, delay } => {
                write!(f, "{delay} after each `{source}` event")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    SharedComponentAtom,
    InterventionMeetsComponent,
    InterventionsShareAtom,
    MassExceedsOne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegularityViolation {
    pub kind: ViolationKind,
    pub at: AtomLocation,
    pub first: String,
    pub second: String,
}

impl fmt::Display for RegularityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let what = match self.kind {
            ViolationKind::SharedComponentAtom => "components share an atom",
            ViolationKind::InterventionMeetsComponent => "intervention atom meets a component atom",
            ViolationKind::InterventionsShareAtom => "interventions share an atom",
            ViolationKind::MassExceedsOne => "simultaneous atom mass exceeds 1",
        };
        write!(
            f,
            "{what} ({} and {}) at {}",
            self.first, self.second, self.at
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegularityReport {
    pub violations: Vec<RegularityViolation>,
}

impl fmt::Display for RegularityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

struct Agent {
    label: String,
    component: ComponentId,
    intervention: bool,
    /// Fixed times with the largest probability that can be placed there.
    times: BTreeMap<u64, f64>,
    relative: Vec<(Selector, f64)>,
}

/// Static check of the orthogonality conditions on declared atom schedules.
///
/// Fixed atom times are propagated through delayed atoms until no new times
/// appear before the horizon. Delayed atoms driven by continuous-time events
/// can only collide with other delayed atoms on the same source and delay.
pub fn check_regularity(
    model: &CompensatorModel,
    interventions: &[InterventionSpec],
) -> std::result::Result<(), RegularityReport> {
    let space = model.space();
    let horizon = model.horizon();
    let mut agents: Vec<Agent> = Vec::new();
    for c in space.component_ids() {
        let mut agent = Agent {
            label: format!("component `{}`", space.component_name(c)),
            component: c,
            intervention: false,
            times: BTreeMap::new(),
            relative: Vec::new(),
        };
        if let ComponentRule::Dsl(d) = model.rule(c) {
            for a in &d.atoms {
                let pmax = a.prob.table.iter().cloned().fold(0.0, f64::max);
                if pmax <= 0.0 {
                    continue;
                }
                match a.time {
                    AtomTime::Absolute(t) if t <= horizon => {
                        let e = agent.times.entry(t.to_bits()).or_insert(0.0);
                        *e = (*e + pmax).min(1.0);
                    }
                    AtomTime::Absolute(_) => {}
                    AtomTime::After { of, delay } => agent.relative.push((of, delay)),
                }
            }
        }
        agents.push(agent);
    }
    for (i, iv) in interventions.iter().enumerate() {
        let mut agent = Agent {
            label: format!("intervention {i} on `{}`", space.component_name(iv.target)),
            component: iv.target,
            intervention: true,
            times: BTreeMap::new(),
            relative: Vec::new(),
        };
        match &iv.kind {
            InterventionKind::Static { events } => {
                for (t, _) in events {
                    agent.times.insert(t.to_bits(), 1.0);
                }
            }
            InterventionKind::DelayedCopy { source, delay, .. } => {
                agent.relative.push((*source, *delay))
            }
            InterventionKind::Triggered { visit, delay, .. } => {
                agent.relative.push((*visit, *delay))
            }
            InterventionKind::Kernel { schedule, .. } => {
                for entry in schedule {
                    match entry {
                        ScheduleEntry::At(t) => {
                            agent.times.insert(t.to_bits(), 1.0);
                        }
                        ScheduleEntry::After { of, delay } => agent.relative.push((*of, *delay)),
                    }
                }
            }
            InterventionKind::Prevent => {}
        }
        agents.push(agent);
    }

    // Propagate fixed times through delayed atoms.
    for _ in 0..64 {
        let mut added = false;
        let snapshot: Vec<(ComponentId, Vec<f64>)> = agents
            .iter()
            .map(|a| {
                (
                    a.component,
                    a.times.keys().map(|b| f64::from_bits(*b)).collect(),
                )
            })
            .collect();
        for agent in agents.iter_mut() {
            for (of, delay) in agent.relative.clone() {
                for (c, times) in &snapshot {
                    if of.component() != *c {
                        continue;
                    }
                    for t in times {
                        let u = t + delay;
                        if u <= horizon && !agent.times.contains_key(&u.to_bits()) {
                            agent.times.insert(u.to_bits(), 1.0);
                            added = true;
                        }
                    }
                }
            }
        }
        if !added || agents.iter().map(|a| a.times.len()).sum::<usize>() > 100_000 {
            break;
        }
    }

    let mut violations = Vec::new();
    for i in 0..agents.len() {
        for j in (i + 1)..agents.len() {
            let (a, b) = (&agents[i], &agents[j]);
            if a.component == b.component {
                continue;
            }
            let kind = match (a.intervention, b.intervention) {
                (false, false) => ViolationKind::SharedComponentAtom,
                (true, true) => ViolationKind::InterventionsShareAtom,
                _ => ViolationKind::InterventionMeetsComponent,
            };
            for (bits, pa) in &a.times {
                if let Some(pb) = b.times.get(bits) {
                    let at = AtomLocation::Time(f64::from_bits(*bits));
                    violations.push(RegularityViolation {
                        kind,
                        at: at.clone(),
                        first: a.label.clone(),
                        second: b.label.clone(),
                    });
                    if pa + pb > 1.0 {
                        violations.push(RegularityViolation {
                            kind: ViolationKind::MassExceedsOne,
                            at,
                            first: a.label.clone(),
                            second: b.label.clone(),
                        });
                    }
                }
            }
            for (sa, da) in &a.relative {
                for (sb, db) in &b.relative {
                    if sa.overlaps(sb) && da == db {
                        violations.push(RegularityViolation {
                            kind,
                            at: AtomLocation::After {
                                source: space.selector_label(sa).to_string(),
                                delay: *da,
                            },
                            first: a.label.clone(),
                            second: b.label.clone(),
                        });
                    }
                }
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(RegularityReport { violations })
    }
}
