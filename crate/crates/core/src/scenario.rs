//! JSON scenario files and their compiled form.
//!
//! A scenario is either a list of components with rate and atom rules, or a
//! discrete scenario of binary variables at fixed times which compiles to
//! the same component form. Labels are resolved against the mark space at
//! compile time.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compensator::{
    AtomRule, AtomTime, CompensatorModel, ComponentRule, Condition, DslComponent, Keyed, RateRule,
};
use crate::error::{Error, Result};
use crate::estimate::{OutcomeFunctional, OutcomeKind};
use crate::intervention::{InterventionKind, InterventionSpec, ScheduleEntry};
use crate::oracle::{DiscreteScenario, DiscreteVariable};
use crate::trajectory::{Baseline, ComponentId, MarkId, MarkSpace};

pub const DEFAULT_EXPLOSION_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<ComponentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub interventions: Vec<InterventionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete: Option<DiscreteConfig>,
    pub outcome: OutcomeConfig,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marks: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub atoms: Vec<AtomConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mark_probs: Option<KeyedConfig<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateConfig {
    Constant(f64),
    Rule {
        base: BaseRateConfig,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        multipliers: Vec<MultiplierConfig>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BaseRateConfig {
    Constant(f64),
    /// `[start, rate]` pairs.
    Pieces(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierConfig {
    pub when: PredicateConfig,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PredicateConfig {
    CountAtLeast {
        of: String,
        n: usize,
    },
    WindowCountAtLeast {
        of: String,
        window: f64,
        n: usize,
    },
    IntervalCountAtLeast {
        of: String,
        from: f64,
        to: f64,
        n: usize,
    },
    BaselineEquals {
        index: usize,
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KeyedConfig<T> {
    Constant(T),
    Table {
        keys: Vec<PredicateConfig>,
        table: Vec<T>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub after: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay: Option<f64>,
    pub prob: KeyedConfig<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub support: Vec<BaselinePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselinePoint {
    pub values: Vec<f64>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionConfig {
    pub target: String,
    #[serde(flatten)]
    pub kind: InterventionKindConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InterventionKindConfig {
    Static {
        events: Vec<StaticEventConfig>,
    },
    DelayedCopy {
        source: String,
        delay: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mark: Option<String>,
    },
    Triggered {
        trigger: String,
        window: f64,
        visit: String,
        delay: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mark: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        otherwise: Option<String>,
    },
    Kernel {
        schedule: Vec<ScheduleConfig>,
        assign: KeyedConfig<String>,
    },
    Prevent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticEventConfig {
    pub t: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mark: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleConfig {
    At(f64),
    After { after: String, delay: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteConfig {
    pub horizon: f64,
    pub variables: Vec<DiscreteVariableConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteVariableConfig {
    pub component: String,
    pub time: f64,
    /// `P(variable = 1 | earlier variables)`, earliest variable most significant.
    pub table: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeConfig {
    #[serde(flatten)]
    pub kind: OutcomeKindConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutcomeKindConfig {
    Survival {
        of: String,
    },
    Count {
        of: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<usize>,
    },
    FirstEventBefore {
        of: String,
        threshold: f64,
    },
    Constant {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explosion_cap: Option<usize>,
}

/// Finite-support law of `L_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineLaw {
    pub support: Vec<(Baseline, f64)>,
}

impl Default for BaselineLaw {
    fn default() -> Self {
        BaselineLaw {
            support: vec![(Baseline::default(), 1.0)],
        }
    }
}

impl BaselineLaw {
    pub fn new(support: Vec<(Baseline, f64)>) -> Result<Self> {
        let total: f64 = support.iter().map(|(_, p)| p).sum();
        if support.is_empty() || support.iter().any(|(_, p)| *p < 0.0) || (total - 1.0).abs() > 1e-9
        {
            return Err(Error::Config(
                "baseline probabilities must be non-negative and sum to 1".into(),
            ));
        }
        let width = support[0].0 .0.len();
        if support.iter().any(|(b, _)| b.0.len() != width) {
            return Err(Error::Config(
                "baseline vectors must all have the same length".into(),
            ));
        }
        Ok(BaselineLaw { support })
    }

    /// Inverse-CDF draw from a uniform in `(0, 1)`.
    pub fn draw(&self, u: f64) -> &Baseline {
        let mut acc = 0.0;
        for (b, p) in &self.support {
            acc += p;
            if u < acc {
                return b;
            }
        }
        &self.support.last().expect("non-empty support").0
    }
}

/// Everything needed to simulate and estimate.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: Option<ScenarioConfig>,
    pub space: MarkSpace,
    pub model: CompensatorModel,
    pub baseline_law: BaselineLaw,
    pub interventions: Vec<InterventionSpec>,
    pub outcome: OutcomeFunctional,
    pub discrete: Option<DiscreteScenario>,
    pub explosion_cap: usize,
}

impl Scenario {
    pub fn from_parts(
        model: CompensatorModel,
        baseline_law: BaselineLaw,
        interventions: Vec<InterventionSpec>,
        outcome: OutcomeFunctional,
    ) -> Result<Self> {
        let space = model.space().clone();
        let mut targets: Vec<ComponentId> = Vec::new();
        for iv in &interventions {
            iv.validate(&space)?;
            if targets.contains(&iv.target) {
                return Err(Error::Config(format!(
                    "component `{}` has more than one intervention",
                    space.component_name(iv.target)
                )));
            }
            targets.push(iv.target);
        }
        Ok(Scenario {
            config: None,
            space,
            model,
            baseline_law,
            interventions,
            outcome,
            discrete: None,
            explosion_cap: DEFAULT_EXPLOSION_CAP,
        })
    }

    pub fn from_discrete(ds: DiscreteScenario, outcome: OutcomeFunctional) -> Result<Self> {
        let model = ds.to_model()?;
        let intervention = ds.intervention()?;
        let mut s =
            Scenario::from_parts(model, BaselineLaw::default(), vec![intervention], outcome)?;
        s.discrete = Some(ds);
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        Scenario::from_config(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_json(&text)
    }

    pub fn from_config(cfg: ScenarioConfig) -> Result<Self> {
        let mut scenario = if let Some(d) = &cfg.discrete {
            if !cfg.components.is_empty() || !cfg.interventions.is_empty() {
                return Err(Error::Config(
                    "a discrete scenario defines its own components and regime".into(),
                ));
            }
            let vars = d
                .variables
                .iter()
                .map(|v| DiscreteVariable {
                    component: v.component.clone(),
                    time: v.time,
                    table: v.table.clone(),
                    regime: v.regime.map(|r| r != 0),
                })
                .collect();
            let ds = DiscreteScenario::new(d.horizon, vars)?;
            let outcome = compile_outcome(&cfg.outcome, ds.space(), d.horizon)?;
            Scenario::from_discrete(ds, outcome)?
        } else {
            let horizon = cfg
                .horizon
                .ok_or_else(|| Error::Config("`horizon` is required".into()))?;
            let names: Vec<(String, Vec<String>)> = cfg
                .components
                .iter()
                .map(|c| {
                    (
                        c.name.clone(),
                        c.marks.clone().unwrap_or_else(|| vec![c.name.clone()]),
                    )
                })
                .collect();
            let space = MarkSpace::new(&names)?;
            let rules = cfg
                .components
                .iter()
                .enumerate()
                .map(|(i, c)| compile_component(c, &space, ComponentId(i as u16)))
                .collect::<Result<Vec<_>>>()?;
            let model = CompensatorModel::new(space.clone(), horizon, rules)?;
            let law = match &cfg.baseline {
                Some(b) => BaselineLaw::new(
                    b.support
                        .iter()
                        .map(|p| (Baseline(p.values.clone()), p.prob))
                        .collect(),
                )?,
                None => BaselineLaw::default(),
            };
            let interventions = cfg
                .interventions
                .iter()
                .map(|iv| compile_intervention(iv, &space))
                .collect::<Result<Vec<_>>>()?;
            let outcome = compile_outcome(&cfg.outcome, &space, horizon)?;
            Scenario::from_parts(model, law, interventions, outcome)?
        };
        if let Some(cap) = cfg.run.explosion_cap {
            scenario.explosion_cap = cap;
        }
        scenario.config = Some(cfg);
        Ok(scenario)
    }

    pub fn horizon(&self) -> f64 {
        self.model.horizon()
    }

    pub fn intervened(&self) -> Vec<ComponentId> {
        self.interventions.iter().map(|iv| iv.target).collect()
    }

    pub fn not_intervened(&self) -> Vec<ComponentId> {
        let j = self.intervened();
        self.space
            .component_ids()
            .filter(|c| !j.contains(c))
            .collect()
    }

    /// SHA-256 of the canonical configuration JSON, or `None` for scenarios
    /// built in code.
    pub fn hash(&self) -> Option<String> {
        self.config.as_ref().map(config_hash)
    }
}

pub fn config_hash(cfg: &ScenarioConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn compile_predicate(p: &PredicateConfig, space: &MarkSpace) -> Result<Condition> {
    Ok(match p {
        PredicateConfig::CountAtLeast { of, n } => Condition::CountAtLeast {
            of: space.selector(of)?,
            n: *n,
        },
        PredicateConfig::WindowCountAtLeast { of, window, n } => Condition::WindowCountAtLeast {
            of: space.selector(of)?,
            window: *window,
            n: *n,
        },
        PredicateConfig::IntervalCountAtLeast { of, from, to, n } => {
            Condition::IntervalCountAtLeast {
                of: space.selector(of)?,
                from: *from,
                to: *to,
                n: *n,
            }
        }
        PredicateConfig::BaselineEquals { index, value } => Condition::BaselineEquals {
            index: *index,
            value: *value,
        },
    })
}

fn compile_keyed<T, U>(
    k: &KeyedConfig<T>,
    space: &MarkSpace,
    f: impl Fn(&T) -> Result<U>,
) -> Result<Keyed<U>> {
    Ok(match k {
        KeyedConfig::Constant(v) => Keyed::constant(f(v)?),
        KeyedConfig::Table { keys, table } => Keyed {
            keys: keys
                .iter()
                .map(|p| compile_predicate(p, space))
                .collect::<Result<_>>()?,
            table: table.iter().map(f).collect::<Result<_>>()?,
        },
    })
}

fn compile_component(
    c: &ComponentConfig,
    space: &MarkSpace,
    id: ComponentId,
) -> Result<ComponentRule> {
    let rate = match &c.rate {
        None => None,
        Some(RateConfig::Constant(r)) => Some(RateRule::constant(*r)),
        Some(RateConfig::Rule { base, multipliers }) => Some(RateRule {
            base: match base {
                BaseRateConfig::Constant(r) => vec![(0.0, *r)],
                BaseRateConfig::Pieces(p) => p.iter().map(|[s, r]| (*s, *r)).collect(),
            },
            multipliers: multipliers
                .iter()
                .map(|m| Ok((compile_predicate(&m.when, space)?, m.factor)))
                .collect::<Result<_>>()?,
        }),
    };
    let atoms = c
        .atoms
        .iter()
        .map(|a| {
            let time = match (a.time, &a.after, a.delay) {
                (Some(t), None, None) => AtomTime::Absolute(t),
                (None, Some(of), Some(delay)) => AtomTime::After {
                    of: space.selector(of)?,
                    delay,
                },
                _ => {
                    return Err(Error::Config(format!(
                        "atoms of `{}` need either `time` or both `after` and `delay`",
                        c.name
                    )))
                }
            };
            Ok(AtomRule {
                time,
                prob: compile_keyed(&a.prob, space, |p| Ok(*p))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n_marks = space.marks_of(id).len();
    let kernel = match &c.mark_probs {
        Some(k) => compile_keyed(k, space, |row| Ok(row.clone()))?,
        None if n_marks == 1 => Keyed::constant(vec![1.0]),
        None => {
            return Err(Error::Config(format!(
                "component `{}` has several marks and needs `mark_probs`",
                c.name
            )))
        }
    };
    Ok(ComponentRule::Dsl(DslComponent {
        rate,
        atoms,
        kernel,
    }))
}

fn target_mark(space: &MarkSpace, target: ComponentId, label: &Option<String>) -> Result<MarkId> {
    match label {
        Some(l) => space.mark(l),
        None => match space.marks_of(target) {
            [only] => Ok(*only),
            _ => Err(Error::Config(format!(
                "intervention on `{}` must name a mark",
                space.component_name(target)
            ))),
        },
    }
}

fn compile_intervention(iv: &InterventionConfig, space: &MarkSpace) -> Result<InterventionSpec> {
    let target = space.component(&iv.target)?;
    let kind = match &iv.kind {
        InterventionKindConfig::Static { events } => InterventionKind::Static {
            events: events
                .iter()
                .map(|e| Ok((e.t, target_mark(space, target, &e.mark)?)))
                .collect::<Result<_>>()?,
        },
        InterventionKindConfig::DelayedCopy {
            source,
            delay,
            mark,
        } => InterventionKind::DelayedCopy {
            source: space.selector(source)?,
            delay: *delay,
            mark: target_mark(space, target, mark)?,
        },
        InterventionKindConfig::Triggered {
            trigger,
            window,
            visit,
            delay,
            mark,
            otherwise,
        } => InterventionKind::Triggered {
            trigger: space.selector(trigger)?,
            window: *window,
            visit: space.selector(visit)?,
            delay: *delay,
            mark: target_mark(space, target, mark)?,
            otherwise: otherwise.as_ref().map(|o| space.mark(o)).transpose()?,
        },
        InterventionKindConfig::Kernel { schedule, assign } => InterventionKind::Kernel {
            schedule: schedule
                .iter()
                .map(|s| {
                    Ok(match s {
                        ScheduleConfig::At(t) => ScheduleEntry::At(*t),
                        ScheduleConfig::After { after, delay } => ScheduleEntry::After {
                            of: space.selector(after)?,
                            delay: *delay,
                        },
                    })
                })
                .collect::<Result<_>>()?,
            assign: compile_keyed(assign, space, |m| space.mark(m))?,
        },
        InterventionKindConfig::Prevent => InterventionKind::Prevent,
    };
    InterventionSpec::new(space, target, kind)
}

fn compile_outcome(
    o: &OutcomeConfig,
    space: &MarkSpace,
    horizon: f64,
) -> Result<OutcomeFunctional> {
    let kind = match &o.kind {
        OutcomeKindConfig::Survival { of } => OutcomeKind::Survival {
            of: space.selector(of)?,
        },
        OutcomeKindConfig::Count { of, cap } => OutcomeKind::Count {
            of: space.selector(of)?,
            cap: *cap,
        },
        OutcomeKindConfig::FirstEventBefore { of, threshold } => OutcomeKind::FirstEventBefore {
            of: space.selector(of)?,
            threshold: *threshold,
        },
        OutcomeKindConfig::Constant { value } => OutcomeKind::Constant(*value),
    };
    OutcomeFunctional::new(kind, o.t.unwrap_or(horizon), horizon)
}
