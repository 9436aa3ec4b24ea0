#![allow(dead_code)]

use std::path::PathBuf;

use mppcausal::estimate::{OutcomeFunctional, OutcomeKind};
use mppcausal::oracle::{DiscreteScenario, DiscreteVariable};
use mppcausal::Scenario;
use rand::rngs::StdRng;
use rand::Rng;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}

pub fn load(name: &str) -> Scenario {
    Scenario::load(&config_path(name)).expect("config loads")
}

fn prob(rng: &mut StdRng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

/// Random discrete scenario with positive treatment probabilities. Covariate
/// tables occasionally contain exact zeros and ones.
pub fn random_discrete(rng: &mut StdRng) -> (DiscreteScenario, OutcomeFunctional) {
    let n = rng.gen_range(3..=8);
    let treat_at = rng.gen_range(0..n);
    let mut vars = Vec::new();
    for i in 0..n {
        let treatment = i == treat_at || rng.gen_bool(0.3);
        let component = if treatment {
            "a".to_string()
        } else {
            ["l", "m", "y"][rng.gen_range(0..3)].to_string()
        };
        let table = (0..1usize << i)
            .map(|_| {
                if treatment {
                    prob(rng, 0.05, 0.95)
                } else {
                    match rng.gen_range(0..10) {
                        0 => 0.0,
                        1 => 1.0,
                        _ => prob(rng, 0.0, 1.0),
                    }
                }
            })
            .collect();
        vars.push(DiscreteVariable {
            component,
            time: 0.5 + i as f64 * 0.75,
            table,
            regime: if treatment {
                Some(rng.gen_bool(0.5))
            } else {
                None
            },
        });
    }
    let horizon = 0.5 + n as f64 * 0.75;
    let ds = DiscreteScenario::new(horizon, vars).expect("valid scenario");
    let labels: Vec<String> = ds.variables().iter().map(|v| v.component.clone()).collect();
    let of = ds
        .space()
        .selector(&labels[rng.gen_range(0..labels.len())])
        .unwrap();
    let kind = match rng.gen_range(0..3) {
        0 => OutcomeKind::Count { of, cap: None },
        1 => OutcomeKind::Survival { of },
        _ => OutcomeKind::FirstEventBefore {
            of,
            threshold: horizon / 2.0,
        },
    };
    let outcome = OutcomeFunctional::new(kind, horizon, horizon).unwrap();
    (ds, outcome)
}

/// Random continuous-time scenario with visits, treatment after visits,
/// a marker process, an outcome and censoring. Every variant satisfies
/// positivity.
pub fn random_continuous(rng: &mut StdRng) -> Scenario {
    let horizon = prob(rng, 3.0, 6.0);
    let delay = prob(rng, 0.1, 0.5);
    let window = prob(rng, 0.5, 1.5);
    let p_treat = prob(rng, 0.5, 0.95);
    let (q0, q1) = (prob(rng, 0.1, 0.9), prob(rng, 0.1, 0.9));
    let rate_l = prob(rng, 0.2, 1.0);
    let rate_v = prob(rng, 0.3, 1.2);
    let rate_d = prob(rng, 0.05, 0.3);
    let rate_c = prob(rng, 0.02, 0.2);
    let a_intervention = match rng.gen_range(0..3) {
        0 => format!(
            r#"{{"target": "a", "kind": "triggered", "trigger": "l", "window": {window}, "visit": "v",
                "delay": {delay}, "mark": "a1", "otherwise": "a0"}}"#
        ),
        1 => format!(
            r#"{{"target": "a", "kind": "kernel", "schedule": [{{"after": "v", "delay": {delay}}}],
                "assign": {{"keys": [{{"kind": "count_at_least", "of": "l", "n": 1}}], "table": ["a0", "a1"]}}}}"#
        ),
        _ => r#"{"target": "a", "kind": "prevent"}"#.to_string(),
    };
    let mut interventions = vec![a_intervention];
    if rng.gen_bool(0.5) {
        interventions.push(r#"{"target": "c", "kind": "prevent"}"#.to_string());
    }
    let text = format!(
        r#"{{
        "horizon": {horizon},
        "components": [
            {{"name": "l", "rate": {rate_l}}},
            {{"name": "v", "rate": {rate_v}}},
            {{"name": "a", "marks": ["a0", "a1"],
              "atoms": [{{"after": "v", "delay": {delay}, "prob": {p_treat}}}],
              "mark_probs": {{"keys": [{{"kind": "window_count_at_least", "of": "l", "window": {window}, "n": 1}}],
                             "table": [[{q0}, {r0}], [{q1}, {r1}]]}}}},
            {{"name": "d", "rate": {{"base": {rate_d},
                "multipliers": [{{"when": {{"kind": "count_at_least", "of": "a1", "n": 1}}, "factor": 0.5}}]}}}},
            {{"name": "c", "rate": {rate_c}}}
        ],
        "interventions": [{ivs}],
        "outcome": {{"kind": "survival", "of": "d"}}
    }}"#,
        r0 = 1.0 - q0,
        r1 = 1.0 - q1,
        ivs = interventions.join(",")
    );
    Scenario::from_json(&text).expect("random scenario compiles")
}
