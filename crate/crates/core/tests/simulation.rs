mod common;

use std::collections::HashMap;

use mppcausal::compensator::{Atom, HazardSegmentPlan, Segment};
use mppcausal::oracle::enumerate;
use mppcausal::simulate::{
    inverse_transform_time, simulate_interventional, simulate_joint, simulate_many,
    simulate_observed,
};
use mppcausal::{Error, Scenario};
use rand::SeedableRng;

fn frequencies(values: &[u64]) -> HashMap<u64, f64> {
    let mut m = HashMap::new();
    for v in values {
        *m.entry(*v).or_insert(0.0) += 1.0 / values.len() as f64;
    }
    m
}

#[test]
fn observed_frequencies_match_the_enumeration() {
    let sc = common::load("two_period.json");
    let ds = sc.discrete.clone().unwrap();
    let n = 100_000;
    let draws = simulate_many(n, |i| simulate_observed(&sc, 11, i)).unwrap();
    let freq = frequencies(
        &draws
            .iter()
            .map(|d| ds.values_of(&d.trajectory))
            .collect::<Vec<_>>(),
    );
    for w in enumerate(&ds, &sc.outcome) {
        let f = freq.get(&w.values).copied().unwrap_or(0.0);
        let se = (w.probability * (1.0 - w.probability) / n as f64).sqrt();
        assert!(
            (f - w.probability).abs() <= 3.0 * se,
            "world {}: {f} vs {}",
            w.values,
            w.probability
        );
    }
}

#[test]
fn joint_arms_have_the_right_marginals() {
    let sc = common::load("two_period.json");
    let ds = sc.discrete.clone().unwrap();
    let n = 60_000;
    let joint = simulate_many(n, |i| simulate_joint(&sc, 21, i)).unwrap();
    let obs = simulate_many(n, |i| simulate_observed(&sc, 22, i)).unwrap();
    let pot = simulate_many(n, |i| simulate_interventional(&sc, 23, i)).unwrap();
    let f_joint_obs = frequencies(
        &joint
            .iter()
            .map(|d| ds.values_of(&d.observed))
            .collect::<Vec<_>>(),
    );
    let f_obs = frequencies(
        &obs.iter()
            .map(|d| ds.values_of(&d.trajectory))
            .collect::<Vec<_>>(),
    );
    let f_joint_pot = frequencies(
        &joint
            .iter()
            .map(|d| ds.values_of(&d.potential))
            .collect::<Vec<_>>(),
    );
    let f_pot = frequencies(
        &pot.iter()
            .map(|d| ds.values_of(&d.trajectory))
            .collect::<Vec<_>>(),
    );
    for world in 0..8u64 {
        for (a, b) in [(&f_joint_obs, &f_obs), (&f_joint_pot, &f_pot)] {
            let (x, y) = (
                a.get(&world).copied().unwrap_or(0.0),
                b.get(&world).copied().unwrap_or(0.0),
            );
            let p = (x + y) / 2.0;
            let se = (2.0 * p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (x - y).abs() <= 4.0 * se + 1e-12,
                "world {world}: {x} vs {y}"
            );
        }
    }
    // Potential worlds always follow the regime A = 1.
    assert!(joint
        .iter()
        .all(|d| ds.values_of(&d.potential) & 0b010 != 0));
}

#[test]
fn inverse_transform_reproduces_the_survival_function() {
    let plan = HazardSegmentPlan {
        from: 0.0,
        to: 3.0,
        segments: vec![
            Segment {
                start: 0.0,
                end: 1.0,
                rate: 0.5,
            },
            Segment {
                start: 1.0,
                end: 3.0,
                rate: 1.2,
            },
        ],
        atoms: vec![Atom { t: 0.7, mass: 0.2 }, Atom { t: 2.0, mass: 0.5 }],
    };
    let n = 100_000;
    let mut rng = mppcausal::rng::RandomizerStream::new(5, 0);
    let mut times: Vec<f64> = (0..n)
        .map(|k| inverse_transform_time(&plan, rng.uniform(k, mppcausal::rng::Role::ObservedTime)))
        .collect();
    times.sort_by(f64::total_cmp);
    let mut sup: f64 = 0.0;
    for k in 0..=300 {
        let t = 3.0 * k as f64 / 300.0;
        let cdf = 1.0 - plan.survival(0.0, t);
        let emp = times.partition_point(|x| *x <= t) as f64 / n as f64;
        sup = sup.max((cdf - emp).abs());
    }
    assert!(sup < 0.01, "sup distance {sup}");
    let never = times.iter().filter(|t| t.is_infinite()).count() as f64 / n as f64;
    assert!((never - plan.survival(0.0, 3.0)).abs() < 0.01);
}

#[test]
fn explosive_rates_hit_the_event_cap() {
    let text = r#"{
        "horizon": 1.0,
        "components": [{"name": "slow", "rate": 0.1}, {"name": "fast", "rate": 100000.0}],
        "outcome": {"kind": "count", "of": "fast"},
        "run": {"explosion_cap": 500}
    }"#;
    let sc = Scenario::from_json(text).unwrap();
    match simulate_observed(&sc, 1, 0) {
        Err(Error::Explosion { cap, component, .. }) => {
            assert_eq!(cap, 500);
            assert_eq!(component, "fast");
        }
        other => panic!("expected an explosion, got {other:?}"),
    }
}

#[test]
fn draws_do_not_depend_on_thread_count() {
    let sc = common::load("triggered_treatment.json");
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate_many(300, |i| simulate_joint(&sc, 99, i)).unwrap())
    };
    assert_eq!(run(1), run(4));
    let again = simulate_joint(&sc, 99, 17).unwrap();
    assert_eq!(run(2)[17], again);
}

#[test]
fn shared_atoms_produce_tie_errors() {
    let sc = common::load("shared_atom.json");
    let results: Vec<_> = (0..200).map(|i| simulate_joint(&sc, 3, i)).collect();
    assert!(results
        .iter()
        .any(|r| matches!(r, Err(Error::Tie { t, .. }) if *t == 1.0)));
    assert!(results.iter().any(|r| r.is_ok()));
}

#[test]
fn joint_draws_are_consistent_before_deviation() {
    let mut rng = rand::rngs::StdRng::seed_from_u64(4);
    for _ in 0..10 {
        let sc = common::random_continuous(&mut rng);
        for i in 0..200 {
            let j = simulate_joint(&sc, 8, i).unwrap();
            assert!(j.is_consistent(), "subject {i}: {j:?}");
            if j.deviation.overall.is_infinite() {
                assert_eq!(j.observed, j.potential);
            }
        }
    }
}
