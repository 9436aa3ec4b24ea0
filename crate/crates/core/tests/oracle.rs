mod common;

use mppcausal::compensator::check_regularity;
use mppcausal::estimate::{OutcomeFunctional, OutcomeKind};
use mppcausal::oracle::{
    check_positivity, cross_check_continuous, enumerate, enumerate_model, oracle_g_formula,
    oracle_ipw, DiscreteScenario, DiscreteVariable, ENUMERATION_CAP,
};
use mppcausal::trajectory::{Baseline, Selector};
use mppcausal::Error;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn var(component: &str, time: f64, table: Vec<f64>, regime: Option<bool>) -> DiscreteVariable {
    DiscreteVariable {
        component: component.into(),
        time,
        table,
        regime,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn ipw_equals_g_formula_on_fuzzed_scenarios(seed in any::<u64>()) {
        let (ds, out) = common::random_discrete(&mut StdRng::seed_from_u64(seed));
        let g = oracle_g_formula(&ds, &out).unwrap();
        let ipw = oracle_ipw(&ds, &out).unwrap();
        prop_assert!((g - ipw).abs() <= 1e-12 * g.abs().max(1.0), "{} vs {}", g, ipw);
        let total: f64 = enumerate(&ds, &out).iter().map(|w| w.probability).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn two_period_closed_form() {
    let sc = common::load("two_period.json");
    let ds = sc.discrete.clone().unwrap();
    // Σ_l 0.5 P(Y = 1 | L = l, A = 1) = 0.5 * 0.4 + 0.5 * 0.8.
    assert!((oracle_g_formula(&ds, &sc.outcome).unwrap() - 0.6).abs() < 1e-15);
    assert!((oracle_ipw(&ds, &sc.outcome).unwrap() - 0.6).abs() < 1e-15);
}

#[test]
fn shared_atom_joint_table() {
    let sc = common::load("shared_atom.json");
    let worlds = enumerate_model(&sc.model, &Baseline::default(), 16).unwrap();
    let a = Selector::Component(sc.space.component("a").unwrap());
    let y = Selector::Component(sc.space.component("y").unwrap());
    let prob = |na: usize, ny: usize| -> f64 {
        worlds
            .iter()
            .filter(|(t, _)| {
                t.count(&sc.space, &a, 2.0).unwrap() == na
                    && t.count(&sc.space, &y, 2.0).unwrap() == ny
            })
            .map(|(_, p)| p)
            .sum()
    };
    assert!((prob(1, 0) - 0.3).abs() < 1e-15);
    assert!((prob(0, 1) - 0.4).abs() < 1e-15);
    assert!((prob(0, 0) - 0.3).abs() < 1e-15);
    assert_eq!(prob(1, 1), 0.0);
    let conditional = prob(1, 0) / (prob(1, 0) + prob(0, 0));
    assert!((conditional - 0.5).abs() < 1e-15);
    assert!(check_regularity(&sc.model, &sc.interventions).is_err());
}

#[test]
fn zero_cells_and_unreachable_regimes() {
    let zero = DiscreteScenario::new(
        4.0,
        vec![
            var("l", 1.0, vec![0.5], None),
            var("a", 2.0, vec![0.4, 0.0], Some(true)),
            var("y", 3.0, vec![0.5; 4], None),
        ],
    )
    .unwrap();
    match check_positivity(&zero) {
        Err(Error::DiscretePositivity { variable, cell }) => {
            assert_eq!(variable, 1);
            assert_eq!(cell, "l@1=1");
        }
        other => panic!("{other:?}"),
    }
    // The zero cell is unreachable when L = 1 never happens.
    let unreachable_cell = DiscreteScenario::new(
        4.0,
        vec![
            var("l", 1.0, vec![0.0], None),
            var("a", 2.0, vec![0.4, 0.0], Some(true)),
            var("y", 3.0, vec![0.5; 4], None),
        ],
    )
    .unwrap();
    assert!(check_positivity(&unreachable_cell).is_ok());
    let never = DiscreteScenario::new(
        4.0,
        vec![
            var("l", 1.0, vec![0.5], None),
            var("a", 2.0, vec![0.0, 0.0], Some(true)),
        ],
    )
    .unwrap();
    let out = OutcomeFunctional::new(OutcomeKind::Constant(1.0), 4.0, 4.0).unwrap();
    assert!(matches!(
        oracle_g_formula(&never, &out),
        Err(Error::RegimeUnreachable)
    ));
}

#[test]
fn invalid_discrete_scenarios_are_rejected() {
    assert!(DiscreteScenario::new(4.0, vec![var("l", 1.0, vec![0.5], None)]).is_err());
    assert!(DiscreteScenario::new(4.0, vec![var("a", 1.0, vec![0.5, 0.5], Some(true))]).is_err());
    assert!(DiscreteScenario::new(4.0, vec![var("a", 1.0, vec![1.5], Some(true))]).is_err());
    assert!(DiscreteScenario::new(
        4.0,
        vec![
            var("a", 1.0, vec![0.5], Some(true)),
            var("a", 2.0, vec![0.5, 0.5], None)
        ]
    )
    .is_err());
    let big: Vec<_> = (0..=ENUMERATION_CAP)
        .map(|i| {
            var(
                if i == 0 { "a" } else { "l" },
                1.0 + i as f64,
                vec![0.5; 1 << i],
                (i == 0).then_some(true),
            )
        })
        .collect();
    assert!(matches!(
        DiscreteScenario::new(30.0, big),
        Err(Error::EnumerationTooLarge { .. })
    ));
}

#[test]
fn continuous_machinery_matches_fuzzed_enumerations() {
    let mut rng = StdRng::seed_from_u64(77);
    for _ in 0..40 {
        let (ds, out) = common::random_discrete(&mut rng);
        let report = cross_check_continuous(&ds, &out).unwrap();
        assert!(report.ok, "{report:?}");
        assert_eq!(report.worlds, ds.num_worlds());
    }
}
