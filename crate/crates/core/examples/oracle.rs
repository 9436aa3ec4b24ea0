//! Exact values for a two-period treatment model, checked against the
//! continuous-time machinery and against simulation.

use mppcausal::estimate::{OutcomeFunctional, OutcomeKind};
use mppcausal::oracle::{
    cross_check_continuous, cross_check_mc, oracle_report, DiscreteScenario, DiscreteVariable,
};

fn main() -> mppcausal::Result<()> {
    let var = |component: &str, time, table, regime| DiscreteVariable {
        component: component.into(),
        time,
        table,
        regime,
    };
    let ds = DiscreteScenario::new(
        4.0,
        vec![
            var("l", 1.0, vec![0.5], None),
            var("a", 2.0, vec![0.3, 0.7], Some(true)),
            var("y", 3.0, vec![0.2, 0.4, 0.5, 0.8], None),
        ],
    )?;
    let y = ds.space().selector("y")?;
    let outcome = OutcomeFunctional::new(
        OutcomeKind::Count {
            of: y,
            cap: Some(1),
        },
        4.0,
        4.0,
    )?;

    let report = oracle_report(&ds, &outcome)?;
    println!(
        "g-formula {}  ipw {}  max weight {}",
        report.g_formula, report.ipw, report.max_weight
    );
    println!("{:?}", cross_check_continuous(&ds, &outcome)?);
    println!("{:?}", cross_check_mc(&ds, &outcome, 50_000, 9)?);
    Ok(())
}
