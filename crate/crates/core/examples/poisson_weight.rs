//! Changing the intensity of a unit-rate Poisson process to `c`: the
//! weight `c^N e^{-(c-1)t}` has mean one.

use mppcausal::estimate::mean_se;
use mppcausal::simulate::{simulate_many, simulate_observed};
use mppcausal::trajectory::Selector;
use mppcausal::weights::poisson_ip_weight;
use mppcausal::Scenario;

fn main() -> mppcausal::Result<()> {
    let sc = Scenario::from_json(
        r#"{"horizon": 1.0, "components": [{"name": "n", "rate": 1.0}], "outcome": {"kind": "count", "of": "n"}}"#,
    )?;
    let n = Selector::Component(sc.space.component("n")?);
    let draws = simulate_many(100_000, |i| simulate_observed(&sc, 3, i))?;
    for c in [0.5, 2.0, 3.0] {
        let w: Vec<f64> = draws
            .iter()
            .map(|d| {
                Ok(poisson_ip_weight(
                    c,
                    d.trajectory.count(&sc.space, &n, 1.0)?,
                    1.0,
                ))
            })
            .collect::<mppcausal::Result<_>>()?;
        let (m, se) = mean_se(&w);
        println!("c = {c}: mean weight {m:.4} (SE {se:.4})");
    }
    Ok(())
}
