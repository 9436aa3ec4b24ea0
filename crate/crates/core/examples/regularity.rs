//! Two components with an atom at the same time. The law is still well
//! defined, but the scenario fails the orthogonality check.

use mppcausal::compensator::check_regularity;
use mppcausal::oracle::enumerate_model;
use mppcausal::trajectory::Baseline;
use mppcausal::Scenario;

const CONFIG: &str = r#"{
    "horizon": 2.0,
    "components": [
        {"name": "a", "atoms": [{"time": 1.0, "prob": 0.3}]},
        {"name": "y", "atoms": [{"time": 1.0, "prob": 0.4}]}
    ],
    "interventions": [{"target": "a", "kind": "prevent"}],
    "outcome": {"kind": "count", "of": "y"}
}"#;

fn main() -> mppcausal::Result<()> {
    let sc = Scenario::from_json(CONFIG)?;
    for (traj, p) in enumerate_model(&sc.model, &Baseline::default(), 16)? {
        let labels: Vec<&str> = traj
            .events()
            .iter()
            .map(|e| sc.space.mark_label(e.mark))
            .collect();
        println!("{:?} with probability {p}", labels);
    }
    match check_regularity(&sc.model, &sc.interventions) {
        Ok(()) => println!("regular"),
        Err(report) => println!("not regular: {report}"),
    }
    Ok(())
}
