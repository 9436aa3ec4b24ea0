//! Joint draws of observed and potential trajectories under a triggered
//! treatment regime.

use std::path::Path;

use mppcausal::simulate::simulate_joint;
use mppcausal::Scenario;

fn main() -> mppcausal::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/triggered_treatment.json");
    let sc = Scenario::load(&path)?;
    for subject in 0..5 {
        let j = simulate_joint(&sc, 7, subject)?;
        println!("subject {subject}: deviation at {}", j.deviation.overall);
        for (arm, traj) in [("observed", &j.observed), ("potential", &j.potential)] {
            let events: Vec<String> = traj
                .events()
                .iter()
                .map(|e| format!("{}@{:.3}", sc.space.mark_label(e.mark), e.t))
                .collect();
            println!("  {arm:9} {}", events.join(" "));
        }
        assert!(j.is_consistent());
    }
    Ok(())
}
