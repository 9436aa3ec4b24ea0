//! Weight paths of observed draws, by the product formula and by the
//! jump recursion.

use std::path::Path;

use mppcausal::simulate::simulate_observed;
use mppcausal::weights::{weight_path_product, weight_path_sde};
use mppcausal::Scenario;

fn main() -> mppcausal::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/triggered_treatment.json");
    let sc = Scenario::load(&path)?;
    for subject in 0..3 {
        let d = simulate_observed(&sc, 11, subject)?;
        let product = weight_path_product(&sc, &d.baseline, &d.trajectory)?;
        let sde = weight_path_sde(&sc, &d.baseline, &d.trajectory)?;
        println!("subject {subject}, tau = {}", product.tau());
        for (p, (_, w)) in product.points.iter().zip(&sde) {
            println!(
                "  t = {:.3}  Lambda_c = {:.4}  W = {:.6}  recursion = {:.6}",
                p.t, p.lambda_c, p.w, w
            );
        }
    }
    Ok(())
}
