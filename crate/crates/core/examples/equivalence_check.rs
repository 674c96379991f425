//! Rebuild a device-uniform state from a global-uniform baseline plus an
//! adversary operation, and confirm a decision channel cannot tell them apart.

use physrand::equivalence::{
    acceptance_invariance_check, decompose_via_uhlmann, random_device_uniform, reconstruction_error, run_battery,
    DecisionChannel,
};
use physrand::SimRng;

fn main() -> physrand::Result<()> {
    let mut rng = SimRng::new(11);
    let target = random_device_uniform(1, 2, 2, &mut rng)?;
    let (baseline, attack) = decompose_via_uhlmann(&target)?;
    println!("reconstruction error {:.2e}", reconstruction_error(&baseline, &attack, &target)?);

    let decision = DecisionChannel::random(target.x_dim(), target.device_dim(), &mut rng)?;
    let r = acceptance_invariance_check(&decision, &baseline, &attack, &target)?;
    println!(
        "accept baseline {:.6}  attacked {:.6}  target {:.6}",
        r.accept_baseline, r.accept_attacked, r.accept_target
    );
    println!("discrepancy {:.2e}  commutation {:.2e}", r.discrepancy, r.commutation);

    for row in run_battery(&[(1, 2, 1), (1, 2, 2), (2, 2, 2)], 12)? {
        println!("{:>3} x={} d={} e={}  max discrepancy {:.2e}", row.case, row.x_bits, row.d_dim, row.e_dim, row.max_discrepancy);
    }
    Ok(())
}
