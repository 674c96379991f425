//! Advisory statistics on an output file, then a small parameter sweep.
//!
//! Run from the workspace root so the sample configs resolve.

use physrand::harness::{experiment_sweep, stats_battery, RunConfig, SweepGrid};
use physrand::seeded_pre::random_bits;
use physrand::SimRng;

fn main() -> physrand::Result<()> {
    let bits = random_bits(4096, &mut SimRng::new(5));
    let report = stats_battery(&bits)?;
    println!("{}", report.header);
    for t in &report.tests {
        println!("{:<28} p = {:.4}  {}", t.name, t.p_value, if t.pass { "pass" } else { "fail" });
    }

    let mut cfg = RunConfig::load(std::path::Path::new("configs/honest.json"))?;
    cfg.trials = 10;
    let grid = SweepGrid {
        eta: vec![0.5],
        noise: vec![0.0, 0.1],
    };
    let (rows, _) = experiment_sweep(&cfg, &grid)?;
    for r in rows {
        println!("eta {} noise {}  accept {:.2}  bound {:.3}", r.eta, r.noise, r.accept_rate, r.soundness_bound);
    }
    Ok(())
}
