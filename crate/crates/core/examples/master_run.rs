//! The master protocol on a weak source: one run per seed of the source
//! extractor, a threshold vote and the XOR of the accepted outputs.

use physrand::device::Implementation;
use physrand::extractor::ExtractorSpec;
use physrand::master::{error_bounds, run_master, soundness_probe_mc, Gallery, MasterSpec, SourceTable};
use physrand::seeded_pre::{SeededPreSpec, DEFAULT_DELTA};
use physrand::SimRng;

fn main() -> physrand::Result<()> {
    let rounds = 1000;
    let post = ExtractorSpec::trevisan(2 * rounds, 64, 16, 8, 2 * rounds, 0.01)?;
    let seeded = SeededPreSpec::minimal(rounds, DEFAULT_DELTA, post)?;
    let ext = ExtractorSpec::seed_copies(32, 3, seeded.seed_len, 12, 1.0)?;
    let spec = MasterSpec::new(ext, seeded, 0.5)?;

    let source = SourceTable::random_flat(32, 12, &mut SimRng::new(1))?;
    let x = source.sample(&mut SimRng::new(2)).clone();
    for gallery in [Gallery::Honest { noise: 0.0 }, Gallery::Deterministic] {
        let impls: Vec<Implementation> = gallery.implementations(&spec, &x, &source, 3)?;
        let out = run_master(&spec, &x, &impls, 4)?;
        println!(
            "{:<20} accepted {:<5} rejects {}/{} (threshold {})  z = {}",
            gallery.name(),
            out.accepted,
            out.rejects,
            spec.instance_count(),
            out.reject_threshold,
            out.output.to_hex()
        );
    }

    let ledger = error_bounds(0.01, 0.001, 0.02, 0.1)?;
    println!("ledger: completeness {:.4}, soundness {:.4}", ledger.completeness_bound, ledger.soundness_bound);
    let probe = soundness_probe_mc(&spec, &Gallery::Deterministic, &source, 50, 5)?;
    println!("deterministic probe: accept {:.3}, distance {:.4}", probe.accept_probability, probe.weighted_distance);
    Ok(())
}
