//! One seeded run with honest devices and one with a classical cheater,
//! followed by a short cross-feed chain.

use physrand::device::{deterministic_pair, make_chsh_pair};
use physrand::extractor::ExtractorSpec;
use physrand::seeded_pre::{cross_feed, random_bits, run_seeded_pre, SeededPreSpec, DEFAULT_DELTA};
use physrand::SimRng;

fn main() -> physrand::Result<()> {
    let rounds = 2000;
    let post = ExtractorSpec::trevisan(2 * rounds, 256, 2 * rounds + 256, 16, 2 * rounds, 0.01)?;
    let spec = SeededPreSpec::minimal(rounds, DEFAULT_DELTA, post)?;
    let seed = random_bits(spec.seed_len, &mut SimRng::new(1));
    println!("seed {} bits, threshold {:.4}, need {} wins", spec.seed_len, spec.win_threshold, spec.min_wins());

    let honest = run_seeded_pre(&spec, &seed, &mut make_chsh_pair(0.0, 2)?)?;
    println!("honest:  accepted {}  win rate {:.4}", honest.accepted, honest.stats.win_rate);
    let cheat = run_seeded_pre(&spec, &seed, &mut deterministic_pair([false; 2], [false; 2]))?;
    println!("classic: accepted {}  win rate {:.4}", cheat.accepted, cheat.stats.win_rate);
    println!("report config hash {}", honest.report(&spec)?["config_hash"]);

    let chain = cross_feed(&spec, &spec, &mut make_chsh_pair(0.0, 3)?, &mut make_chsh_pair(0.0, 4)?, &seed, 4)?;
    for (k, s) in chain.steps.iter().enumerate() {
        println!("step {k}: win rate {:.4}", s.win_rate);
    }
    println!("chain accepted {} with {} output bits", chain.accepted, chain.output.len());
    Ok(())
}
