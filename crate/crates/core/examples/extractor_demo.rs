//! Seeded extraction: the one-bit inner product, a Trevisan construction and
//! the exact seed-averaged distance on a small flat source.

use physrand::extractor::{extract, flat_source, one_bit_eps, sr_average_distance, ExtractorSpec};
use physrand::{BitString, SimRng};
use rand::Rng;

fn main() -> physrand::Result<()> {
    let mut rng = SimRng::new(7);
    let spec = ExtractorSpec::trevisan(256, 64, 32, 8, 200, 0.01)?;
    let x = BitString::from_bools(&(0..256).map(|_| rng.random::<bool>()).collect::<Vec<_>>());
    let y = BitString::from_bools(&(0..64).map(|_| rng.random::<bool>()).collect::<Vec<_>>());
    println!("trevisan(256 -> 32, seed 64): {}", extract(&spec, &x, &y)?.to_hex());

    // 64 source values out of 1024: min-entropy 6.
    let one = ExtractorSpec::one_bit(10, 8, 6)?;
    let support: Vec<u64> = rand::seq::index::sample(&mut rng, 1024, 64).into_iter().map(|v| v as u64).collect();
    let r = sr_average_distance(&one, &flat_source(10, &support)?)?;
    println!(
        "one-bit on a flat source: average distance {:.4}, worst-case bound {:.4}",
        r.average,
        one_bit_eps(10, 8, 6)
    );
    Ok(())
}
