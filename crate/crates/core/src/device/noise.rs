//! The win-rate-gap noise premetric.

use serde::Serialize;

use super::chsh::{chsh_wins, InputDistribution};
use super::Implementation;
use crate::bits::BitString;
use crate::error::{invalid, Result};
use crate::rng::SimRng;

/// Default sample count per battery entry.
pub const NOISE_SAMPLES: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize)]
pub struct NoiseValue(f64);

impl NoiseValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Gaps observed while playing one battery entry on one device subset.
#[derive(Default)]
struct Tally {
    wins: [usize; 2],
    // ones[impl][slot][input], count[slot][input]
    ones: [[[usize; 2]; 2]; 2],
    count: [[usize; 2]; 2],
}

impl Tally {
    fn marginal_gap(&self, slot: usize) -> f64 {
        (0..2)
            .filter(|&v| self.count[slot][v] > 0)
            .map(|v| {
                let n = self.count[slot][v] as f64;
                (self.ones[0][slot][v] as f64 / n - self.ones[1][slot][v] as f64 / n).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn play(
    a: &Implementation,
    b: &Implementation,
    devices: &[usize],
    dist: &InputDistribution,
    samples: usize,
    rng: &mut SimRng,
) -> Tally {
    let mut imps = [a.fresh(), b.fresh()];
    let mut t = Tally::default();
    for _ in 0..samples {
        let (x, y) = dist.sample(rng);
        let inputs = [x, y];
        for v in 0..devices.len() {
            t.count[v][inputs[v] as usize] += 1;
        }
        for (k, imp) in imps.iter_mut().enumerate() {
            let mut outs = [false; 2];
            for (slot, &dev) in devices.iter().enumerate() {
                outs[slot] = imp.query(dev, &BitString::from_bools(&[inputs[slot]])).get(0);
                t.ones[k][slot][inputs[slot] as usize] += outs[slot] as usize;
            }
            if devices.len() == 2 && chsh_wins(x, y, outs[0], outs[1]) {
                t.wins[k] += 1;
            }
        }
    }
    t
}

/// [`noise_distance_with`] at [`NOISE_SAMPLES`] samples over all devices.
pub fn noise_distance(a: &Implementation, b: &Implementation, battery: &[InputDistribution], seed: u64) -> Result<NoiseValue> {
    noise_distance_with(a, b, battery, NOISE_SAMPLES, seed, None)
}

/// Largest gap between `a` and `b` over device subsets of size at most two
/// (restricted to `subset` if given) and over the battery.
///
/// Pairs are compared by CHSH win rate, single devices by their output
/// marginals given each input. Both implementations are rebuilt fresh and
/// see the same input sequence.
pub fn noise_distance_with(
    a: &Implementation,
    b: &Implementation,
    battery: &[InputDistribution],
    samples: usize,
    seed: u64,
    subset: Option<&[usize]>,
) -> Result<NoiseValue> {
    if a.device_count() != b.device_count() {
        return invalid(format!(
            "implementations have {} and {} devices",
            a.device_count(),
            b.device_count()
        ));
    }
    if battery.is_empty() || samples == 0 {
        return invalid("noise distance needs a non-empty battery and samples >= 1");
    }
    let all: Vec<usize> = (0..a.device_count()).collect();
    let devices = subset.unwrap_or(&all);
    if devices.iter().any(|&d| d >= a.device_count()) {
        return invalid("device subset names a device that does not exist");
    }
    // Every pair is always played so that a restricted distance is a max over
    // a subset of the same estimates.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for p in 0..all.len() {
        for q in p + 1..all.len() {
            groups.push(vec![p, q]);
        }
    }
    if groups.is_empty() {
        groups.extend(all.iter().map(|&p| vec![p]));
    }
    let root = SimRng::new(seed);
    let mut worst: f64 = 0.0;
    for (bi, dist) in battery.iter().enumerate() {
        for group in &groups {
            let mut rng = root.fork(bi as u64);
            let t = play(a, b, group, dist, samples, &mut rng);
            if group.len() == 2 && group.iter().all(|g| devices.contains(g)) {
                let gap = (t.wins[0] as f64 - t.wins[1] as f64).abs() / samples as f64;
                worst = worst.max(gap);
            }
            for (slot, dev) in group.iter().enumerate() {
                if devices.contains(dev) {
                    worst = worst.max(t.marginal_gap(slot));
                }
            }
        }
    }
    Ok(NoiseValue(worst.clamp(0.0, 1.0)))
}
