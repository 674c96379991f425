//! The CHSH game and the honest entangled pair.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::Device;
use crate::bits::BitString;
use crate::error::{invalid, Result};
use crate::rng::SimRng;

/// `cos²(π/8)`.
pub fn quantum_win() -> f64 {
    (PI / 8.0).cos().powi(2)
}

pub const CLASSICAL_WIN: f64 = 0.75;

/// Win predicate `a ⊕ b = x ∧ y`.
#[inline]
pub fn chsh_wins(x: bool, y: bool, a: bool, b: bool) -> bool {
    (a ^ b) == (x & y)
}

/// Distribution over the referee's input pair, `p[x][y]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDistribution {
    pub p: [[f64; 2]; 2],
}

impl InputDistribution {
    pub fn uniform() -> Self {
        Self { p: [[0.25; 2]; 2] }
    }

    pub fn new(p: [[f64; 2]; 2]) -> Result<Self> {
        let total: f64 = p.iter().flatten().sum();
        if p.iter().flatten().any(|&v| !(v >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return invalid("input distribution must be non-negative and sum to 1");
        }
        Ok(Self { p })
    }

    pub fn sample(&self, rng: &mut SimRng) -> (bool, bool) {
        let u = rng.unit();
        let mut acc = 0.0;
        for (i, (x, y)) in [(false, false), (false, true), (true, false), (true, true)].into_iter().enumerate() {
            acc += self.p[i / 2][i % 2];
            if u < acc {
                return (x, y);
            }
        }
        (true, true)
    }
}

/// Measurement angle of the canonical optimal strategy.
fn angle(side: usize, input: bool) -> f64 {
    match (side, input) {
        (0, false) => 0.0,
        (0, true) => PI / 4.0,
        (_, false) => PI / 8.0,
        (_, true) => -PI / 8.0,
    }
}

/// Ideal joint outcome distribution `p[a][b]` of the canonical strategy.
pub fn ideal_joint(x: bool, y: bool) -> [[f64; 2]; 2] {
    let same = (angle(0, x) - angle(1, y)).cos().powi(2);
    [[same / 2.0, (1.0 - same) / 2.0], [(1.0 - same) / 2.0, same / 2.0]]
}

/// `p[a][b]` when each output is independently replaced by a fair coin with
/// probability `eta`.
pub fn noisy_joint(x: bool, y: bool, eta: f64) -> [[f64; 2]; 2] {
    let keep = (1.0 - eta) * (1.0 - eta);
    let ideal = ideal_joint(x, y);
    let mut out = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            out[a][b] = keep * ideal[a][b] + (1.0 - keep) / 4.0;
        }
    }
    out
}

/// The shared EPR source. The first side to measure a round fixes a uniform
/// outcome; the second samples conditionally on it.
#[derive(Debug)]
struct EprLedger {
    rng: SimRng,
    open: HashMap<usize, (usize, f64, bool)>,
}

impl EprLedger {
    fn measure(&mut self, round: usize, side: usize, theta: f64) -> bool {
        match self.open.remove(&round) {
            Some((other, phi, outcome)) if other != side => {
                let same = (theta - phi).cos().powi(2);
                if self.rng.bernoulli(same) {
                    outcome
                } else {
                    !outcome
                }
            }
            Some(_) => panic!("side {side} measured round {round} twice"),
            None => {
                let outcome = self.rng.bit();
                self.open.insert(round, (side, theta, outcome));
                outcome
            }
        }
    }
}

/// One half of the honest pair.
#[derive(Debug)]
pub struct HonestChshDevice {
    id: String,
    side: usize,
    round: usize,
    noise: f64,
    rng: SimRng,
    ledger: Arc<Mutex<EprLedger>>,
}

impl Device for HonestChshDevice {
    fn id(&self) -> &str {
        &self.id
    }

    fn query(&mut self, input: &BitString) -> BitString {
        let x = input.len() == 1 && input.get(0);
        let theta = angle(self.side, x);
        let ideal = self
            .ledger
            .lock()
            .expect("EPR ledger poisoned")
            .measure(self.round, self.side, theta);
        self.round += 1;
        let out = if self.noise > 0.0 && self.rng.bernoulli(self.noise) {
            self.rng.bit()
        } else {
            ideal
        };
        BitString::from_bools(&[out])
    }
}

pub(crate) fn honest_pair(noise: f64, seed: u64) -> Vec<Box<dyn Device>> {
    let root = SimRng::new(seed);
    let ledger = Arc::new(Mutex::new(EprLedger {
        rng: root.fork(0),
        open: HashMap::new(),
    }));
    ["A", "B"]
        .into_iter()
        .enumerate()
        .map(|(side, id)| {
            Box::new(HonestChshDevice {
                id: id.to_string(),
                side,
                round: 0,
                noise,
                rng: root.fork(side as u64 + 1),
                ledger: Arc::clone(&ledger),
            }) as Box<dyn Device>
        })
        .collect()
}
