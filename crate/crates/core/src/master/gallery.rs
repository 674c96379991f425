//! Weak sources and the adversary gallery used by probes and experiments.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::MasterSpec;
use crate::bits::BitString;
use crate::device::{make_chsh_pair, make_source_correlated_cheater, deterministic_pair, CheatStrategy, Implementation};
use crate::error::{invalid, Result};
use crate::extractor::extract;
use crate::rng::SimRng;

/// An explicit distribution over `n`-bit source values.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceTable {
    n: usize,
    entries: Vec<(BitString, f64)>,
    cumulative: Vec<f64>,
}

impl SourceTable {
    pub fn new(n: usize, entries: Vec<(BitString, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return invalid("source table is empty");
        }
        if entries.iter().any(|(x, p)| x.len() != n || !(*p >= 0.0)) {
            return invalid(format!("source entries must be {n}-bit values with non-negative weight"));
        }
        let total: f64 = entries.iter().map(|e| e.1).sum();
        if (total - 1.0).abs() > 1e-9 {
            return invalid(format!("source probabilities sum to {total}"));
        }
        let mut seen = std::collections::HashSet::new();
        if !entries.iter().all(|(x, _)| seen.insert(x.clone())) {
            return invalid("source table lists a value twice");
        }
        let mut acc = 0.0;
        let cumulative = entries
            .iter()
            .map(|e| {
                acc += e.1;
                acc
            })
            .collect();
        Ok(Self { n, entries, cumulative })
    }

    /// Uniform over `values`.
    pub fn flat(n: usize, values: Vec<BitString>) -> Result<Self> {
        let w = 1.0 / values.len().max(1) as f64;
        Self::new(n, values.into_iter().map(|v| (v, w)).collect())
    }

    /// Uniform over `2^k` distinct random `n`-bit values.
    pub fn random_flat(n: usize, k: usize, rng: &mut SimRng) -> Result<Self> {
        if k > n || k > 20 {
            return invalid(format!("cannot draw a flat (n = {n}, k = {k}) source"));
        }
        let mut seen = std::collections::HashSet::new();
        let mut values = Vec::with_capacity(1 << k);
        while values.len() < 1 << k {
            let v = crate::seeded_pre::random_bits(n, rng);
            if seen.insert(v.clone()) {
                values.push(v);
            }
        }
        Self::flat(n, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(BitString, f64)] {
        &self.entries
    }

    /// `-log2 max_x p(x)`.
    pub fn min_entropy(&self) -> f64 {
        -self.entries.iter().map(|e| e.1).fold(0.0, f64::max).log2()
    }

    /// The first value of maximal probability.
    pub fn most_likely(&self) -> &BitString {
        let mut best = &self.entries[0];
        for e in &self.entries {
            if e.1 > best.1 {
                best = e;
            }
        }
        &best.0
    }

    pub fn sample(&self, rng: &mut SimRng) -> &BitString {
        let u = rng.unit() * self.cumulative.last().copied().unwrap_or(1.0);
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.entries.len() - 1);
        &self.entries[i].0
    }
}

/// Devices that predict the round inputs of one slot from a guess of the
/// source and answer so as to win if the guess is right: `A` outputs 0,
/// `B` outputs `x̂ ∧ y`.
#[derive(Debug)]
pub struct ReplayStrategy {
    predicted_x: Vec<bool>,
    lose: bool,
}

impl ReplayStrategy {
    pub fn new(spec: &MasterSpec, guess: &BitString, slot: usize) -> Result<Self> {
        let seed = extract(&spec.ext, guess, &BitString::from_u64(slot as u64, spec.ext.d()))?;
        let predicted_x = (0..spec.seeded.rounds).map(|j| seed.get(2 * j)).collect();
        Ok(Self { predicted_x, lose: false })
    }

    /// Same prediction, but always answers so as to lose when it is right.
    pub fn losing(mut self) -> Self {
        self.lose = true;
        self
    }
}

impl CheatStrategy for ReplayStrategy {
    fn answer(&self, _knowledge: &BitString, device: usize, round: usize, input: &BitString) -> BitString {
        let bit = input.get(0);
        let out = match device {
            0 => self.lose,
            _ => self.predicted_x.get(round).copied().unwrap_or(false) & bit,
        };
        BitString::from_bools(&[out])
    }

    fn name(&self) -> String {
        if self.lose { "replay-losing" } else { "replay" }.into()
    }
}

/// Named families of implementations for every slot of the master protocol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gallery {
    /// Honest entangled pairs with per-device output noise.
    Honest { noise: f64 },
    /// The constant-zero pair, which attains the classical bound.
    Deterministic,
    /// The adversary knows the source value; the devices were prepared for
    /// its most likely value and replay winning answers for that guess.
    PublicSourceReplay,
    /// Devices that were told the actual source value. The source then has
    /// no entropy relative to the devices, so nothing can be certified.
    Informed,
}

impl Gallery {
    pub fn name(&self) -> String {
        match self {
            Gallery::Honest { noise } => format!("honest(noise={noise})"),
            Gallery::Deterministic => "deterministic".into(),
            Gallery::PublicSourceReplay => "public-source-replay".into(),
            Gallery::Informed => "informed".into(),
        }
    }

    /// Whether the devices are classical (exact probes apply).
    pub fn is_classical(&self) -> bool {
        !matches!(self, Gallery::Honest { .. })
    }

    /// One implementation per seed, for source value `x`.
    pub fn implementations(
        &self,
        spec: &MasterSpec,
        x: &BitString,
        source: &SourceTable,
        rng_seed: u64,
    ) -> Result<Vec<Implementation>> {
        let count = spec.instance_count();
        let root = SimRng::new(rng_seed);
        (0..count)
            .map(|slot| match self {
                Gallery::Honest { noise } => make_chsh_pair(*noise, root.fork(slot as u64).seed()),
                Gallery::Deterministic => Ok(deterministic_pair([false; 2], [false; 2])),
                Gallery::PublicSourceReplay | Gallery::Informed => {
                    let guess = if *self == Gallery::Informed {
                        x.clone()
                    } else {
                        source.most_likely().clone()
                    };
                    let strategy: Arc<dyn CheatStrategy> = Arc::new(ReplayStrategy::new(spec, &guess, slot)?);
                    Ok(make_source_correlated_cheater(x, |_| guess.clone(), 2, strategy))
                }
            })
            .collect()
    }
}
