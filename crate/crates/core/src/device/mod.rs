//! Simulated untrusted devices.
//!
//! A [`Device`] only sees its own inputs and private state; nothing in the
//! trait gives it a handle on another device. The honest pair shares an EPR
//! source fixed at construction, which is the only correlation it has.
//!
//! Every [`Implementation`] keeps the [`Recipe`] it was built from, so fresh
//! copies (same seeds, untouched state) can be made for repeated
//! experiments and for [`noise_distance`].

mod chsh;
mod noise;
mod strategy;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::bits::BitString;
use crate::error::{invalid, Result};
use crate::rng::SimRng;

pub use chsh::{
    chsh_wins, ideal_joint, noisy_joint, quantum_win, HonestChshDevice, InputDistribution, CLASSICAL_WIN,
};
pub use noise::{noise_distance, noise_distance_with, NoiseValue, NOISE_SAMPLES};
pub use strategy::{
    parse_strategy_tables, CheatStrategy, CorrelatedDevice, StrategyTable, SwitchOnKnowledge, TableDevice,
};

/// A classical-in, classical-out box with private state.
pub trait Device: Send {
    fn id(&self) -> &str;
    fn query(&mut self, input: &BitString) -> BitString;
}

/// How an implementation was built; enough to rebuild it from scratch.
#[derive(Clone)]
pub enum Recipe {
    ChshPair {
        noise: f64,
        seed: u64,
    },
    Deterministic {
        tables: Vec<Arc<StrategyTable>>,
    },
    SourceCorrelated {
        knowledge: BitString,
        device_count: usize,
        strategy: Arc<dyn CheatStrategy>,
    },
}

impl Recipe {
    /// The same recipe with a different randomness seed, if it has one.
    pub fn reseeded(&self, seed: u64) -> Recipe {
        match self {
            Recipe::ChshPair { noise, .. } => Recipe::ChshPair { noise: *noise, seed },
            other => other.clone(),
        }
    }
}

impl fmt::Debug for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Recipe::ChshPair { noise, seed } => write!(f, "ChshPair {{ noise: {noise}, seed: {seed} }}"),
            Recipe::Deterministic { tables } => write!(f, "Deterministic({} tables)", tables.len()),
            Recipe::SourceCorrelated {
                knowledge,
                device_count,
                strategy,
            } => write!(
                f,
                "SourceCorrelated {{ knowledge: {} bits, devices: {device_count}, strategy: {} }}",
                knowledge.len(),
                strategy.name()
            ),
        }
    }
}

/// Devices plus the description of what they shared at initialization.
pub struct Implementation {
    devices: Vec<Box<dyn Device>>,
    recipe: Recipe,
}

impl fmt::Debug for Implementation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Implementation")
            .field("devices", &self.devices.iter().map(|d| d.id().to_string()).collect::<Vec<_>>())
            .field("recipe", &self.recipe)
            .finish()
    }
}

impl Implementation {
    pub fn build(recipe: Recipe) -> Self {
        let devices: Vec<Box<dyn Device>> = match &recipe {
            Recipe::ChshPair { noise, seed } => chsh::honest_pair(*noise, *seed),
            Recipe::Deterministic { tables } => tables
                .iter()
                .map(|t| Box::new(TableDevice::new(Arc::clone(t))) as Box<dyn Device>)
                .collect(),
            Recipe::SourceCorrelated {
                knowledge,
                device_count,
                strategy,
            } => (0..*device_count)
                .map(|i| Box::new(CorrelatedDevice::new(i, knowledge.clone(), Arc::clone(strategy))) as Box<dyn Device>)
                .collect(),
        };
        Self { devices, recipe }
    }

    /// A copy in its initial state.
    pub fn fresh(&self) -> Self {
        Self::build(self.recipe.clone())
    }

    /// A fresh copy with a different randomness seed (only honest pairs use one).
    pub fn reseeded(&self, seed: u64) -> Self {
        Self::build(self.recipe.reseeded(seed))
    }

    pub fn recipe(&self) -> &Recipe {
        &self.recipe
    }

    pub fn device_count(&self) -> usize {
        self.devices.len()
    }

    pub fn device_ids(&self) -> Vec<String> {
        self.devices.iter().map(|d| d.id().to_string()).collect()
    }

    pub fn device_mut(&mut self, i: usize) -> &mut dyn Device {
        self.devices[i].as_mut()
    }

    pub fn query(&mut self, i: usize, input: &BitString) -> BitString {
        self.devices[i].query(input)
    }

    /// Human-readable description of the pre-shared correlation.
    pub fn shared_init(&self) -> String {
        match &self.recipe {
            Recipe::ChshPair { noise, seed } => {
                format!("one EPR pair per round shared by A and B (seed {seed}), output noise {noise}")
            }
            Recipe::Deterministic { .. } => "none (independent lookup tables)".into(),
            Recipe::SourceCorrelated { knowledge, .. } => {
                format!("{} bits of source knowledge given to every device", knowledge.len())
            }
        }
    }

    /// Exact `p[a][b]` for round `round` of a two-device, one-bit game, if
    /// the recipe admits a closed form.
    pub fn round_distribution(&self, round: usize, x: bool, y: bool) -> Option<[[f64; 2]; 2]> {
        if self.device_count() != 2 {
            return None;
        }
        let delta = |a: &BitString, b: &BitString| {
            let mut p = [[0.0; 2]; 2];
            p[a.get(0) as usize][b.get(0) as usize] = 1.0;
            p
        };
        let xi = BitString::from_bools(&[x]);
        let yi = BitString::from_bools(&[y]);
        match &self.recipe {
            Recipe::ChshPair { noise, .. } => Some(noisy_joint(x, y, *noise)),
            Recipe::Deterministic { tables } => {
                if tables.iter().any(|t| t.input_len() != 1) {
                    return None;
                }
                Some(delta(tables[0].lookup(&xi), tables[1].lookup(&yi)))
            }
            Recipe::SourceCorrelated {
                knowledge, strategy, ..
            } => Some(delta(
                &strategy.answer(knowledge, 0, round, &xi),
                &strategy.answer(knowledge, 1, round, &yi),
            )),
        }
    }
}

/// Two devices sharing fresh EPR pairs and playing the optimal CHSH
/// strategy; each output is replaced by a fair coin with probability
/// `noise_eta`.
pub fn make_chsh_pair(noise_eta: f64, rng_seed: u64) -> Result<Implementation> {
    if !(0.0..=1.0).contains(&noise_eta) {
        return invalid(format!("noise_eta = {noise_eta} is outside [0, 1]"));
    }
    Ok(Implementation::build(Recipe::ChshPair {
        noise: noise_eta,
        seed: rng_seed,
    }))
}

/// Devices answering from fixed tables, with no shared randomness.
pub fn make_deterministic(tables: Vec<StrategyTable>) -> Result<Implementation> {
    if tables.is_empty() {
        return invalid("an implementation needs at least one device");
    }
    Ok(Implementation::build(Recipe::Deterministic {
        tables: tables.into_iter().map(Arc::new).collect(),
    }))
}

/// Devices told `x_knowledge(x)` at initialization.
pub fn make_source_correlated_cheater(
    x: &BitString,
    x_knowledge: impl FnOnce(&BitString) -> BitString,
    device_count: usize,
    strategy: Arc<dyn CheatStrategy>,
) -> Implementation {
    Implementation::build(Recipe::SourceCorrelated {
        knowledge: x_knowledge(x),
        device_count,
        strategy,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GameStats {
    pub rounds: usize,
    pub wins: usize,
    pub win_rate: f64,
}

/// Play `rounds` CHSH rounds against devices 0 and 1.
pub fn play_chsh(implementation: &mut Implementation, dist: &InputDistribution, rounds: usize, rng: &mut SimRng) -> GameStats {
    let mut wins = 0;
    for _ in 0..rounds {
        let (x, y) = dist.sample(rng);
        let a = implementation.query(0, &BitString::from_bools(&[x])).get(0);
        let b = implementation.query(1, &BitString::from_bools(&[y])).get(0);
        wins += chsh_wins(x, y, a, b) as usize;
    }
    GameStats {
        rounds,
        wins,
        win_rate: if rounds == 0 { 0.0 } else { wins as f64 / rounds as f64 },
    }
}

/// Exact win probability of a deterministic pair `a = f(x)`, `b = g(y)`.
pub fn deterministic_win_probability(f: [bool; 2], g: [bool; 2], dist: &InputDistribution) -> f64 {
    let mut w = 0.0;
    for x in [false, true] {
        for y in [false, true] {
            if chsh_wins(x, y, f[x as usize], g[y as usize]) {
                w += dist.p[x as usize][y as usize];
            }
        }
    }
    w
}

/// Best of the 16 deterministic strategy pairs and its win probability.
pub fn best_deterministic(dist: &InputDistribution) -> ([bool; 2], [bool; 2], f64) {
    let funcs = [[false, false], [false, true], [true, false], [true, true]];
    let mut best = (funcs[0], funcs[0], f64::NEG_INFINITY);
    for f in funcs {
        for g in funcs {
            let w = deterministic_win_probability(f, g, dist);
            if w > best.2 {
                best = (f, g, w);
            }
        }
    }
    best
}

/// A pair of one-bit tables `A: x -> f[x]`, `B: y -> g[y]`.
pub fn deterministic_pair(f: [bool; 2], g: [bool; 2]) -> Implementation {
    make_deterministic(vec![StrategyTable::from_bits("A", f), StrategyTable::from_bits("B", g)])
        .expect("two one-bit tables")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn honest_pair_is_deterministic_given_seed() {
        let run = |seed| {
            let mut imp = make_chsh_pair(0.05, seed).unwrap();
            let mut rng = SimRng::new(9);
            (0..200)
                .map(|_| {
                    let (x, y) = InputDistribution::uniform().sample(&mut rng);
                    (imp.query(0, &BitString::from_bools(&[x])), imp.query(1, &BitString::from_bools(&[y])))
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(4), run(4));
        assert_ne!(run(4), run(5));
    }

    #[test]
    fn deterministic_bound_is_three_quarters() {
        let (_, _, w) = best_deterministic(&InputDistribution::uniform());
        assert_eq!(w, 0.75);
        assert_eq!(
            deterministic_win_probability([false; 2], [false; 2], &InputDistribution::uniform()),
            0.75
        );
        let mut zero = deterministic_pair([false; 2], [false; 2]);
        let stats = play_chsh(&mut zero, &InputDistribution::new([[0.0, 0.0], [0.0, 1.0]]).unwrap(), 100, &mut SimRng::new(1));
        assert_eq!(stats.wins, 0);
    }

    #[test]
    fn honest_pair_win_rate() {
        let mut imp = make_chsh_pair(0.0, 11).unwrap();
        let s = play_chsh(&mut imp, &InputDistribution::uniform(), 100_000, &mut SimRng::new(2));
        assert!((s.win_rate - quantum_win()).abs() < 0.01, "{}", s.win_rate);
        let mut imp = make_chsh_pair(1.0, 11).unwrap();
        let s = play_chsh(&mut imp, &InputDistribution::uniform(), 100_000, &mut SimRng::new(2));
        assert!((s.win_rate - 0.5).abs() < 0.01, "{}", s.win_rate);
        assert!(make_chsh_pair(1.5, 0).is_err());
    }

    #[test]
    fn no_communication_between_devices() {
        // B's marginal must not depend on what A was asked.
        let trials = 40_000;
        let mut ones = [0usize; 2];
        for (slot, a_input) in [false, true].into_iter().enumerate() {
            let mut imp = make_chsh_pair(0.0, 77).unwrap();
            for _ in 0..trials {
                imp.query(0, &BitString::from_bools(&[a_input]));
                ones[slot] += imp.query(1, &BitString::from_bools(&[false])).get(0) as usize;
            }
        }
        let p0 = ones[0] as f64 / trials as f64;
        let p1 = ones[1] as f64 / trials as f64;
        let sigma = (0.25 / trials as f64).sqrt();
        assert!((p0 - p1).abs() < 4.0 * sigma * 2f64.sqrt(), "{p0} vs {p1}");

        // Classical devices: mutating one leaves the other's outputs identical.
        let make = || {
            make_source_correlated_cheater(
                &BitString::from_u64(1, 1),
                |x| x.clone(),
                2,
                Arc::new(SwitchOnKnowledge {
                    tables: vec![
                        vec![StrategyTable::from_bits("A", [false, true]), StrategyTable::from_bits("B", [true, false])];
                        2
                    ],
                }),
            )
        };
        let (mut u, mut v) = (make(), make());
        for _ in 0..5 {
            v.query(0, &BitString::from_bools(&[true]));
        }
        for _ in 0..10 {
            let y = BitString::from_bools(&[true]);
            assert_eq!(u.query(1, &y), v.query(1, &y));
        }
    }

    #[test]
    fn round_distributions() {
        let imp = make_chsh_pair(0.1, 0).unwrap();
        let p = imp.round_distribution(3, true, false).unwrap();
        assert!((p.iter().flatten().sum::<f64>() - 1.0).abs() < 1e-15);
        let det = deterministic_pair([false, true], [true, true]);
        assert_eq!(det.round_distribution(0, true, false).unwrap(), [[0.0, 0.0], [0.0, 1.0]]);
        let mut fresh = det.fresh();
        assert_eq!(fresh.query(0, &BitString::from_bools(&[true])).to_string(), "1");
    }

    #[test]
    fn knowledge_switch_interpolates() {
        // Strategy 0 is the best classical pair, strategy 1 always loses on (1,1).
        let good = vec![StrategyTable::from_bits("A", [false, false]), StrategyTable::from_bits("B", [false, false])];
        let bad = vec![StrategyTable::from_bits("A", [true, true]), StrategyTable::from_bits("B", [false, false])];
        let strategy: Arc<dyn CheatStrategy> = Arc::new(SwitchOnKnowledge {
            tables: vec![good, bad],
        });
        let rate = |bit: bool| {
            let mut imp = make_source_correlated_cheater(
                &BitString::from_bools(&[bit, true]),
                |x| x.slice(0, 1),
                2,
                Arc::clone(&strategy),
            );
            play_chsh(&mut imp, &InputDistribution::uniform(), 4000, &mut SimRng::new(5)).win_rate
        };
        let (r0, r1) = (rate(false), rate(true));
        let mut mixed = 0.0;
        let mut rng = SimRng::new(6);
        for _ in 0..100 {
            mixed += rate(rng.bit());
        }
        mixed /= 100.0;
        assert!(mixed >= r0.min(r1) && mixed <= r0.max(r1));
    }
}
