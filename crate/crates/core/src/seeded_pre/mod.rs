//! A toy seeded randomness-expansion protocol and cross-feeding.
//!
//! Every round is a CHSH round whose two inputs are read straight from the
//! seed: round `j` uses seed bits `2j` and `2j + 1`. The bits after the
//! round inputs seed the output hash. The run accepts iff the empirical win
//! rate reaches the threshold, and then outputs
//! `Ext(a0 b0 a1 b1 ..., hashing seed)`.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::bits::BitString;
use crate::device::{chsh_wins, quantum_win, Implementation, CLASSICAL_WIN};
use crate::error::{invalid, Error, Result};
use crate::extractor::{extract, ExtractorSpec};
use crate::rng::SimRng;

/// Default gap between the quantum optimum and the win threshold.
pub const DEFAULT_DELTA: f64 = 0.02;

/// 95% two-sided normal quantile used for Wilson intervals.
const Z95: f64 = 1.959_963_984_540_054;

fn default_game_bits() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeededPreSpec {
    pub seed_len: usize,
    pub rounds: usize,
    #[serde(default = "default_game_bits")]
    pub game_bits_per_round: usize,
    pub win_threshold: f64,
    pub output_len: usize,
    pub post_ext: ExtractorSpec,
}

/// Where each part of the seed goes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedLayout {
    pub round_inputs: Range<usize>,
    pub hashing: Range<usize>,
}

impl SeededPreSpec {
    pub fn new(
        seed_len: usize,
        rounds: usize,
        win_threshold: f64,
        output_len: usize,
        post_ext: ExtractorSpec,
    ) -> Result<Self> {
        let spec = Self {
            seed_len,
            rounds,
            game_bits_per_round: 2,
            win_threshold,
            output_len,
            post_ext,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Spec with the smallest seed and the threshold `cos²(π/8) − delta`.
    pub fn minimal(rounds: usize, delta: f64, post_ext: ExtractorSpec) -> Result<Self> {
        let seed_len = 2 * rounds + post_ext.d();
        let l = post_ext.m();
        Self::new(seed_len, rounds, quantum_win() - delta, l, post_ext)
    }

    pub fn validate(&self) -> Result<()> {
        if self.game_bits_per_round != 2 {
            return invalid("game_bits_per_round must be 2");
        }
        let q = quantum_win();
        if !(self.win_threshold > CLASSICAL_WIN && self.win_threshold < q) {
            return invalid(format!(
                "win_threshold = {} must lie strictly between 0.75 and {q:.6}",
                self.win_threshold
            ));
        }
        let needed = 2 * self.rounds + self.post_ext.d();
        if self.seed_len < needed {
            return invalid(format!(
                "seed_len = {} is below 2R + post_ext.d = {needed}",
                self.seed_len
            ));
        }
        if self.rounds > 0 && self.post_ext.n() != 2 * self.rounds {
            return invalid(format!(
                "post_ext.n = {} must equal the 2R = {} device output bits",
                self.post_ext.n(),
                2 * self.rounds
            ));
        }
        if self.post_ext.m() != self.output_len {
            return invalid(format!(
                "post_ext.m = {} must equal output_len = {}",
                self.post_ext.m(),
                self.output_len
            ));
        }
        Ok(())
    }

    /// Smallest win count with `wins / R >= win_threshold`.
    pub fn min_wins(&self) -> usize {
        min_wins(self.rounds, self.win_threshold)
    }

    pub fn layout(&self) -> SeedLayout {
        let r = 2 * self.rounds;
        SeedLayout {
            round_inputs: 0..r,
            hashing: r..r + self.post_ext.d(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub x: bool,
    pub y: bool,
    pub a: bool,
    pub b: bool,
}

impl RoundRecord {
    pub fn win(&self) -> bool {
        chsh_wins(self.x, self.y, self.a, self.b)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeStats {
    pub rounds: usize,
    pub wins: usize,
    pub win_rate: f64,
    /// Per-device fair-coin rate that would explain the observed win rate.
    pub noise_estimate: f64,
    /// Set for `R = 0`, where acceptance is vacuous.
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolOutcome {
    pub accepted: bool,
    pub output: BitString,
    pub transcript: Vec<RoundRecord>,
    pub stats: OutcomeStats,
}

#[derive(Serialize)]
struct OutcomeReport<'a> {
    decision: u8,
    output_hex: String,
    output_bits: usize,
    win_rate: f64,
    rounds: usize,
    config_hash: String,
    stats: &'a OutcomeStats,
}

impl ProtocolOutcome {
    /// JSON report: decision, output hex, win rate, round count, config hash.
    pub fn report(&self, spec: &SeededPreSpec) -> Result<serde_json::Value> {
        Ok(serde_json::to_value(OutcomeReport {
            decision: self.accepted as u8,
            output_hex: self.output.to_hex(),
            output_bits: self.output.len(),
            win_rate: self.stats.win_rate,
            rounds: self.stats.rounds,
            config_hash: crate::harness::config_hash(spec)?,
            stats: &self.stats,
        })?)
    }
}

/// Invert `w = q − (1 − (1 − η)²)(q − ½)` for `η`, clamped to `[0, 1]`.
pub fn noise_from_win_rate(w: f64) -> f64 {
    let q = quantum_win();
    let frac = ((q - w) / (q - 0.5)).clamp(0.0, 1.0);
    1.0 - (1.0 - frac).sqrt()
}

pub fn run_seeded_pre(spec: &SeededPreSpec, seed: &BitString, implementation: &mut Implementation) -> Result<ProtocolOutcome> {
    run_seeded_pre_with(spec, seed, implementation, true)
}

/// As [`run_seeded_pre`]; `keep_transcript = false` leaves the transcript empty.
pub fn run_seeded_pre_with(
    spec: &SeededPreSpec,
    seed: &BitString,
    implementation: &mut Implementation,
    keep_transcript: bool,
) -> Result<ProtocolOutcome> {
    spec.validate()?;
    if seed.len() != spec.seed_len {
        return invalid(format!("seed has {} bits, spec expects {}", seed.len(), spec.seed_len));
    }
    if implementation.device_count() != 2 {
        return invalid(format!(
            "the seeded protocol needs exactly 2 devices, got {}",
            implementation.device_count()
        ));
    }
    let r = spec.rounds;
    let mut transcript = Vec::with_capacity(if keep_transcript { r } else { 0 });
    let mut raw = BitString::zeros(2 * r);
    let mut wins = 0usize;
    for j in 0..r {
        let x = seed.get(2 * j);
        let y = seed.get(2 * j + 1);
        let a = implementation.query(0, &BitString::from_bools(&[x])).get(0);
        let b = implementation.query(1, &BitString::from_bools(&[y])).get(0);
        raw.set(2 * j, a);
        raw.set(2 * j + 1, b);
        let rec = RoundRecord { x, y, a, b };
        wins += rec.win() as usize;
        if keep_transcript {
            transcript.push(rec);
        }
    }
    let degenerate = r == 0;
    let win_rate = if degenerate { 1.0 } else { wins as f64 / r as f64 };
    let accepted = degenerate || wins >= spec.min_wins();
    let output = if !accepted {
        BitString::zeros(0)
    } else {
        let layout = spec.layout();
        let y = seed.slice(layout.hashing.start, layout.hashing.end);
        let input = if degenerate { BitString::zeros(spec.post_ext.n()) } else { raw };
        extract(&spec.post_ext, &input, &y)?
    };
    Ok(ProtocolOutcome {
        accepted,
        output,
        transcript,
        stats: OutcomeStats {
            rounds: r,
            wins,
            win_rate,
            noise_estimate: if degenerate { 0.0 } else { noise_from_win_rate(win_rate) },
            degenerate,
        },
    })
}

/// Smallest `w` with `w / rounds >= threshold` (in floating point, as the
/// protocol compares).
pub fn min_wins(rounds: usize, threshold: f64) -> usize {
    if rounds == 0 {
        return 0;
    }
    let r = rounds as f64;
    let mut w = ((threshold * r).ceil().max(0.0) as usize).min(rounds + 1);
    while w > 0 && (w - 1) as f64 / r >= threshold {
        w -= 1;
    }
    while w <= rounds && (w as f64 / r) < threshold {
        w += 1;
    }
    w
}

/// `P[Bin(rounds, p) >= k]`.
pub fn binomial_upper_tail(rounds: usize, p: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > rounds {
        return 0.0;
    }
    let b = Binomial::new(p.clamp(0.0, 1.0), rounds as u64).expect("valid binomial");
    b.sf(k as u64 - 1)
}

/// Probability that devices winning each round independently with
/// probability `CLASSICAL_WIN` pass the threshold. Used as the empirical
/// soundness error of this protocol against classical cheaters.
pub fn classical_pass_probability(spec: &SeededPreSpec) -> f64 {
    if spec.rounds == 0 {
        return 1.0;
    }
    binomial_upper_tail(spec.rounds, CLASSICAL_WIN, spec.min_wins())
}

/// Probability that an honest pair with per-device noise `eta` is rejected.
pub fn honest_reject_probability(spec: &SeededPreSpec, eta: f64) -> f64 {
    if spec.rounds == 0 {
        return 0.0;
    }
    let q = quantum_win();
    let w = q - (1.0 - (1.0 - eta) * (1.0 - eta)) * (q - 0.5);
    let k = spec.min_wins();
    if k == 0 {
        return 0.0;
    }
    let b = Binomial::new(w.clamp(0.0, 1.0), spec.rounds as u64).expect("valid binomial");
    b.cdf(k as u64 - 1)
}

/// A uniformly random bit string.
pub fn random_bits(len: usize, rng: &mut SimRng) -> BitString {
    let mut b = BitString::zeros(len);
    for i in 0..len {
        b.set(i, rng.bit());
    }
    b
}

/// Acceptance rate with a Wilson 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub successes: usize,
    pub trials: usize,
    pub rate: f64,
    pub low: f64,
    pub high: f64,
}

impl RateEstimate {
    pub fn from_counts(successes: usize, trials: usize) -> Self {
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        Self {
            successes,
            trials,
            rate: p,
            low: (centre - half).max(0.0),
            high: (centre + half).min(1.0),
        }
    }
}

/// Monte Carlo acceptance probability with fresh uniform seeds; honest pairs
/// are reseeded per trial.
pub fn completeness_estimate(
    spec: &SeededPreSpec,
    implementation: &Implementation,
    trials: usize,
    rng_seed: u64,
) -> Result<RateEstimate> {
    if trials == 0 {
        return invalid("completeness_estimate needs trials >= 1");
    }
    spec.validate()?;
    let root = SimRng::new(rng_seed);
    let recipe = implementation.recipe();
    let accepted = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = root.fork(t as u64);
            let seed = random_bits(spec.seed_len, &mut rng);
            let mut imp = Implementation::build(recipe.reseeded(rand::RngCore::next_u64(&mut rng)));
            run_seeded_pre_with(spec, &seed, &mut imp, false).map(|o| o.accepted as usize)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(RateEstimate::from_counts(accepted, trials))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossFeedOutcome {
    pub accepted: bool,
    pub output: BitString,
    pub steps: Vec<OutcomeStats>,
}

/// Alternate `spec_a` and `spec_b`, seeding each run with the prefix of the
/// previous output. Stops at the first reject.
pub fn cross_feed(
    spec_a: &SeededPreSpec,
    spec_b: &SeededPreSpec,
    impl_a: &mut Implementation,
    impl_b: &mut Implementation,
    initial_seed: &BitString,
    iterations: usize,
) -> Result<CrossFeedOutcome> {
    if iterations == 0 {
        return invalid("cross_feed needs iterations >= 1");
    }
    if spec_a.output_len < spec_b.seed_len || spec_b.output_len < spec_a.seed_len {
        return Err(Error::InvalidArgument(format!(
            "output lengths ({}, {}) must cover the other protocol's seed length ({}, {})",
            spec_a.output_len, spec_b.output_len, spec_b.seed_len, spec_a.seed_len
        )));
    }
    if initial_seed.len() != spec_a.seed_len {
        return invalid(format!(
            "initial seed has {} bits, first protocol expects {}",
            initial_seed.len(),
            spec_a.seed_len
        ));
    }
    let mut seed = initial_seed.clone();
    let mut steps = Vec::with_capacity(iterations);
    let mut output = BitString::zeros(0);
    for k in 0..iterations {
        let (spec, imp) = if k % 2 == 0 {
            (spec_a, &mut *impl_a)
        } else {
            (spec_b, &mut *impl_b)
        };
        let seed_now = seed.slice(0, spec.seed_len);
        let out = run_seeded_pre_with(spec, &seed_now, imp, false)?;
        steps.push(out.stats.clone());
        if !out.accepted {
            return Ok(CrossFeedOutcome {
                accepted: false,
                output: BitString::zeros(0),
                steps,
            });
        }
        output = out.output;
        seed = output.clone();
    }
    Ok(CrossFeedOutcome {
        accepted: true,
        output,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{deterministic_pair, make_chsh_pair};

    fn spec(rounds: usize, l: usize) -> SeededPreSpec {
        let ext = ExtractorSpec::trevisan(2 * rounds, 16, l, 4, l, 0.1).unwrap();
        SeededPreSpec::minimal(rounds, DEFAULT_DELTA, ext).unwrap()
    }

    #[test]
    fn layout_is_disjoint() {
        let s = spec(100, 8);
        let l = s.layout();
        assert_eq!(l.round_inputs.end, l.hashing.start);
        assert_eq!(l.hashing.end, s.seed_len);
    }

    #[test]
    fn honest_accepts_and_cheater_rejects() {
        let s = spec(2000, 8);
        let seed = random_bits(s.seed_len, &mut SimRng::new(1));
        let mut honest = make_chsh_pair(0.0, 3).unwrap();
        let out = run_seeded_pre(&s, &seed, &mut honest).unwrap();
        assert!(out.accepted);
        assert_eq!(out.output.len(), 8);
        assert_eq!(out.transcript.len(), 2000);
        let mut cheat = deterministic_pair([false; 2], [false; 2]);
        let out = run_seeded_pre(&s, &seed, &mut cheat).unwrap();
        assert!(!out.accepted);
        assert!(out.output.is_empty());
    }

    #[test]
    fn deterministic_given_seeds() {
        let s = spec(500, 8);
        let seed = random_bits(s.seed_len, &mut SimRng::new(2));
        let a = run_seeded_pre(&s, &seed, &mut make_chsh_pair(0.05, 9).unwrap()).unwrap();
        let b = run_seeded_pre(&s, &seed, &mut make_chsh_pair(0.05, 9).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_rounds_is_vacuous_accept() {
        let ext = ExtractorSpec::seed_copies(1, 4, 6, 1, 1.0).unwrap();
        let s = SeededPreSpec::minimal(0, DEFAULT_DELTA, ext).unwrap();
        let out = run_seeded_pre(&s, &BitString::from_u64(5, 4), &mut make_chsh_pair(0.0, 0).unwrap()).unwrap();
        assert!(out.accepted && out.stats.degenerate);
        assert_eq!(out.output, BitString::zeros(6));
    }

    #[test]
    fn validation_errors() {
        let s = spec(10, 4);
        let mut three = crate::device::make_deterministic(vec![
            crate::device::StrategyTable::from_bits("A", [false; 2]),
            crate::device::StrategyTable::from_bits("B", [false; 2]),
            crate::device::StrategyTable::from_bits("C", [false; 2]),
        ])
        .unwrap();
        assert!(run_seeded_pre(&s, &BitString::zeros(s.seed_len), &mut three).is_err());
        assert!(run_seeded_pre(&s, &BitString::zeros(s.seed_len + 1), &mut make_chsh_pair(0.0, 0).unwrap()).is_err());
        let mut bad = s.clone();
        bad.win_threshold = 0.9;
        assert!(bad.validate().is_err());
        bad.win_threshold = 0.8;
        bad.seed_len -= 1;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn min_wins_matches_float_comparison() {
        for rounds in [1usize, 7, 100, 10_000] {
            for thr in [0.8, 0.83, quantum_win() - 0.02, 0.76] {
                let w = min_wins(rounds, thr);
                assert!(w as f64 / rounds as f64 >= thr);
                assert!(w == 0 || ((w - 1) as f64 / rounds as f64) < thr);
            }
        }
    }

    #[test]
    fn binomial_tails_by_direct_sum() {
        // Direct sum of the binomial pmf as the oracle.
        let (n, p, k) = (30usize, 0.75f64, 25usize);
        let mut direct = 0.0;
        for j in k..=n {
            let mut c = 1.0;
            for i in 0..j {
                c *= (n - i) as f64 / (i + 1) as f64;
            }
            direct += c * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32);
        }
        assert!((binomial_upper_tail(n, p, k) - direct).abs() < 1e-12);
        let s = spec(10_000, 4);
        assert!(classical_pass_probability(&s) < 1e-50, "{}", classical_pass_probability(&s));
        let r = honest_reject_probability(&s, 0.0);
        assert!(r > 0.0 && r < 1e-6, "{r}");
    }

    #[test]
    fn wilson_interval_brackets_rate() {
        let e = RateEstimate::from_counts(190, 200);
        assert!(e.low < 0.95 && e.high > 0.95);
        let e = RateEstimate::from_counts(0, 50);
        assert!(e.low < 1e-15);
        assert!(e.high > 0.0 && e.high < 0.1);
    }

    #[test]
    fn noise_inversion_round_trips() {
        for eta in [0.0, 0.02, 0.1, 0.5, 1.0] {
            let w = quantum_win() - (1.0 - (1.0 - eta) * (1.0 - eta)) * (quantum_win() - 0.5);
            assert!((noise_from_win_rate(w) - eta).abs() < 1e-9);
        }
    }

    #[test]
    fn cross_feed_single_iteration_matches_direct_run() {
        let ext_a = ExtractorSpec::trevisan(400, 64, 500, 8, 100, 0.1).unwrap();
        let a = SeededPreSpec::minimal(200, DEFAULT_DELTA, ext_a).unwrap();
        let ext_b = ExtractorSpec::trevisan(400, 64, 500, 8, 100, 0.1).unwrap();
        let b = SeededPreSpec::new(464, 200, quantum_win() - DEFAULT_DELTA, 500, ext_b).unwrap();
        let seed = random_bits(a.seed_len, &mut SimRng::new(4));
        let direct = run_seeded_pre(&a, &seed, &mut make_chsh_pair(0.0, 5).unwrap()).unwrap();
        let fed = cross_feed(
            &a,
            &b,
            &mut make_chsh_pair(0.0, 5).unwrap(),
            &mut make_chsh_pair(0.0, 6).unwrap(),
            &seed,
            1,
        )
        .unwrap();
        assert_eq!(fed.accepted, direct.accepted);
        assert_eq!(fed.output, direct.output);
        assert!(cross_feed(&a, &spec(10, 4), &mut make_chsh_pair(0.0, 5).unwrap(), &mut make_chsh_pair(0.0, 6).unwrap(), &seed, 2).is_err());
    }
}
