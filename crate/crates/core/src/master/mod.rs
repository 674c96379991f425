//! The all-seed master protocol.
//!
//! For every seed `i` of the extractor, `S_i = Ext(X, i)` seeds one run of
//! the seeded protocol on its own pair of devices. The master rejects iff
//! at least an `η` fraction of the runs reject; otherwise it outputs the
//! XOR of the accepted outputs (rejected runs count as `0^l`).

mod gallery;
mod probe;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::device::{Implementation, Recipe};
use crate::error::{invalid, Error, Result};
use crate::extractor::{enumerate_blocks, ExtractorSpec};
use crate::rng::SimRng;
use crate::seeded_pre::{run_seeded_pre_with, ProtocolOutcome, SeededPreSpec};

pub use gallery::{Gallery, ReplayStrategy, SourceTable};
pub use probe::{
    soundness_probe, soundness_probe_exact, soundness_probe_mc, xor_distribution, ProbeMode, ProbeReport,
};

/// Largest seed length the master enumerates (`2^d` device pairs).
pub const MAX_MASTER_SEED_BITS: usize = 10;

/// Devices per seeded run.
pub const DEVICES_PER_INSTANCE: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MasterSpec {
    pub ext: ExtractorSpec,
    pub seeded: SeededPreSpec,
    pub eta: f64,
}

impl MasterSpec {
    pub fn new(ext: ExtractorSpec, seeded: SeededPreSpec, eta: f64) -> Result<Self> {
        let s = Self { ext, seeded, eta };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.seeded.validate()?;
        if self.ext.m() != self.seeded.seed_len {
            return invalid(format!(
                "ext.m = {} must equal the seeded protocol's seed_len = {}",
                self.ext.m(),
                self.seeded.seed_len
            ));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return invalid(format!("eta = {} is outside (0, 1]", self.eta));
        }
        if self.ext.d() > MAX_MASTER_SEED_BITS {
            return Err(Error::ResourceLimit(format!(
                "2^{} seeded runs exceeds the cap of 2^{MAX_MASTER_SEED_BITS}",
                self.ext.d()
            )));
        }
        Ok(())
    }

    pub fn instance_count(&self) -> usize {
        1 << self.ext.d()
    }

    pub fn device_budget(&self) -> usize {
        self.instance_count() * DEVICES_PER_INSTANCE
    }

    /// Number of rejecting runs at which the master rejects.
    pub fn reject_count_threshold(&self) -> usize {
        reject_count_threshold(self.eta, self.instance_count())
    }
}

/// `⌈η·N⌉` (at least 1): the master rejects iff this many runs reject.
pub fn reject_count_threshold(eta: f64, instances: usize) -> usize {
    ((eta * instances as f64 - 1e-9).ceil().max(1.0)) as usize
}

/// Reject iff the rejecting fraction is at least `eta`.
pub fn threshold_decision(accept_mask: &[bool], eta: f64) -> bool {
    let rejects = accept_mask.iter().filter(|a| !**a).count();
    rejects < reject_count_threshold(eta, accept_mask.len())
}

/// XOR of the accepted blocks; rejected blocks contribute zero.
pub fn xor_combine(blocks: &[BitString], accept_mask: &[bool]) -> Result<BitString> {
    if blocks.len() != accept_mask.len() {
        return invalid(format!("{} blocks but {} accept flags", blocks.len(), accept_mask.len()));
    }
    let mut acc: Option<BitString> = None;
    for (b, &ok) in blocks.iter().zip(accept_mask) {
        if !ok {
            continue;
        }
        match acc.as_mut() {
            None => acc = Some(b.clone()),
            Some(z) => z.xor_assign(b)?,
        }
    }
    Ok(acc.unwrap_or_else(|| BitString::zeros(blocks.iter().map(BitString::len).max().unwrap_or(0))))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorLedger {
    pub eps_ext: f64,
    pub eps_c: f64,
    pub eps_s: f64,
    pub eta: f64,
    pub completeness_bound: f64,
    pub soundness_bound: f64,
}

/// Completeness `(ε_c + ε_Ext)/η` and soundness `ε_s + 2√ε_Ext + η`.
pub fn error_bounds(eps_ext: f64, eps_c: f64, eps_s: f64, eta: f64) -> Result<ErrorLedger> {
    for (name, v) in [("eps_ext", eps_ext), ("eps_c", eps_c), ("eps_s", eps_s), ("eta", eta)] {
        if !(0.0..=1.0).contains(&v) {
            return invalid(format!("{name} = {v} is outside [0, 1]"));
        }
    }
    if eta == 0.0 {
        return invalid("eta must be positive");
    }
    Ok(ErrorLedger {
        eps_ext,
        eps_c,
        eps_s,
        eta,
        completeness_bound: (eps_c + eps_ext) / eta,
        soundness_bound: eps_s + 2.0 * eps_ext.sqrt() + eta,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MasterOutcome {
    pub accepted: bool,
    pub output: BitString,
    pub rejects: usize,
    pub reject_threshold: usize,
    pub instances: Vec<ProtocolOutcome>,
}

#[derive(Clone, Debug, Serialize)]
pub struct InstanceSummary {
    pub index: usize,
    pub accepted: bool,
    pub win_rate: f64,
    pub wins: usize,
}

impl MasterOutcome {
    pub fn instance_summaries(&self) -> Vec<InstanceSummary> {
        self.instances
            .iter()
            .enumerate()
            .map(|(index, o)| InstanceSummary {
                index,
                accepted: o.accepted,
                win_rate: o.stats.win_rate,
                wins: o.stats.wins,
            })
            .collect()
    }
}

/// One seeded run from a fresh copy of `recipe`. The devices see the source
/// only through `s_i`.
pub fn run_instance(seeded: &SeededPreSpec, s_i: &BitString, recipe: &Recipe, keep_transcript: bool) -> Result<ProtocolOutcome> {
    let mut imp = Implementation::build(recipe.clone());
    run_seeded_pre_with(seeded, s_i, &mut imp, keep_transcript)
}

pub fn run_master(spec: &MasterSpec, x: &BitString, impls: &[Implementation], rng_seed: u64) -> Result<MasterOutcome> {
    run_master_with(spec, x, impls, rng_seed, true)
}

/// Run the master protocol. Each implementation runs from a fresh copy of
/// its recipe whose randomness (if any) is re-derived from `rng_seed` and
/// the seed index.
pub fn run_master_with(
    spec: &MasterSpec,
    x: &BitString,
    impls: &[Implementation],
    rng_seed: u64,
    keep_transcripts: bool,
) -> Result<MasterOutcome> {
    spec.validate()?;
    if x.len() != spec.ext.n() {
        return invalid(format!("source has {} bits, extractor expects n = {}", x.len(), spec.ext.n()));
    }
    if impls.len() != spec.instance_count() {
        return invalid(format!(
            "{} implementations supplied, 2^d = {} required",
            impls.len(),
            spec.instance_count()
        ));
    }
    let seeds = enumerate_blocks(&spec.ext, x)?;
    let root = SimRng::new(rng_seed);
    let recipes: Vec<Recipe> = impls
        .iter()
        .enumerate()
        .map(|(i, imp)| imp.recipe().reseeded(root.fork(i as u64).next_u64()))
        .collect();
    let instances = seeds
        .par_iter()
        .zip(recipes.par_iter())
        .map(|(s, r)| run_instance(&spec.seeded, s, r, keep_transcripts))
        .collect::<Result<Vec<_>>>()?;

    let mask: Vec<bool> = instances.iter().map(|o| o.accepted).collect();
    let rejects = mask.iter().filter(|a| !**a).count();
    let accepted = threshold_decision(&mask, spec.eta);
    let output = if accepted {
        let l = spec.seeded.output_len;
        let blocks: Vec<BitString> = instances
            .iter()
            .map(|o| if o.accepted { o.output.clone() } else { BitString::zeros(l) })
            .collect();
        xor_combine(&blocks, &vec![true; blocks.len()])?
    } else {
        BitString::zeros(0)
    };
    Ok(MasterOutcome {
        accepted,
        output,
        rejects,
        reject_threshold: spec.reject_count_threshold(),
        instances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{make_source_correlated_cheater, CheatStrategy};
    use crate::seeded_pre::DEFAULT_DELTA;
    use std::sync::Arc;

    pub(crate) fn small_spec(d: usize, eta: f64) -> MasterSpec {
        let rounds = 64;
        let post = ExtractorSpec::one_bit(2 * rounds, 8, 64).unwrap();
        let seeded = SeededPreSpec::minimal(rounds, DEFAULT_DELTA, post).unwrap();
        let ext = ExtractorSpec::seed_copies(16, d, seeded.seed_len, 8, 1.0).unwrap();
        MasterSpec::new(ext, seeded, eta).unwrap()
    }

    #[test]
    fn ledger_examples() {
        let l = error_bounds(0.0, 0.0, 0.0, 0.1).unwrap();
        assert_eq!((l.completeness_bound, l.soundness_bound), (0.0, 0.1));
        let l = error_bounds(0.01, 0.02, 0.05, 0.1).unwrap();
        assert!((l.completeness_bound - 0.3).abs() < 1e-15);
        assert!((l.soundness_bound - 0.35).abs() < 1e-15);
        let l = error_bounds(0.01, 0.0, 0.05, 0.01f64.sqrt()).unwrap();
        assert!((l.soundness_bound - 0.35).abs() < 1e-15);
        assert!(error_bounds(0.1, 0.1, 0.1, 0.0).is_err());
        assert!(error_bounds(1.5, 0.1, 0.1, 0.1).is_err());
    }

    #[test]
    fn xor_combine_examples() {
        let a = BitString::parse_binary("1011").unwrap();
        assert_eq!(xor_combine(&[a.clone()], &[true]).unwrap(), a);
        assert_eq!(xor_combine(&[a.clone(), a.clone()], &[true, true]).unwrap(), BitString::zeros(4));
        assert_eq!(xor_combine(&[a.clone(), BitString::zeros(0)], &[true, false]).unwrap(), a);
        assert!(xor_combine(&[a.clone(), BitString::zeros(3)], &[true, true]).is_err());
        assert!(xor_combine(&[a], &[]).is_err());
    }

    /// Knows its slot's round inputs and always wins or always loses.
    struct Forced {
        xs: Vec<bool>,
        win: bool,
    }

    impl CheatStrategy for Forced {
        fn answer(&self, _k: &BitString, device: usize, round: usize, input: &BitString) -> BitString {
            let out = if device == 0 { false } else { (self.xs[round] & input.get(0)) ^ !self.win };
            BitString::from_bools(&[out])
        }
    }

    fn forced(spec: &MasterSpec, x: &BitString, slot: usize, win: bool) -> Implementation {
        let s = crate::extractor::extract(&spec.ext, x, &BitString::from_u64(slot as u64, spec.ext.d())).unwrap();
        let xs = (0..spec.seeded.rounds).map(|j| s.get(2 * j)).collect();
        make_source_correlated_cheater(x, |x| x.clone(), 2, Arc::new(Forced { xs, win }))
    }

    #[test]
    fn threshold_semantics_are_exact() {
        for (d, eta) in [(3, 0.3), (3, 0.5), (4, 0.25), (2, 1.0), (0, 0.7)] {
            let spec = small_spec(d, eta);
            let x = BitString::from_u64(0xBEEF, 16);
            let n = spec.instance_count();
            let thr = (eta * n as f64).ceil() as usize;
            assert_eq!(spec.reject_count_threshold(), thr.max(1));
            for forced_rejects in [thr.max(1) - 1, thr.max(1)] {
                let impls: Vec<_> = (0..n).map(|i| forced(&spec, &x, i, i >= forced_rejects)).collect();
                let out = run_master(&spec, &x, &impls, 1).unwrap();
                assert_eq!(out.rejects, forced_rejects);
                assert_eq!(out.accepted, forced_rejects < thr.max(1), "d={d} eta={eta}");
                if out.accepted {
                    assert_eq!(out.output.len(), spec.seeded.output_len);
                } else {
                    assert!(out.output.is_empty());
                }
            }
        }
    }

    #[test]
    fn single_seed_reduces_to_seeded_run() {
        let spec = small_spec(0, 0.9);
        let x = BitString::from_u64(0x1234, 16);
        let imp = crate::device::make_chsh_pair(0.0, 0).unwrap();
        let out = run_master(&spec, &x, &[imp], 5).unwrap();
        let s0 = crate::extractor::extract(&spec.ext, &x, &BitString::zeros(0)).unwrap();
        let recipe = out_recipe(5);
        let direct = run_instance(&spec.seeded, &s0, &recipe, true).unwrap();
        assert_eq!(out.instances[0], direct);
        assert_eq!(out.accepted, direct.accepted);
        if direct.accepted {
            assert_eq!(out.output, direct.output);
        }
    }

    fn out_recipe(rng_seed: u64) -> Recipe {
        crate::device::make_chsh_pair(0.0, 0)
            .unwrap()
            .recipe()
            .reseeded(SimRng::new(rng_seed).fork(0).next_u64())
    }

    #[test]
    fn devices_see_source_only_through_seeds() {
        // Two sources with identical S_i for every i give identical runs.
        let spec = small_spec(2, 0.5);
        let x = BitString::from_u64(0x00FF, 16);
        let impls: Vec<_> = (0..4).map(|i| crate::device::make_chsh_pair(0.01, i).unwrap()).collect();
        let out = run_master(&spec, &x, &impls, 9).unwrap();
        let seeds = enumerate_blocks(&spec.ext, &x).unwrap();
        let root = SimRng::new(9);
        for (i, s) in seeds.iter().enumerate() {
            let r = impls[i].recipe().reseeded(root.fork(i as u64).next_u64());
            assert_eq!(run_instance(&spec.seeded, s, &r, true).unwrap(), out.instances[i]);
        }
    }

    #[test]
    fn spec_validation() {
        let base = small_spec(2, 0.5);
        assert!(MasterSpec::new(base.ext.clone(), base.seeded.clone(), 0.0).is_err());
        let bad_ext = ExtractorSpec::seed_copies(16, 2, base.seeded.seed_len + 1, 8, 1.0).unwrap();
        assert!(MasterSpec::new(bad_ext, base.seeded.clone(), 0.5).is_err());
        let big = ExtractorSpec::seed_copies(16, 11, base.seeded.seed_len, 8, 1.0).unwrap();
        assert!(matches!(MasterSpec::new(big, base.seeded.clone(), 0.5), Err(Error::ResourceLimit(_))));
        let x = BitString::zeros(16);
        assert!(run_master(&base, &x, &[], 0).is_err());
        assert!(run_master(&base, &BitString::zeros(15), &[], 0).is_err());
    }
}
