//! Soundness probes against the adversary gallery.

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gallery::{Gallery, SourceTable};
use super::{error_bounds, run_master_with, ErrorLedger, MasterSpec};
use crate::bits::BitString;
use crate::device::{chsh_wins, Implementation};
use crate::error::{invalid, Error, Result};
use crate::extractor::{enumerate_blocks, extract};
use crate::rng::SimRng;
use crate::seeded_pre::{classical_pass_probability, honest_reject_probability};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMode {
    Exact,
    MonteCarlo,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub gallery: String,
    pub mode: ProbeMode,
    /// `"source"` when the distance is taken jointly with the source value,
    /// `"none"` when only the output histogram is available.
    pub side_information: String,
    pub trials: usize,
    pub accept_probability: f64,
    /// Distance of the accepted (subnormalized) output from the closest
    /// uniform one: `Σ_x p(x) min_c Σ_z |P(A=1, Z=z | x) − c|`.
    pub weighted_distance: f64,
    /// `weighted_distance / accept_probability` (0 if never accepted).
    pub conditional_distance: f64,
    /// Monte Carlo resolution of `weighted_distance` (0 for exact runs).
    pub noise_floor: f64,
    pub ledger: ErrorLedger,
    pub within_bound: bool,
}

/// `min_c Σ |w_z − c|`, attained at a median.
fn distance_to_flat(w: &[f64]) -> f64 {
    let mut s = w.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let med = s[s.len() / 2];
    w.iter().map(|v| (v - med).abs()).sum()
}

fn ledger(spec: &MasterSpec) -> Result<ErrorLedger> {
    error_bounds(
        spec.ext.eps(),
        honest_reject_probability(&spec.seeded, 0.0),
        classical_pass_probability(&spec.seeded),
        spec.eta,
    )
}

/// Exact `(P(accept, Z = z))_z` and `P(reject)` for one seeded run of a
/// classical or closed-form implementation. The output hash is linear, so
/// `Z` is tracked as the XOR of per-bit contributions.
fn instance_distribution(spec: &MasterSpec, imp: &Implementation, seed: &BitString) -> Result<(Vec<f64>, f64)> {
    let seeded = &spec.seeded;
    let l = seeded.output_len;
    let zs = 1usize << l;
    let r = seeded.rounds;
    if r == 0 {
        let mut acc = vec![0.0; zs];
        acc[0] = 1.0;
        return Ok((acc, 0.0));
    }
    let layout = seeded.layout();
    let y = seed.slice(layout.hashing.start, layout.hashing.end);
    let contrib = (0..2 * r)
        .map(|p| {
            let mut unit = BitString::zeros(2 * r);
            unit.set(p, true);
            extract(&seeded.post_ext, &unit, &y).map(|z| z.to_u64() as usize)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut dist = vec![0.0; (r + 1) * zs];
    dist[0] = 1.0;
    for j in 0..r {
        let (x, yb) = (seed.get(2 * j), seed.get(2 * j + 1));
        let p = imp
            .round_distribution(j, x, yb)
            .ok_or_else(|| Error::InvalidArgument("implementation has no closed-form round model".into()))?;
        let mut next = vec![0.0; (r + 1) * zs];
        for w in 0..=j {
            for z in 0..zs {
                let mass = dist[w * zs + z];
                if mass == 0.0 {
                    continue;
                }
                for a in 0..2 {
                    for b in 0..2 {
                        let pab = p[a][b];
                        if pab == 0.0 {
                            continue;
                        }
                        let w2 = w + chsh_wins(x, yb, a == 1, b == 1) as usize;
                        let mut z2 = z;
                        if a == 1 {
                            z2 ^= contrib[2 * j];
                        }
                        if b == 1 {
                            z2 ^= contrib[2 * j + 1];
                        }
                        next[w2 * zs + z2] += mass * pab;
                    }
                }
            }
        }
        dist = next;
    }
    let k = seeded.min_wins();
    let mut acc = vec![0.0; zs];
    let mut rej = 0.0;
    for w in 0..=r {
        for z in 0..zs {
            if w >= k {
                acc[z] += dist[w * zs + z];
            } else {
                rej += dist[w * zs + z];
            }
        }
    }
    Ok((acc, rej))
}

/// Exact probe for classical galleries at tiny sizes. The side information
/// is the source value itself.
pub fn soundness_probe_exact(spec: &MasterSpec, gallery: &Gallery, source: &SourceTable) -> Result<ProbeReport> {
    spec.validate()?;
    let l = spec.seeded.output_len;
    if l > 8 || spec.seeded.rounds > 512 || source.entries().len() > 4096 || spec.ext.d() > 6 {
        return Err(Error::ResourceLimit(
            "exact probe needs l <= 8, R <= 512, d <= 6 and at most 4096 source values".into(),
        ));
    }
    if source.n() != spec.ext.n() {
        return invalid("source length does not match the extractor");
    }
    let zs = 1usize << l;
    let thr = spec.reject_count_threshold();
    let per_x = source
        .entries()
        .par_iter()
        .map(|(x, px)| -> Result<(f64, f64)> {
            let impls = gallery.implementations(spec, x, source, 0)?;
            let seeds = enumerate_blocks(&spec.ext, x)?;
            // state[r][z], with r capped at the reject threshold
            let mut state = vec![0.0; (thr + 1) * zs];
            state[0] = 1.0;
            for (imp, s) in impls.iter().zip(&seeds) {
                let (acc, rej) = instance_distribution(spec, imp, s)?;
                let mut next = vec![0.0; (thr + 1) * zs];
                for r in 0..=thr {
                    for z in 0..zs {
                        let m = state[r * zs + z];
                        if m == 0.0 {
                            continue;
                        }
                        if r == thr {
                            next[r * zs + z] += m;
                            continue;
                        }
                        for (zi, &pa) in acc.iter().enumerate() {
                            next[r * zs + (z ^ zi)] += m * pa;
                        }
                        next[(r + 1) * zs + z] += m * rej;
                    }
                }
                state = next;
            }
            let w: Vec<f64> = (0..zs).map(|z| (0..thr).map(|r| state[r * zs + z]).sum()).collect();
            let pa: f64 = w.iter().sum();
            Ok((px * pa, px * distance_to_flat(&w)))
        })
        .collect::<Result<Vec<_>>>()?;
    let accept_probability: f64 = per_x.iter().map(|v| v.0).sum();
    let weighted_distance: f64 = per_x.iter().map(|v| v.1).sum();
    let ledger = ledger(spec)?;
    Ok(ProbeReport {
        gallery: gallery.name(),
        mode: ProbeMode::Exact,
        side_information: "source".into(),
        trials: 0,
        accept_probability,
        weighted_distance,
        conditional_distance: if accept_probability > 0.0 {
            weighted_distance / accept_probability
        } else {
            0.0
        },
        noise_floor: 0.0,
        within_bound: weighted_distance <= ledger.soundness_bound,
        ledger,
    })
}

/// Monte Carlo probe: full master runs with sources drawn from `source`.
/// The distance uses the histogram of the first `min(l, 8)` output bits.
pub fn soundness_probe_mc(
    spec: &MasterSpec,
    gallery: &Gallery,
    source: &SourceTable,
    trials: usize,
    rng_seed: u64,
) -> Result<ProbeReport> {
    spec.validate()?;
    if trials == 0 {
        return invalid("soundness probe needs trials >= 1");
    }
    let bits = spec.seeded.output_len.min(8);
    let zs = 1usize << bits;
    let root = SimRng::new(rng_seed);
    let results = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<Option<usize>> {
            let mut rng = root.fork(t as u64);
            let x = source.sample(&mut rng).clone();
            let impls = gallery.implementations(spec, &x, source, rng.next_u64())?;
            let out = run_master_with(spec, &x, &impls, rng.next_u64(), false)?;
            Ok(out.accepted.then(|| out.output.slice(0, bits).to_u64() as usize))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut hist = vec![0.0; zs];
    let mut accepted = 0usize;
    for z in results.into_iter().flatten() {
        hist[z] += 1.0 / trials as f64;
        accepted += 1;
    }
    let accept_probability = accepted as f64 / trials as f64;
    let weighted_distance = distance_to_flat(&hist);
    let noise_floor = 3.0 * (2.0 * zs as f64 * accept_probability.max(1.0 / trials as f64) / (std::f64::consts::PI * trials as f64)).sqrt();
    let ledger = ledger(spec)?;
    Ok(ProbeReport {
        gallery: gallery.name(),
        mode: ProbeMode::MonteCarlo,
        side_information: "none".into(),
        trials,
        accept_probability,
        weighted_distance,
        conditional_distance: if accept_probability > 0.0 {
            weighted_distance / accept_probability
        } else {
            0.0
        },
        noise_floor,
        within_bound: weighted_distance <= ledger.soundness_bound,
        ledger,
    })
}

/// Exact probe when the gallery is classical and the instance is tiny,
/// Monte Carlo otherwise.
pub fn soundness_probe(
    spec: &MasterSpec,
    gallery: &Gallery,
    source: &SourceTable,
    trials: usize,
    rng_seed: u64,
) -> Result<ProbeReport> {
    let tiny = spec.seeded.output_len <= 4
        && spec.ext.d() <= 4
        && spec.seeded.rounds <= 256
        && source.entries().len() <= 4096;
    if gallery.is_classical() && tiny {
        soundness_probe_exact(spec, gallery, source)
    } else {
        soundness_probe_mc(spec, gallery, source, trials, rng_seed)
    }
}

/// Distribution of `(B_1 ⊕ … ⊕ B_k, W)` from the joint table of
/// `(B_1, …, B_k, W)` with `l`-bit blocks, indexed with `B_1` most
/// significant and `W` fastest.
pub fn xor_distribution(l: usize, k: usize, w_count: usize, p: &[f64]) -> Result<Vec<f64>> {
    if l * k > 24 || w_count == 0 {
        return Err(Error::ResourceLimit("xor_distribution needs l*k <= 24".into()));
    }
    let zs = 1usize << l;
    let size = (1usize << (l * k)) * w_count;
    if p.len() != size {
        return invalid(format!("joint table has {} entries, expected {size}", p.len()));
    }
    let mut q = vec![0.0; zs * w_count];
    for (idx, &v) in p.iter().enumerate() {
        let w = idx % w_count;
        let mut blocks = idx / w_count;
        let mut z = 0;
        for _ in 0..k {
            z ^= blocks & (zs - 1);
            blocks >>= l;
        }
        q[z * w_count + w] += v;
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::master::tests::small_spec;

    #[test]
    fn exact_probe_sanity() {
        let spec = small_spec(2, 0.5);
        let mut rng = SimRng::new(3);
        let source = SourceTable::random_flat(16, 3, &mut rng).unwrap();
        let det = soundness_probe_exact(&spec, &Gallery::Deterministic, &source).unwrap();
        assert!(det.accept_probability < 0.01);
        let informed = soundness_probe_exact(&spec, &Gallery::Informed, &source).unwrap();
        assert!((informed.accept_probability - 1.0).abs() < 1e-12);
        // The informed devices' output is a function of the source.
        assert!((informed.conditional_distance - 1.0).abs() < 1e-12);
        let replay = soundness_probe_exact(&spec, &Gallery::PublicSourceReplay, &source).unwrap();
        assert!(replay.accept_probability >= 1.0 / 8.0 - 1e-12);
        assert!(replay.accept_probability < 1.0 / 8.0 + 0.01);
    }

    #[test]
    fn exact_probe_matches_simulation_for_replay() {
        let spec = small_spec(2, 0.5);
        let source = SourceTable::random_flat(16, 2, &mut SimRng::new(8)).unwrap();
        let exact = soundness_probe_exact(&spec, &Gallery::PublicSourceReplay, &source).unwrap();
        let mc = soundness_probe_mc(&spec, &Gallery::PublicSourceReplay, &source, 4000, 2).unwrap();
        assert!((exact.accept_probability - mc.accept_probability).abs() < 0.03);
    }

    #[test]
    fn xor_distribution_indexing() {
        // Point mass on (B1, B2, W) = (01, 11, 1) with l = 2, w_count = 2.
        let mut p = vec![0.0; 16 * 2];
        p[(0b01 * 4 + 0b11) * 2 + 1] = 1.0;
        let q = xor_distribution(2, 2, 2, &p).unwrap();
        assert_eq!(q[0b10 * 2 + 1], 1.0);
        assert!(xor_distribution(2, 2, 2, &p[1..]).is_err());
    }
}
