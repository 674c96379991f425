//! Exhaustive distance oracles for tiny extractors.

use rayon::prelude::*;
use serde::Serialize;

use super::{extract_unchecked, ExtractorSpec};
use crate::bits::BitString;
use crate::error::{invalid, Error, Result};
use crate::qmath::JointTable;
use crate::rng::SimRng;

/// Per-seed distances of `Ext(X, i)` from uniform, jointly with `E`.
#[derive(Clone, Debug, Serialize)]
pub struct SrReport {
    /// `‖ρ_{S_i E} − U_m ⊗ ρ_E‖_tr` for every seed `i`.
    pub per_block: Vec<f64>,
    pub average: f64,
    pub min_distance: f64,
    pub argmin: usize,
}

/// Exact seed-averaged distance by enumeration over all `x`, `e` and seeds.
///
/// Rows of `source` are indexed by `x` read as an `n`-bit number.
pub fn sr_average_distance(spec: &ExtractorSpec, source: &JointTable) -> Result<SrReport> {
    let (n, d, m) = (spec.n(), spec.d(), spec.m());
    if n > 12 || d > 10 || m > 12 {
        return Err(Error::ResourceLimit(format!(
            "exhaustive oracle needs n <= 12, d <= 10, m <= 12 (got n = {n}, d = {d}, m = {m})"
        )));
    }
    if source.x_count() != 1 << n {
        return invalid(format!("source table has {} rows, expected 2^{n}", source.x_count()));
    }
    let e_count = source.e_count();
    let p_e: Vec<f64> = (0..e_count).map(|e| source.p.iter().map(|row| row[e]).sum()).collect();
    let xs: Vec<(BitString, &Vec<f64>)> = source
        .p
        .iter()
        .enumerate()
        .filter(|(_, row)| row.iter().any(|&v| v > 0.0))
        .map(|(x, row)| (BitString::from_u64(x as u64, n), row))
        .collect();
    let outcomes = 1usize << m;
    let uniform = 1.0 / outcomes as f64;

    let per_block: Vec<f64> = (0..1u64 << d)
        .into_par_iter()
        .map(|i| {
            let y = BitString::from_u64(i, d);
            let mut q = vec![0.0; outcomes * e_count];
            for (x, row) in &xs {
                let s = extract_unchecked(spec, x, &y).to_u64() as usize;
                for (e, &v) in row.iter().enumerate() {
                    q[s * e_count + e] += v;
                }
            }
            q.iter()
                .enumerate()
                .map(|(idx, &v)| (v - uniform * p_e[idx % e_count]).abs())
                .sum()
        })
        .collect();

    let average = per_block.iter().sum::<f64>() / per_block.len() as f64;
    let (argmin, min_distance) = per_block
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best });
    Ok(SrReport {
        per_block,
        average,
        min_distance,
        argmin,
    })
}

/// Uniform distribution on `support` (values read as `n`-bit numbers), no side information.
pub fn flat_source(n: usize, support: &[u64]) -> Result<JointTable> {
    if n > 20 {
        return Err(Error::ResourceLimit(format!("explicit table over 2^{n} values")));
    }
    if support.is_empty() {
        return invalid("flat source needs a non-empty support");
    }
    let mut p = vec![vec![0.0]; 1 << n];
    let w = 1.0 / support.len() as f64;
    for &x in support {
        let row = p
            .get_mut(x as usize)
            .ok_or_else(|| Error::InvalidArgument(format!("support value {x} has more than {n} bits")))?;
        if row[0] > 0.0 {
            return invalid(format!("support value {x} repeated"));
        }
        row[0] = w;
    }
    JointTable::new(p)
}

/// A uniformly random support of size `2^k`.
pub fn random_flat_source(n: usize, k: usize, rng: &mut SimRng) -> Result<JointTable> {
    if k > n || n > 20 {
        return invalid(format!("cannot draw a flat (n = {n}, k = {k}) source"));
    }
    let mut all: Vec<u64> = (0..1u64 << n).collect();
    let size = 1usize << k;
    for i in 0..size {
        let j = i + rng.below((all.len() - i) as u64) as usize;
        all.swap(i, j);
    }
    flat_source(n, &all[..size])
}
