//! Polynomial (Nisan–Wigderson) weak designs.

use super::gf::SmallField;
use crate::error::{invalid, Error, Result};

/// Overlap parameter `r = 2e` checked at construction.
pub const DESIGN_R: f64 = 2.0 * std::f64::consts::E;

/// Largest design size we build (the overlap check is quadratic).
pub const MAX_DESIGN_SETS: usize = 1 << 14;

type Mask = [u64; 4];

/// `m` subsets of `{0, .., d-1}`, each of size `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeakDesign {
    t: usize,
    d: usize,
    sets: Vec<Mask>,
    positions: Vec<Vec<usize>>,
}

fn mask_set(mask: &mut Mask, pos: usize) {
    mask[pos / 64] |= 1u64 << (pos % 64);
}

fn intersection(a: &Mask, b: &Mask) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
}

/// Build the design whose `i`-th set is the graph `{a*t + p_i(a) : a in GF(t)}`
/// of the polynomial whose coefficients are the base-`t` digits of `i`.
pub fn build_weak_design(m: usize, t: usize, d: usize) -> Result<WeakDesign> {
    if m == 0 {
        return invalid("a design needs m >= 1 sets");
    }
    let field = SmallField::new(t)?;
    if d < t * t {
        return invalid(format!("seed length d = {d} violates d >= t^2 = {}", t * t));
    }
    let capacity = (t as u128).checked_pow(t as u32).unwrap_or(u128::MAX);
    if m as u128 > capacity {
        return invalid(format!("m = {m} violates m <= t^t = {capacity}"));
    }
    if m > MAX_DESIGN_SETS {
        return Err(Error::ResourceLimit(format!(
            "design with {m} sets exceeds the cap of {MAX_DESIGN_SETS}"
        )));
    }
    let mut sets = Vec::with_capacity(m);
    let mut coeffs = vec![0usize; t];
    for i in 0..m {
        let mut v = i;
        for c in coeffs.iter_mut() {
            *c = v % t;
            v /= t;
        }
        let mut mask = [0u64; 4];
        for a in 0..t {
            mask_set(&mut mask, a * t + field.eval(&coeffs, a));
        }
        sets.push(mask);
    }
    let positions = sets
        .iter()
        .map(|mask| (0..256).filter(|&p| mask[p / 64] >> (p % 64) & 1 == 1).collect())
        .collect();
    let design = WeakDesign { t, d, sets, positions };
    if let Some((i, sum)) = design.first_violation() {
        return invalid(format!(
            "set {i} violates sum_j<i 2^|S_i ∩ S_j| <= 2e(m-1): {sum} > {:.3}",
            DESIGN_R * (m as f64 - 1.0)
        ));
    }
    Ok(design)
}

impl WeakDesign {
    pub fn m(&self) -> usize {
        self.sets.len()
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Sorted positions of set `i`.
    pub fn set(&self, i: usize) -> &[usize] {
        &self.positions[i]
    }

    pub fn intersection_size(&self, i: usize, j: usize) -> usize {
        intersection(&self.sets[i], &self.sets[j]) as usize
    }

    /// `sum_{j<i} 2^{|S_i ∩ S_j|}`.
    pub fn overlap_sum(&self, i: usize) -> f64 {
        (0..i)
            .map(|j| 2f64.powi(intersection(&self.sets[i], &self.sets[j]) as i32))
            .sum()
    }

    fn first_violation(&self) -> Option<(usize, f64)> {
        let bound = DESIGN_R * (self.m() as f64 - 1.0);
        (0..self.m())
            .map(|i| (i, self.overlap_sum(i)))
            .find(|&(_, s)| s > bound + 1e-9)
    }
}
