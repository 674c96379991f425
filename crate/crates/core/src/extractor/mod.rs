//! Classical strong extractors and all-seed enumeration.
//!
//! Three constructions share one parameter record, [`ExtractorSpec`]:
//!
//! * `OneBit`: the inner-product extractor, `m = 1`.
//! * `Trevisan { t }`: one inner-product bit per set of a polynomial weak
//!   design, each seeded by the seed bits the set selects.
//! * `SeedCopies`: one inner-product bit per output position, each with its
//!   own `n`-bit seed derived from `(y, j)`. Used where the output must be
//!   far longer than a weak design over a short seed allows.
//!
//! A short seed is turned into an `n`-bit inner-product seed by placing the
//! selected seed bits `y[s]` at position `s mod L`, `L = min(n, d)`, and
//! repeating that `L`-bit pattern cyclically up to length `n`. Bits that
//! collide are XORed.

mod design;
mod gf;
mod oracle;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{invalid, Error, Result};
use crate::rng::mix64;

pub use design::{build_weak_design, WeakDesign, DESIGN_R, MAX_DESIGN_SETS};
pub use gf::SmallField;
pub use oracle::{flat_source, random_flat_source, sr_average_distance, SrReport};

/// Largest seed length whose 2^d blocks we enumerate.
pub const MAX_ENUM_SEED_BITS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ExtractorKind {
    OneBit,
    Trevisan { t: usize },
    SeedCopies,
}

/// Plain parameter record, as read from configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractorParams {
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub k: usize,
    pub eps: f64,
    pub kind: ExtractorKind,
}

/// A validated extractor with its weak design (if any) prebuilt.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "ExtractorParams", into = "ExtractorParams")]
pub struct ExtractorSpec {
    params: ExtractorParams,
    design: Option<Arc<WeakDesign>>,
}

impl PartialEq for ExtractorSpec {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

impl From<ExtractorSpec> for ExtractorParams {
    fn from(s: ExtractorSpec) -> Self {
        s.params
    }
}

impl TryFrom<ExtractorParams> for ExtractorSpec {
    type Error = Error;

    fn try_from(p: ExtractorParams) -> Result<Self> {
        ExtractorSpec::new(p)
    }
}

/// Error of the inner-product extractor in trace-norm convention:
/// `2^{(1 - k')/2}` with `k' = k - max(0, n - d)`, capped at 1.
pub fn one_bit_eps(n: usize, d: usize, k: usize) -> f64 {
    let k_eff = k as f64 - n.saturating_sub(d) as f64;
    2f64.powf((1.0 - k_eff) / 2.0).min(1.0)
}

impl ExtractorSpec {
    pub fn new(params: ExtractorParams) -> Result<Self> {
        let ExtractorParams { n, d, m, k, eps, kind } = params;
        if n == 0 {
            return invalid("extractor needs n >= 1");
        }
        if m == 0 {
            return invalid("extractor needs m >= 1");
        }
        if k > n {
            return invalid(format!("min-entropy k = {k} exceeds n = {n}"));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return invalid(format!("eps = {eps} is outside (0, 1]"));
        }
        let design = match kind {
            ExtractorKind::OneBit => {
                if m != 1 {
                    return invalid("the one-bit extractor has m = 1");
                }
                if d == 0 {
                    return invalid("the one-bit extractor needs d >= 1");
                }
                None
            }
            ExtractorKind::Trevisan { t } => Some(Arc::new(build_weak_design(m, t, d)?)),
            ExtractorKind::SeedCopies => None,
        };
        Ok(Self { params, design })
    }

    /// Inner-product extractor with the error from [`one_bit_eps`].
    pub fn one_bit(n: usize, d: usize, k: usize) -> Result<Self> {
        Self::new(ExtractorParams {
            n,
            d,
            m: 1,
            k,
            eps: one_bit_eps(n, d, k),
            kind: ExtractorKind::OneBit,
        })
    }

    pub fn trevisan(n: usize, d: usize, m: usize, t: usize, k: usize, eps: f64) -> Result<Self> {
        Self::new(ExtractorParams {
            n,
            d,
            m,
            k,
            eps,
            kind: ExtractorKind::Trevisan { t },
        })
    }

    pub fn seed_copies(n: usize, d: usize, m: usize, k: usize, eps: f64) -> Result<Self> {
        Self::new(ExtractorParams {
            n,
            d,
            m,
            k,
            eps,
            kind: ExtractorKind::SeedCopies,
        })
    }

    pub fn params(&self) -> &ExtractorParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn d(&self) -> usize {
        self.params.d
    }

    pub fn m(&self) -> usize {
        self.params.m
    }

    pub fn k(&self) -> usize {
        self.params.k
    }

    pub fn eps(&self) -> f64 {
        self.params.eps
    }

    pub fn kind(&self) -> ExtractorKind {
        self.params.kind
    }

    pub fn design(&self) -> Option<&WeakDesign> {
        self.design.as_deref()
    }

    fn check_inputs(&self, x: &BitString, y: &BitString) -> Result<()> {
        if x.len() != self.n() {
            return invalid(format!("source has {} bits, extractor expects n = {}", x.len(), self.n()));
        }
        if y.len() != self.d() {
            return invalid(format!("seed has {} bits, extractor expects d = {}", y.len(), self.d()));
        }
        Ok(())
    }
}

/// Inner product of `x` and `y` modulo 2.
pub fn ext_one_bit(x: &BitString, y: &BitString) -> Result<bool> {
    x.dot(y)
}

/// XOR of the consecutive `l`-bit chunks of `x` (the last chunk may be short).
fn fold(x: &BitString, l: usize) -> BitString {
    if l >= x.len() {
        return x.clone();
    }
    let mut out = BitString::zeros(l);
    for p in 0..x.len() {
        if x.get(p) {
            let q = p % l;
            out.set(q, !out.get(q));
        }
    }
    out
}

/// The `L`-bit pattern built from the seed bits at `positions`.
fn pattern(y: &BitString, positions: impl Iterator<Item = usize>, l: usize) -> BitString {
    let mut out = BitString::zeros(l);
    for s in positions {
        if y.get(s) {
            let q = s % l;
            out.set(q, !out.get(q));
        }
    }
    out
}

/// Expand the seed bits at `positions` into the `n`-bit inner-product seed.
pub fn expand_seed(y: &BitString, positions: &[usize], n: usize) -> BitString {
    let l = n.min(y.len()).max(1);
    let p = pattern(y, positions.iter().copied(), l);
    let mut out = BitString::zeros(n);
    for i in 0..n {
        out.set(i, p.get(i % l));
    }
    out
}

fn seed_hash(y: &BitString) -> u64 {
    let mut h = mix64(0x5EED_0000_0000_0000 ^ y.len() as u64);
    for &w in y.words() {
        h = mix64(h ^ w);
    }
    h
}

fn copy_bit(x: &BitString, h: u64, j: usize) -> bool {
    const STEP: u64 = 0x9E37_79B9_7F4A_7C15;
    let base = mix64(h ^ mix64(j as u64 ^ 0xC0B1_E5EE_D000_0000));
    let xw = x.words();
    let last = xw.len().saturating_sub(1);
    let rem = x.len() % 64;
    let mut acc = 0u64;
    for (w, &xv) in xw.iter().enumerate() {
        let mut r = mix64(base.wrapping_add((w as u64 + 1).wrapping_mul(STEP)));
        if w == last && rem != 0 {
            r &= u64::MAX << (64 - rem);
        }
        acc ^= xv & r;
    }
    acc.count_ones() & 1 == 1
}

/// The `n`-bit inner-product seed used for output bit `j` by `SeedCopies`.
pub fn seed_copy_vector(y: &BitString, j: usize, n: usize) -> BitString {
    let h = seed_hash(y);
    let mut out = BitString::zeros(n);
    for p in 0..n {
        let mut unit = BitString::zeros(n);
        unit.set(p, true);
        out.set(p, copy_bit(&unit, h, j));
    }
    out
}

/// `Ext(x, y)` for any kind.
pub fn extract(spec: &ExtractorSpec, x: &BitString, y: &BitString) -> Result<BitString> {
    spec.check_inputs(x, y)?;
    Ok(extract_unchecked(spec, x, y))
}

fn extract_unchecked(spec: &ExtractorSpec, x: &BitString, y: &BitString) -> BitString {
    let (n, d, m) = (spec.n(), spec.d(), spec.m());
    match spec.kind() {
        ExtractorKind::OneBit => {
            let l = n.min(d);
            let p = pattern(y, 0..d, l);
            BitString::from_bools(&[fold(x, l).dot_unchecked(&p)])
        }
        ExtractorKind::Trevisan { .. } => {
            let design = spec.design.as_ref().expect("trevisan spec carries its design");
            let l = n.min(d);
            let fx = fold(x, l);
            let mut out = BitString::zeros(m);
            for i in 0..m {
                let p = pattern(y, design.set(i).iter().copied(), l);
                out.set(i, fx.dot_unchecked(&p));
            }
            out
        }
        ExtractorKind::SeedCopies => {
            let h = seed_hash(y);
            let mut out = BitString::zeros(m);
            for j in 0..m {
                out.set(j, copy_bit(x, h, j));
            }
            out
        }
    }
}

/// Trevisan's extractor; `spec` must be of kind `Trevisan`.
pub fn trevisan_ext(spec: &ExtractorSpec, x: &BitString, y: &BitString) -> Result<BitString> {
    if !matches!(spec.kind(), ExtractorKind::Trevisan { .. }) {
        return invalid("trevisan_ext needs a Trevisan extractor spec");
    }
    extract(spec, x, y)
}

/// `Ext(x, binary(i))` for every seed `i = 0 .. 2^d - 1`, in seed order.
pub fn enumerate_blocks(spec: &ExtractorSpec, x: &BitString) -> Result<Vec<BitString>> {
    let d = spec.d();
    if d > MAX_ENUM_SEED_BITS {
        return Err(Error::ResourceLimit(format!(
            "2^{d} seeds exceeds the enumeration cap of 2^{MAX_ENUM_SEED_BITS}"
        )));
    }
    if x.len() != spec.n() {
        return invalid(format!("source has {} bits, extractor expects n = {}", x.len(), spec.n()));
    }
    Ok((0..1u64 << d)
        .into_par_iter()
        .map(|i| extract_unchecked(spec, x, &BitString::from_u64(i, d)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(s: &str) -> BitString {
        BitString::parse_binary(s).unwrap()
    }

    #[test]
    fn one_bit_examples() {
        assert!(!ext_one_bit(&b("0000"), &b("1011")).unwrap());
        assert!(!ext_one_bit(&b("1111"), &b("1010")).unwrap());
        assert!(ext_one_bit(&b("1101"), &b("1000")).unwrap());
        assert!(ext_one_bit(&b("111"), &b("1010")).is_err());
    }

    #[test]
    fn one_bit_kind_equals_inner_product_when_d_is_n() {
        let spec = ExtractorSpec::one_bit(6, 6, 4).unwrap();
        for xv in 0..64 {
            for yv in 0..64 {
                let x = BitString::from_u64(xv, 6);
                let y = BitString::from_u64(yv, 6);
                let out = extract(&spec, &x, &y).unwrap();
                assert_eq!(out.get(0), ext_one_bit(&x, &y).unwrap());
            }
        }
    }

    #[test]
    fn expansion_is_cyclic() {
        let y = b("101");
        let v = expand_seed(&y, &[0, 1, 2], 7);
        assert_eq!(v.to_string(), "1011011");
        let v = expand_seed(&b("1111"), &[0, 1, 2, 3], 2);
        assert_eq!(v.to_string(), "00");
    }

    #[test]
    fn trevisan_zero_source_and_single_block() {
        let spec = ExtractorSpec::trevisan(16, 16, 4, 4, 8, 0.5).unwrap();
        for yv in [0u64, 1, 0x9151, 0xFFFF] {
            let out = trevisan_ext(&spec, &BitString::zeros(16), &BitString::from_u64(yv, 16)).unwrap();
            assert_eq!(out, BitString::zeros(4));
        }
        let single = ExtractorSpec::trevisan(16, 16, 1, 4, 8, 0.5).unwrap();
        let set = single.design().unwrap().set(0).to_vec();
        let x = BitString::from_u64(0x3A7C, 16);
        let y = BitString::from_u64(0x9151, 16);
        let out = trevisan_ext(&single, &x, &y).unwrap();
        assert_eq!(out.get(0), ext_one_bit(&x, &expand_seed(&y, &set, 16)).unwrap());
        assert!(trevisan_ext(&ExtractorSpec::one_bit(4, 4, 2).unwrap(), &x, &y).is_err());
    }

    #[test]
    fn seed_copies_is_linear_in_x() {
        let spec = ExtractorSpec::seed_copies(70, 3, 40, 20, 0.5).unwrap();
        let y = BitString::from_u64(5, 3);
        let mut rng = crate::SimRng::new(3);
        let x1 = BitString::from_bools(&(0..70).map(|_| rng.bit()).collect::<Vec<_>>());
        let x2 = BitString::from_bools(&(0..70).map(|_| rng.bit()).collect::<Vec<_>>());
        let mut x12 = x1.clone();
        x12.xor_assign(&x2).unwrap();
        let mut sum = extract(&spec, &x1, &y).unwrap();
        sum.xor_assign(&extract(&spec, &x2, &y).unwrap()).unwrap();
        assert_eq!(sum, extract(&spec, &x12, &y).unwrap());
        for j in [0, 17, 39] {
            let r = seed_copy_vector(&y, j, 70);
            assert_eq!(extract(&spec, &x1, &y).unwrap().get(j), x1.dot(&r).unwrap());
        }
    }

    #[test]
    fn enumerate_blocks_shapes_and_cap() {
        let spec = ExtractorSpec::one_bit(4, 1, 2).unwrap();
        assert_eq!(enumerate_blocks(&spec, &b("1010")).unwrap().len(), 2);
        let spec = ExtractorSpec::trevisan(8, 9, 3, 3, 4, 0.5).unwrap();
        let blocks = enumerate_blocks(&spec, &BitString::zeros(8)).unwrap();
        assert_eq!(blocks.len(), 512);
        assert!(blocks.iter().all(|z| z.count_ones() == 0));
        let big = ExtractorSpec::seed_copies(8, 21, 1, 4, 0.5).unwrap();
        assert!(matches!(enumerate_blocks(&big, &BitString::zeros(8)), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(ExtractorSpec::one_bit(4, 0, 2).is_err());
        assert!(ExtractorSpec::one_bit(4, 4, 5).is_err());
        assert!(ExtractorSpec::seed_copies(4, 4, 0, 2, 0.1).is_err());
        assert!(ExtractorSpec::seed_copies(4, 4, 2, 2, 0.0).is_err());
        assert!(ExtractorSpec::trevisan(8, 8, 4, 3, 4, 0.5).is_err());
        let json = serde_json::to_string(&ExtractorSpec::trevisan(16, 16, 4, 4, 8, 0.5).unwrap()).unwrap();
        let back: ExtractorSpec = serde_json::from_str(&json).unwrap();
        assert!(back.design().is_some());
        let bad = json.replace("\"d\":16", "\"d\":15");
        assert!(serde_json::from_str::<ExtractorSpec>(&bad).is_err());
    }

    #[test]
    fn one_bit_eps_sheet() {
        assert!((one_bit_eps(10, 8, 6) - 2f64.powf(-1.5)).abs() < 1e-15);
        assert_eq!(one_bit_eps(10, 8, 2), 1.0);
    }
}
