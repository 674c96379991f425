//! Fixed-length bit strings.
//!
//! Bit 0 is the leftmost, most significant bit. Storage is packed into
//! 64-bit words, big-endian within each word, and every storage bit past
//! `len` is kept at zero so that word-level operations (popcount, parity,
//! equality) never see garbage.

use std::fmt;

use smallvec::SmallVec;

use crate::error::{invalid, Result};

type Words = SmallVec<[u64; 2]>;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    len: usize,
    words: Words,
}

#[inline]
fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        let mut words = Words::new();
        words.resize(words_for(len), 0);
        Self { len, words }
    }

    pub fn ones(len: usize) -> Self {
        let mut b = Self::zeros(len);
        for w in b.words.iter_mut() {
            *w = u64::MAX;
        }
        b.clear_tail();
        b
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut b = Self::zeros(bits.len());
        for (i, &v) in bits.iter().enumerate() {
            b.set(i, v);
        }
        b
    }

    /// The low `len` bits of `value`, most significant first. This is the
    /// `binary(i)` encoding used for enumerated seeds.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64, "from_u64 supports at most 64 bits");
        let mut b = Self::zeros(len);
        if len > 0 {
            let masked = if len == 64 { value } else { value & ((1u64 << len) - 1) };
            b.words[0] = masked << (64 - len);
        }
        b
    }

    /// Parse a string of `0`/`1` characters.
    pub fn parse_binary(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut b = Self::zeros(s.len());
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => b.set(i, true),
                _ => return invalid(format!("non-binary character {c:?} in {s:?}")),
            }
        }
        Ok(b)
    }

    /// Parse `ceil(len/4)` hex digits; padding bits past `len` must be zero.
    pub fn from_hex(hex: &str, len: usize) -> Result<Self> {
        let hex = hex.trim().trim_start_matches("0x");
        let digits = len.div_ceil(4);
        if hex.len() != digits {
            return invalid(format!(
                "hex string {hex:?} has {} digits, expected {digits} for {len} bits",
                hex.len()
            ));
        }
        let mut b = Self::zeros(len);
        for (d, c) in hex.chars().enumerate() {
            let v = c
                .to_digit(16)
                .ok_or_else(|| crate::Error::InvalidArgument(format!("bad hex digit {c:?}")))?;
            for k in 0..4 {
                let bit = (v >> (3 - k)) & 1 == 1;
                let idx = d * 4 + k;
                if idx < len {
                    b.set(idx, bit);
                } else if bit {
                    return invalid(format!("hex {hex:?} sets padding bits beyond length {len}"));
                }
            }
        }
        Ok(b)
    }

    /// `ceil(len/4)` lowercase hex digits, zero padded on the right.
    pub fn to_hex(&self) -> String {
        let digits = self.len.div_ceil(4);
        let mut out = String::with_capacity(digits);
        for d in 0..digits {
            let mut v = 0u32;
            for k in 0..4 {
                let idx = d * 4 + k;
                v = (v << 1) | (idx < self.len && self.get(idx)) as u32;
            }
            out.push(std::char::from_digit(v, 16).unwrap());
        }
        out
    }

    /// Packed bytes, MSB first, zero padded in the last byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len.div_ceil(8);
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let w = self.words[i / 8];
            out.push((w >> (56 - 8 * (i % 8))) as u8);
        }
        out
    }

    /// The first `len` bits of `bytes` (MSB first).
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self> {
        if len > bytes.len() * 8 {
            return invalid(format!(
                "requested {len} bits from {} bytes ({} bits)",
                bytes.len(),
                bytes.len() * 8
            ));
        }
        let mut b = Self::zeros(len);
        for (i, &byte) in bytes.iter().take(len.div_ceil(8)).enumerate() {
            b.words[i / 8] |= (byte as u64) << (56 - 8 * (i % 8));
        }
        b.clear_tail();
        Ok(b)
    }

    /// Value of a string of at most 64 bits, read as a big-endian integer.
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64, "to_u64 on a {}-bit string", self.len);
        if self.len == 0 {
            0
        } else {
            self.words[0] >> (64 - self.len)
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i >> 6] >> (63 - (i & 63))) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (63 - (i & 63));
        if v {
            self.words[i >> 6] |= mask;
        } else {
            self.words[i >> 6] &= !mask;
        }
    }

    pub fn push(&mut self, v: bool) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, v);
    }

    pub fn extend_from(&mut self, other: &BitString) {
        self.reserve(other.len);
        for i in 0..other.len {
            self.push(other.get(i));
        }
    }

    fn reserve(&mut self, extra: usize) {
        let need = words_for(self.len + extra);
        if need > self.words.len() {
            self.words.reserve(need - self.words.len());
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Bits `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> BitString {
        assert!(start <= end && end <= self.len, "slice {start}..{end} of {}", self.len);
        let mut out = BitString::zeros(end - start);
        if start % 64 == 0 {
            let w0 = start / 64;
            let n = out.words.len();
            out.words.copy_from_slice(&self.words[w0..w0 + n]);
            out.clear_tail();
        } else {
            for i in start..end {
                if self.get(i) {
                    out.set(i - start, true);
                }
            }
        }
        out
    }

    /// Bitwise XOR into `self`. Lengths must match.
    pub fn xor_assign(&mut self, other: &BitString) -> Result<()> {
        if self.len != other.len {
            return invalid(format!("xor of lengths {} and {}", self.len, other.len));
        }
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a ^= *b;
        }
        Ok(())
    }

    /// Inner product modulo 2. Lengths must match.
    pub fn dot(&self, other: &BitString) -> Result<bool> {
        if self.len != other.len {
            return invalid(format!("inner product of lengths {} and {}", self.len, other.len));
        }
        Ok(self.dot_unchecked(other))
    }

    #[inline]
    pub(crate) fn dot_unchecked(&self, other: &BitString) -> bool {
        let mut acc = 0u64;
        for (a, b) in self.words.iter().zip(other.words.iter()) {
            acc ^= a & b;
        }
        acc.count_ones() & 1 == 1
    }

    #[inline]
    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= u64::MAX << (64 - rem);
            }
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 64 {
            write!(f, "BitString({self})")
        } else {
            write!(f, "BitString[{}](0x{})", self.len, self.to_hex())
        }
    }
}
