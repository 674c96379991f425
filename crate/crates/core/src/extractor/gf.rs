//! Arithmetic in GF(t) for the prime powers t <= 16.

use crate::error::{invalid, Result};

/// A small finite field. Elements are `0..t`, read as base-`p` digit
/// vectors (least significant digit = constant coefficient).
#[derive(Clone, Debug)]
pub struct SmallField {
    order: usize,
    p: usize,
    exp: Vec<u8>,
    log: Vec<u8>,
}

/// Monic irreducible modulus (low to high coefficients, leading 1 omitted).
fn modulus(t: usize) -> Option<(usize, &'static [usize])> {
    match t {
        2 | 3 | 5 | 7 | 11 | 13 => Some((t, &[])),
        4 => Some((2, &[1, 1])),
        8 => Some((2, &[1, 1, 0])),
        9 => Some((3, &[1, 0])),
        16 => Some((2, &[1, 1, 0, 0])),
        _ => None,
    }
}

fn digits(v: usize, p: usize, e: usize) -> Vec<usize> {
    let mut out = vec![0; e];
    let mut v = v;
    for d in out.iter_mut() {
        *d = v % p;
        v /= p;
    }
    out
}

fn undigits(d: &[usize], p: usize) -> usize {
    d.iter().rev().fold(0, |acc, &x| acc * p + x)
}

fn poly_mul(a: usize, b: usize, p: usize, tail: &[usize]) -> usize {
    let e = tail.len().max(1);
    if tail.is_empty() {
        return (a * b) % p;
    }
    let da = digits(a, p, e);
    let db = digits(b, p, e);
    let mut prod = vec![0; 2 * e];
    for (i, &x) in da.iter().enumerate() {
        for (j, &y) in db.iter().enumerate() {
            prod[i + j] = (prod[i + j] + x * y) % p;
        }
    }
    // x^e = -tail(x)
    for k in (e..2 * e).rev() {
        let c = prod[k];
        if c == 0 {
            continue;
        }
        prod[k] = 0;
        for (i, &m) in tail.iter().enumerate() {
            prod[k - e + i] = (prod[k - e + i] + (p - m) * c) % p;
        }
    }
    undigits(&prod[..e], p)
}

impl SmallField {
    pub fn new(t: usize) -> Result<Self> {
        let Some((p, tail)) = modulus(t) else {
            return invalid(format!("block size t = {t} is not a prime power <= 16"));
        };
        for g in 1..t {
            let mut exp = Vec::with_capacity(t - 1);
            let mut seen = vec![false; t];
            let mut v = 1usize;
            let mut ok = true;
            for _ in 0..t - 1 {
                if seen[v] {
                    ok = false;
                    break;
                }
                seen[v] = true;
                exp.push(v as u8);
                v = poly_mul(v, g, p, tail);
            }
            if ok {
                let mut log = vec![0u8; t];
                for (i, &x) in exp.iter().enumerate() {
                    log[x as usize] = i as u8;
                }
                return Ok(Self { order: t, p, exp, log });
            }
        }
        unreachable!("every finite field has a generator")
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn add(&self, a: usize, b: usize) -> usize {
        if self.p == self.order {
            return (a + b) % self.p;
        }
        let (mut a, mut b, mut out, mut place) = (a, b, 0, 1);
        while a > 0 || b > 0 {
            out += ((a % self.p + b % self.p) % self.p) * place;
            a /= self.p;
            b /= self.p;
            place *= self.p;
        }
        out
    }

    pub fn mul(&self, a: usize, b: usize) -> usize {
        if a == 0 || b == 0 {
            return 0;
        }
        let n = self.order - 1;
        let s = (self.log[a] as usize + self.log[b] as usize) % n;
        self.exp[s] as usize
    }

    /// Evaluate the polynomial with coefficients `coeffs` (constant first) at `a`.
    pub fn eval(&self, coeffs: &[usize], a: usize) -> usize {
        coeffs.iter().rev().fold(0, |acc, &c| self.add(self.mul(acc, a), c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_axioms_hold() {
        for t in [2, 3, 4, 5, 7, 8, 9, 11, 13, 16] {
            let f = SmallField::new(t).unwrap();
            for a in 0..t {
                assert_eq!(f.add(a, 0), a);
                assert_eq!(f.mul(a, 1), a);
                // additive inverse exists
                assert!((0..t).any(|b| f.add(a, b) == 0));
                if a != 0 {
                    assert_eq!((1..t).filter(|&b| f.mul(a, b) == 1).count(), 1, "t={t} a={a}");
                }
                for b in 0..t {
                    assert_eq!(f.mul(a, b), f.mul(b, a));
                    for c in 0..t {
                        assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                    }
                }
            }
        }
        assert!(SmallField::new(6).is_err());
        assert!(SmallField::new(32).is_err());
    }
}
