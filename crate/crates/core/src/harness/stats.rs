//! Frequency, runs and 2-bit serial tests.

use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

use crate::bits::BitString;
use crate::error::{invalid, Result};

pub const STATS_HEADER: &str = "Advisory only. No finite battery of statistical tests can establish that \
a generator's output is uniformly distributed; passing these tests certifies nothing.";

pub const MIN_BITS: usize = 128;
const ALPHA: f64 = 0.01;

#[derive(Clone, Debug, Serialize)]
pub struct TestResult {
    pub name: &'static str,
    pub statistic: f64,
    pub p_value: f64,
    pub pass: bool,
}

impl TestResult {
    fn new(name: &'static str, statistic: f64, p_value: f64) -> Self {
        Self {
            name,
            statistic,
            p_value,
            pass: p_value >= ALPHA,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StatsReport {
    pub header: &'static str,
    pub bits: usize,
    pub alpha: f64,
    pub tests: Vec<TestResult>,
}

impl StatsReport {
    pub fn p_value(&self, name: &str) -> Option<f64> {
        self.tests.iter().find(|t| t.name == name).map(|t| t.p_value)
    }
}

fn monobit(bits: &BitString) -> TestResult {
    let n = bits.len() as f64;
    let s = 2.0 * bits.count_ones() as f64 - n;
    let stat = s.abs() / n.sqrt();
    TestResult::new("monobit", stat, erfc(stat / 2f64.sqrt()))
}

fn runs(bits: &BitString) -> TestResult {
    let n = bits.len() as f64;
    let pi = bits.count_ones() as f64 / n;
    // The runs test presupposes a passing frequency test.
    if (pi - 0.5).abs() >= 2.0 / n.sqrt() {
        return TestResult::new("runs", f64::NAN, 0.0);
    }
    let v = 1 + (1..bits.len()).filter(|&i| bits.get(i) != bits.get(i - 1)).count();
    let v = v as f64;
    let num = (v - 2.0 * n * pi * (1.0 - pi)).abs();
    let den = 2.0 * (2.0 * n).sqrt() * pi * (1.0 - pi);
    TestResult::new("runs", v, erfc(num / den))
}

/// `ψ²_m` over overlapping, wrapped `m`-bit patterns.
fn psi_sq(bits: &BitString, m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = bits.len();
    let mut counts = vec![0u64; 1 << m];
    for i in 0..n {
        let mut v = 0usize;
        for j in 0..m {
            v = (v << 1) | bits.get((i + j) % n) as usize;
        }
        counts[v] += 1;
    }
    let sum: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    (1u64 << m) as f64 / n as f64 * sum - n as f64
}

fn serial(bits: &BitString) -> [TestResult; 2] {
    let (p2, p1, p0) = (psi_sq(bits, 2), psi_sq(bits, 1), psi_sq(bits, 0));
    let d1 = p2 - p1;
    let d2 = p2 - 2.0 * p1 + p0;
    [
        TestResult::new("serial", d1, gamma_ur(1.0, d1.max(0.0) / 2.0)),
        TestResult::new("serial_second_difference", d2, gamma_ur(0.5, d2.max(0.0) / 2.0)),
    ]
}

/// Run the battery on at least [`MIN_BITS`] bits.
pub fn stats_battery(bits: &BitString) -> Result<StatsReport> {
    if bits.len() < MIN_BITS {
        return invalid(format!("{} bits is below the minimum of {MIN_BITS}", bits.len()));
    }
    let [s1, s2] = serial(bits);
    Ok(StatsReport {
        header: STATS_HEADER,
        bits: bits.len(),
        alpha: ALPHA,
        tests: vec![monobit(bits), runs(bits), s1, s2],
    })
}
