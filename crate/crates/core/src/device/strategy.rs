//! Classical devices: lookup tables and source-correlated cheaters.

use std::fmt;
use std::sync::Arc;

use super::Device;
use crate::bits::BitString;
use crate::error::{invalid, Result};

/// A total input-to-output table for one device.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategyTable {
    id: String,
    input_len: usize,
    outputs: Vec<BitString>,
}

impl StrategyTable {
    /// Build from `(input, output)` entries; every input of `input_len` bits
    /// must appear exactly once.
    pub fn new(id: &str, input_len: usize, entries: &[(BitString, BitString)]) -> Result<Self> {
        if input_len > 16 {
            return invalid(format!("device {id}: inputs longer than 16 bits are not tabulated"));
        }
        let mut outputs: Vec<Option<BitString>> = vec![None; 1 << input_len];
        for (input, output) in entries {
            if input.len() != input_len {
                return invalid(format!(
                    "device {id}: input {input} has {} bits, expected {input_len}",
                    input.len()
                ));
            }
            let slot = &mut outputs[input.to_u64() as usize];
            if slot.is_some() {
                return invalid(format!("device {id}: input {input} listed twice"));
            }
            *slot = Some(output.clone());
        }
        let outputs = outputs
            .into_iter()
            .enumerate()
            .map(|(i, o)| {
                o.ok_or_else(|| {
                    crate::Error::InvalidArgument(format!(
                        "device {id}: no entry for input {}",
                        BitString::from_u64(i as u64, input_len)
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            id: id.to_string(),
            input_len,
            outputs,
        })
    }

    /// One-bit in, one-bit out table `input -> f[input]`.
    pub fn from_bits(id: &str, f: [bool; 2]) -> Self {
        Self {
            id: id.to_string(),
            input_len: 1,
            outputs: f.iter().map(|&b| BitString::from_bools(&[b])).collect(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn lookup(&self, input: &BitString) -> &BitString {
        &self.outputs[input.to_u64() as usize]
    }
}

/// Parse lines of `device-id input-bits output-bits`. Blank lines and lines
/// starting with `#` are skipped. Tables are returned in order of first
/// appearance.
pub fn parse_strategy_tables(text: &str) -> Result<Vec<StrategyTable>> {
    let mut order: Vec<String> = Vec::new();
    let mut entries: Vec<Vec<(BitString, BitString)>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [id, input, output] = fields[..] else {
            return invalid(format!("line {}: expected `device-id input-bits output-bits`", lineno + 1));
        };
        let input = BitString::parse_binary(input)
            .map_err(|e| crate::Error::InvalidArgument(format!("line {}: {e}", lineno + 1)))?;
        let output = BitString::parse_binary(output)
            .map_err(|e| crate::Error::InvalidArgument(format!("line {}: {e}", lineno + 1)))?;
        let idx = match order.iter().position(|o| o == id) {
            Some(i) => i,
            None => {
                order.push(id.to_string());
                entries.push(Vec::new());
                order.len() - 1
            }
        };
        entries[idx].push((input, output));
    }
    order
        .iter()
        .zip(&entries)
        .map(|(id, e)| {
            let len = e[0].0.len();
            StrategyTable::new(id, len, e)
        })
        .collect()
}

#[derive(Debug)]
pub struct TableDevice {
    table: Arc<StrategyTable>,
}

impl TableDevice {
    pub(crate) fn new(table: Arc<StrategyTable>) -> Self {
        Self { table }
    }
}

impl Device for TableDevice {
    fn id(&self) -> &str {
        self.table.id()
    }

    fn query(&mut self, input: &BitString) -> BitString {
        if input.len() != self.table.input_len() {
            return BitString::zeros(1);
        }
        self.table.lookup(input).clone()
    }
}

/// How a source-correlated device answers. `knowledge` is what it was told
/// about the source at initialization; `device` is its position in the
/// implementation and `round` counts its own previous queries.
pub trait CheatStrategy: Send + Sync {
    fn answer(&self, knowledge: &BitString, device: usize, round: usize, input: &BitString) -> BitString;

    fn name(&self) -> String {
        "custom".into()
    }
}

impl fmt::Debug for dyn CheatStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CheatStrategy({})", self.name())
    }
}

/// Answer with per-knowledge-value strategy tables: `tables[v][device]`
/// where `v` is the knowledge read as a number.
#[derive(Debug)]
pub struct SwitchOnKnowledge {
    pub tables: Vec<Vec<StrategyTable>>,
}

impl CheatStrategy for SwitchOnKnowledge {
    fn answer(&self, knowledge: &BitString, device: usize, _round: usize, input: &BitString) -> BitString {
        let v = (knowledge.to_u64() as usize).min(self.tables.len() - 1);
        self.tables[v][device].lookup(input).clone()
    }

    fn name(&self) -> String {
        "switch-on-knowledge".into()
    }
}

pub struct CorrelatedDevice {
    id: String,
    index: usize,
    round: usize,
    knowledge: BitString,
    strategy: Arc<dyn CheatStrategy>,
}

impl CorrelatedDevice {
    pub(crate) fn new(index: usize, knowledge: BitString, strategy: Arc<dyn CheatStrategy>) -> Self {
        Self {
            id: format!("C{index}"),
            index,
            round: 0,
            knowledge,
            strategy,
        }
    }
}

impl Device for CorrelatedDevice {
    fn id(&self) -> &str {
        &self.id
    }

    fn query(&mut self, input: &BitString) -> BitString {
        let out = self.strategy.answer(&self.knowledge, self.index, self.round, input);
        self.round += 1;
        out
    }
}
