//! Gray-mapped square QAM with unit average energy.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "16QAM", alias = "16qam", alias = "qam16")]
    Qam16,
    #[serde(rename = "64QAM", alias = "64qam", alias = "qam64")]
    Qam64,
    #[serde(rename = "256QAM", alias = "256qam", alias = "qam256")]
    Qam256,
}

impl Modulation {
    pub fn from_order(order: usize) -> Result<Self> {
        match order {
            16 => Ok(Self::Qam16),
            64 => Ok(Self::Qam64),
            256 => Ok(Self::Qam256),
            _ => Err(Error::Domain(format!("unsupported QAM order {order}"))),
        }
    }

    pub fn order(self) -> usize {
        1 << self.bits_per_symbol()
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Self::Qam16 => 4,
            Self::Qam64 => 6,
            Self::Qam256 => 8,
        }
    }

    fn bits_per_dim(self) -> usize {
        self.bits_per_symbol() / 2
    }

    fn scale(self) -> f64 {
        (2.0 * (self.order() as f64 - 1.0) / 3.0).sqrt()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Qam16 => "16QAM",
            Self::Qam64 => "64QAM",
            Self::Qam256 => "256QAM",
        }
    }
}

/// Unnormalized odd-integer level for one dimension's bits `c[0..k]`.
fn level(c: &[u8]) -> i32 {
    let k = c.len();
    let mut t = 1i32;
    for j in (1..k).rev() {
        t = (1 << (k - j)) - (1 - 2 * c[j] as i32) * t;
    }
    (1 - 2 * c[0] as i32) * t
}

/// Bits of each level, indexed by `(level + L - 1) / 2`.
fn level_table(k: usize) -> Vec<Vec<u8>> {
    let n = 1usize << k;
    let mut table = vec![Vec::new(); n];
    for code in 0..n {
        let c: Vec<u8> = (0..k).map(|b| ((code >> b) & 1) as u8).collect();
        let idx = ((level(&c) + n as i32 - 1) / 2) as usize;
        table[idx] = c;
    }
    table
}

pub fn qam_map(bits: &[u8], modulation: Modulation) -> Result<Vec<Complex64>> {
    let bps = modulation.bits_per_symbol();
    if !bits.len().is_multiple_of(bps) {
        return Err(Error::Domain(format!("{} bits is not a multiple of {bps}", bits.len())));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::Domain("bits must be 0 or 1".into()));
    }
    let s = modulation.scale();
    Ok(bits
        .chunks_exact(bps)
        .map(|b| {
            let i: Vec<u8> = b.iter().step_by(2).copied().collect();
            let q: Vec<u8> = b.iter().skip(1).step_by(2).copied().collect();
            Complex64::new(level(&i) as f64, level(&q) as f64) / s
        })
        .collect())
}

/// Nearest-point hard decisions.
#[derive(Debug, Clone)]
pub struct HardDemapper {
    modulation: Modulation,
    table: Vec<Vec<u8>>,
}

impl HardDemapper {
    pub fn new(modulation: Modulation) -> Self {
        Self { modulation, table: level_table(modulation.bits_per_dim()) }
    }

    fn decide(&self, x: f64) -> &[u8] {
        let n = self.table.len() as f64;
        let idx = ((x * self.modulation.scale() + n - 1.0) / 2.0).round().clamp(0.0, n - 1.0);
        &self.table[idx as usize]
    }

    pub fn demap_into(&self, symbol: Complex64, out: &mut Vec<u8>) {
        let i = self.decide(symbol.re);
        let q = self.decide(symbol.im);
        for (a, b) in i.iter().zip(q) {
            out.push(*a);
            out.push(*b);
        }
    }

    pub fn demap(&self, symbols: &[Complex64]) -> Vec<u8> {
        let mut out = Vec::with_capacity(symbols.len() * self.modulation.bits_per_symbol());
        for &s in symbols {
            self.demap_into(s, &mut out);
        }
        out
    }
}

/// Hard-decision demapping; decisions do not depend on the noise level.
pub fn hard_demap(symbols: &[Complex64], modulation: Modulation) -> Vec<u8> {
    HardDemapper::new(modulation).demap(symbols)
}

/// Every constellation point, indexed by the integer whose bit `b` is `bits[b]`.
pub fn constellation(modulation: Modulation) -> Vec<Complex64> {
    let bps = modulation.bits_per_symbol();
    let bits: Vec<u8> = (0..modulation.order()).flat_map(|v| (0..bps).map(move |b| ((v >> b) & 1) as u8)).collect();
    qam_map(&bits, modulation).expect("well-formed bits")
}
