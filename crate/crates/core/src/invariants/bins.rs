use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

use super::steerable::frequency;

/// Default radial bin density.
pub const DEFAULT_B1: f64 = 1.0;
/// Default angular bin density (bins of width π/6).
pub const DEFAULT_B2: f64 = 6.0 / PI;

/// `(⌊b₁|k₁|⌋, ⌊b₁|k₂|⌋, ⌊b₂θ⌋)`; `angle = −1` marks pairs with a zero frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BinKey {
    pub r1: i64,
    pub r2: i64,
    pub angle: i64,
}

/// Bin of the frequency pair `(k₁, k₂)`, with `θ = atan2(|k₁ × k₂|, k₁·k₂) ∈ [0, π]`.
pub fn bin_key(k1: (i64, i64), k2: (i64, i64), b1: f64, b2: f64) -> BinKey {
    let n1 = ((k1.0 * k1.0 + k1.1 * k1.1) as f64).sqrt();
    let n2 = ((k2.0 * k2.0 + k2.1 * k2.1) as f64).sqrt();
    let angle = if k1 == (0, 0) || k2 == (0, 0) {
        -1
    } else {
        let cross = (k1.0 * k2.1 - k1.1 * k2.0).abs() as f64;
        let dot = (k1.0 * k2.0 + k1.1 * k2.1) as f64;
        (b2 * cross.atan2(dot)).floor() as i64
    };
    BinKey {
        r1: (b1 * n1).floor() as i64,
        r2: (b1 * n2).floor() as i64,
        angle,
    }
}

/// Assignment of every pair in `𝒳 × 𝒳` to a bin `T`, with bins numbered in
/// key order.
#[derive(Debug, Clone)]
pub struct BinMap {
    n: usize,
    b1: f64,
    b2: f64,
    bin_of: Vec<u32>,
    sizes: Vec<usize>,
    keys: Vec<BinKey>,
}

pub fn bin_map(n: usize, b1: f64, b2: f64) -> Result<BinMap> {
    if !(b1 > 0.0 && b1.is_finite() && b2 > 0.0 && b2.is_finite()) {
        return Err(Error::invalid(format!(
            "bin densities must be positive, got {b1}, {b2}"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("grid radius n must be positive"));
    }
    let side = 4 * n;
    let area = side * side;
    let freqs: Vec<(i64, i64)> = (0..area).map(|k| frequency(k, side)).collect();
    let mut ids: BTreeMap<BinKey, u32> = BTreeMap::new();
    for &f1 in &freqs {
        for &f2 in &freqs {
            ids.entry(bin_key(f1, f2, b1, b2)).or_insert(0);
        }
    }
    let keys: Vec<BinKey> = ids.keys().copied().collect();
    for (i, slot) in ids.values_mut().enumerate() {
        *slot = i as u32;
    }
    let mut bin_of = Vec::with_capacity(area * area);
    let mut sizes = vec![0usize; keys.len()];
    for &f1 in &freqs {
        for &f2 in &freqs {
            let t = ids[&bin_key(f1, f2, b1, b2)];
            sizes[t as usize] += 1;
            bin_of.push(t);
        }
    }
    Ok(BinMap {
        n,
        b1,
        b2,
        bin_of,
        sizes,
        keys,
    })
}

impl BinMap {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn densities(&self) -> (f64, f64) {
        (self.b1, self.b2)
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[BinKey] {
        &self.keys
    }

    pub fn bin_of(&self, pair: usize) -> usize {
        self.bin_of[pair] as usize
    }

    /// `|I_T|` for every bin.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// The pre-image `I_T` as flat pair indices.
    pub fn members(&self, bin: usize) -> Vec<usize> {
        (0..self.bin_of.len())
            .filter(|&p| self.bin_of[p] as usize == bin)
            .collect()
    }

    pub fn same_layout(&self, other: &BinMap) -> bool {
        self.n == other.n && self.b1 == other.b1 && self.b2 == other.b2
    }

    /// `out[T] = Σ_{p ∈ I_T} values[p]`.
    pub fn reduce(&self, values: &[Complex64]) -> Result<Vec<Complex64>> {
        if values.len() != self.bin_of.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} pairs", self.bin_of.len()),
                actual: format!("{}", values.len()),
            });
        }
        let mut out = vec![Complex64::default(); self.len()];
        for (z, &t) in values.iter().zip(&self.bin_of) {
            out[t as usize] += z;
        }
        Ok(out)
    }
}
