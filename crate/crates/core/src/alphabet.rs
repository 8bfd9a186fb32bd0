//! Finite sample spaces and observed samples over them.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// An ordered finite set of real-valued symbols (e.g. quantization levels).
#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet {
    symbols: Vec<f64>,
}

impl Alphabet {
    /// Strictly increasing, finite symbol values; at least two.
    pub fn new(symbols: Vec<f64>) -> Result<Self> {
        if symbols.len() < 2 {
            return Err(Error::InvalidAlphabet(format!(
                "need at least 2 symbols, got {}",
                symbols.len()
            )));
        }
        for (j, &s) in symbols.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::InvalidAlphabet(format!("symbol {j} is not finite")));
            }
        }
        for w in symbols.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidAlphabet(format!(
                    "symbols must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        Ok(Alphabet { symbols })
    }

    /// The integer levels 0, 1, …, k−1 used for quantized data.
    pub fn integer_levels(k: usize) -> Result<Self> {
        Alphabet::new((0..k).map(|v| v as f64).collect())
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn symbols(&self) -> &[f64] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> f64 {
        self.symbols[index]
    }
}

/// A sample of alphabet indices, length ≥ 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    indices: Vec<usize>,
}

impl Sample {
    /// Validates every index against the alphabet size `k`.
    pub fn new(indices: Vec<usize>, k: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidSample("sample is empty".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= k) {
            return Err(Error::InvalidSample(format!(
                "index {bad} out of range for alphabet of size {k}"
            )));
        }
        Ok(Sample { indices })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Per-symbol occurrence counts over an alphabet of size `k`.
    pub fn counts(&self, k: usize) -> Vec<usize> {
        let mut counts = alloc::vec![0usize; k];
        for &i in &self.indices {
            counts[i] += 1;
        }
        counts
    }
}
