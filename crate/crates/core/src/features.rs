//! Feature tables over an alphabet and empirical moment vectors.

use alloc::format;
use alloc::vec::Vec;

use crate::alphabet::{Alphabet, Sample};
use crate::error::{Error, Result};

/// How a feature table was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    /// Column k holds x^(k+1).
    Moment,
    /// Arbitrary user-supplied columns.
    Custom,
}

/// A K×m matrix of feature values, entry `(j, k) = φ_k(x_j)`.
///
/// m = 0 is allowed and denotes the unconstrained model.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    values: Vec<f64>, // row-major, values[j * m + k]
    num_symbols: usize,
    num_features: usize,
    kind: FeatureKind,
}

impl FeatureTable {
    /// Builds a table from row-major values (K rows of m features).
    pub fn custom(values: Vec<f64>, num_symbols: usize, num_features: usize) -> Result<Self> {
        if values.len() != num_symbols * num_features {
            return Err(Error::DimensionMismatch(format!(
                "feature table needs {}x{} = {} values, got {}",
                num_symbols,
                num_features,
                num_symbols * num_features,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "feature value at flat index {pos} is not finite"
            )));
        }
        Ok(FeatureTable {
            values,
            num_symbols,
            num_features,
            kind: FeatureKind::Custom,
        })
    }

    /// One indicator column per symbol except the last; spans the simplex,
    /// so the fitted model saturates at the empirical type.
    pub fn indicators(alphabet: &Alphabet) -> Self {
        let k = alphabet.len();
        let m = k - 1;
        let mut values = alloc::vec![0.0; k * m];
        for j in 0..k.saturating_sub(1) {
            values[j * m + j] = 1.0;
        }
        FeatureTable {
            values,
            num_symbols: k,
            num_features: m,
            kind: FeatureKind::Custom,
        }
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    #[inline]
    pub fn value(&self, symbol: usize, feature: usize) -> f64 {
        self.values[symbol * self.num_features + feature]
    }

    /// Row of feature values for one symbol.
    #[inline]
    pub fn row(&self, symbol: usize) -> &[f64] {
        let m = self.num_features;
        &self.values[symbol * m..(symbol + 1) * m]
    }

    /// A table containing only the first `m` columns of `self`.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m > self.num_features {
            return Err(Error::DimensionMismatch(format!(
                "prefix of {m} columns from a table with {}",
                self.num_features
            )));
        }
        let mut values = Vec::with_capacity(self.num_symbols * m);
        for j in 0..self.num_symbols {
            values.extend_from_slice(&self.row(j)[..m]);
        }
        Ok(FeatureTable {
            values,
            num_symbols: self.num_symbols,
            num_features: m,
            kind: self.kind,
        })
    }
}

/// Moment features φ_k(x) = x^k for k = 1..=m over the alphabet.
///
/// m = 0 yields an empty table (the unconstrained model). Rejects powers that
/// overflow f64 range.
pub fn build_moment_features(alphabet: &Alphabet, m: usize) -> Result<FeatureTable> {
    let k = alphabet.len();
    let mut values = Vec::with_capacity(k * m);
    for j in 0..k {
        let x = alphabet.symbol(j);
        let mut pow = 1.0;
        for p in 1..=m {
            pow *= x;
            if !pow.is_finite() {
                return Err(Error::FeatureOverflow {
                    symbol: x,
                    power: p as u32,
                });
            }
            values.push(pow);
        }
    }
    Ok(FeatureTable {
        values,
        num_symbols: k,
        num_features: m,
        kind: FeatureKind::Moment,
    })
}

/// Empirical feature means φ̄_k = (1/n) Σ_i φ_k(x^(i)).
///
/// Always lies in the moment polytope: it is a convex combination of table rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    means: Vec<f64>,
}

impl MomentVector {
    pub fn new(means: Vec<f64>) -> Self {
        MomentVector { means }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }
}

/// Empirical moments of a sample under a feature table.
pub fn empirical_moments(sample: &Sample, features: &FeatureTable) -> Result<MomentVector> {
    if let Some(&bad) = sample
        .indices()
        .iter()
        .find(|&&i| i >= features.num_symbols())
    {
        return Err(Error::InvalidSample(format!(
            "sample index {bad} out of range for feature table with {} symbols",
            features.num_symbols()
        )));
    }
    let m = features.num_features();
    let mut sums = alloc::vec![0.0f64; m];
    for &i in sample.indices() {
        let row = features.row(i);
        for k in 0..m {
            sums[k] += row[k];
        }
    }
    let n = sample.len() as f64;
    for s in sums.iter_mut() {
        *s /= n;
    }
    Ok(MomentVector::new(sums))
}

/// Moments of a type (per-symbol counts) under a feature table.
pub(crate) fn moments_of_counts(counts: &[usize], features: &FeatureTable) -> Vec<f64> {
    let m = features.num_features();
    let n: usize = counts.iter().sum();
    let inv_n = 1.0 / n as f64;
    let mut sums = alloc::vec![0.0f64; m];
    for (j, &c) in counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let w = c as f64 * inv_n;
        let row = features.row(j);
        for k in 0..m {
            sums[k] += w * row[k];
        }
    }
    sums
}
