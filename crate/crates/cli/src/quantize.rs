//! Discretization of expression values into K levels.
//!
//! Equal-frequency (quantile) binning is the default: cut points are placed
//! at the k/K quantiles of the train columns and reused verbatim for test
//! columns, so no information leaks across the split. Equal-width bins are
//! available as the alternative.

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuantizeMethod {
    Quantile,
    EqualWidth,
}

/// Ordered cut points; level(x) = number of cut points strictly below x.
#[derive(Debug, Clone, PartialEq)]
pub struct Cuts {
    points: Vec<f64>,
}

impl Cuts {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of levels the cuts produce.
    pub fn num_levels(&self) -> usize {
        self.points.len() + 1
    }

    pub fn level(&self, value: f64) -> usize {
        self.points.iter().take_while(|&&c| value > c).count()
    }

    pub fn apply(&self, values: &[f64]) -> Vec<usize> {
        values.iter().map(|&v| self.level(v)).collect()
    }
}

/// Cut points from train values. A constant gene yields no cuts (all values
/// land in level 0); the caller receives that through the `constant` flag.
pub fn compute_cuts(
    train_values: &[f64],
    k: usize,
    method: QuantizeMethod,
) -> Result<(Cuts, bool)> {
    if k < 2 {
        return Err(PipelineError::InvalidData(format!(
            "need at least 2 levels, got {k}"
        )));
    }
    if method == QuantizeMethod::Quantile && train_values.len() < k {
        return Err(PipelineError::InvalidData(format!(
            "quantile binning into {k} levels needs at least {k} values, got {}",
            train_values.len()
        )));
    }
    if train_values.iter().any(|v| !v.is_finite()) {
        return Err(PipelineError::InvalidData(
            "cannot quantize non-finite values".into(),
        ));
    }
    let mut sorted = train_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    if lo == hi {
        return Ok((Cuts { points: Vec::new() }, true));
    }

    let mut points = Vec::with_capacity(k - 1);
    match method {
        QuantizeMethod::Quantile => {
            let n = sorted.len();
            for i in 1..k {
                let pos = i * n / k;
                if pos == 0 || pos >= n {
                    continue;
                }
                let cut = 0.5 * (sorted[pos - 1] + sorted[pos]);
                points.push(cut);
            }
        }
        QuantizeMethod::EqualWidth => {
            let width = (hi - lo) / k as f64;
            for i in 1..k {
                points.push(lo + width * i as f64);
            }
        }
    }
    points.dedup_by(|a, b| a == b);
    Ok((Cuts { points }, false))
}

/// One-shot quantization of a value vector (cuts computed on it directly).
pub fn quantize(
    values: &[f64],
    k: usize,
    method: QuantizeMethod,
) -> Result<(Vec<usize>, Cuts, bool)> {
    let (cuts, constant) = compute_cuts(values, k, method)?;
    Ok((cuts.apply(values), cuts, constant))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_on_distinct_values() {
        let values: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let (levels, cuts, constant) = quantize(&values, 5, QuantizeMethod::Quantile).unwrap();
        assert!(!constant);
        assert_eq!(levels, vec![0, 0, 1, 1, 2, 2, 3, 3, 4, 4]);
        assert_eq!(cuts.num_levels(), 5);
    }

    #[test]
    fn constant_gene_is_flagged() {
        let (levels, _, constant) = quantize(&[3.0; 8], 5, QuantizeMethod::Quantile).unwrap();
        assert!(constant);
        assert!(levels.iter().all(|&l| l == 0));
    }

    #[test]
    fn equal_width_two_levels() {
        let (levels, _, _) = quantize(&[0.0, 10.0], 2, QuantizeMethod::EqualWidth).unwrap();
        assert_eq!(levels, vec![0, 1]);
    }

    #[test]
    fn cuts_transfer_to_test_values() {
        let train: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        let (cuts, _) = compute_cuts(&train, 5, QuantizeMethod::Quantile).unwrap();
        // unseen extremes clamp into the outer bins
        assert_eq!(cuts.apply(&[-100.0, 3.2, 100.0]), vec![0, 1, 4]);
    }

    #[test]
    fn too_few_values_for_quantile() {
        assert!(compute_cuts(&[1.0, 2.0], 5, QuantizeMethod::Quantile).is_err());
    }

    #[test]
    fn heavy_ties_collapse_duplicate_cuts() {
        let values = vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 9.0];
        let (cuts, constant) = compute_cuts(&values, 4, QuantizeMethod::Quantile).unwrap();
        assert!(!constant);
        // duplicate quantile cuts collapse; fewer effective levels is fine
        let mut pts = cuts.points().to_vec();
        pts.dedup();
        assert_eq!(pts.len(), cuts.points().len());
    }
}
