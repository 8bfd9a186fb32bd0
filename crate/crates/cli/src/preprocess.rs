//! Microarray preprocessing: intensity clamping, variation filtering, and a
//! base-10 log transform. Thresholds follow the standard recommendation for
//! this data family and every step can be switched off.

use crate::error::{PipelineError, Result};
use crate::matrix::ExpressionMatrix;

#[derive(Debug, Clone, serde::Serialize)]
pub struct PreprocessConfig {
    pub enabled: bool,
    pub clamp: bool,
    pub clamp_min: f64,
    pub clamp_max: f64,
    /// Drop genes with max/min ≤ ratio_min or max−min ≤ range_min over the
    /// train columns (computed after clamping).
    pub filter: bool,
    pub ratio_min: f64,
    pub range_min: f64,
    pub log10: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            enabled: true,
            clamp: true,
            clamp_min: 100.0,
            clamp_max: 16000.0,
            filter: true,
            ratio_min: 5.0,
            range_min: 500.0,
            log10: true,
        }
    }
}

/// Applies clamping, filtering and the log transform; returns the processed
/// matrix and the ids of dropped genes.
pub fn preprocess(
    matrix: &ExpressionMatrix,
    config: &PreprocessConfig,
) -> Result<(ExpressionMatrix, Vec<String>)> {
    if !config.enabled {
        return Ok((matrix.clone(), Vec::new()));
    }
    let n = matrix.num_samples();
    let train = matrix.train_columns();
    let mut out = matrix.clone();

    if config.clamp {
        for v in out.values.iter_mut() {
            *v = v.clamp(config.clamp_min, config.clamp_max);
        }
    }

    let mut keep_rows: Vec<usize> = Vec::new();
    let mut dropped: Vec<String> = Vec::new();
    if config.filter {
        for g in 0..out.num_genes() {
            let row = &out.values[g * n..(g + 1) * n];
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &c in &train {
                lo = lo.min(row[c]);
                hi = hi.max(row[c]);
            }
            let ratio_ok = lo > 0.0 && hi / lo > config.ratio_min;
            let range_ok = hi - lo > config.range_min;
            if ratio_ok && range_ok {
                keep_rows.push(g);
            } else {
                dropped.push(out.gene_ids[g].clone());
            }
        }
        if keep_rows.is_empty() {
            return Err(PipelineError::InvalidData(
                "preprocessing filtered out every gene".into(),
            ));
        }
        let mut new_values = Vec::with_capacity(keep_rows.len() * n);
        let mut new_ids = Vec::with_capacity(keep_rows.len());
        for &g in &keep_rows {
            new_ids.push(out.gene_ids[g].clone());
            new_values.extend_from_slice(&out.values[g * n..(g + 1) * n]);
        }
        out.gene_ids = new_ids;
        out.values = new_values;
    }

    if config.log10 {
        for v in out.values.iter_mut() {
            *v = v.log10();
        }
    }

    Ok((out, dropped))
}
