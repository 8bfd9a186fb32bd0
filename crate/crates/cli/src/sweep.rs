//! Quantization-level sweep: re-rank and re-classify at each level count,
//! emitting the accuracy and mean-NML pair per level. The ranking is
//! recomputed from scratch at every level (recorded in the report as
//! `ranking_recomputed_per_level`).

use crate::classifier::{build_classifier, evaluate};
use crate::error::Result;
use crate::genes::{rank_genes, PipelineConfig};
use crate::matrix::{ExpressionMatrix, Split};

#[derive(Debug, Clone, serde::Serialize)]
pub struct SweepPoint {
    pub levels: usize,
    /// Accuracy over the evaluation split (test when present, else train).
    pub accuracy: f64,
    /// Mean minimum NML over the top genes at this level count.
    pub mean_min_nml_nats: f64,
}

/// Runs the pipeline for every level count in `levels_range`, using the top
/// `top_g` genes per level for both the classifier and the NML average.
pub fn quantization_sweep(
    matrix: &ExpressionMatrix,
    base: &PipelineConfig,
    levels_range: (usize, usize),
    top_g: usize,
) -> Result<Vec<SweepPoint>> {
    let eval_split = if matrix.test_columns().is_empty() {
        Some(Split::Train)
    } else {
        Some(Split::Test)
    };
    let mut points = Vec::new();
    for levels in levels_range.0..=levels_range.1 {
        let config = PipelineConfig {
            levels,
            ..base.clone()
        };
        let ranked = rank_genes(matrix, &config)?;
        let used = top_g.min(ranked.len());
        let classifier = build_classifier(matrix, &ranked, used, levels, config.smoothing_eps)?;
        let eval = evaluate(&classifier, matrix, eval_split)?;
        let mean_nml = ranked
            .iter()
            .take(used)
            .map(|s| s.min_nml_nats)
            .sum::<f64>()
            / used as f64;
        points.push(SweepPoint {
            levels,
            accuracy: eval.accuracy,
            mean_min_nml_nats: mean_nml,
        });
    }
    Ok(points)
}
