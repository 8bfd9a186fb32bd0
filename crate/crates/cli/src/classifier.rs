//! Class-conditional-independence classifier over the selected genes.
//!
//! For every selected gene and class, a generative maximum-entropy
//! distribution is fitted to the class's train columns with the gene's
//! chosen moment count; prediction multiplies the per-gene likelihoods with
//! the empirical class priors. Per-gene probabilities are floored at a small
//! ε and renormalized so unseen levels never zero out a whole product.

use maxnml_core::{build_moment_features, empirical_moments, fit_maxent, Alphabet, Sample};

use crate::error::{PipelineError, Result};
use crate::genes::GeneSelection;
use crate::matrix::{ExpressionMatrix, Split};
use crate::quantize::Cuts;

#[derive(Debug, Clone)]
pub struct ClassifierGene {
    pub gene_id: String,
    pub gene_row: usize,
    pub chosen_m: usize,
    pub cuts: Cuts,
    /// `per_class_probs[c][level]`
    pub per_class_probs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct MaxEntClassifier {
    pub genes: Vec<ClassifierGene>,
    pub priors: Vec<f64>,
    pub class_names: Vec<String>,
    pub levels: usize,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[true_class][predicted_class]`
    pub confusion: Vec<Vec<usize>>,
    pub n: usize,
}

/// Fits the classifier on the train columns of `matrix` using the top
/// `top_g` ranked selections.
pub fn build_classifier(
    matrix: &ExpressionMatrix,
    ranked: &[GeneSelection],
    top_g: usize,
    levels: usize,
    smoothing_eps: f64,
) -> Result<MaxEntClassifier> {
    if top_g == 0 || ranked.is_empty() {
        return Err(PipelineError::InvalidData(
            "classifier needs at least one ranked gene".into(),
        ));
    }
    let c = matrix.class_names.len();
    let train = matrix.train_columns();
    let mut class_columns: Vec<Vec<usize>> = vec![Vec::new(); c];
    for &col in &train {
        class_columns[matrix.labels[col]].push(col);
    }
    if let Some(empty) = class_columns.iter().position(|cols| cols.is_empty()) {
        return Err(PipelineError::InvalidData(format!(
            "class {:?} has no train columns",
            matrix.class_names[empty]
        )));
    }
    let priors: Vec<f64> = class_columns
        .iter()
        .map(|cols| cols.len() as f64 / train.len() as f64)
        .collect();

    let alphabet = Alphabet::integer_levels(levels).map_err(PipelineError::Core)?;
    let mut genes = Vec::new();
    for sel in ranked.iter().take(top_g) {
        let gene_row = matrix
            .gene_ids
            .iter()
            .position(|id| *id == sel.gene_id)
            .ok_or_else(|| {
                PipelineError::InvalidData(format!("gene {:?} not in matrix", sel.gene_id))
            })?;
        let row = matrix.row(gene_row);
        let table = build_moment_features(&alphabet, sel.chosen_m).map_err(PipelineError::Core)?;

        let mut per_class_probs = Vec::with_capacity(c);
        for cols in &class_columns {
            let values: Vec<usize> = cols.iter().map(|&col| sel.cuts.level(row[col])).collect();
            let sample = Sample::new(values, levels).map_err(|e| PipelineError::Gene {
                gene: sel.gene_id.clone(),
                source: e,
            })?;
            let moments = empirical_moments(&sample, &table).map_err(PipelineError::Core)?;
            let fit = fit_maxent(&table, &moments).map_err(|e| PipelineError::Gene {
                gene: sel.gene_id.clone(),
                source: e,
            })?;
            let mut probs = fit.probs().to_vec();
            // smoothing floor against unseen levels
            let mut total = 0.0;
            for p in probs.iter_mut() {
                *p = p.max(smoothing_eps);
                total += *p;
            }
            for p in probs.iter_mut() {
                *p /= total;
            }
            per_class_probs.push(probs);
        }
        genes.push(ClassifierGene {
            gene_id: sel.gene_id.clone(),
            gene_row,
            chosen_m: sel.chosen_m,
            cuts: sel.cuts.clone(),
            per_class_probs,
        });
    }

    Ok(MaxEntClassifier {
        genes,
        priors,
        class_names: matrix.class_names.clone(),
        levels,
    })
}

impl MaxEntClassifier {
    /// Prediction from pre-quantized levels, one per classifier gene.
    /// Returns the class index and per-class log-scores; ties break to the
    /// lower class index.
    pub fn predict_levels(&self, levels: &[usize]) -> (usize, Vec<f64>) {
        let c = self.priors.len();
        let mut scores: Vec<f64> = self.priors.iter().map(|p| p.ln()).collect();
        for (gene, &lvl) in self.genes.iter().zip(levels) {
            for (cls, score) in scores.iter_mut().enumerate().take(c) {
                *score += gene.per_class_probs[cls][lvl].ln();
            }
        }
        let mut best = 0;
        for cls in 1..c {
            if scores[cls] > scores[best] {
                best = cls;
            }
        }
        (best, scores)
    }

    /// Prediction for one matrix column, quantizing with the stored train
    /// cut points.
    pub fn predict_column(&self, matrix: &ExpressionMatrix, column: usize) -> (usize, Vec<f64>) {
        let levels: Vec<usize> = self
            .genes
            .iter()
            .map(|g| g.cuts.level(matrix.row(g.gene_row)[column]))
            .collect();
        self.predict_levels(&levels)
    }
}

/// Accuracy and confusion counts over the chosen split of `matrix` (which
/// must be the same preprocessed matrix the classifier was built from).
pub fn evaluate(
    classifier: &MaxEntClassifier,
    matrix: &ExpressionMatrix,
    split: Option<Split>,
) -> Result<Evaluation> {
    let columns = matrix.columns(split);
    if columns.is_empty() {
        return Err(PipelineError::InvalidData(
            "no columns in the requested split".into(),
        ));
    }
    let c = classifier.priors.len();
    let mut confusion = vec![vec![0usize; c]; c];
    let mut correct = 0usize;
    for &col in &columns {
        let truth = matrix.labels[col];
        let (pred, _) = classifier.predict_column(matrix, col);
        confusion[truth][pred] += 1;
        if pred == truth {
            correct += 1;
        }
    }
    Ok(Evaluation {
        accuracy: correct as f64 / columns.len() as f64,
        confusion,
        n: columns.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genes::{rank_genes, PipelineConfig};
    use crate::preprocess::PreprocessConfig;
    use crate::quantize::QuantizeMethod;

    fn config() -> PipelineConfig {
        PipelineConfig {
            levels: 2,
            m_min: 1,
            m_max: 2,
            quantize: QuantizeMethod::Quantile,
            preprocess: PreprocessConfig {
                enabled: false,
                ..PreprocessConfig::default()
            },
            ..PipelineConfig::default()
        }
    }

    fn matrix_with_labels(labels: Vec<usize>, rows: Vec<(&str, Vec<f64>)>) -> ExpressionMatrix {
        let n = labels.len();
        ExpressionMatrix {
            gene_ids: rows.iter().map(|(id, _)| id.to_string()).collect(),
            sample_ids: (0..n).map(|i| format!("s{i}")).collect(),
            values: rows.iter().flat_map(|(_, v)| v.clone()).collect(),
            labels,
            class_names: vec!["x".into(), "y".into()],
            split: vec![Split::Train; n],
        }
    }

    #[test]
    fn single_separating_gene_reaches_full_train_accuracy() {
        let labels = vec![0, 1, 0, 1, 0, 1, 0, 1];
        let hot: Vec<f64> = labels
            .iter()
            .map(|&c| if c == 1 { 9.0 } else { 1.0 })
            .collect();
        let matrix = matrix_with_labels(labels, vec![("hot", hot)]);
        let ranked = rank_genes(&matrix, &config()).unwrap();
        let clf = build_classifier(&matrix, &ranked, 1, 2, 1e-6).unwrap();
        let eval = evaluate(&clf, &matrix, Some(Split::Train)).unwrap();
        assert_eq!(eval.accuracy, 1.0);
        assert_eq!(eval.confusion[0][1], 0);
        assert_eq!(eval.confusion[1][0], 0);
    }

    #[test]
    fn priors_follow_the_27_11_split() {
        let mut labels = vec![0usize; 38];
        for l in labels.iter_mut().take(11) {
            *l = 1;
        }
        let gene: Vec<f64> = (0..38).map(|i| (i % 7) as f64).collect();
        let matrix = matrix_with_labels(labels, vec![("g", gene)]);
        let ranked = rank_genes(&matrix, &config()).unwrap();
        let clf = build_classifier(&matrix, &ranked, 1, 2, 1e-6).unwrap();
        assert!((clf.priors[0] - 27.0 / 38.0).abs() < 1e-12);
        assert!((clf.priors[1] - 11.0 / 38.0).abs() < 1e-12);
    }

    #[test]
    fn unseen_levels_keep_finite_scores() {
        let labels = vec![0, 1, 0, 1, 0, 1, 0, 1];
        let hot: Vec<f64> = labels
            .iter()
            .map(|&c| if c == 1 { 9.0 } else { 1.0 })
            .collect();
        let matrix = matrix_with_labels(labels, vec![("hot", hot)]);
        let ranked = rank_genes(&matrix, &config()).unwrap();
        let clf = build_classifier(&matrix, &ranked, 1, 2, 1e-6).unwrap();
        // level 1 never occurs for class 0, yet the floored score is finite
        let (_, scores) = clf.predict_levels(&[1]);
        assert!(scores.iter().all(|s| s.is_finite()));
    }

    #[test]
    fn uninformative_classifier_falls_back_to_the_majority_prior() {
        // 27/11 split, gene identical across classes: every prediction is
        // the majority class, train accuracy 27/38
        let mut labels = vec![0usize; 38];
        for l in labels.iter_mut().take(11) {
            *l = 1;
        }
        let gene: Vec<f64> = (0..38).map(|i| (i % 5) as f64).collect();
        let matrix = matrix_with_labels(labels, vec![("g", gene)]);
        let ranked = rank_genes(&matrix, &config()).unwrap();
        let clf = build_classifier(&matrix, &ranked, 1, 2, 1e-6).unwrap();
        let eval = evaluate(&clf, &matrix, Some(Split::Train)).unwrap();
        assert!((eval.accuracy - 27.0 / 38.0).abs() < 1e-12);
        assert_eq!(eval.confusion[1][0], 11);
    }

    #[test]
    fn swapped_evidence_flips_the_prediction() {
        let labels = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let g: Vec<f64> = labels
            .iter()
            .map(|&c| if c == 1 { 8.0 } else { 2.0 })
            .collect();
        let matrix = matrix_with_labels(labels, vec![("g", g)]);
        let ranked = rank_genes(&matrix, &config()).unwrap();
        let clf = build_classifier(&matrix, &ranked, 1, 2, 1e-6).unwrap();
        let (lo, _) = clf.predict_levels(&[0]);
        let (hi, _) = clf.predict_levels(&[1]);
        assert_eq!(lo, 0);
        assert_eq!(hi, 1);
    }
}
