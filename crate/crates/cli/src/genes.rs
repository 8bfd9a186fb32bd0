//! Per-gene moment-count selection by conditional NML, and gene ranking.
//!
//! For each gene: quantize the train columns, sweep m over the configured
//! range, compute the conditional NML of the class labels given the gene,
//! and keep the m with the smallest codelength. Genes are then ranked by
//! that minimum.
//!
//! Conditional COMP depends on the gene only through its per-level count
//! profile, so a shared cache keyed by (profile, m) collapses the heavy part
//! of the sweep across genes: with quantile binning most genes share one
//! profile.

use std::collections::HashMap;
use std::sync::Mutex;

use maxnml_core::{
    build_cond_moment_features_opts, cond_comp_grouped, cond_comp_monte_carlo, cond_err_codelength,
    Alphabet, Caps, ClassSet, CodelengthReport, CondFeatureTable, Error as CoreError, MethodTag,
    Sample,
};
use rayon::prelude::*;

use crate::error::{PipelineError, Result};
use crate::matrix::ExpressionMatrix;
use crate::preprocess::PreprocessConfig;
use crate::quantize::{compute_cuts, Cuts, QuantizeMethod};

/// COMP route for the gene pipeline.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompChoice {
    /// Exact grouped summation, Monte-Carlo fallback past the cap.
    Types,
    /// Exhaustive label-sequence enumeration (oracle scale only).
    Exact,
    /// Seeded Monte Carlo.
    Mc,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PipelineConfig {
    pub levels: usize,
    pub m_min: usize,
    pub m_max: usize,
    pub quantize: QuantizeMethod,
    pub comp: CompChoice,
    pub mc_draws: u64,
    pub seed: u64,
    pub intercept: bool,
    pub preprocess: PreprocessConfig,
    pub top_g: usize,
    /// Worker threads (0 = all cores). Not part of the config echo: outputs
    /// are identical for every worker count.
    #[serde(skip)]
    pub threads: usize,
    pub smoothing_eps: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            levels: 5,
            m_min: 1,
            m_max: 7,
            quantize: QuantizeMethod::Quantile,
            comp: CompChoice::Types,
            mc_draws: 100_000,
            seed: 0,
            intercept: true,
            preprocess: PreprocessConfig::default(),
            top_g: 25,
            threads: 0,
            smoothing_eps: 1e-6,
        }
    }
}

/// Result of one m in the sweep; failures are recorded, not fatal.
#[derive(Debug, Clone)]
pub struct MEntry {
    pub m: usize,
    pub report: Option<CodelengthReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GeneSelection {
    pub gene_id: String,
    pub chosen_m: usize,
    pub min_nml_nats: f64,
    pub per_m: Vec<MEntry>,
    pub cuts: Cuts,
    pub constant: bool,
}

/// COMP value with the route that produced it and an optional MC stderr.
type CompEntry = (f64, MethodTag, Option<f64>);

/// COMP values shared across genes with the same per-level count profile.
pub struct CompCache {
    map: Mutex<HashMap<(Vec<usize>, usize), CompEntry>>,
}

impl CompCache {
    pub fn new() -> Self {
        CompCache {
            map: Mutex::new(HashMap::new()),
        }
    }

    fn comp_for(
        &self,
        features: &CondFeatureTable,
        x_sample: &Sample,
        level_counts: &[usize],
        m: usize,
        config: &PipelineConfig,
        caps: &Caps,
    ) -> std::result::Result<CompEntry, CoreError> {
        let key = (level_counts.to_vec(), m);
        if let Some(hit) = self.map.lock().unwrap().get(&key) {
            return Ok(*hit);
        }
        let entry = match config.comp {
            CompChoice::Types => match cond_comp_grouped(features, x_sample, caps) {
                Ok(v) => (v, MethodTag::TypeClass, None),
                Err(CoreError::CapExceeded { .. }) => {
                    let (v, se) = cond_comp_monte_carlo(
                        features,
                        x_sample,
                        caps.fallback_draws,
                        caps.fallback_seed,
                    )?;
                    (v, MethodTag::MonteCarlo, Some(se))
                }
                Err(e) => return Err(e),
            },
            CompChoice::Exact => {
                let v = maxnml_core::cond_comp_exact(features, x_sample, caps)?;
                (v, MethodTag::ExactEnum, None)
            }
            CompChoice::Mc => {
                let (v, se) =
                    cond_comp_monte_carlo(features, x_sample, config.mc_draws, config.seed)?;
                (v, MethodTag::MonteCarlo, Some(se))
            }
        };
        self.map.lock().unwrap().insert(key, entry);
        Ok(entry)
    }
}

impl Default for CompCache {
    fn default() -> Self {
        Self::new()
    }
}

/// Conditional feature tables for every m in the sweep, shared across genes.
pub struct SweepTables {
    pub alphabet: Alphabet,
    pub tables: Vec<(usize, CondFeatureTable)>,
}

pub fn build_sweep_tables(config: &PipelineConfig, num_classes: usize) -> Result<SweepTables> {
    let alphabet = Alphabet::integer_levels(config.levels).map_err(PipelineError::Core)?;
    let classes = ClassSet::of_size(num_classes).map_err(PipelineError::Core)?;
    let mut tables = Vec::new();
    for m in config.m_min..=config.m_max {
        let table = build_cond_moment_features_opts(&alphabet, &classes, m, config.intercept)
            .map_err(PipelineError::Core)?;
        tables.push((m, table));
    }
    if tables.is_empty() {
        return Err(PipelineError::InvalidData(format!(
            "empty m range {}..={}",
            config.m_min, config.m_max
        )));
    }
    Ok(SweepTables { alphabet, tables })
}

/// Sweeps m for one quantized gene and picks the minimum-NML model.
/// Ties resolve to the smaller m.
#[allow(clippy::too_many_arguments)]
pub fn select_m_for_gene(
    gene_id: &str,
    levels: &[usize],
    labels: &[usize],
    cuts: Cuts,
    constant: bool,
    tables: &SweepTables,
    config: &PipelineConfig,
    caps: &Caps,
    cache: &CompCache,
) -> Result<GeneSelection> {
    let k = config.levels;
    let x_sample = Sample::new(levels.to_vec(), k).map_err(|e| PipelineError::Gene {
        gene: gene_id.to_string(),
        source: e,
    })?;
    let level_counts = x_sample.counts(k);

    let mut per_m = Vec::with_capacity(tables.tables.len());
    let mut best: Option<(usize, f64)> = None;
    for (m, table) in &tables.tables {
        let outcome = cond_err_codelength(table, &x_sample, labels).and_then(|err| {
            let (comp, tag, stderr) =
                cache.comp_for(table, &x_sample, &level_counts, *m, config, caps)?;
            Ok(CodelengthReport {
                err_nats: err,
                comp_nats: comp,
                nml_nats: err + comp,
                method: tag,
                mc_stderr_nats: stderr,
            })
        });
        match outcome {
            Ok(report) => {
                let better = match best {
                    None => true,
                    Some((_, nml)) => report.nml_nats < nml,
                };
                if better {
                    best = Some((*m, report.nml_nats));
                }
                per_m.push(MEntry {
                    m: *m,
                    report: Some(report),
                    error: None,
                });
            }
            Err(e) => per_m.push(MEntry {
                m: *m,
                report: None,
                error: Some(e.to_string()),
            }),
        }
    }

    let (chosen_m, min_nml_nats) = best.ok_or_else(|| {
        let causes: Vec<String> = per_m.iter().filter_map(|e| e.error.clone()).collect();
        PipelineError::Gene {
            gene: gene_id.to_string(),
            source: CoreError::AllCandidatesFailed(causes.join("; ")),
        }
    })?;

    Ok(GeneSelection {
        gene_id: gene_id.to_string(),
        chosen_m,
        min_nml_nats,
        per_m,
        cuts,
        constant,
    })
}

/// Quantizes every gene on its train columns, sweeps m, and returns the
/// selections sorted by ascending minimum NML (ties by gene id).
///
/// The matrix must already be preprocessed. Work is parallel over genes with
/// deterministic collation: results are identical for any worker count.
pub fn rank_genes(
    matrix: &ExpressionMatrix,
    config: &PipelineConfig,
) -> Result<Vec<GeneSelection>> {
    let train = matrix.train_columns();
    if train.len() < config.levels {
        return Err(PipelineError::InvalidData(format!(
            "{} train columns cannot fill {} quantile levels",
            train.len(),
            config.levels
        )));
    }
    let train_labels: Vec<usize> = train.iter().map(|&c| matrix.labels[c]).collect();
    let distinct: std::collections::BTreeSet<usize> = train_labels.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(PipelineError::InvalidData(
            "train split contains fewer than 2 classes".into(),
        ));
    }

    let tables = build_sweep_tables(config, matrix.class_names.len())?;
    let caps = Caps {
        fallback_seed: config.seed,
        ..Caps::default()
    };
    let cache = CompCache::new();

    // quantize every gene first, then prefill the COMP cache once per
    // distinct (level-count profile, m) pair: with quantile binning most
    // genes share a single profile, so the heavy grouped sums are paid once
    let quantized: Vec<(Cuts, Vec<usize>, bool)> = (0..matrix.num_genes())
        .into_par_iter()
        .map(|g| {
            let row = matrix.row(g);
            let train_values: Vec<f64> = train.iter().map(|&c| row[c]).collect();
            let (cuts, constant) = compute_cuts(&train_values, config.levels, config.quantize)?;
            let levels = cuts.apply(&train_values);
            Ok((cuts, levels, constant))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut profiles: std::collections::BTreeSet<Vec<usize>> = std::collections::BTreeSet::new();
    for (_, levels, _) in &quantized {
        let mut counts = vec![0usize; config.levels];
        for &l in levels {
            counts[l] += 1;
        }
        profiles.insert(counts);
    }
    type CompJob<'a> = (&'a Vec<usize>, &'a (usize, CondFeatureTable));
    let jobs: Vec<CompJob> = profiles
        .iter()
        .flat_map(|p| tables.tables.iter().map(move |t| (p, t)))
        .collect();
    jobs.par_iter()
        .map(|(counts, (m, table))| {
            let mut xs = Vec::new();
            for (level, &cnt) in counts.iter().enumerate() {
                xs.extend(std::iter::repeat_n(level, cnt));
            }
            let x_sample = Sample::new(xs, config.levels).map_err(PipelineError::Core)?;
            cache
                .comp_for(table, &x_sample, counts, *m, config, &caps)
                .map(|_| ())
                .map_err(PipelineError::Core)
        })
        .collect::<Result<Vec<()>>>()?;

    let mut selections: Vec<GeneSelection> = quantized
        .into_par_iter()
        .enumerate()
        .map(|(g, (cuts, levels, constant))| {
            select_m_for_gene(
                &matrix.gene_ids[g],
                &levels,
                &train_labels,
                cuts,
                constant,
                &tables,
                config,
                &caps,
                &cache,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    selections.sort_by(|a, b| {
        a.min_nml_nats
            .total_cmp(&b.min_nml_nats)
            .then_with(|| a.gene_id.cmp(&b.gene_id))
    });
    Ok(selections)
}
