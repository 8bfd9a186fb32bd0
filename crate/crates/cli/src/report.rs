//! Output artifacts: ranking and curve CSVs, evaluation and sweep JSON/CSV.
//!
//! Every artifact embeds the tool version, the configuration it was produced
//! with, and a digest of the input content, so a rerun can be verified
//! byte-for-byte. Nothing time- or host-dependent is written.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::classifier::Evaluation;
use crate::error::{PipelineError, Result};
use crate::genes::GeneSelection;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex SHA-256 over the concatenated input files.
pub fn input_digest(paths: &[&Path]) -> Result<String> {
    let mut hasher = Sha256::new();
    for path in paths {
        let bytes = fs::read(path).map_err(|source| PipelineError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        hasher.update(&bytes);
    }
    Ok(format!("sha256:{}", hex(&hasher.finalize())))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Digest over in-memory content (synthetic inputs).
pub fn content_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    format!("sha256:{}", hex(&hasher.finalize()))
}

fn header_lines(config_json: &str, digest: &str) -> String {
    format!("# maxnml {VERSION}\n# config: {config_json}\n# input_digest: {digest}\n")
}

/// Ranking table: rank, gene id, chosen m, per-m NML columns, minimum NML.
pub fn ranking_csv(
    selections: &[GeneSelection],
    m_range: (usize, usize),
    config_json: &str,
    digest: &str,
) -> String {
    let mut out = header_lines(config_json, digest);
    out.push_str("rank,gene_id,chosen_m");
    for m in m_range.0..=m_range.1 {
        out.push_str(&format!(",nml_m{m}_nats"));
    }
    out.push_str(",min_nml_nats\n");
    for (rank, sel) in selections.iter().enumerate() {
        out.push_str(&format!("{},{},{}", rank + 1, sel.gene_id, sel.chosen_m));
        for entry in &sel.per_m {
            match &entry.report {
                Some(r) => out.push_str(&format!(",{:.6}", r.nml_nats)),
                None => out.push(','),
            }
        }
        out.push_str(&format!(",{:.6}\n", sel.min_nml_nats));
    }
    out
}

/// Per-gene NML-vs-m curves in long form.
pub fn curves_csv(selections: &[GeneSelection], config_json: &str, digest: &str) -> String {
    let mut out = header_lines(config_json, digest);
    out.push_str("gene_id,m,err_nats,comp_nats,nml_nats,method\n");
    for sel in selections {
        for entry in &sel.per_m {
            if let Some(r) = &entry.report {
                out.push_str(&format!(
                    "{},{},{:.6},{:.6},{:.6},{}\n",
                    sel.gene_id,
                    entry.m,
                    r.err_nats,
                    r.comp_nats,
                    r.nml_nats,
                    r.method.as_str()
                ));
            }
        }
    }
    out
}

/// Quantization sweep: one row per level count.
pub fn sweep_csv(rows: &[(usize, f64, f64)], config_json: &str, digest: &str) -> String {
    let mut out = header_lines(config_json, digest);
    out.push_str("levels,accuracy,mean_min_nml_nats\n");
    for (levels, accuracy, mean_nml) in rows {
        out.push_str(&format!("{levels},{accuracy:.6},{mean_nml:.6}\n"));
    }
    out
}

#[derive(serde::Serialize)]
pub struct EvaluationReport<'a> {
    pub version: &'static str,
    pub config: serde_json::Value,
    pub input_digest: &'a str,
    pub seed: u64,
    pub classes: &'a [String],
    pub top_genes: Vec<TopGene<'a>>,
    pub train: &'a Evaluation,
    pub test: Option<&'a Evaluation>,
}

#[derive(serde::Serialize)]
pub struct TopGene<'a> {
    pub rank: usize,
    pub gene_id: &'a str,
    pub chosen_m: usize,
    pub min_nml_nats: f64,
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| PipelineError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}
