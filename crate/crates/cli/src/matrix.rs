//! Expression-matrix and labels-file ingestion.
//!
//! Matrix format: delimited text (comma or tab, auto-detected from the
//! header), genes as rows. First column is the gene id; the header row
//! carries sample ids. Labels file: two columns (sample id, class label)
//! plus an optional third column `train`/`test`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct ExpressionMatrix {
    pub gene_ids: Vec<String>,
    pub sample_ids: Vec<String>,
    /// G × n, row-major.
    pub values: Vec<f64>,
    /// Class index per column; classes are sorted lexicographically.
    pub labels: Vec<usize>,
    pub class_names: Vec<String>,
    pub split: Vec<Split>,
}

impl ExpressionMatrix {
    pub fn num_genes(&self) -> usize {
        self.gene_ids.len()
    }

    pub fn num_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn row(&self, gene: usize) -> &[f64] {
        let n = self.num_samples();
        &self.values[gene * n..(gene + 1) * n]
    }

    pub fn train_columns(&self) -> Vec<usize> {
        (0..self.num_samples())
            .filter(|&i| self.split[i] == Split::Train)
            .collect()
    }

    pub fn test_columns(&self) -> Vec<usize> {
        (0..self.num_samples())
            .filter(|&i| self.split[i] == Split::Test)
            .collect()
    }

    pub fn columns(&self, split: Option<Split>) -> Vec<usize> {
        match split {
            None => (0..self.num_samples()).collect(),
            Some(s) => (0..self.num_samples())
                .filter(|&i| self.split[i] == s)
                .collect(),
        }
    }
}

fn detect_delimiter(line: &str) -> char {
    let tabs = line.matches('\t').count();
    let commas = line.matches(',').count();
    if tabs >= commas {
        '\t'
    } else {
        ','
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads an expression matrix and its labels file.
pub fn load_matrix(matrix_path: &Path, labels_path: &Path) -> Result<ExpressionMatrix> {
    let matrix_text = read_to_string(matrix_path)?;
    let mut lines = matrix_text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| PipelineError::Parse {
        path: matrix_path.to_path_buf(),
        line: 1,
        column: 1,
        message: "empty matrix file".into(),
    })?;
    let delim = detect_delimiter(header);
    let header_cells: Vec<&str> = header.split(delim).collect();
    if header_cells.len() < 2 {
        return Err(PipelineError::Parse {
            path: matrix_path.to_path_buf(),
            line: 1,
            column: 1,
            message: "header must list at least one sample id".into(),
        });
    }
    let sample_ids: Vec<String> = header_cells[1..]
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let n = sample_ids.len();

    let mut gene_ids = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(delim).collect();
        if cells.len() != n + 1 {
            return Err(PipelineError::Parse {
                path: matrix_path.to_path_buf(),
                line: idx + 1,
                column: cells.len(),
                message: format!("expected {} cells, found {}", n + 1, cells.len()),
            });
        }
        gene_ids.push(cells[0].trim().to_string());
        for (col, cell) in cells[1..].iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| PipelineError::Parse {
                path: matrix_path.to_path_buf(),
                line: idx + 1,
                column: col + 2,
                message: format!("not a number: {:?}", cell.trim()),
            })?;
            values.push(v);
        }
    }
    if gene_ids.is_empty() {
        return Err(PipelineError::InvalidData("matrix has no gene rows".into()));
    }

    // labels file: sample id, class label, optional train/test
    let labels_text = read_to_string(labels_path)?;
    let mut assignments: BTreeMap<String, (String, Split)> = BTreeMap::new();
    for (idx, line) in labels_text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let d = detect_delimiter(line);
        let cells: Vec<&str> = line.split(d).map(|c| c.trim()).collect();
        if cells.len() < 2 {
            return Err(PipelineError::Parse {
                path: labels_path.to_path_buf(),
                line: idx + 1,
                column: 1,
                message: "need at least two columns: sample id, class".into(),
            });
        }
        let split = match cells.get(2).map(|s| s.to_ascii_lowercase()) {
            None => Split::Train,
            Some(s) if s == "train" => Split::Train,
            Some(s) if s == "test" => Split::Test,
            Some(other) => {
                // allow a header row, otherwise reject
                if idx == 0 {
                    continue;
                }
                return Err(PipelineError::Parse {
                    path: labels_path.to_path_buf(),
                    line: idx + 1,
                    column: 3,
                    message: format!("split must be train or test, got {other:?}"),
                });
            }
        };
        assignments.insert(cells[0].to_string(), (cells[1].to_string(), split));
    }

    for id in &sample_ids {
        if !assignments.contains_key(id) {
            return Err(PipelineError::InvalidData(format!(
                "no label for sample {id:?}"
            )));
        }
    }
    let mut class_names: Vec<String> = assignments
        .values()
        .map(|(class, _)| class.clone())
        .collect();
    class_names.sort();
    class_names.dedup();
    if class_names.len() < 2 {
        return Err(PipelineError::InvalidData(format!(
            "need at least 2 classes, labels file defines {}",
            class_names.len()
        )));
    }

    let mut labels = Vec::with_capacity(n);
    let mut split = Vec::with_capacity(n);
    for id in &sample_ids {
        let (class, sp) = assignments
            .get(id)
            .ok_or_else(|| PipelineError::InvalidData(format!("no label for sample {id:?}")))?;
        labels.push(class_names.iter().position(|c| c == class).unwrap());
        split.push(*sp);
    }
    if !split.contains(&Split::Train) {
        return Err(PipelineError::InvalidData(
            "labels file marks no sample as train".into(),
        ));
    }

    Ok(ExpressionMatrix {
        gene_ids,
        sample_ids,
        values,
        labels,
        class_names,
        split,
    })
}
