//! Gene-selection pipeline and file formats on top of `maxnml-core`:
//! matrix ingestion, preprocessing, quantization, per-gene moment-count
//! selection by conditional NML, ranking, and the class-conditional
//! maximum-entropy classifier. The `maxnml` binary exposes all of it.

pub mod classifier;
pub mod error;
pub mod genes;
pub mod matrix;
pub mod preprocess;
pub mod quantize;
pub mod report;
pub mod sweep;
pub mod synth;

pub use classifier::{build_classifier, evaluate, Evaluation, MaxEntClassifier};
pub use error::{PipelineError, Result};
pub use genes::{rank_genes, select_m_for_gene, CompChoice, GeneSelection, PipelineConfig};
pub use matrix::{load_matrix, ExpressionMatrix, Split};
pub use preprocess::{preprocess, PreprocessConfig};
pub use quantize::{compute_cuts, quantize, Cuts, QuantizeMethod};
pub use sweep::{quantization_sweep, SweepPoint};
pub use synth::{generate, SynthConfig};
