//! Model selection across candidate feature sets.
//!
//! NML selection picks the candidate minimizing ERR + COMP; minimax-entropy
//! selection picks the candidate whose fitted maximum entropy is smallest and
//! computes no complexities at all. The two coincide whenever every candidate
//! carries the same COMP (use [`CompMethod::Constant`] to force that), which
//! is the classical reduction of minimax entropy to MDL.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::alphabet::{Alphabet, Sample};
use crate::codelength::{nml_codelength, Caps, CodelengthReport, CompMethod};
use crate::error::{Error, Result};
use crate::features::{empirical_moments, FeatureTable};
use crate::maxent::fit_maxent;

/// Nats within which two criterion values count as tied.
const TIE_EPS: f64 = 1e-9;

/// Candidate generative models over one shared alphabet.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    alphabet: Alphabet,
    candidates: Vec<(String, FeatureTable)>,
}

impl CandidateSet {
    pub fn new(alphabet: Alphabet, candidates: Vec<(String, FeatureTable)>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::InvalidInput("no candidates".into()));
        }
        for (i, (id, table)) in candidates.iter().enumerate() {
            if table.num_symbols() != alphabet.len() {
                return Err(Error::DimensionMismatch(format!(
                    "candidate {id:?} covers {} symbols, alphabet has {}",
                    table.num_symbols(),
                    alphabet.len()
                )));
            }
            for (other, _) in candidates.iter().skip(i + 1) {
                if other == id {
                    return Err(Error::InvalidInput(format!(
                        "duplicate candidate id {id:?}"
                    )));
                }
            }
        }
        Ok(CandidateSet {
            alphabet,
            candidates,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn candidates(&self) -> &[(String, FeatureTable)] {
        &self.candidates
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionCriterion {
    Nml,
    Minimax,
}

/// Outcome for one candidate: the codelength report (NML runs), the fitted
/// entropy (always, when the fit succeeded), or the error that stopped it.
#[derive(Debug, Clone)]
pub struct CandidateReport {
    pub id: String,
    pub num_features: usize,
    pub report: Option<CodelengthReport>,
    pub entropy_nats: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SelectionResult {
    pub criterion: SelectionCriterion,
    pub chosen_id: String,
    pub per_candidate: Vec<CandidateReport>,
}

/// Argmin with deterministic tie-breaking: values within [`TIE_EPS`] of the
/// minimum resolve to the candidate with fewer features, then earliest id.
fn argmin_with_ties(scored: &[(usize, f64, usize)]) -> usize {
    // (index, value, num_features)
    let mut best = f64::INFINITY;
    for &(_, v, _) in scored {
        if v < best {
            best = v;
        }
    }
    let mut winner: Option<(usize, usize)> = None; // (num_features, index)
    for &(idx, v, nf) in scored {
        if v <= best + TIE_EPS {
            match winner {
                None => winner = Some((nf, idx)),
                Some((wnf, widx)) => {
                    if nf < wnf || (nf == wnf && idx < widx) {
                        winner = Some((nf, idx));
                    }
                }
            }
        }
    }
    winner.expect("nonempty scored list").1
}

/// Chooses the candidate with the smallest NML codelength for the sample.
pub fn select_by_nml(
    set: &CandidateSet,
    sample: &Sample,
    method: CompMethod,
    caps: &Caps,
) -> Result<SelectionResult> {
    let mut per_candidate = Vec::with_capacity(set.candidates.len());
    let mut scored: Vec<(usize, f64, usize)> = Vec::new();
    for (idx, (id, table)) in set.candidates.iter().enumerate() {
        match nml_codelength(table, &set.alphabet, sample, method, caps) {
            Ok(report) => {
                scored.push((idx, report.nml_nats, table.num_features()));
                per_candidate.push(CandidateReport {
                    id: id.clone(),
                    num_features: table.num_features(),
                    entropy_nats: Some(report.err_nats / sample.len() as f64),
                    report: Some(report),
                    error: None,
                });
            }
            Err(e) => per_candidate.push(CandidateReport {
                id: id.clone(),
                num_features: table.num_features(),
                report: None,
                entropy_nats: None,
                error: Some(format!("{e}")),
            }),
        }
    }
    if scored.is_empty() {
        return Err(all_failed(&per_candidate));
    }
    let chosen = argmin_with_ties(&scored);
    Ok(SelectionResult {
        criterion: SelectionCriterion::Nml,
        chosen_id: set.candidates[chosen].0.clone(),
        per_candidate,
    })
}

/// Chooses the candidate whose maximum-entropy fit has the smallest entropy.
/// No COMP is computed: this is selection under the equal-complexity
/// assumption.
pub fn select_by_minimax(set: &CandidateSet, sample: &Sample) -> Result<SelectionResult> {
    let mut per_candidate = Vec::with_capacity(set.candidates.len());
    let mut scored: Vec<(usize, f64, usize)> = Vec::new();
    for (idx, (id, table)) in set.candidates.iter().enumerate() {
        let fit = empirical_moments(sample, table).and_then(|m| fit_maxent(table, &m));
        match fit {
            Ok(dist) => {
                scored.push((idx, dist.entropy_nats(), table.num_features()));
                per_candidate.push(CandidateReport {
                    id: id.clone(),
                    num_features: table.num_features(),
                    report: None,
                    entropy_nats: Some(dist.entropy_nats()),
                    error: None,
                });
            }
            Err(e) => per_candidate.push(CandidateReport {
                id: id.clone(),
                num_features: table.num_features(),
                report: None,
                entropy_nats: None,
                error: Some(format!("{e}")),
            }),
        }
    }
    if scored.is_empty() {
        return Err(all_failed(&per_candidate));
    }
    let chosen = argmin_with_ties(&scored);
    Ok(SelectionResult {
        criterion: SelectionCriterion::Minimax,
        chosen_id: set.candidates[chosen].0.clone(),
        per_candidate,
    })
}

fn all_failed(reports: &[CandidateReport]) -> Error {
    let mut msg = String::new();
    for r in reports {
        if let Some(e) = &r.error {
            if !msg.is_empty() {
                msg.push_str("; ");
            }
            msg.push_str(&format!("{}: {e}", r.id));
        }
    }
    Error::AllCandidatesFailed(msg)
}
