//! ERR, COMP and NML codelengths for generative maximum-entropy models.
//!
//! For a model defined by a feature table, the error codelength of a sample
//! is n times the maximum entropy of the matching linear family, and the
//! parametric complexity is
//!
//! ```text
//! COMP = ln Σ_{y^n ∈ 𝒳^n} exp(−n H(p*_{y^n}))
//! ```
//!
//! with the sum over all length-n sequences, each fitted at its own empirical
//! moments. Three routes compute it: exhaustive enumeration (an oracle for
//! small K^n), exact summation over type classes (the default — H depends on
//! a sequence only through its per-symbol counts), and a seeded Monte-Carlo
//! estimate for when the composition count is out of reach. All accumulation
//! runs in the log domain: for n = 38 the terms span hundreds of nats.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand_core::SeedableRng;

use crate::alphabet::{Alphabet, Sample};
use crate::error::{Error, Result};
use crate::features::{empirical_moments, moments_of_counts, FeatureTable, MomentVector};
use crate::maxent::fit_maxent_lenient;
use crate::numeric::{composition_count, compositions, quantized_key, LnFactorials, LogSumExp};

/// Enumeration caps and Monte-Carlo fallback parameters.
#[derive(Debug, Clone)]
pub struct Caps {
    /// Max sequences for exhaustive enumeration (K^n or |C|^n).
    pub exact_enum: u64,
    /// Max type classes / label-count groups for exact summation.
    pub type_classes: u64,
    /// Draw count used when a conditional computation falls back to
    /// Monte Carlo.
    pub fallback_draws: u64,
    /// Seed for that fallback.
    pub fallback_seed: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            exact_enum: 1_000_000,
            type_classes: 100_000_000,
            fallback_draws: 100_000,
            fallback_seed: 0,
        }
    }
}

/// How COMP is computed in [`nml_codelength`] and friends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompMethod {
    /// Exhaustive enumeration of all sequences; oracle use.
    ExactEnum,
    /// Exact summation over type classes (grouped label counts in the
    /// conditional case).
    TypeClasses,
    /// Seeded Monte-Carlo estimate.
    MonteCarlo { draws: u64, seed: u64 },
    /// A fixed COMP value shared by every model. Selecting under a constant
    /// complexity is exactly the minimax-entropy assumption.
    Constant(f64),
}

/// Which route actually produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodTag {
    ExactEnum,
    TypeClass,
    MonteCarlo,
    Constant,
}

impl MethodTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodTag::ExactEnum => "exact-enum",
            MethodTag::TypeClass => "type-class",
            MethodTag::MonteCarlo => "monte-carlo",
            MethodTag::Constant => "constant",
        }
    }
}

/// ERR, COMP and their sum, in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct CodelengthReport {
    pub err_nats: f64,
    pub comp_nats: f64,
    pub nml_nats: f64,
    pub method: MethodTag,
    /// Delta-method standard error of the log estimate; Monte Carlo only.
    pub mc_stderr_nats: Option<f64>,
}

impl CodelengthReport {
    pub(crate) fn assemble(err: f64, comp: f64, method: MethodTag, stderr: Option<f64>) -> Self {
        CodelengthReport {
            err_nats: err,
            comp_nats: comp,
            nml_nats: err + comp,
            method,
            mc_stderr_nats: stderr,
        }
    }
}

/// A composition of n over the alphabet with its log multinomial coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeClass {
    pub counts: Vec<usize>,
    pub log_multiplicity: f64,
}

/// All type classes of length-n sequences over k symbols, in a fixed
/// deterministic order.
pub fn type_classes(n: usize, k: usize) -> impl Iterator<Item = TypeClass> {
    let lf = LnFactorials::new(n);
    compositions(n, k).map(move |counts| {
        let log_multiplicity = lf.ln_multinomial(&counts);
        TypeClass {
            counts,
            log_multiplicity,
        }
    })
}

/// Memoizes maxent entropies by quantized moment vector, so types sharing
/// moments reuse one fit. Fits are cold-started: the entropy for a given
/// moment vector must not depend on enumeration order, or the exhaustive and
/// type-class routes would drift apart.
pub(crate) struct EntropyCache {
    map: BTreeMap<Vec<i128>, f64>,
}

impl EntropyCache {
    pub(crate) fn new() -> Self {
        EntropyCache {
            map: BTreeMap::new(),
        }
    }

    pub(crate) fn entropy(&mut self, features: &FeatureTable, moments: &[f64]) -> Result<f64> {
        let key = quantized_key(moments);
        if let Some(&h) = self.map.get(&key) {
            return Ok(h);
        }
        let fit = fit_maxent_lenient(features, &MomentVector::new(moments.to_vec()))?;
        let h = fit.entropy_nats();
        self.map.insert(key, h);
        Ok(h)
    }
}

/// ERR = n · H(p*) where p* is the maxent fit at the sample's empirical
/// moments.
pub fn err_codelength(features: &FeatureTable, sample: &Sample) -> Result<f64> {
    let moments = empirical_moments(sample, features)?;
    let fit = fit_maxent_lenient(features, &moments)?;
    Ok(sample.len() as f64 * fit.entropy_nats())
}

fn check_alphabet(features: &FeatureTable, alphabet: &Alphabet) -> Result<()> {
    if features.num_symbols() != alphabet.len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "feature table covers {} symbols, alphabet has {}",
            features.num_symbols(),
            alphabet.len()
        )));
    }
    Ok(())
}

/// COMP by brute-force enumeration of all K^n sequences. Oracle: use
/// [`comp_by_types`] for real work.
pub fn comp_exact_enum(
    features: &FeatureTable,
    alphabet: &Alphabet,
    n: usize,
    caps: &Caps,
) -> Result<f64> {
    check_alphabet(features, alphabet)?;
    if n == 0 {
        return Err(Error::InvalidInput(
            "sample length must be at least 1".into(),
        ));
    }
    let k = alphabet.len();
    let total = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > caps.exact_enum as u128 {
        return Err(Error::CapExceeded {
            what: "exhaustive sequence enumeration",
            required: total,
            cap: caps.exact_enum,
            hint: "",
        });
    }

    let mut cache = EntropyCache::new();
    let mut acc = LogSumExp::new();
    let mut seq = alloc::vec![0usize; n];
    let mut counts = alloc::vec![0usize; k];
    loop {
        counts.fill(0);
        for &s in &seq {
            counts[s] += 1;
        }
        let moments = moments_of_counts(&counts, features);
        let h = cache.entropy(features, &moments)?;
        acc.add(-(n as f64) * h);

        // odometer
        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(acc.value());
            }
            pos -= 1;
            seq[pos] += 1;
            if seq[pos] < k {
                break;
            }
            seq[pos] = 0;
        }
    }
}

/// COMP by exact summation over type classes: H(p*) depends on a sequence
/// only through its counts, so each type contributes
/// `exp(log_multiplicity − n H)`. Identical to [`comp_exact_enum`] at
/// combinatorial rather than exponential cost.
pub fn comp_by_types(
    features: &FeatureTable,
    alphabet: &Alphabet,
    n: usize,
    caps: &Caps,
) -> Result<f64> {
    check_alphabet(features, alphabet)?;
    if n == 0 {
        return Err(Error::InvalidInput(
            "sample length must be at least 1".into(),
        ));
    }
    // Unconstrained model: every fit is uniform and the sum telescopes to 1.
    if features.num_features() == 0 {
        return Ok(0.0);
    }
    let k = alphabet.len();
    let required = composition_count(n, k);
    if required > caps.type_classes as u128 {
        return Err(Error::CapExceeded {
            what: "type-class enumeration",
            required,
            cap: caps.type_classes,
            hint: "; consider the monte-carlo method",
        });
    }

    let lf = LnFactorials::new(n);
    let mut cache = EntropyCache::new();
    let mut acc = LogSumExp::new();
    for counts in compositions(n, k) {
        let log_mult = lf.ln_multinomial(&counts);
        let moments = moments_of_counts(&counts, features);
        let h = cache.entropy(features, &moments)?;
        acc.add(log_mult - (n as f64) * h);
    }
    Ok(acc.value())
}

/// Monte-Carlo COMP estimate from uniform i.i.d. sequences:
/// `ln(K^n · mean[exp(−n H(p*_{y^n}))])`, with a delta-method standard error
/// on the log estimate. Deterministic for a fixed seed.
pub fn comp_monte_carlo(
    features: &FeatureTable,
    alphabet: &Alphabet,
    n: usize,
    draws: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    check_alphabet(features, alphabet)?;
    if n == 0 {
        return Err(Error::InvalidInput(
            "sample length must be at least 1".into(),
        ));
    }
    if draws < 100 {
        return Err(Error::InvalidInput(alloc::format!(
            "need at least 100 draws, got {draws}"
        )));
    }
    if features.num_features() == 0 {
        return Ok((0.0, 0.0));
    }
    let k = alphabet.len();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut cache = EntropyCache::new();
    let mut first = LogSumExp::new();
    let mut second = LogSumExp::new();
    let mut counts = alloc::vec![0usize; k];
    for _ in 0..draws {
        counts.fill(0);
        for _ in 0..n {
            counts[sample_index(&mut rng, k)] += 1;
        }
        let moments = moments_of_counts(&counts, features);
        let h = cache.entropy(features, &moments)?;
        let w = -(n as f64) * h;
        first.add(w);
        second.add(2.0 * w);
    }
    let d = draws as f64;
    let log_mean = first.value() - libm::log(d);
    let estimate = (n as f64) * libm::log(k as f64) + log_mean;
    let stderr = mc_stderr(first.value(), second.value(), d);
    Ok((estimate, stderr))
}

/// Standard error of ln(mean W) given A = ln ΣW_i and B = ln ΣW_i².
pub(crate) fn mc_stderr(a: f64, b: f64, draws: f64) -> f64 {
    // Var(ln mean) ≈ s² / (D · mean²); ΣW² − (ΣW)²/D computed in logs.
    let gap = (2.0 * a - b - libm::log(draws)).min(0.0);
    let one_m = -libm::expm1(gap); // 1 − exp(gap), ≥ 0
    if one_m <= 0.0 {
        return 0.0;
    }
    let log_var_sum = b + libm::log(one_m) - libm::log((draws - 1.0).max(1.0));
    libm::exp(0.5 * (log_var_sum + libm::log(draws)) - a)
}

pub(crate) fn sample_index<R: rand_core::Rng>(rng: &mut R, k: usize) -> usize {
    // widening multiply keeps the draw unbiased to ~k/2^64
    ((rng.next_u64() as u128 * k as u128) >> 64) as usize
}

/// Full NML report: ERR from the fitted entropy, COMP via the chosen method.
pub fn nml_codelength(
    features: &FeatureTable,
    alphabet: &Alphabet,
    sample: &Sample,
    method: CompMethod,
    caps: &Caps,
) -> Result<CodelengthReport> {
    check_alphabet(features, alphabet)?;
    let err = err_codelength(features, sample)?;
    let n = sample.len();
    let report = match method {
        CompMethod::ExactEnum => {
            let comp = comp_exact_enum(features, alphabet, n, caps)?;
            CodelengthReport::assemble(err, comp, MethodTag::ExactEnum, None)
        }
        CompMethod::TypeClasses => {
            let comp = comp_by_types(features, alphabet, n, caps)?;
            CodelengthReport::assemble(err, comp, MethodTag::TypeClass, None)
        }
        CompMethod::MonteCarlo { draws, seed } => {
            let (comp, stderr) = comp_monte_carlo(features, alphabet, n, draws, seed)?;
            CodelengthReport::assemble(err, comp, MethodTag::MonteCarlo, Some(stderr))
        }
        CompMethod::Constant(c) => {
            if !c.is_finite() || c < 0.0 {
                return Err(Error::InvalidInput(String::from(
                    "constant complexity must be finite and nonnegative",
                )));
            }
            CodelengthReport::assemble(err, c, MethodTag::Constant, None)
        }
    };
    Ok(report)
}
