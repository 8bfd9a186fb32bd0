//! Conditional maximum-entropy models p(c|x) and their NML codelengths.
//!
//! The model family is
//!
//! ```text
//! p(c|x) = exp(−Σ_k λ_k φ_k(x, c)) / Z_Λ(x),   Z_Λ(x) = Σ_c exp(−Σ_k λ_k φ_k(x, c))
//! ```
//!
//! fitted by minimizing the (per-sample averaged) negative conditional
//! log-likelihood, a smooth convex function of Λ whose stationarity condition
//! equates model and empirical feature sums. The conditional ERR is n times
//! the maximum conditional entropy computed with the empirical p̃(x), which
//! equals the optimal objective value; conditional COMP sums exp(−n H) over
//! all label sequences with the covariates held fixed.
//!
//! Separable data drives Λ to infinity; the solver caps ‖λ‖∞ (in its scaled
//! feature basis) at 40, leaving conditional probabilities within e^−40 of
//! 0/1 and an ERR contribution below 1e−10 nats. The infimum in the ERR
//! definition is still approached, it is just not attained.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand_core::SeedableRng;

use crate::alphabet::{Alphabet, Sample};
use crate::codelength::{sample_index, Caps, CodelengthReport, CompMethod, MethodTag};
use crate::error::{Error, Result};
use crate::numeric::{composition_count, compositions, quantized_key, LnFactorials, LogSumExp};
use crate::solver::{damped_newton, NewtonControl, NewtonStatus, NewtonWorkspace, Objective};

const RESID_TARGET: f64 = 1e-10;
/// Looser target for fits inside COMP enumerations: the entropy those fits
/// feed into the log-sum-exp is already stable at this residual, and the
/// tail iterations dominate enumeration cost.
const ENUM_RESID_TARGET: f64 = 1e-9;
const ACCEPT_TOL: f64 = 1e-8;
const LAMBDA_CAP: f64 = 40.0;
/// Multipliers within this distance of the cap count as capped: iterates
/// can approach a box face asymptotically without landing on it.
const CAP_WINDOW: f64 = 1e-3;
const MAX_ITERATIONS: usize = 200;

/// Ordered, distinct class identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSet {
    labels: Vec<String>,
}

impl ClassSet {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 classes, got {}",
                labels.len()
            )));
        }
        for i in 0..labels.len() {
            for j in (i + 1)..labels.len() {
                if labels[i] == labels[j] {
                    return Err(Error::InvalidInput(format!(
                        "duplicate class label {:?}",
                        labels[i]
                    )));
                }
            }
        }
        Ok(ClassSet { labels })
    }

    /// Classes named "0", "1", …, useful for synthetic work.
    pub fn of_size(c: usize) -> Result<Self> {
        ClassSet::new((0..c).map(|i| format!("{i}")).collect())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

/// Feature values over (symbol, class) pairs: entry `((j, c), k) = φ_k(x_j, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondFeatureTable {
    values: Vec<f64>, // [(j * C + c) * F + k]
    num_symbols: usize,
    num_classes: usize,
    num_features: usize,
}

impl CondFeatureTable {
    pub fn custom(
        values: Vec<f64>,
        num_symbols: usize,
        num_classes: usize,
        num_features: usize,
    ) -> Result<Self> {
        if num_features == 0 {
            return Err(Error::InvalidInput(
                "conditional model needs at least one feature".into(),
            ));
        }
        if num_classes < 2 {
            return Err(Error::InvalidInput("need at least 2 classes".into()));
        }
        if values.len() != num_symbols * num_classes * num_features {
            return Err(Error::DimensionMismatch(format!(
                "conditional table needs {} values, got {}",
                num_symbols * num_classes * num_features,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "conditional feature at flat index {pos} is not finite"
            )));
        }
        Ok(CondFeatureTable {
            values,
            num_symbols,
            num_classes,
            num_features,
        })
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    #[inline]
    pub fn row(&self, symbol: usize, class: usize) -> &[f64] {
        let f = self.num_features;
        let base = (symbol * self.num_classes + class) * f;
        &self.values[base..base + f]
    }
}

/// Per-class moment features with intercepts: for each non-reference class c′
/// (class 0 is the reference) and k = 0..=m,
///
/// ```text
/// φ_{k,c′}(x, c) = x^k · [c = c′]
/// ```
///
/// so F = (m + 1)(|C| − 1). The k = 0 intercept makes the m = 0 model the
/// plain label-frequency model.
pub fn build_cond_moment_features(
    alphabet: &Alphabet,
    classes: &ClassSet,
    m: usize,
) -> Result<CondFeatureTable> {
    build_cond_moment_features_opts(alphabet, classes, m, true)
}

/// As [`build_cond_moment_features`], with the intercept column optional.
pub fn build_cond_moment_features_opts(
    alphabet: &Alphabet,
    classes: &ClassSet,
    m: usize,
    intercept: bool,
) -> Result<CondFeatureTable> {
    let k = alphabet.len();
    let c = classes.len();
    let k_min = if intercept { 0 } else { 1 };
    if m < k_min {
        return Err(Error::InvalidInput(
            "conditional model needs at least one feature (m = 0 requires the intercept)".into(),
        ));
    }
    let per_class = m + 1 - k_min;
    let f = per_class * (c - 1);
    let mut values = vec![0.0; k * c * f];
    for j in 0..k {
        let x = alphabet.symbol(j);
        for cls in 1..c {
            for (fi, p) in (k_min..=m).enumerate() {
                let feat = (cls - 1) * per_class + fi;
                let v = powi_checked(x, p)?;
                values[(j * c + cls) * f + feat] = v;
            }
        }
    }
    CondFeatureTable::custom(values, k, c, f)
}

fn powi_checked(x: f64, p: usize) -> Result<f64> {
    let mut acc = 1.0;
    for i in 1..=p {
        acc *= x;
        if !acc.is_finite() {
            return Err(Error::FeatureOverflow {
                symbol: x,
                power: i as u32,
            });
        }
    }
    Ok(acc)
}

/// A fitted conditional maximum-entropy model.
#[derive(Debug, Clone)]
pub struct ConditionalModel {
    lambdas: Vec<f64>,
    cond_probs: Vec<f64>, // K × C, row-stochastic
    cond_entropy_nats: f64,
    num_symbols: usize,
    num_classes: usize,
    capped: bool,
}

impl ConditionalModel {
    /// Multipliers in original feature coordinates.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// p(c|x_j); rows sum to 1, defined for every symbol including levels
    /// unseen in the fitting sample.
    pub fn cond_prob(&self, symbol: usize, class: usize) -> f64 {
        self.cond_probs[symbol * self.num_classes + class]
    }

    pub fn cond_probs_row(&self, symbol: usize) -> &[f64] {
        &self.cond_probs[symbol * self.num_classes..(symbol + 1) * self.num_classes]
    }

    /// Conditional entropy H(C|X) under the empirical covariate distribution
    /// of the fitting sample, in nats.
    pub fn cond_entropy_nats(&self) -> f64 {
        self.cond_entropy_nats
    }

    /// True when the multiplier cap bound the fit (separable data).
    pub fn capped(&self) -> bool {
        self.capped
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    /// Σ_i ln p(c_i | x_i).
    pub fn log_likelihood(&self, x_sample: &Sample, labels: &[usize]) -> f64 {
        let mut total = 0.0;
        for (&x, &c) in x_sample.indices().iter().zip(labels) {
            let p = self.cond_prob(x, c);
            if p <= 0.0 {
                return f64::NEG_INFINITY;
            }
            total += libm::log(p);
        }
        total
    }
}

fn validate_data(features: &CondFeatureTable, x_sample: &Sample, labels: &[usize]) -> Result<()> {
    if x_sample.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} covariates but {} labels",
            x_sample.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = x_sample
        .indices()
        .iter()
        .find(|&&i| i >= features.num_symbols())
    {
        return Err(Error::InvalidSample(format!(
            "covariate level {bad} out of range for table with {} symbols",
            features.num_symbols()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&c| c >= features.num_classes()) {
        return Err(Error::InvalidSample(format!(
            "class index {bad} out of range for {} classes",
            features.num_classes()
        )));
    }
    Ok(())
}

/// Per-sample averaged sufficient statistics Σ_i φ(x_i, c_i) / n.
fn suff_means(features: &CondFeatureTable, x_sample: &Sample, labels: &[usize]) -> Vec<f64> {
    let f = features.num_features();
    let mut sums = vec![0.0; f];
    for (&x, &c) in x_sample.indices().iter().zip(labels) {
        let row = features.row(x, c);
        for k in 0..f {
            sums[k] += row[k];
        }
    }
    let n = x_sample.len() as f64;
    for s in sums.iter_mut() {
        *s /= n;
    }
    sums
}

/// Fits the conditional model by conditional maximum likelihood.
pub fn fit_conditional(
    features: &CondFeatureTable,
    x_sample: &Sample,
    labels: &[usize],
) -> Result<ConditionalModel> {
    validate_data(features, x_sample, labels)?;
    let stats = suff_means(features, x_sample, labels);
    let level_counts = x_sample.counts(features.num_symbols());
    fit_conditional_stats(features, &level_counts, &stats)
}

/// Averaged negative conditional log-likelihood and its gradient at an
/// arbitrary Λ, in original coordinates. The gradient is the per-sample
/// feature-expectation gap (empirical minus model); exposed for diagnostics
/// and finite-difference checks.
pub fn cond_value_and_gradient(
    features: &CondFeatureTable,
    x_sample: &Sample,
    labels: &[usize],
    lambda: &[f64],
) -> Result<(f64, Vec<f64>)> {
    validate_data(features, x_sample, labels)?;
    let f = features.num_features();
    if lambda.len() != f {
        return Err(Error::DimensionMismatch(format!(
            "expected {f} multipliers, got {}",
            lambda.len()
        )));
    }
    let stats = suff_means(features, x_sample, labels);
    let c = features.num_classes();
    let n = x_sample.len() as f64;
    let level_counts = x_sample.counts(features.num_symbols());

    let mut value: f64 = lambda.iter().zip(&stats).map(|(l, s)| l * s).sum();
    let mut grad = stats;
    let mut scores = vec![0.0; c];
    for (v, &count) in level_counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let w = count as f64 / n;
        let mut max = f64::NEG_INFINITY;
        for (cls, item) in scores.iter_mut().enumerate() {
            let row = features.row(v, cls);
            *item = -row.iter().zip(lambda).map(|(fv, l)| fv * l).sum::<f64>();
            max = max.max(*item);
        }
        let z: f64 = scores.iter().map(|s| libm::exp(s - max)).sum();
        value += w * (max + libm::log(z));
        for (cls, &s) in scores.iter().enumerate() {
            let p = libm::exp(s - max) / z;
            let row = features.row(v, cls);
            for (g, fv) in grad.iter_mut().zip(row) {
                *g -= w * p * fv;
            }
        }
    }
    Ok((value, grad))
}

struct CondObjective {
    /// (K·C) × d scaled features over active columns, level-major.
    feats: Vec<f64>,
    /// (level, weight) pairs for observed levels.
    weights: Vec<(usize, f64)>,
    targets: Vec<f64>,
    num_classes: usize,
    dim: usize,
    // scratch
    scores: Vec<f64>,
    probs: Vec<f64>,
    mean: Vec<f64>,
    centered: Vec<f64>,
}

impl CondObjective {
    #[inline]
    fn row(&self, level: usize, class: usize) -> &[f64] {
        let base = (level * self.num_classes + class) * self.dim;
        &self.feats[base..base + self.dim]
    }

    fn level_scores(&self, lambda: &[f64], level: usize, scores: &mut [f64]) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for cls in 0..self.num_classes {
            let row = self.row(level, cls);
            let s: f64 = -row.iter().zip(lambda).map(|(f, l)| f * l).sum::<f64>();
            scores[cls] = s;
            max = max.max(s);
        }
        max
    }
}

impl Objective for CondObjective {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&mut self, lambda: &[f64]) -> f64 {
        let mut value: f64 = lambda.iter().zip(&self.targets).map(|(l, t)| l * t).sum();
        let mut scores = core::mem::take(&mut self.scores);
        for &(level, w) in &self.weights {
            let max = self.level_scores(lambda, level, &mut scores);
            let z: f64 = scores.iter().map(|s| libm::exp(s - max)).sum();
            value += w * (max + libm::log(z));
        }
        self.scores = scores;
        value
    }

    fn value_grad_hess(&mut self, lambda: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let d = self.dim;
        let c = self.num_classes;
        let mut value: f64 = lambda.iter().zip(&self.targets).map(|(l, t)| l * t).sum();
        grad.copy_from_slice(&self.targets);
        hess.fill(0.0);

        let mut scores = core::mem::take(&mut self.scores);
        let mut probs = core::mem::take(&mut self.probs);
        let mut mean = core::mem::take(&mut self.mean);
        let mut centered = core::mem::take(&mut self.centered);
        for &(level, w) in &self.weights {
            let max = self.level_scores(lambda, level, &mut scores);
            let mut z = 0.0;
            for cls in 0..c {
                probs[cls] = libm::exp(scores[cls] - max);
                z += probs[cls];
            }
            value += w * (max + libm::log(z));
            for p in probs.iter_mut() {
                *p /= z;
            }
            mean.fill(0.0);
            for cls in 0..c {
                let row = self.row(level, cls);
                for (mk, f) in mean.iter_mut().zip(row) {
                    *mk += probs[cls] * f;
                }
            }
            for (g, mk) in grad.iter_mut().zip(&mean) {
                *g -= w * mk;
            }
            for cls in 0..c {
                let row = self.row(level, cls);
                for q in 0..d {
                    centered[q] = row[q] - mean[q];
                }
                let pw = w * probs[cls];
                for a in 0..d {
                    let pa = pw * centered[a];
                    let ha = &mut hess[a * d + a..(a + 1) * d];
                    for (h, cb) in ha.iter_mut().zip(&centered[a..]) {
                        *h += pa * cb;
                    }
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                hess[a * d + b] = hess[b * d + a];
            }
        }
        self.scores = scores;
        self.probs = probs;
        self.mean = mean;
        self.centered = centered;
        value
    }
}

/// Everything a repeated conditional fit needs that does not depend on the
/// sufficient statistics: scaled features, tolerances, solver workspace.
/// Reused across the thousands of fits inside a COMP enumeration.
struct CondFitContext<'a> {
    features: &'a CondFeatureTable,
    level_counts: Vec<usize>,
    mid: Vec<f64>,
    halfrange: Vec<f64>,
    active: Vec<usize>,
    tol: Vec<f64>,
    /// active-column index of the intercept indicator for each non-reference
    /// class, when the table has one (used for the warm start).
    intercept_cols: Vec<Option<usize>>,
    /// The family realizes every conditional distribution on the observed
    /// levels (score-difference design has full per-level rank): the fit is
    /// the per-level empirical label frequencies, in closed form.
    saturated: bool,
    objective: CondObjective,
    workspace: NewtonWorkspace,
    start: Vec<f64>,
    n: usize,
}

struct CondFitOutcome {
    entropy: f64,
    lambda_scaled: Vec<f64>,
    capped: bool,
}

impl<'a> CondFitContext<'a> {
    fn new(
        features: &'a CondFeatureTable,
        level_counts: &[usize],
        resid_target: f64,
    ) -> Result<Self> {
        let f = features.num_features();
        let c = features.num_classes();
        let k = features.num_symbols();
        let n: usize = level_counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidSample("empty covariate sample".into()));
        }
        if level_counts.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "{} level counts for a table with {k} symbols",
                level_counts.len()
            )));
        }

        // Column scaling over the full table. A column constant across all
        // (x, c) pairs cannot influence p(c|x): its constraint holds
        // identically and its multiplier stays 0.
        let mut mid = vec![0.0; f];
        let mut halfrange = vec![0.0; f];
        let mut active: Vec<usize> = Vec::new();
        for col in 0..f {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for j in 0..k {
                for cls in 0..c {
                    let v = features.row(j, cls)[col];
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            mid[col] = 0.5 * (lo + hi);
            halfrange[col] = 0.5 * (hi - lo);
            if halfrange[col] > 0.0 {
                active.push(col);
            }
        }

        let d = active.len();
        let mut feats = Vec::with_capacity(k * c * d);
        for j in 0..k {
            for cls in 0..c {
                let row = features.row(j, cls);
                for &col in &active {
                    feats.push((row[col] - mid[col]) / halfrange[col]);
                }
            }
        }
        let weights: Vec<(usize, f64)> = level_counts
            .iter()
            .enumerate()
            .filter(|(_, &cnt)| cnt > 0)
            .map(|(v, &cnt)| (v, cnt as f64 / n as f64))
            .collect();
        let tol: Vec<f64> = active
            .iter()
            .map(|&col| resid_target / halfrange[col])
            .collect();

        // detect per-class intercept indicator columns among the active set
        let mut intercept_cols = vec![None; c];
        for (a, &col) in active.iter().enumerate() {
            for target_cls in 1..c {
                let mut is_indicator = true;
                'scan: for j in 0..k {
                    for cls in 0..c {
                        let v = features.row(j, cls)[col];
                        let want = if cls == target_cls { 1.0 } else { 0.0 };
                        if v != want {
                            is_indicator = false;
                            break 'scan;
                        }
                    }
                }
                if is_indicator {
                    intercept_cols[target_cls] = Some(a);
                }
            }
        }

        // saturation test: rank of the score-difference design over the
        // observed levels
        let observed_levels: Vec<usize> = weights.iter().map(|&(v, _)| v).collect();
        let rows = observed_levels.len() * (c - 1);
        let mut design = vec![0.0; rows * d];
        let mut r = 0;
        for &v in &observed_levels {
            for cls in 1..c {
                for (slot, &col) in active.iter().enumerate() {
                    let diff =
                        (features.row(v, cls)[col] - features.row(v, 0)[col]) / halfrange[col];
                    design[r * d + slot] = diff;
                }
                r += 1;
            }
        }
        let saturated = d >= rows && matrix_rank(&mut design, rows, d) == rows;

        let objective = CondObjective {
            feats,
            weights,
            targets: vec![0.0; d],
            num_classes: c,
            dim: d,
            scores: vec![0.0; c],
            probs: vec![0.0; c],
            mean: vec![0.0; d],
            centered: vec![0.0; d],
        };
        Ok(CondFitContext {
            features,
            level_counts: level_counts.to_vec(),
            mid,
            halfrange,
            active,
            tol,
            intercept_cols,
            saturated,
            objective,
            workspace: NewtonWorkspace::new(),
            start: vec![0.0; d],
            n,
        })
    }

    /// Closed-form conditional entropy of the saturated fit: the per-level
    /// empirical label frequencies. `counts` is K×C flat, level-major.
    fn saturated_entropy(&self, counts: &[usize]) -> f64 {
        let c = self.features.num_classes();
        let n_f = self.n as f64;
        let mut h = 0.0;
        for &(v, _) in &self.objective.weights {
            let n_v: usize = counts[v * c..(v + 1) * c].iter().sum();
            if n_v == 0 {
                continue;
            }
            let mut h_v = 0.0;
            for cls in 0..c {
                let cnt = counts[v * c + cls];
                if cnt > 0 {
                    let p = cnt as f64 / n_v as f64;
                    h_v -= p * libm::log(p);
                }
            }
            h += (n_v as f64 / n_f) * h_v;
        }
        h
    }

    /// Warm start: solve the intercept-only block in closed form (it matches
    /// marginal label frequencies) and zero the rest. A pure function of the
    /// statistics, so enumeration order cannot influence any fit.
    fn prepare_start(&mut self, stats: &[f64]) {
        self.start.fill(0.0);
        let c = self.features.num_classes();
        let mut q = vec![0.0; c];
        let mut q0 = 1.0;
        let mut usable = true;
        for cls in 1..c {
            match self.intercept_cols[cls] {
                Some(a) => {
                    q[cls] = stats[self.active[a]];
                    q0 -= q[cls];
                }
                None => {
                    usable = false;
                    break;
                }
            }
        }
        if !usable {
            return;
        }
        let q0 = q0.max(1e-12);
        for cls in 1..c {
            if let Some(a) = self.intercept_cols[cls] {
                let lam = libm::log(q0) - libm::log(q[cls].max(1e-12));
                let scaled = (lam * self.halfrange[self.active[a]])
                    .clamp(-0.9 * LAMBDA_CAP, 0.9 * LAMBDA_CAP);
                self.start[a] = scaled;
            }
        }
    }

    /// Fit at the given averaged sufficient statistics. Returns the
    /// conditional entropy via H = value − λ·∇ (exact at any iterate), the
    /// scaled multipliers, and whether the cap bound the fit.
    ///
    /// In lenient mode a stalled iterate is accepted as the best available
    /// approximation: label assignments inside COMP enumerations can have
    /// their optimum at infinity, where no interior residual target is
    /// meaningful, while the entropy (the objective value) has long
    /// converged.
    fn fit(&mut self, stats: &[f64], lenient: bool) -> Result<CondFitOutcome> {
        for (slot, &col) in self.active.iter().enumerate() {
            self.objective.targets[slot] = (stats[col] - self.mid[col]) / self.halfrange[col];
        }
        self.prepare_start(stats);
        let outcome = damped_newton(
            &mut self.objective,
            &self.start,
            &NewtonControl {
                grad_tol: &self.tol,
                lambda_cap: LAMBDA_CAP,
                max_iterations: MAX_ITERATIONS,
            },
            &mut self.workspace,
        );

        let residual = self
            .active
            .iter()
            .zip(&outcome.grad)
            .fold(0.0f64, |acc, (&col, g)| {
                acc.max(libm::fabs(*g) * self.halfrange[col])
            });
        let at_cap = outcome.status == NewtonStatus::CapReached
            || outcome
                .lambda
                .iter()
                .any(|l| libm::fabs(*l) >= LAMBDA_CAP - CAP_WINDOW);
        let converged = outcome.status == NewtonStatus::Converged || residual <= ACCEPT_TOL;
        if !converged && !at_cap && !lenient {
            return Err(Error::NotConverged {
                iterations: outcome.iterations,
                residual,
            });
        }
        let ip: f64 = outcome
            .lambda
            .iter()
            .zip(&outcome.grad)
            .map(|(l, g)| l * g)
            .sum();
        let entropy = (outcome.value - ip).max(0.0);
        Ok(CondFitOutcome {
            entropy,
            lambda_scaled: outcome.lambda,
            capped: at_cap,
        })
    }

    /// Full model materialization: per-level probabilities for every symbol
    /// and multipliers mapped back to original coordinates.
    fn materialize(&mut self, fit: &CondFitOutcome) -> ConditionalModel {
        let f = self.features.num_features();
        let c = self.features.num_classes();
        let k = self.features.num_symbols();
        let n_f = self.n as f64;
        let mut cond_probs = vec![0.0; k * c];
        let mut entropy = 0.0;
        let mut scores = vec![0.0; c];
        for j in 0..k {
            let max = self
                .objective
                .level_scores(&fit.lambda_scaled, j, &mut scores);
            let mut z = 0.0;
            for item in scores.iter_mut() {
                *item = libm::exp(*item - max);
                z += *item;
            }
            let mut h = 0.0;
            for cls in 0..c {
                let p = scores[cls] / z;
                cond_probs[j * c + cls] = p;
                if p > 0.0 {
                    h -= p * libm::log(p);
                }
            }
            let w = self.level_counts[j] as f64 / n_f;
            if w > 0.0 {
                entropy += w * h;
            }
        }
        entropy = entropy.max(0.0);

        let mut lambdas = vec![0.0; f];
        for (a, &col) in self.active.iter().enumerate() {
            lambdas[col] = fit.lambda_scaled[a] / self.halfrange[col];
        }
        ConditionalModel {
            lambdas,
            cond_probs,
            cond_entropy_nats: entropy,
            num_symbols: k,
            num_classes: c,
            capped: fit.capped,
        }
    }
}

/// Row rank of an r×d matrix by Gaussian elimination with partial pivoting.
/// Destroys `a`. Entries are expected to be O(1) (pre-scaled features).
fn matrix_rank(a: &mut [f64], r: usize, d: usize) -> usize {
    let tol = 1e-8;
    let mut rank = 0;
    let mut row = 0;
    for col in 0..d {
        if row >= r {
            break;
        }
        let mut pivot = row;
        let mut best = libm::fabs(a[row * d + col]);
        for i in (row + 1)..r {
            let v = libm::fabs(a[i * d + col]);
            if v > best {
                best = v;
                pivot = i;
            }
        }
        if best <= tol {
            continue;
        }
        if pivot != row {
            for k in 0..d {
                a.swap(row * d + k, pivot * d + k);
            }
        }
        let lead = a[row * d + col];
        for i in (row + 1)..r {
            let factor = a[i * d + col] / lead;
            if factor != 0.0 {
                for k in col..d {
                    a[i * d + k] -= factor * a[row * d + k];
                }
            }
        }
        row += 1;
        rank += 1;
    }
    rank
}

/// Core fit from sufficient statistics: level counts plus averaged feature
/// sums. Cold context per call; identical statistics always produce
/// identical fits regardless of the caller.
fn fit_conditional_stats(
    features: &CondFeatureTable,
    level_counts: &[usize],
    stats: &[f64],
) -> Result<ConditionalModel> {
    let mut ctx = CondFitContext::new(features, level_counts, RESID_TARGET)?;
    let fit = ctx.fit(stats, false)?;
    Ok(ctx.materialize(&fit))
}

/// Conditional ERR = n · H(C|X) at the fitted model, equal to the negative
/// conditional log-likelihood at the optimum. Saturated families (the
/// per-level design spans every conditional distribution) use the exact
/// closed form, the per-level empirical label entropies.
pub fn cond_err_codelength(
    features: &CondFeatureTable,
    x_sample: &Sample,
    labels: &[usize],
) -> Result<f64> {
    validate_data(features, x_sample, labels)?;
    let level_counts = x_sample.counts(features.num_symbols());
    let ctx = CondFitContext::new(features, &level_counts, RESID_TARGET)?;
    let n = x_sample.len() as f64;
    if ctx.saturated {
        let c = features.num_classes();
        let mut counts = vec![0usize; features.num_symbols() * c];
        for (&x, &cls) in x_sample.indices().iter().zip(labels) {
            counts[x * c + cls] += 1;
        }
        return Ok(n * ctx.saturated_entropy(&counts));
    }
    let model = fit_conditional(features, x_sample, labels)?;
    Ok(n * model.cond_entropy_nats())
}

/// Conditional entropies memoized by quantized sufficient statistics, all
/// computed through one shared fit context. Saturated families skip both the
/// cache and the solver: their fit is the per-level frequencies.
struct CondEntropyCache<'a> {
    ctx: CondFitContext<'a>,
    map: BTreeMap<Vec<i128>, f64>,
    stats: Vec<f64>,
}

impl<'a> CondEntropyCache<'a> {
    fn new(features: &'a CondFeatureTable, level_counts: &[usize]) -> Result<Self> {
        let f = features.num_features();
        Ok(CondEntropyCache {
            ctx: CondFitContext::new(features, level_counts, ENUM_RESID_TARGET)?,
            map: BTreeMap::new(),
            stats: vec![0.0; f],
        })
    }

    /// Entropy of the fit for per-(level, class) label counts (K×C flat).
    ///
    /// Binary families are closed under swapping the two classes (negate Λ),
    /// and the entropy is invariant, so complementary count arrays share one
    /// canonical fit.
    fn entropy_for_counts(&mut self, counts: &[usize]) -> Result<f64> {
        if self.ctx.saturated {
            return Ok(self.ctx.saturated_entropy(counts));
        }
        let features = self.ctx.features;
        let c = features.num_classes();
        let n = self.ctx.n;
        let n_f = n as f64;
        let mut swap_classes = false;
        if c == 2 {
            let class1: usize = (0..features.num_symbols()).map(|v| counts[v * 2 + 1]).sum();
            swap_classes = 2 * class1 > n
                || (2 * class1 == n && {
                    // deterministic tie-break: compare per-level counts
                    let mut flip = false;
                    for v in 0..features.num_symbols() {
                        if counts[v * 2 + 1] != counts[v * 2] {
                            flip = counts[v * 2 + 1] > counts[v * 2];
                            break;
                        }
                    }
                    flip
                });
        }
        self.stats.fill(0.0);
        for v in 0..features.num_symbols() {
            for cls in 0..c {
                let eff = if swap_classes { 1 - cls } else { cls };
                let cnt = counts[v * c + eff];
                if cnt == 0 {
                    continue;
                }
                let w = cnt as f64 / n_f;
                let row = features.row(v, cls);
                for (sk, fk) in self.stats.iter_mut().zip(row) {
                    *sk += w * fk;
                }
            }
        }
        let key = quantized_key(&self.stats);
        if let Some(&h) = self.map.get(&key) {
            return Ok(h);
        }
        let stats = core::mem::take(&mut self.stats);
        let h = self.ctx.fit(&stats, true)?.entropy;
        self.stats = stats;
        self.map.insert(key, h);
        Ok(h)
    }
}

/// Conditional COMP by brute-force enumeration of all |C|^n label sequences
/// with the covariates held fixed. The enumeration is independent of the
/// grouped route (no multiplicities, no grouping), while the per-statistics
/// fit is shared. Oracle: use [`cond_comp_grouped`] for real work.
pub fn cond_comp_exact(features: &CondFeatureTable, x_sample: &Sample, caps: &Caps) -> Result<f64> {
    if let Some(&bad) = x_sample
        .indices()
        .iter()
        .find(|&&i| i >= features.num_symbols())
    {
        return Err(Error::InvalidSample(format!(
            "covariate level {bad} out of range"
        )));
    }
    let n = x_sample.len();
    let c = features.num_classes();
    let total = (c as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > caps.exact_enum as u128 {
        return Err(Error::CapExceeded {
            what: "exhaustive label-sequence enumeration",
            required: total,
            cap: caps.exact_enum,
            hint: "",
        });
    }
    let level_counts = x_sample.counts(features.num_symbols());
    let c_total = features.num_classes();
    let n_f = n as f64;
    let mut cache = CondEntropyCache::new(features, &level_counts)?;
    let mut acc = LogSumExp::new();
    let mut labels = vec![0usize; n];
    let mut counts = vec![0usize; features.num_symbols() * c_total];
    loop {
        counts.fill(0);
        for (&x, &cls) in x_sample.indices().iter().zip(&labels) {
            counts[x * c_total + cls] += 1;
        }
        let h = cache.entropy_for_counts(&counts)?;
        acc.add(-n_f * h);

        let mut pos = n;
        loop {
            if pos == 0 {
                return Ok(acc.value());
            }
            pos -= 1;
            labels[pos] += 1;
            if labels[pos] < c {
                break;
            }
            labels[pos] = 0;
        }
    }
}

/// Conditional COMP grouped by per-level label counts.
///
/// The fit depends on a label sequence only through the counts n_{v,c} of
/// each class at each covariate level, and the number of sequences realizing
/// a given count array is Π_v multinomial(n_v; n_{v,·}). Identical in value
/// to [`cond_comp_exact`] at combinatorial rather than exponential cost.
pub fn cond_comp_grouped(
    features: &CondFeatureTable,
    x_sample: &Sample,
    caps: &Caps,
) -> Result<f64> {
    if let Some(&bad) = x_sample
        .indices()
        .iter()
        .find(|&&i| i >= features.num_symbols())
    {
        return Err(Error::InvalidSample(format!(
            "covariate level {bad} out of range"
        )));
    }
    let c = features.num_classes();
    let n = x_sample.len();
    let level_counts = x_sample.counts(features.num_symbols());
    let observed: Vec<(usize, usize)> = level_counts
        .iter()
        .enumerate()
        .filter(|(_, &cnt)| cnt > 0)
        .map(|(v, &cnt)| (v, cnt))
        .collect();

    let mut required: u128 = 1;
    for &(_, cnt) in &observed {
        required = required.saturating_mul(composition_count(cnt, c));
    }
    if required > caps.type_classes as u128 {
        return Err(Error::CapExceeded {
            what: "label-count group enumeration",
            required,
            cap: caps.type_classes,
            hint: "; consider the monte-carlo method",
        });
    }

    let lf = LnFactorials::new(n);
    // per-level composition lists (small), iterated odometer-style
    let per_level: Vec<Vec<Vec<usize>>> = observed
        .iter()
        .map(|&(_, cnt)| compositions(cnt, c).collect())
        .collect();
    let mut index = vec![0usize; observed.len()];
    let n_f = n as f64;
    let mut cache = CondEntropyCache::new(features, &level_counts)?;
    let mut acc = LogSumExp::new();
    let mut counts = vec![0usize; features.num_symbols() * c];
    loop {
        let mut log_mult = 0.0;
        counts.fill(0);
        for (slot, &(level, _)) in observed.iter().enumerate() {
            let comp = &per_level[slot][index[slot]];
            log_mult += lf.ln_multinomial(comp);
            for (cls, &cnt) in comp.iter().enumerate() {
                counts[level * c + cls] = cnt;
            }
        }
        let h = cache.entropy_for_counts(&counts)?;
        acc.add(log_mult - n_f * h);

        // odometer over the per-level composition lists
        let mut slot = observed.len();
        loop {
            if slot == 0 {
                return Ok(acc.value());
            }
            slot -= 1;
            index[slot] += 1;
            if index[slot] < per_level[slot].len() {
                break;
            }
            index[slot] = 0;
        }
    }
}

/// Monte-Carlo conditional COMP from uniform i.i.d. label sequences, with a
/// delta-method standard error. Deterministic for a fixed seed.
pub fn cond_comp_monte_carlo(
    features: &CondFeatureTable,
    x_sample: &Sample,
    draws: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    if draws < 100 {
        return Err(Error::InvalidInput(format!(
            "need at least 100 draws, got {draws}"
        )));
    }
    let c = features.num_classes();
    let n = x_sample.len();
    let n_f = n as f64;
    let level_counts = x_sample.counts(features.num_symbols());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut cache = CondEntropyCache::new(features, &level_counts)?;
    let mut first = LogSumExp::new();
    let mut second = LogSumExp::new();
    let mut counts = vec![0usize; features.num_symbols() * c];
    for _ in 0..draws {
        counts.fill(0);
        for &x in x_sample.indices() {
            let cls = sample_index(&mut rng, c);
            counts[x * c + cls] += 1;
        }
        let h = cache.entropy_for_counts(&counts)?;
        let w = -n_f * h;
        first.add(w);
        second.add(2.0 * w);
    }
    let d = draws as f64;
    let estimate = n_f * libm::log(c as f64) + first.value() - libm::log(d);
    let stderr = crate::codelength::mc_stderr(first.value(), second.value(), d);
    Ok((estimate, stderr))
}

/// Full conditional NML report. With [`CompMethod::TypeClasses`] the grouped
/// path is used; if its cap is exceeded the computation falls back to Monte
/// Carlo with the caps' fallback draws and seed, reported as such.
pub fn cond_nml(
    features: &CondFeatureTable,
    x_sample: &Sample,
    labels: &[usize],
    method: CompMethod,
    caps: &Caps,
) -> Result<CodelengthReport> {
    let err = cond_err_codelength(features, x_sample, labels)?;
    let report = match method {
        CompMethod::ExactEnum => {
            let comp = cond_comp_exact(features, x_sample, caps)?;
            CodelengthReport::assemble(err, comp, MethodTag::ExactEnum, None)
        }
        CompMethod::TypeClasses => match cond_comp_grouped(features, x_sample, caps) {
            Ok(comp) => CodelengthReport::assemble(err, comp, MethodTag::TypeClass, None),
            Err(Error::CapExceeded { .. }) => {
                let (comp, stderr) = cond_comp_monte_carlo(
                    features,
                    x_sample,
                    caps.fallback_draws,
                    caps.fallback_seed,
                )?;
                CodelengthReport::assemble(err, comp, MethodTag::MonteCarlo, Some(stderr))
            }
            Err(e) => return Err(e),
        },
        CompMethod::MonteCarlo { draws, seed } => {
            let (comp, stderr) = cond_comp_monte_carlo(features, x_sample, draws, seed)?;
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
