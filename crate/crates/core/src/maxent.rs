//! Fitting maximum-entropy distributions by damped Newton on the convex dual.
//!
//! For a feature table Φ and target moments φ̄ the dual objective
//!
//! ```text
//! G(λ_1..λ_m) = λ_0(λ) + Σ_k λ_k φ̄_k,   λ_0(λ) = ln Σ_j exp(−Σ_k λ_k φ_k(x_j))
//! ```
//!
//! is smooth and convex; its gradient is `φ̄ − E_p[φ]` and its Hessian the
//! feature covariance under the current distribution, so the moment residual
//! doubles as the convergence test. At the optimum G equals the entropy of
//! the fit.
//!
//! Feature columns are rescaled internally to [−1, 1]: moment features such
//! as x^7 on integer levels span five orders of magnitude, and the raw
//! Hessian would be numerically unusable. Multipliers are mapped back to the
//! original coordinates before they are returned.
//!
//! Boundary moments push Λ to infinity. When ‖λ‖∞ (in the scaled basis)
//! exceeds 40 with the residual still above 1e−8, symbols with probability
//! below 1e−12 are dropped and the fit restarts on the reduced support: the
//! limit distribution lives on an exposed face of the moment polytope, and
//! the reduced fit matches the moments there exactly.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::alphabet::Sample;
use crate::basis::{orthonormalize, OrthoFeatures};
use crate::error::{Error, Result};
use crate::features::{FeatureTable, MomentVector};
use crate::solver::{damped_newton, NewtonControl, NewtonStatus, NewtonWorkspace, Objective};

/// Solver target for the max moment residual, in original feature units.
const RESID_TARGET: f64 = 1e-10;
/// Residual below which a stalled or capped iterate is still accepted.
const ACCEPT_TOL: f64 = 1e-8;
/// Bound on ‖λ‖∞ in the scaled feature basis; reaching it with a large
/// residual triggers support reduction.
const LAMBDA_CAP: f64 = 40.0;
/// Multipliers within this distance of the cap count as capped: iterates
/// can approach a box face asymptotically without landing on it.
const CAP_WINDOW: f64 = 1e-3;
/// Probability below which a symbol is dropped when reducing support.
const DROP_EPS: f64 = 1e-12;
/// Probability below which a converged fit is snapped onto the exposed face,
/// provided the constraints still hold there. Keeps exact-boundary fits
/// (point masses, types with empty cells) exact instead of 1e−10-close.
const SNAP_EPS: f64 = 1e-7;
/// Per-column residual allowed for a snapped fit, scaled by feature size.
const SNAP_RESID: f64 = 1e-9;
/// Moment-polytope membership slack, relative to the feature scale.
const FEAS_SLACK: f64 = 1e-10;
const MAX_ITERATIONS: usize = 200;

/// A fitted maximum-entropy distribution.
#[derive(Debug, Clone)]
pub struct MaxEntDistribution {
    probs: Vec<f64>,
    lambdas: Vec<f64>,
    support: Vec<usize>,
    entropy_nats: f64,
}

impl MaxEntDistribution {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Λ = (λ_0, λ_1, …, λ_m) in original feature coordinates; on the
    /// support, `probs[j] = exp(−λ_0 − Σ_k λ_k φ_k(x_j))`.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// Indices carrying positive probability.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// −Σ p ln p in nats.
    pub fn entropy_nats(&self) -> f64 {
        self.entropy_nats
    }
}

/// Σ_i ln p(x^(i)); −∞ when any sample point has zero probability.
pub fn log_likelihood(dist: &MaxEntDistribution, sample: &Sample) -> f64 {
    let mut total = 0.0;
    for &i in sample.indices() {
        let p = dist.probs[i];
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        total += libm::log(p);
    }
    total
}

/// Dual objective and gradient at an arbitrary Λ_{1..m}, in original
/// coordinates. The gradient is `φ̄ − E_p[φ]`; exposed for diagnostics and
/// finite-difference checks.
pub fn dual_value_and_gradient(
    features: &FeatureTable,
    moments: &MomentVector,
    lambda: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let m = features.num_features();
    if lambda.len() != m || moments.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "expected {m} multipliers and moments, got {} and {}",
            lambda.len(),
            moments.len()
        )));
    }
    let k = features.num_symbols();
    let mut scores = Vec::with_capacity(k);
    let mut max_score = f64::NEG_INFINITY;
    for j in 0..k {
        let row = features.row(j);
        let s: f64 = -row.iter().zip(lambda).map(|(f, l)| f * l).sum::<f64>();
        max_score = max_score.max(s);
        scores.push(s);
    }
    let z: f64 = scores.iter().map(|s| libm::exp(s - max_score)).sum();
    let lambda0 = max_score + libm::log(z);
    let mut grad = moments.means().to_vec();
    for j in 0..k {
        let p = libm::exp(scores[j] - lambda0);
        let row = features.row(j);
        for (g, f) in grad.iter_mut().zip(row) {
            *g -= p * f;
        }
    }
    let value = lambda0
        + lambda
            .iter()
            .zip(moments.means())
            .map(|(l, t)| l * t)
            .sum::<f64>();
    Ok((value, grad))
}

/// Fits the maximum-entropy distribution matching `moments` under `features`.
///
/// Interior moments converge with max residual ≤ 1e−8 (typically ≤ 1e−10);
/// boundary moments produce the maxent distribution on the exposed face with
/// zero probability outside it. Moments outside the polytope are rejected.
pub fn fit_maxent(features: &FeatureTable, moments: &MomentVector) -> Result<MaxEntDistribution> {
    fit_maxent_impl(features, moments, false)
}

/// `fit_maxent` accepting stalled iterates: enumeration fits at degenerate
/// type moments can sit in valleys whose dual-feasibility floor is above the
/// strict residual target while the entropy itself has converged.
pub(crate) fn fit_maxent_lenient(
    features: &FeatureTable,
    moments: &MomentVector,
) -> Result<MaxEntDistribution> {
    fit_maxent_impl(features, moments, true)
}

fn fit_maxent_impl(
    features: &FeatureTable,
    moments: &MomentVector,
    lenient: bool,
) -> Result<MaxEntDistribution> {
    let k = features.num_symbols();
    let m = features.num_features();
    if moments.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "feature table has {m} columns but moment vector has {}",
            moments.len()
        )));
    }
    if let Some(bad) = moments.means().iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("moment {bad} is not finite")));
    }

    // Unconstrained model: the uniform distribution, entropy ln K.
    if m == 0 {
        let p = 1.0 / k as f64;
        return Ok(MaxEntDistribution {
            probs: vec![p; k],
            lambdas: vec![libm::log(k as f64)],
            support: (0..k).collect(),
            entropy_nats: libm::log(k as f64),
        });
    }

    // Quick polytope bounding-box check per column.
    for col in 0..m {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for j in 0..k {
            let v = features.value(j, col);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let slack = FEAS_SLACK * libm::fabs(lo).max(libm::fabs(hi)).max(1.0);
        let t = moments.means()[col];
        if t < lo - slack || t > hi + slack {
            return Err(Error::InfeasibleMoments {
                index: col,
                deviation: (t - t.clamp(lo, hi)).abs(),
            });
        }
    }

    let full: Vec<usize> = (0..k).collect();
    let dist = solve_chain(features, moments, full, lenient)?;

    // Snap negligible tail probabilities onto the exposed face when the
    // constraints are still met there.
    let keep: Vec<usize> = dist
        .support()
        .iter()
        .copied()
        .filter(|&j| dist.probs()[j] >= SNAP_EPS)
        .collect();
    if !keep.is_empty() && keep.len() < dist.support().len() {
        if let Ok(snapped) = solve_chain(features, moments, keep, lenient) {
            if scaled_residual(features, moments, &snapped) <= SNAP_RESID {
                return Ok(snapped);
            }
        }
    }
    Ok(dist)
}

fn solve_chain(
    features: &FeatureTable,
    moments: &MomentVector,
    support: Vec<usize>,
    lenient: bool,
) -> Result<MaxEntDistribution> {
    match solve_on_support(features, moments, &support, lenient)? {
        SupportOutcome::Done(dist) => Ok(dist),
        SupportOutcome::Reduce {
            keep,
            worst_column,
            residual,
            iterations,
            fallback,
        } => {
            if keep.is_empty() || keep.len() == support.len() {
                // nothing can be dropped yet the constraints stay unmet
                return if lenient {
                    Ok(fallback)
                } else {
                    Err(Error::InfeasibleMoments {
                        index: worst_column,
                        deviation: residual,
                    })
                };
            }
            match solve_chain(features, moments, keep, lenient) {
                Ok(dist) => Ok(dist),
                // the face guess was wrong: the capped iterate is still the
                // best available answer in lenient mode
                Err(_) if lenient => Ok(fallback),
                Err(Error::InfeasibleMoments { .. }) => Err(Error::NotConverged {
                    iterations,
                    residual,
                }),
                Err(e) => Err(e),
            }
        }
    }
}

/// Max per-column moment residual relative to each column's magnitude.
fn scaled_residual(
    features: &FeatureTable,
    moments: &MomentVector,
    dist: &MaxEntDistribution,
) -> f64 {
    let m = features.num_features();
    let k = features.num_symbols();
    let mut worst = 0.0f64;
    for col in 0..m {
        let mut e = 0.0;
        let mut scale = 1.0f64;
        for j in 0..k {
            let v = features.value(j, col);
            e += dist.probs()[j] * v;
            scale = scale.max(libm::fabs(v));
        }
        worst = worst.max(libm::fabs(e - moments.means()[col]) / scale);
    }
    worst
}

enum SupportOutcome {
    Done(MaxEntDistribution),
    Reduce {
        keep: Vec<usize>,
        worst_column: usize,
        residual: f64,
        iterations: usize,
        /// The capped iterate itself, in case the reduced problem fails.
        fallback: MaxEntDistribution,
    },
}

struct ScaledDual {
    /// support_size × active matrix of scaled features
    feats: Vec<f64>,
    targets: Vec<f64>,
    dim: usize,
    support_size: usize,
}

impl ScaledDual {
    fn scores(&self, lambda: &[f64], out: &mut Vec<f64>) -> f64 {
        out.clear();
        let mut max = f64::NEG_INFINITY;
        for j in 0..self.support_size {
            let row = &self.feats[j * self.dim..(j + 1) * self.dim];
            let s: f64 = -row.iter().zip(lambda).map(|(f, l)| f * l).sum::<f64>();
            max = max.max(s);
            out.push(s);
        }
        max
    }
}

impl Objective for ScaledDual {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&mut self, lambda: &[f64]) -> f64 {
        let mut scores = Vec::with_capacity(self.support_size);
        let max = self.scores(lambda, &mut scores);
        let z: f64 = scores.iter().map(|s| libm::exp(s - max)).sum();
        max + libm::log(z)
            + lambda
                .iter()
                .zip(&self.targets)
                .map(|(l, t)| l * t)
                .sum::<f64>()
    }

    fn value_grad_hess(&mut self, lambda: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let d = self.dim;
        let mut scores = Vec::with_capacity(self.support_size);
        let max = self.scores(lambda, &mut scores);
        let z: f64 = scores.iter().map(|s| libm::exp(s - max)).sum();
        let lambda0 = max + libm::log(z);

        let mut mean = vec![0.0; d];
        let mut probs = Vec::with_capacity(self.support_size);
        for j in 0..self.support_size {
            let p = libm::exp(scores[j] - lambda0);
            probs.push(p);
            let row = &self.feats[j * d..(j + 1) * d];
            for (mk, f) in mean.iter_mut().zip(row) {
                *mk += p * f;
            }
        }
        for k in 0..d {
            grad[k] = self.targets[k] - mean[k];
        }
        hess.fill(0.0);
        let mut centered = vec![0.0; d];
        for j in 0..self.support_size {
            let row = &self.feats[j * d..(j + 1) * d];
            for k in 0..d {
                centered[k] = row[k] - mean[k];
            }
            let p = probs[j];
            for a in 0..d {
                let pa = p * centered[a];
                for b in a..d {
                    hess[a * d + b] += pa * centered[b];
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                hess[a * d + b] = hess[b * d + a];
            }
        }
        lambda0
            + lambda
                .iter()
                .zip(&self.targets)
                .map(|(l, t)| l * t)
                .sum::<f64>()
    }
}

fn solve_on_support(
    features: &FeatureTable,
    moments: &MomentVector,
    support: &[usize],
    lenient: bool,
) -> Result<SupportOutcome> {
    let m = features.num_features();
    let s = support.len();

    // Column scaling over the support: φ' = (φ − mid) / halfrange. Columns
    // that are constant on the support carry no information; their
    // constraint must already hold.
    let mut mid = vec![0.0; m];
    let mut halfrange = vec![0.0; m];
    let mut active: Vec<usize> = Vec::new();
    for col in 0..m {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &j in support {
            let v = features.value(j, col);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        mid[col] = 0.5 * (lo + hi);
        halfrange[col] = 0.5 * (hi - lo);
        let scale = libm::fabs(lo).max(libm::fabs(hi)).max(1.0);
        if halfrange[col] > 0.0 {
            active.push(col);
        } else if libm::fabs(moments.means()[col] - mid[col]) > FEAS_SLACK * scale {
            return Err(Error::InfeasibleMoments {
                index: col,
                deviation: libm::fabs(moments.means()[col] - mid[col]),
            });
        }
    }

    let a_cols = active.len();
    let mut scaled = Vec::with_capacity(s * a_cols);
    for &j in support {
        for &col in &active {
            scaled.push((features.value(j, col) - mid[col]) / halfrange[col]);
        }
    }
    let scaled_targets: Vec<f64> = active
        .iter()
        .map(|&col| (moments.means()[col] - mid[col]) / halfrange[col])
        .collect();

    // Solve in an orthonormal basis: nearly collinear moment columns would
    // otherwise need huge cancelling multipliers even for interior fits.
    let ortho = orthonormalize(&scaled, &scaled_targets, s, a_cols);
    let d = ortho.dim;
    let mut dual = ScaledDual {
        feats: ortho.q.clone(),
        targets: ortho.q_targets.clone(),
        dim: d,
        support_size: s,
    };

    // q-basis tolerances conservative enough that the mapped input-column
    // residuals meet the target
    let mut rmax = 1.0f64;
    for row in &ortho.r {
        for v in row {
            rmax = rmax.max(libm::fabs(*v));
        }
    }
    let hr_max = active
        .iter()
        .fold(1.0f64, |acc, &col| acc.max(halfrange[col]));
    let tol_q = (RESID_TARGET / (hr_max * rmax * (a_cols.max(1) as f64))).max(1e-15);
    let tol: Vec<f64> = vec![tol_q; d];
    let start = vec![0.0; d];

    let outcome = damped_newton(
        &mut dual,
        &start,
        &NewtonControl {
            grad_tol: &tol,
            lambda_cap: LAMBDA_CAP,
            max_iterations: MAX_ITERATIONS,
        },
        &mut NewtonWorkspace::new(),
    );

    let mut column_resids = vec![0.0; a_cols];
    ortho.input_residuals(&outcome.grad, &mut column_resids);
    let mut residual = 0.0f64;
    let mut worst_column = 0usize;
    for (a, &col) in active.iter().enumerate() {
        let r = libm::fabs(column_resids[a]) * halfrange[col];
        if r > residual {
            residual = r;
            worst_column = col;
        }
    }

    if outcome.status == NewtonStatus::Converged || residual <= ACCEPT_TOL {
        return Ok(SupportOutcome::Done(materialize(
            features,
            support,
            &active,
            &mid,
            &halfrange,
            &ortho,
            &outcome.lambda,
            &dual,
        )));
    }

    let at_cap = outcome
        .lambda
        .iter()
        .any(|l| libm::fabs(*l) >= LAMBDA_CAP - CAP_WINDOW)
        || outcome.status == NewtonStatus::CapReached;
    if at_cap {
        // probabilities at the capped iterate decide the face to keep; when
        // the cap limits how far a symbol could be suppressed, none may sit
        // under the threshold yet, so drop the most suppressed one instead
        let mut scores = Vec::with_capacity(s);
        let max = dual.scores(&outcome.lambda, &mut scores);
        let z: f64 = scores.iter().map(|v| libm::exp(v - max)).sum();
        let mut keep: Vec<usize> = support
            .iter()
            .enumerate()
            .filter(|(j, _)| libm::exp(scores[*j] - max) / z >= DROP_EPS)
            .map(|(_, &orig)| orig)
            .collect();
        if keep.len() == support.len() && support.len() > 1 {
            let smallest = (0..s)
                .min_by(|&a, &b| scores[a].total_cmp(&scores[b]))
                .unwrap();
            keep = support
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != smallest)
                .map(|(_, &orig)| orig)
                .collect();
        }
        let fallback = materialize(
            features,
            support,
            &active,
            &mid,
            &halfrange,
            &ortho,
            &outcome.lambda,
            &dual,
        );
        return Ok(SupportOutcome::Reduce {
            keep,
            worst_column,
            residual,
            iterations: outcome.iterations,
            fallback,
        });
    }

    if lenient {
        // stalled off the cap: the iterate is the best available
        // approximation of an ill-conditioned optimum
        return Ok(SupportOutcome::Done(materialize(
            features,
            support,
            &active,
            &mid,
            &halfrange,
            &ortho,
            &outcome.lambda,
            &dual,
        )));
    }
    Err(Error::NotConverged {
        iterations: outcome.iterations,
        residual,
    })
}

#[allow(clippy::too_many_arguments)]
fn materialize(
    features: &FeatureTable,
    support: &[usize],
    active: &[usize],
    mid: &[f64],
    halfrange: &[f64],
    ortho: &OrthoFeatures,
    lambda_q: &[f64],
    dual: &ScaledDual,
) -> MaxEntDistribution {
    let k = features.num_symbols();
    let m = features.num_features();

    let mut scores = Vec::with_capacity(support.len());
    let max = dual.scores(lambda_q, &mut scores);
    let z: f64 = scores.iter().map(|v| libm::exp(v - max)).sum();
    let lambda0_q = max + libm::log(z);

    let mut probs = vec![0.0; k];
    let mut logp = vec![f64::NEG_INFINITY; k];
    let mut total = 0.0;
    for (j, &orig) in support.iter().enumerate() {
        let lp = scores[j] - lambda0_q;
        logp[orig] = lp;
        probs[orig] = libm::exp(lp);
        total += probs[orig];
    }
    let log_total = libm::log(total);
    let mut entropy = 0.0;
    for &orig in support {
        probs[orig] /= total;
        if probs[orig] > 0.0 {
            entropy -= probs[orig] * (logp[orig] - log_total);
        }
    }
    entropy = entropy.max(0.0);

    // map multipliers back to the scaled columns, then to original
    // coordinates: λ_col = λ'_a / halfrange, λ_0 absorbs the shifts
    let mut lambda_scaled = vec![0.0; active.len()];
    ortho.input_lambda(lambda_q, &mut lambda_scaled);
    let mut lambdas = vec![0.0; m + 1];
    let mut shift = 0.0;
    for (a, &col) in active.iter().enumerate() {
        lambdas[col + 1] = lambda_scaled[a] / halfrange[col];
        shift += lambda_scaled[a] * mid[col] / halfrange[col];
    }
    lambdas[0] = lambda0_q - shift;

    MaxEntDistribution {
        probs,
        lambdas,
        support: support.to_vec(),
        entropy_nats: entropy,
    }
}
