//! Damped Newton iteration on smooth convex duals.
//!
//! Both the generative dual (log-normalizer plus linear term) and the
//! conditional negative log-likelihood are smooth and convex in Λ with
//! Hessian equal to a feature covariance, so one solver serves both. The
//! Hessian may be singular (collinear feature columns), which the Cholesky
//! factorization absorbs with an escalating ridge.

use alloc::vec::Vec;

/// Problem-specific evaluation of the objective. Methods take `&mut self`
/// so implementations can keep scratch buffers.
pub(crate) trait Objective {
    fn dim(&self) -> usize;
    /// Objective value only (used by the line search).
    fn value(&mut self, lambda: &[f64]) -> f64;
    /// Value plus gradient and row-major Hessian.
    fn value_grad_hess(&mut self, lambda: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum NewtonStatus {
    /// Every |grad_k| is within its tolerance.
    Converged,
    /// The iterate sits on the cap box with only pinned coordinates failing
    /// the tolerance (a KKT point of the box-constrained problem).
    CapReached,
    /// The backtracking line search could not decrease the objective.
    Stalled,
    /// Iteration cap hit first.
    IterationCap,
}

pub(crate) struct NewtonOutcome {
    pub lambda: Vec<f64>,
    pub grad: Vec<f64>,
    pub value: f64,
    pub status: NewtonStatus,
    pub iterations: usize,
}

pub(crate) struct NewtonControl<'a> {
    /// Per-coordinate absolute gradient tolerances.
    pub grad_tol: &'a [f64],
    /// Bound on ‖λ‖∞; steps are shortened to respect it.
    pub lambda_cap: f64,
    pub max_iterations: usize,
}

/// Reusable buffers so repeated solves allocate nothing.
#[derive(Default)]
pub(crate) struct NewtonWorkspace {
    grad: Vec<f64>,
    hess: Vec<f64>,
    trial: Vec<f64>,
    direction: Vec<f64>,
    free: Vec<usize>,
    sub_h: Vec<f64>,
    sub_g: Vec<f64>,
    sub_d: Vec<f64>,
    trial_grad: Vec<f64>,
    trial_hess: Vec<f64>,
    eig_vecs: Vec<f64>,
    eig_vals: Vec<f64>,
    eig_coefs: Vec<f64>,
    newton_dir: Vec<f64>,
}

impl NewtonWorkspace {
    pub(crate) fn new() -> Self {
        Self::default()
    }

    fn reserve(&mut self, d: usize) {
        self.grad.resize(d, 0.0);
        self.hess.resize(d * d, 0.0);
        self.trial.resize(d, 0.0);
        self.direction.resize(d, 0.0);
        self.sub_g.resize(d, 0.0);
        self.sub_d.resize(d, 0.0);
        self.trial_grad.resize(d, 0.0);
        self.trial_hess.resize(d * d, 0.0);
        self.newton_dir.resize(d, 0.0);
    }
}

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: u32 = 30;

/// Projected damped Newton over the box ‖λ‖∞ ≤ cap.
///
/// Coordinates sitting on the cap with the gradient pushing outward are
/// frozen; the Newton system is solved on the free block and the line search
/// clamps trial points back into the box (projected Armijo), so the iterate
/// can slide along faces of the box instead of jamming in a corner.
pub(crate) fn damped_newton<O: Objective>(
    obj: &mut O,
    start: &[f64],
    control: &NewtonControl,
    ws: &mut NewtonWorkspace,
) -> NewtonOutcome {
    let d = obj.dim();
    debug_assert_eq!(start.len(), d);
    let cap = control.lambda_cap;
    let mut lambda: Vec<f64> = start.iter().map(|l| l.clamp(-cap, cap)).collect();
    ws.reserve(d);

    if d == 0 {
        return NewtonOutcome {
            lambda,
            grad: Vec::new(),
            value: obj.value(&[]),
            status: NewtonStatus::Converged,
            iterations: 0,
        };
    }

    let mut value = obj.value_grad_hess(&lambda, &mut ws.grad, &mut ws.hess);
    for iter in 0..control.max_iterations {
        if within_tolerance(&ws.grad, control.grad_tol) {
            return finish(lambda, ws, value, NewtonStatus::Converged, iter);
        }

        // freeze coordinates pinned at the cap whose descent direction
        // points outward
        ws.free.clear();
        for k in 0..d {
            let pinned = (lambda[k] >= cap - 1e-12 && ws.grad[k] < 0.0)
                || (lambda[k] <= -cap + 1e-12 && ws.grad[k] > 0.0);
            if !pinned {
                ws.free.push(k);
            }
        }
        if ws.free.is_empty()
            || ws
                .free
                .iter()
                .all(|&k| libm::fabs(ws.grad[k]) <= control.grad_tol[k])
        {
            // KKT point of the box-constrained problem
            return finish(lambda, ws, value, NewtonStatus::CapReached, iter);
        }

        // Newton direction on the free block, from a spectral
        // decomposition: eigenvalues below 1e−12 of the largest count as
        // exact zeros so collinear columns cause no null-space drift. If the
        // plain Newton step fails the line search (ill-conditioned valley),
        // retry with Levenberg-Marquardt damping, sliding toward steepest
        // descent.
        let nf = ws.free.len();
        ws.sub_h.resize(nf * nf, 0.0);
        for (a, &ka) in ws.free.iter().enumerate() {
            ws.sub_g[a] = ws.grad[ka];
            for (b, &kb) in ws.free.iter().enumerate() {
                ws.sub_h[a * nf + b] = ws.hess[ka * d + kb];
            }
        }
        ws.eig_vecs.resize(nf * nf, 0.0);
        ws.eig_vals.resize(nf, 0.0);
        ws.eig_coefs.resize(nf, 0.0);
        jacobi_eigen(&mut ws.sub_h[..nf * nf], &mut ws.eig_vecs[..nf * nf], nf);
        let mut max_eig = 0.0f64;
        for a in 0..nf {
            ws.eig_vals[a] = ws.sub_h[a * nf + a];
            max_eig = max_eig.max(libm::fabs(ws.eig_vals[a]));
        }
        for a in 0..nf {
            let mut c = 0.0;
            for i in 0..nf {
                c += ws.eig_vecs[i * nf + a] * ws.sub_g[i];
            }
            ws.eig_coefs[a] = c;
        }

        let mut accepted = false;
        'damping: for tau_rel in [0.0f64, 1e-8, 1e-4, 1e-2, 1.0, 1e2, 1e4] {
            // assemble the damped direction
            let tau = tau_rel * max_eig.max(1e-300);
            let cut = 1e-12 * max_eig;
            for a in 0..nf {
                ws.sub_d[a] = 0.0;
            }
            for a in 0..nf {
                let eig = ws.eig_vals[a];
                let denom = if tau_rel == 0.0 {
                    if eig <= cut {
                        continue;
                    }
                    eig
                } else {
                    eig.max(0.0) + tau
                };
                let y = ws.eig_coefs[a] / denom;
                for i in 0..nf {
                    ws.sub_d[i] += y * ws.eig_vecs[i * nf + a];
                }
            }
            ws.direction.fill(0.0);
            for (a, &ka) in ws.free.iter().enumerate() {
                ws.direction[ka] = -ws.sub_d[a];
            }
            if tau_rel == 0.0 {
                // keep the undamped Newton step for the endgame below
                ws.newton_dir.copy_from_slice(&ws.direction);
            }
            if max_eig == 0.0 {
                // Hessian numerically zero: steepest descent
                let gmax = ws
                    .free
                    .iter()
                    .fold(0.0f64, |acc, &k| acc.max(libm::fabs(ws.grad[k])));
                for &k in &ws.free {
                    ws.direction[k] = -ws.grad[k] / gmax.max(1e-300);
                }
            }

            // projected backtracking: clamp the trial into the box and test
            // the Armijo condition against the actually realized step
            let mut t = 1.0f64;
            for _ in 0..MAX_HALVINGS {
                let mut realized_slope = 0.0;
                let mut step_inf = 0.0f64;
                for k in 0..d {
                    ws.trial[k] = (lambda[k] + t * ws.direction[k]).clamp(-cap, cap);
                    realized_slope += ws.grad[k] * (ws.trial[k] - lambda[k]);
                    step_inf = step_inf.max(libm::fabs(ws.trial[k] - lambda[k]));
                }
                if step_inf <= 1e-14 {
                    continue 'damping;
                }
                let trial_value = obj.value(&ws.trial);
                if realized_slope < 0.0
                    && trial_value.is_finite()
                    && trial_value <= value + ARMIJO_C * realized_slope
                {
                    lambda.copy_from_slice(&ws.trial);
                    accepted = true;
                    break 'damping;
                }
                t *= 0.5;
            }
        }
        if !accepted {
            // endgame: objective differences are below f64 rounding while
            // the gradient may still be above target. Take the undamped
            // projected Newton step (trying a few dampings) if it strictly
            // shrinks the worst tolerance-weighted gradient component.
            let ratio = |g: &[f64]| {
                g.iter()
                    .zip(control.grad_tol)
                    .fold(0.0f64, |a, (gk, tk)| a.max(libm::fabs(*gk) / tk))
            };
            let current_ratio = ratio(&ws.grad);
            let mut rescued = false;
            for shift in [1.0f64, 0.25, 0.0625, 0.015625] {
                for k in 0..d {
                    ws.trial[k] = (lambda[k] + shift * ws.newton_dir[k]).clamp(-cap, cap);
                }
                let trial_value =
                    obj.value_grad_hess(&ws.trial, &mut ws.trial_grad, &mut ws.trial_hess);
                if trial_value.is_finite() && ratio(&ws.trial_grad) < 0.9 * current_ratio {
                    lambda.copy_from_slice(&ws.trial);
                    ws.grad.copy_from_slice(&ws.trial_grad);
                    ws.hess.copy_from_slice(&ws.trial_hess);
                    value = trial_value;
                    rescued = true;
                    break;
                }
            }
            if rescued {
                continue;
            }
            let at_cap = lambda.iter().any(|l| libm::fabs(*l) >= cap - 1e-9);
            let status = if at_cap {
                NewtonStatus::CapReached
            } else {
                NewtonStatus::Stalled
            };
            return finish(lambda, ws, value, status, iter);
        }
        value = obj.value_grad_hess(&lambda, &mut ws.grad, &mut ws.hess);
    }

    let status = if within_tolerance(&ws.grad, control.grad_tol) {
        NewtonStatus::Converged
    } else {
        NewtonStatus::IterationCap
    };
    finish(lambda, ws, value, status, control.max_iterations)
}

fn finish(
    lambda: Vec<f64>,
    ws: &NewtonWorkspace,
    value: f64,
    status: NewtonStatus,
    iterations: usize,
) -> NewtonOutcome {
    NewtonOutcome {
        lambda,
        grad: ws.grad.clone(),
        value,
        status,
        iterations,
    }
}

fn within_tolerance(grad: &[f64], tol: &[f64]) -> bool {
    grad.iter().zip(tol).all(|(g, t)| libm::fabs(*g) <= *t)
}

/// Cyclic Jacobi eigendecomposition for small symmetric matrices: `a` ends
/// diagonal (eigenvalues on the diagonal), `v` holds eigenvectors as columns.
fn jacobi_eigen(a: &mut [f64], v: &mut [f64], d: usize) {
    v.fill(0.0);
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    for _sweep in 0..50 {
        let mut off = 0.0f64;
        for p in 0..d {
            for q in (p + 1)..d {
                off = off.max(libm::fabs(a[p * d + q]));
            }
        }
        let mut scale = 0.0f64;
        for p in 0..d {
            scale = scale.max(libm::fabs(a[p * d + p]));
        }
        if off <= 1e-15 * scale.max(1e-300) {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if libm::fabs(apq) <= 1e-300 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + libm::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let sn = t * c;
                for i in 0..d {
                    let aip = a[i * d + p];
                    let aiq = a[i * d + q];
                    a[i * d + p] = c * aip - sn * aiq;
                    a[i * d + q] = sn * aip + c * aiq;
                }
                for i in 0..d {
                    let api = a[p * d + i];
                    let aqi = a[q * d + i];
                    a[p * d + i] = c * api - sn * aqi;
                    a[q * d + i] = sn * api + c * aqi;
                }
                for i in 0..d {
                    let vip = v[i * d + p];
                    let viq = v[i * d + q];
                    v[i * d + p] = c * vip - sn * viq;
                    v[i * d + q] = sn * vip + c * viq;
                }
            }
        }
    }
}
