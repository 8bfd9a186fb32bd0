//! Orthonormalization of scaled feature columns.
//!
//! Moment features are nearly collinear on small alphabets: the multipliers
//! that express an ordinary interior fit in the raw power basis can be huge
//! with heavy cancellation, which both wrecks the Hessian conditioning and
//! runs into the multiplier cap. Solving in an orthonormal basis (uniform
//! inner product over the rows) makes interior multipliers O(‖log p‖) and
//! the Hessian benign; the mapping back to the original columns is linear.
//!
//! Columns linearly dependent on earlier ones are excluded from the solve:
//! their constraints are implied, up to a target offset that is zero for any
//! feasible target and is reported as residual otherwise.

use alloc::vec;
use alloc::vec::Vec;

/// Columns below this norm (entries are O(1) after scaling) count as
/// linearly dependent.
const DEP_EPS: f64 = 1e-8;

pub(crate) struct OrthoFeatures {
    /// Independent basis size.
    pub dim: usize,
    /// rows × dim orthonormal columns, row-major.
    pub q: Vec<f64>,
    /// Targets transformed alongside the columns.
    pub q_targets: Vec<f64>,
    /// Expansion of each input column in the basis: φ_a = Σ_b r[a][b] q_b.
    pub r: Vec<Vec<f64>>,
    /// Unrepresentable part of each input column's target (zero when the
    /// target is feasible).
    pub target_offsets: Vec<f64>,
    /// λ mapping back to input columns: λ_a = Σ_b c[b][a] λq_b.
    pub c: Vec<Vec<f64>>,
}

impl OrthoFeatures {
    /// Max per-column residual in input-column units, given the q-basis
    /// gradient (targets minus expectations).
    pub fn input_residuals(&self, q_grad: &[f64], out: &mut [f64]) {
        for (a, coeffs) in self.r.iter().enumerate() {
            let mut v = self.target_offsets[a];
            for (b, rc) in coeffs.iter().enumerate() {
                v += rc * q_grad[b];
            }
            out[a] = v;
        }
    }

    /// λ in input-column coordinates from q-basis multipliers.
    pub fn input_lambda(&self, lambda_q: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (b, cb) in self.c.iter().enumerate() {
            let l = lambda_q[b];
            if l == 0.0 {
                continue;
            }
            for (a, ca) in cb.iter().enumerate() {
                out[a] += l * ca;
            }
        }
    }
}

/// Modified Gram-Schmidt over `cols` columns of length `rows`, with the
/// targets transformed by the same operations. The inner product is
/// Σ u_i v_i / rows so norms stay O(1).
pub(crate) fn orthonormalize(
    columns: &[f64], // rows × cols, row-major
    targets: &[f64],
    rows: usize,
    cols: usize,
) -> OrthoFeatures {
    let inv_rows = 1.0 / rows as f64;
    let mut q_cols: Vec<Vec<f64>> = Vec::new();
    let mut q_targets: Vec<f64> = Vec::new();
    let mut c: Vec<Vec<f64>> = Vec::new();
    let mut r: Vec<Vec<f64>> = Vec::with_capacity(cols);
    let mut target_offsets = vec![0.0; cols];

    for a in 0..cols {
        let mut v: Vec<f64> = (0..rows).map(|i| columns[i * cols + a]).collect();
        let mut tv = targets[a];
        let mut coeffs = vec![0.0; q_cols.len()];
        // two passes of projection for numerical orthogonality
        for _ in 0..2 {
            for (b, qb) in q_cols.iter().enumerate() {
                let mut dot = 0.0;
                for i in 0..rows {
                    dot += v[i] * qb[i];
                }
                dot *= inv_rows;
                if dot == 0.0 {
                    continue;
                }
                for i in 0..rows {
                    v[i] -= dot * qb[i];
                }
                tv -= dot * q_targets[b];
                coeffs[b] += dot;
            }
        }
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>() * inv_rows);
        if norm > DEP_EPS {
            let inv = 1.0 / norm;
            for x in v.iter_mut() {
                *x *= inv;
            }
            // c_new = (e_a − Σ coeffs_b c_b) / norm
            let mut cb = vec![0.0; cols];
            cb[a] = inv;
            for (b, &coef) in coeffs.iter().enumerate() {
                if coef != 0.0 {
                    for (slot, prev) in c[b].iter().enumerate() {
                        cb[slot] -= inv * coef * prev;
                    }
                }
            }
            coeffs.push(norm);
            q_cols.push(v);
            q_targets.push(tv * inv);
            c.push(cb);
        } else {
            target_offsets[a] = tv;
        }
        r.push(coeffs);
    }

    let dim = q_cols.len();
    let mut q = vec![0.0; rows * dim];
    for (b, qb) in q_cols.iter().enumerate() {
        for i in 0..rows {
            q[i * dim + b] = qb[i];
        }
    }
    // pad r rows to the final dim
    for row in r.iter_mut() {
        row.resize(dim, 0.0);
    }
    OrthoFeatures {
        dim,
        q,
        q_targets,
        r,
        target_offsets,
        c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_columns_and_exact_reconstruction() {
        // power basis on 5 points, scaled to O(1)
        let rows = 5;
        let cols = 4;
        let mut columns = vec![0.0; rows * cols];
        for i in 0..rows {
            let x = (i as f64 - 2.0) / 2.0;
            for (a, item) in columns[i * cols..(i + 1) * cols].iter_mut().enumerate() {
                *item = x.powi(a as i32 + 1);
            }
        }
        let targets = [0.1, 0.4, 0.05, 0.3];
        let ortho = orthonormalize(&columns, &targets, rows, cols);
        assert_eq!(ortho.dim, 4);

        // orthonormality
        for a in 0..ortho.dim {
            for b in 0..ortho.dim {
                let mut dot = 0.0;
                for i in 0..rows {
                    dot += ortho.q[i * ortho.dim + a] * ortho.q[i * ortho.dim + b];
                }
                dot /= rows as f64;
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-12, "dot({a},{b}) = {dot}");
            }
        }
        // reconstruction: φ_a = Σ_b r[a][b] q_b
        for a in 0..cols {
            for i in 0..rows {
                let mut v = 0.0;
                for b in 0..ortho.dim {
                    v += ortho.r[a][b] * ortho.q[i * ortho.dim + b];
                }
                assert!((v - columns[i * cols + a]).abs() < 1e-10);
            }
        }
        // λ mapping: the score Σ_b λq_b q_b equals Σ_a λ_a φ_a
        let lambda_q = [0.7, -0.3, 0.2, 0.05];
        let mut lambda_in = vec![0.0; cols];
        ortho.input_lambda(&lambda_q, &mut lambda_in);
        for i in 0..rows {
            let via_q: f64 = (0..ortho.dim)
                .map(|b| lambda_q[b] * ortho.q[i * ortho.dim + b])
                .sum();
            let via_cols: f64 = (0..cols)
                .map(|a| lambda_in[a] * columns[i * cols + a])
                .sum();
            assert!((via_q - via_cols).abs() < 1e-10);
        }
    }

    #[test]
    fn dependent_column_is_excluded_with_zero_offset_for_consistent_targets() {
        // col2 = 2·col1 on two points
        let columns = vec![1.0, 2.0, -1.0, -2.0];
        let targets = [0.25, 0.5];
        let ortho = orthonormalize(&columns, &targets, 2, 2);
        assert_eq!(ortho.dim, 1);
        assert!(ortho.target_offsets[1].abs() < 1e-12);

        // inconsistent target on the dependent column shows up as offset
        let bad = orthonormalize(&columns, &[0.25, 0.9], 2, 2);
        assert!((bad.target_offsets[1] - 0.4).abs() < 1e-12);
    }
}
