//! Numerically stable primitives and derivative-checking oracles.
//!
//! Everything here is pure f64 math: max-shifted softmax and log-sum-exp,
//! a sign-branched sigmoid, power-iteration estimators for the dominant
//! eigenvalue of a symmetric matrix and the operator norm of a rectangular
//! one, and central-difference gradient/Hessian oracles. The finite
//! differences are the independent reference against which every analytic
//! derivative in the crate is tested.

use thiserror::Error;

/// Default step for central-difference gradients.
pub const FD_GRAD_STEP: f64 = 1e-5;
/// Default step for nested central-difference Hessians.
pub const FD_HESS_STEP: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum NumError {
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("empty input")]
    Empty,
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix not symmetric: |H[{i}][{j}] - H[{j}][{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
}

/// Dense row-major matrix of f64 values.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Build from row-major data. Panics if the length does not match.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length mismatch");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// y = A x.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            y[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        y
    }

    /// y = Aᵀ x.
    pub fn mul_vec_transposed(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (yj, a) in y.iter_mut().zip(row) {
                *yj += a * x[i];
            }
        }
        y
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn check_symmetric(&self, tol: f64) -> Result<(), NumError> {
        if self.rows != self.cols {
            return Err(NumError::NotSquare { rows: self.rows, cols: self.cols });
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let diff = (self.get(i, j) - self.get(j, i)).abs();
                if diff > tol {
                    return Err(NumError::NotSymmetric { i, j, diff });
                }
            }
        }
        Ok(())
    }
}

/// Probability vector. `simplex` marks vectors that must sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    values: Vec<f64>,
    simplex: bool,
}

impl ProbVector {
    /// Entries individually in [0, 1] with no sum constraint.
    pub fn bounded(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|&p| (0.0..=1.0).contains(&p)));
        Self { values, simplex: false }
    }

    /// Entries in [0, 1] summing to one within 1e-12.
    pub fn simplex(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|&p| (0.0..=1.0).contains(&p)));
        debug_assert!((values.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        Self { values, simplex: true }
    }

    pub fn is_simplex(&self) -> bool {
        self.simplex
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Max-shifted softmax over a logit vector.
pub fn softmax(v: &[f64]) -> Result<ProbVector, NumError> {
    if v.is_empty() {
        return Err(NumError::Empty);
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(NumError::NonFinite(i));
    }
    Ok(ProbVector { values: softmax_unchecked(v), simplex: true })
}

/// Softmax without the finiteness check, for inner loops that already
/// validated their inputs.
pub(crate) fn softmax_unchecked(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for o in &mut out {
        *o /= sum;
    }
    out
}

/// log Σ exp(v_i), max-shifted.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + v.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Logistic sigmoid, branched on sign so neither exp overflows.
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Power-iteration estimate together with its convergence status.
#[derive(Debug, Clone, Copy)]
pub struct EigEstimate {
    /// Largest-magnitude eigenvalue (signed Rayleigh quotient).
    pub value: f64,
    /// False when the Rayleigh quotient had not settled within `iters`.
    pub converged: bool,
    pub iters: usize,
}

/// Deterministic power-iteration start vector: all ones, perturbed by index
/// so it is never orthogonal to the dominant eigenvector of the matrices we
/// care about. No RNG, so runs are reproducible.
fn power_start(n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 1e-3 * (i as f64 + 1.0)).collect();
    normalize(&mut v);
    v
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// Largest-magnitude eigenvalue of a symmetric matrix by power iteration.
///
/// Symmetry is required within 1e-10. Convergence is declared when two
/// successive Rayleigh quotients differ by less than `tol`; otherwise the
/// estimate is returned flagged.
pub fn top_eig_sym(h: &DenseMatrix, iters: usize, tol: f64) -> Result<EigEstimate, NumError> {
    h.check_symmetric(1e-10)?;
    let n = h.rows();
    if n == 0 {
        return Err(NumError::Empty);
    }
    let mut v = power_start(n);
    let mut rayleigh = f64::NAN;
    for it in 0..iters {
        let mut w = h.mul_vec(&v);
        let rq: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        let norm = normalize(&mut w);
        if norm == 0.0 {
            // v in the null space; the matrix acts as zero on the start.
            return Ok(EigEstimate { value: 0.0, converged: true, iters: it + 1 });
        }
        v = w;
        if (rq - rayleigh).abs() < tol {
            return Ok(EigEstimate { value: rq, converged: true, iters: it + 1 });
        }
        rayleigh = rq;
    }
    Ok(EigEstimate { value: rayleigh, converged: false, iters })
}

/// Largest singular value of a rectangular matrix via power iteration on
/// BᵀB. Exact (one step) for rank-one inputs; 0 for the zero matrix.
pub fn op_norm_rect(b: &DenseMatrix) -> f64 {
    let n = b.cols();
    if n == 0 || b.rows() == 0 {
        return 0.0;
    }
    let mut v = power_start(n);
    let mut sigma2 = 0.0;
    for _ in 0..1000 {
        let bv = b.mul_vec(&v);
        let mut w = b.mul_vec_transposed(&bv);
        let rq: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        let norm = normalize(&mut w);
        if norm == 0.0 {
            return 0.0;
        }
        v = w;
        if (rq - sigma2).abs() < 1e-14 * rq.max(1.0) {
            return rq.max(0.0).sqrt();
        }
        sigma2 = rq;
    }
    sigma2.max(0.0).sqrt()
}

/// Central-difference gradient: (f(x+h e_i) - f(x-h e_i)) / 2h.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let orig = xp[i];
        xp[i] = orig + h;
        let fp = f(&xp);
        xp[i] = orig - h;
        let fm = f(&xp);
        xp[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    grad
}

/// Nested central-difference Hessian, symmetrized.
pub fn fd_hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> DenseMatrix {
    let n = x.len();
    let mut hess = DenseMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    for i in 0..n {
        for j in i..n {
            let (oi, oj) = (xp[i], xp[j]);
            let mut eval = |si: f64, sj: f64| {
                xp[i] += si * h;
                xp[j] += sj * h;
                let v = f(&xp);
                xp[i] = oi;
                xp[j] = oj;
                v
            };
            let fpp = eval(1.0, 1.0);
            let fpm = eval(1.0, -1.0);
            let fmp = eval(-1.0, 1.0);
            let fmm = eval(-1.0, -1.0);
            let d = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            hess.set(i, j, d);
            hess.set(j, i, d);
        }
    }
    hess
}

/// ‖a - b‖₂ / max(‖b‖₂, floor): the relative-error measure used by the
/// gradient checks. The floor keeps near-zero gradients from blowing up the
/// quotient.
pub fn rel_vec_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(1e-8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Cyclic Jacobi eigensolver, used only as an independent oracle for the
    /// power-iteration estimators. Returns all eigenvalues.
    fn jacobi_eigenvalues(m: &DenseMatrix, sweeps: usize) -> Vec<f64> {
        assert_eq!(m.rows(), m.cols());
        let n = m.rows();
        let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect();
        for _ in 0..sweeps {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[p][q] * a[p][q];
                }
            }
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[k][p], a[k][q]);
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[p][k], a[q][k]);
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[i][i]).collect()
    }

    fn deterministic_symmetric(n: usize, scale: f64) -> DenseMatrix {
        // Fixed pseudo-random entries (splitmix-style) so the oracle
        // comparison is reproducible.
        let mut m = DenseMatrix::zeros(n, n);
        let mut state = 0x1234_5678_9abc_def0_u64;
        let mut next = || {
            state = state.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64
        };
        for i in 0..n {
            for j in i..n {
                let v = (next() - 0.5) * scale;
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    #[test]
    fn softmax_uniform_logits() {
        let p = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for &v in p.values() {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }
        assert!(p.is_simplex());
    }

    #[test]
    fn softmax_high_precision_reference() {
        // Reference computed with 50-digit arithmetic (mpmath):
        // softmax([1, 2, 3]).
        let expected = [
            0.090030573170380457998,
            0.24472847105479765247,
            0.66524095577482188953,
        ];
        let p = softmax(&[1.0, 2.0, 3.0]).unwrap();
        for (got, want) in p.values().iter().zip(expected) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(matches!(softmax(&[0.0, f64::NAN]), Err(NumError::NonFinite(1))));
        assert!(matches!(softmax(&[f64::INFINITY]), Err(NumError::NonFinite(0))));
        assert!(matches!(softmax(&[]), Err(NumError::Empty)));
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_shift_invariant(
            v in prop::collection::vec(-700.0..700.0f64, 1..20),
            c in -50.0..50.0f64,
        ) {
            let p = softmax(&v).unwrap();
            prop_assert!((p.values().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(p.values().iter().all(|&x| x >= 0.0));
            // Strict positivity holds until exp underflows (spread ~745).
            let spread = v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - v.iter().copied().fold(f64::INFINITY, f64::min);
            if spread < 700.0 {
                prop_assert!(p.values().iter().all(|&x| x > 0.0));
            }

            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let q = softmax(&shifted).unwrap();
            for (a, b) in p.values().iter().zip(q.values()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn softmax_covariance_top_eig_at_most_half(
            raw in prop::collection::vec(0.01..1.0f64, 2..12),
        ) {
            // Diag(q) - q qᵀ for any simplex q has eigenvalues in [0, 1/2].
            let sum: f64 = raw.iter().sum();
            let q: Vec<f64> = raw.iter().map(|x| x / sum).collect();
            let n = q.len();
            let mut m = DenseMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    let v = if i == j { q[i] * (1.0 - q[i]) } else { -q[i] * q[j] };
                    m.set(i, j, v);
                }
            }
            let est = top_eig_sym(&m, 1000, 1e-12).unwrap();
            prop_assert!(est.value <= 0.5 + 1e-9);
        }

        #[test]
        fn sigmoid_symmetry(x in -30.0..30.0f64) {
            prop_assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        // Reference 1/(1+e^-2) from 50-digit arithmetic.
        assert_abs_diff_eq!(sigmoid(2.0), 0.88079707797788244406, epsilon = 1e-15);
        for x in [-30.0, -1.0, 0.0, 1.0, 30.0] {
            assert_abs_diff_eq!(sigmoid(x) + sigmoid(-x), 1.0, epsilon = 1e-15);
        }
        // Extreme inputs stay bounded instead of overflowing.
        assert!(sigmoid(800.0) <= 1.0);
        assert!(sigmoid(-800.0) >= 0.0);
    }

    #[test]
    fn top_eig_diagonal() {
        let m = DenseMatrix::from_rows(
            3,
            3,
            vec![3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0],
        );
        let est = top_eig_sym(&m, 500, 1e-12).unwrap();
        assert!(est.converged);
        assert_abs_diff_eq!(est.value, 3.0, epsilon = 1e-10);
    }

    #[test]
    fn top_eig_rank_one() {
        // u uᵀ with ‖u‖ = 2 has top eigenvalue 4.
        let u = [1.0, 1.0, 1.0, 1.0];
        let mut m = DenseMatrix::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                m.set(i, j, u[i] * u[j]);
            }
        }
        let est = top_eig_sym(&m, 500, 1e-12).unwrap();
        assert_abs_diff_eq!(est.value, 4.0, epsilon = 1e-10);
    }

    #[test]
    fn top_eig_matches_jacobi_oracle() {
        let m = deterministic_symmetric(10, 2.0);
        let mut eigs = jacobi_eigenvalues(&m, 50);
        eigs.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap());
        let est = top_eig_sym(&m, 5000, 1e-13).unwrap();
        assert!(est.converged);
        assert_abs_diff_eq!(est.value.abs(), eigs[0].abs(), epsilon = 1e-8);
    }

    #[test]
    fn top_eig_rejects_asymmetric() {
        let m = DenseMatrix::from_rows(2, 2, vec![1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(top_eig_sym(&m, 100, 1e-10), Err(NumError::NotSymmetric { .. })));
    }

    #[test]
    fn op_norm_rank_one_product() {
        // B = -π dᵀ has operator norm ‖π‖₂ ‖d‖₂.
        let pi = [0.3, 0.5, 0.2];
        let d = [0.25, 0.16, 0.09, 0.21];
        let mut b = DenseMatrix::zeros(3, 4);
        for i in 0..3 {
            for j in 0..4 {
                b.set(i, j, -pi[i] * d[j]);
            }
        }
        let pi_norm: f64 = pi.iter().map(|x| x * x).sum::<f64>().sqrt();
        let d_norm: f64 = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert_abs_diff_eq!(op_norm_rect(&b), pi_norm * d_norm, epsilon = 1e-12);
    }

    #[test]
    fn op_norm_zero_matrix() {
        assert_eq!(op_norm_rect(&DenseMatrix::zeros(4, 6)), 0.0);
    }

    #[test]
    fn op_norm_matches_jacobi_on_gram_matrix() {
        // Random 5x7: σ_max(B) = sqrt(λ_max(BᵀB)), checked against Jacobi.
        let square = deterministic_symmetric(7, 1.0);
        let mut b = DenseMatrix::zeros(5, 7);
        for i in 0..5 {
            for j in 0..7 {
                b.set(i, j, square.get(i, j) + 0.1 * (i as f64) - 0.05 * (j as f64));
            }
        }
        let mut gram = DenseMatrix::zeros(7, 7);
        for i in 0..7 {
            for j in 0..7 {
                let mut s = 0.0;
                for k in 0..5 {
                    s += b.get(k, i) * b.get(k, j);
                }
                gram.set(i, j, s);
            }
        }
        let mut eigs = jacobi_eigenvalues(&gram, 50);
        eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_abs_diff_eq!(op_norm_rect(&b), eigs[0].max(0.0).sqrt(), epsilon = 1e-8);
    }

    #[test]
    fn fd_gradient_quadratic() {
        let f = |x: &[f64]| 0.5 * x.iter().map(|v| v * v).sum::<f64>();
        let g = fd_gradient(f, &[1.0, 2.0], FD_GRAD_STEP);
        assert_abs_diff_eq!(g[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(g[1], 2.0, epsilon = 1e-8);
    }

    #[test]
    fn fd_gradient_constant_function() {
        let g = fd_gradient(|_| 7.25, &[0.3, -1.0, 4.0], FD_GRAD_STEP);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fd_hessian_quadratic_form() {
        // f(x) = x₀² + 3 x₀ x₁ + 2 x₁² has constant Hessian [[2,3],[3,4]].
        let f = |x: &[f64]| x[0] * x[0] + 3.0 * x[0] * x[1] + 2.0 * x[1] * x[1];
        let h = fd_hessian(f, &[0.4, -0.7], FD_HESS_STEP);
        assert_abs_diff_eq!(h.get(0, 0), 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(h.get(0, 1), 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(h.get(1, 0), 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(h.get(1, 1), 4.0, epsilon = 1e-6);
    }
}
