//! Additive cross-entropy over the augmented action space.
//!
//! One shared softmax rewards the true class and every correct expert:
//!
//! Φ(a) = -log q_y - Σ_{j correct} log q_{K+j}
//!
//! Rewriting as (1+|𝒥|)·logΣexp(a) minus linear terms makes the structure
//! explicit: the gradient is (1+|𝒥|)·q_i minus an indicator for each
//! rewarded coordinate, and the Hessian is (1+|𝒥|)(Diag(q) - qqᵀ) with
//! top eigenvalue at most (1+|𝒥|)/2. The (1+|𝒥|) multiplicity factor is
//! what inflates high-overlap samples.

use super::{
    clamp_prob, scaled_softmax_covariance, AugScores, CorrectSet, LossGrad, Sample,
    SurrogateIntermediates,
};
use crate::numkit::{softmax_unchecked, DenseMatrix, ProbVector};

pub fn loss_grad(scores: &AugScores, sample: &Sample) -> LossGrad {
    let num_classes = scores.num_classes;
    debug_assert_eq!(scores.num_experts(), sample.num_experts());
    debug_assert!(sample.label < num_classes);

    let q = softmax_unchecked(&scores.logits);
    let correct = CorrectSet::from_sample(sample);
    let multiplicity = 1.0 + correct.len() as f64;

    let mut loss = -clamp_prob(q[sample.label]).ln();
    for &j in &correct.indices {
        loss -= clamp_prob(q[num_classes + j]).ln();
    }

    let mut grad: Vec<f64> = q.iter().map(|&qi| multiplicity * qi).collect();
    grad[sample.label] -= 1.0;
    for &j in &correct.indices {
        grad[num_classes + j] -= 1.0;
    }

    LossGrad {
        loss,
        grad,
        intermediates: SurrogateIntermediates {
            q: Some(ProbVector::simplex(q)),
            ..Default::default()
        },
    }
}

/// (1+|𝒥|)(Diag(q) - qqᵀ).
pub fn hessian(scores: &AugScores, sample: &Sample) -> DenseMatrix {
    let q = softmax_unchecked(&scores.logits);
    let multiplicity = 1.0 + CorrectSet::from_sample(sample).len() as f64;
    scaled_softmax_covariance(&q, multiplicity)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{fd_gradient, fd_hessian, rel_vec_error, FD_GRAD_STEP, FD_HESS_STEP};
    use crate::surrogates::{loss_at, SurrogateConfig, SurrogateKind};
    use approx::assert_abs_diff_eq;

    /// K=2, J=4, uniform logits, all experts correct: the rewarded
    /// coordinates get 5·(1/6) - 1 = -1/6 and the remaining class 5/6.
    #[test]
    fn uniform_logits_redundant_experts() {
        let sample = Sample::new(vec![], 0, vec![0, 0, 0, 0]);
        let scores = AugScores::new(vec![0.0; 6], 2);
        let lg = loss_grad(&scores, &sample);
        assert_abs_diff_eq!(lg.grad[0], -1.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lg.grad[1], 5.0 / 6.0, epsilon = 1e-12);
        for j in 0..4 {
            assert_abs_diff_eq!(lg.grad[2 + j], -1.0 / 6.0, epsilon = 1e-12);
        }
        // Five rewarded log(1/6) terms.
        assert_abs_diff_eq!(lg.loss, 8.9587973461402750041, epsilon = 1e-12);
    }

    /// With no correct expert the gradient reduces to plain multiclass CE
    /// over the K+J actions.
    #[test]
    fn empty_correct_set_is_plain_ce() {
        let sample = Sample::new(vec![], 1, vec![2, 0]);
        let logits = vec![0.3, -0.2, 0.5, 1.1, -0.7];
        let lg = loss_grad(&AugScores::new(logits.clone(), 3), &sample);
        let q = softmax_unchecked(&logits);
        for i in 0..5 {
            let expected = q[i] - if i == 1 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(lg.grad[i], expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = SurrogateConfig::new(SurrogateKind::AddCe);
        let sample = Sample::new(vec![], 2, vec![2, 1]);
        let logits = vec![0.4, -1.2, 0.9, 0.3, -0.5];
        let lg = loss_grad(&AugScores::new(logits.clone(), 3), &sample);
        let fd = fd_gradient(|a| loss_at(&cfg, a, &sample), &logits, FD_GRAD_STEP);
        assert!(rel_vec_error(&lg.grad, &fd) <= 1e-6);
    }

    #[test]
    fn hessian_matches_finite_differences() {
        let cfg = SurrogateConfig::new(SurrogateKind::AddCe);
        let sample = Sample::new(vec![], 0, vec![0, 0, 1]);
        let logits = vec![0.2, -0.3, 0.7, 0.1, -0.9, 0.4];
        let analytic = hessian(&AugScores::new(logits.clone(), 3), &sample);
        let fd = fd_hessian(|a| loss_at(&cfg, a, &sample), &logits, FD_HESS_STEP);
        assert!(analytic.max_abs_diff(&fd) <= 1e-5);
    }

    /// Structural decomposition grad = (1+|𝒥|)q - e_y - Σ e_{K+j}, asserted
    /// coordinatewise, plus the closed-form positive mass at uniform logits.
    #[test]
    fn positive_mass_at_uniform_logits() {
        let (k, j) = (3, 4);
        let sample = Sample::new(vec![], 1, vec![1, 0, 1, 1]);
        let jj = 3.0;
        let scores = AugScores::new(vec![0.0; k + j], k);
        let lg = loss_grad(&scores, &sample);
        let n = (k + j) as f64;
        let q = 1.0 / n;
        for (i, &g) in lg.grad.iter().enumerate() {
            let indicator = i == 1 || i == 3 || i == 5 || i == 6;
            let expected = (1.0 + jj) * q - if indicator { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(g, expected, epsilon = 1e-14);
        }
        let positive_mass: f64 = lg.grad.iter().map(|g| g.max(0.0)).sum();
        let expected_mass = (1.0 + jj) * (n - 1.0 - jj) / n;
        assert_abs_diff_eq!(positive_mass, expected_mass, epsilon = 1e-12);
    }
}
