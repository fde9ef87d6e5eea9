//! Winner-take-all cross-entropy: reward the true class plus only the
//! highest-scoring correct expert.
//!
//! Φ(a) = -log q_y - 1{𝒥 ≠ ∅} log q_{K+j⋆},  j⋆ = argmax_{j∈𝒥} a_{K+j}
//!
//! The winner is treated as fixed when differentiating on the current
//! sample, so with a nonempty correct set the gradient is
//! 2q_i - 1{i=y} - 1{i=K+j⋆} and the Hessian 2(Diag(q) - qqᵀ). Correct
//! experts that lose the argmax get the bare repulsive term 2q_{K+k} > 0:
//! their logits are pushed down despite being correct.

use super::{
    clamp_prob, scaled_softmax_covariance, AugScores, CorrectSet, LossGrad, Sample,
    SurrogateIntermediates,
};
use crate::numkit::{softmax_unchecked, DenseMatrix, ProbVector};

/// Winning correct expert: argmax of the expert logits over the correct
/// set, lowest index on ties. None when no expert is correct.
pub fn winner(scores: &AugScores, sample: &Sample) -> Option<usize> {
    let num_classes = scores.num_classes;
    let correct = CorrectSet::from_sample(sample);
    let mut best: Option<usize> = None;
    for &j in &correct.indices {
        // Strict > keeps the lowest index on ties (indices are ascending).
        if best.is_none_or(|b| scores.logits[num_classes + j] > scores.logits[num_classes + b]) {
            best = Some(j);
        }
    }
    best
}

pub fn loss_grad(scores: &AugScores, sample: &Sample) -> LossGrad {
    let jstar = winner(scores, sample);
    loss_grad_with_winner(scores, sample, jstar)
}

/// Loss and gradient with the winner pinned by the caller. Used by the
/// finite-difference oracle, which must hold j⋆ fixed while perturbing.
pub fn loss_grad_with_winner(
    scores: &AugScores,
    sample: &Sample,
    jstar: Option<usize>,
) -> LossGrad {
    let num_classes = scores.num_classes;
    debug_assert_eq!(scores.num_experts(), sample.num_experts());
    debug_assert!(sample.label < num_classes);
    let q = softmax_unchecked(&scores.logits);

    let mut loss = -clamp_prob(q[sample.label]).ln();
    let prefactor = if jstar.is_some() { 2.0 } else { 1.0 };
    if let Some(j) = jstar {
        loss -= clamp_prob(q[num_classes + j]).ln();
    }

    let mut grad: Vec<f64> = q.iter().map(|&qi| prefactor * qi).collect();
    grad[sample.label] -= 1.0;
    if let Some(j) = jstar {
        grad[num_classes + j] -= 1.0;
    }

    LossGrad {
        loss,
        grad,
        intermediates: SurrogateIntermediates {
            q: Some(ProbVector::simplex(q)),
            jstar,
            ..Default::default()
        },
    }
}

/// Loss only, with a pinned winner.
pub fn loss_with_winner(scores: &AugScores, sample: &Sample, jstar: Option<usize>) -> f64 {
    loss_grad_with_winner(scores, sample, jstar).loss
}

/// 2(Diag(q) - qqᵀ) when some expert is correct, the plain softmax
/// covariance otherwise. j⋆ is treated as constant.
pub fn hessian(scores: &AugScores, sample: &Sample) -> DenseMatrix {
    let q = softmax_unchecked(&scores.logits);
    let prefactor = if CorrectSet::from_sample(sample).is_empty() { 1.0 } else { 2.0 };
    scaled_softmax_covariance(&q, prefactor)
}
