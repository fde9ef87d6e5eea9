//! Acceptable-set mass surrogate: Φ(a) = 1 - S, where S is the total
//! softmax mass on the acceptable set 𝒮 = {y} ∪ {K+j : expert j correct}.
//!
//! The loss is linear in S, so it separates acceptable from unacceptable
//! actions but carries no preference among acceptable ones: every
//! acceptable coordinate shares the gradient factor (S - 1). The total
//! attractive mass on the acceptable set is S(1-S) ≤ 1/4 and vanishes as
//! S → 0, the MAE-like weak-gradient regime.

use super::{AugScores, CorrectSet, LossGrad, Sample, SurrogateIntermediates};
use crate::numkit::{softmax_unchecked, DenseMatrix, ProbVector};

/// Acceptable augmented indices: the true class plus every correct expert.
pub fn acceptable_set(num_classes: usize, sample: &Sample) -> Vec<usize> {
    let correct = CorrectSet::from_sample(sample);
    let mut set = vec![sample.label];
    set.extend(correct.indices.iter().map(|&j| num_classes + j));
    set
}

pub fn loss_grad(scores: &AugScores, sample: &Sample) -> LossGrad {
    let num_classes = scores.num_classes;
    debug_assert_eq!(scores.num_experts(), sample.num_experts());
    debug_assert!(sample.label < num_classes);
    let q = softmax_unchecked(&scores.logits);

    let set = acceptable_set(num_classes, sample);
    let mut in_set = vec![false; scores.logits.len()];
    for &c in &set {
        in_set[c] = true;
    }
    let mass: f64 = set.iter().map(|&c| q[c]).sum();

    let grad: Vec<f64> = q
        .iter()
        .zip(&in_set)
        .map(|(&qi, &member)| qi * (mass - if member { 1.0 } else { 0.0 }))
        .collect();

    LossGrad {
        loss: 1.0 - mass,
        grad,
        intermediates: SurrogateIntermediates {
            q: Some(ProbVector::simplex(q)),
            acc_set: Some(set),
            acc_mass: Some(mass),
            ..Default::default()
        },
    }
}

/// Full Hessian, assembled from the four membership cases:
///
/// - i = r ∈ 𝒮:      q_i(1-q_i)(S-1) + q_i²(1-S)
/// - i ≠ r, both ∈ 𝒮:   2 q_i q_r (1-S)
/// - exactly one ∈ 𝒮:   q_i q_r (1-2S)
/// - i, r ∉ 𝒮:          q_i(1{i=r}-q_r)S - q_i q_r S
pub fn hessian(scores: &AugScores, sample: &Sample) -> DenseMatrix {
    let num_classes = scores.num_classes;
    let q = softmax_unchecked(&scores.logits);
    let set = acceptable_set(num_classes, sample);
    let mut in_set = vec![false; scores.logits.len()];
    for &c in &set {
        in_set[c] = true;
    }
    let mass: f64 = set.iter().map(|&c| q[c]).sum();

    let n = q.len();
    let mut h = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for r in 0..n {
            let v = match (in_set[i], in_set[r]) {
                (true, true) => {
                    if i == r {
                        q[i] * (1.0 - q[i]) * (mass - 1.0) + q[i] * q[i] * (1.0 - mass)
                    } else {
                        2.0 * q[i] * q[r] * (1.0 - mass)
                    }
                }
                (true, false) | (false, true) => q[i] * q[r] * (1.0 - 2.0 * mass),
                (false, false) => {
                    let diag = if i == r { 1.0 } else { 0.0 };
                    q[i] * (diag - q[r]) * mass - q[i] * q[r] * mass
                }
            };
            h.set(i, r, v);
        }
    }
    h
}
