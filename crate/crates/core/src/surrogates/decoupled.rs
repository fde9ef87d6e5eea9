//! Decoupled surrogate: a softmax class head plus one independent sigmoid
//! per expert.
//!
//! With p = softmax(w), u_j = σ(s_j), t_j = 1{m_j = y}, and per-expert
//! weight β = λ/J:
//!
//!   Φ(w, s) = -log p_y - β Σ_j [ t_j log u_j + (1-t_j) log(1-u_j) ]
//!
//! Gradients are p_r - 1{r=y} on the class head and β(u_j - t_j) per
//! expert. The Hessian is block-diagonal: the softmax covariance for the
//! class head, a diagonal β·u_j(1-u_j) for the experts, and an identically
//! zero mixed block — no amplification, no starvation, no coupling.

use super::{
    clamp_prob, scaled_softmax_covariance, CorrectSet, DecScores, LossGrad, Sample,
    SurrogateConfig, SurrogateIntermediates,
};
use crate::numkit::{sigmoid, softmax_unchecked, DenseMatrix, ProbVector};

pub fn loss_grad(scores: &DecScores, sample: &Sample, cfg: &SurrogateConfig) -> LossGrad {
    let targets = CorrectSet::from_sample(sample).targets;
    loss_grad_with_targets(scores, sample.label, &targets, cfg)
}

/// Cost-sensitive variant: the binary correctness targets are replaced by
/// soft utility targets τ_j ∈ [0, 1]; the formulas are otherwise identical.
pub fn cost_sensitive_loss_grad(
    scores: &DecScores,
    targets: &[f64],
    sample: &Sample,
    cfg: &SurrogateConfig,
) -> LossGrad {
    debug_assert!(targets.iter().all(|&t| (0.0..=1.0).contains(&t)));
    loss_grad_with_targets(scores, sample.label, targets, cfg)
}

fn loss_grad_with_targets(
    scores: &DecScores,
    label: usize,
    targets: &[f64],
    cfg: &SurrogateConfig,
) -> LossGrad {
    let num_classes = scores.class.len();
    let num_experts = scores.expert.len();
    debug_assert!(label < num_classes);
    debug_assert_eq!(targets.len(), num_experts);
    let beta = cfg.beta;

    let p = softmax_unchecked(&scores.class);
    let u: Vec<f64> = scores.expert.iter().map(|&s| sigmoid(s)).collect();

    let mut loss = -clamp_prob(p[label]).ln();
    for (&uj, &t) in u.iter().zip(targets) {
        loss -= beta * (t * clamp_prob(uj).ln() + (1.0 - t) * clamp_prob(1.0 - uj).ln());
    }

    let mut grad = Vec::with_capacity(num_classes + num_experts);
    for (r, &pr) in p.iter().enumerate() {
        grad.push(pr - if r == label { 1.0 } else { 0.0 });
    }
    for (&uj, &t) in u.iter().zip(targets) {
        grad.push(beta * (uj - t));
    }

    LossGrad {
        loss,
        grad,
        intermediates: SurrogateIntermediates {
            p: Some(ProbVector::simplex(p)),
            u: Some(u),
            ..Default::default()
        },
    }
}

/// The three Hessian pieces of the decoupled loss.
#[derive(Debug, Clone)]
pub struct DecoupledHessian {
    /// K×K softmax covariance Diag(p) - ppᵀ; top eigenvalue ≤ 1/2.
    pub class_block: DenseMatrix,
    /// Diagonal expert curvatures β·u_j(1-u_j), each ≤ β/4.
    pub expert_diag: Vec<f64>,
    /// K×J mixed block, identically zero by construction.
    pub mixed_block: DenseMatrix,
}

impl DecoupledHessian {
    /// Assemble the full (K+J)×(K+J) matrix.
    pub fn to_full(&self) -> DenseMatrix {
        let k = self.class_block.rows();
        let j = self.expert_diag.len();
        let mut h = DenseMatrix::zeros(k + j, k + j);
        for r in 0..k {
            for c in 0..k {
                h.set(r, c, self.class_block.get(r, c));
            }
        }
        for (idx, &v) in self.expert_diag.iter().enumerate() {
            h.set(k + idx, k + idx, v);
        }
        h
    }
}

pub fn hessian(scores: &DecScores, _sample: &Sample, cfg: &SurrogateConfig) -> DecoupledHessian {
    let p = softmax_unchecked(&scores.class);
    let u: Vec<f64> = scores.expert.iter().map(|&s| sigmoid(s)).collect();
    DecoupledHessian {
        class_block: scaled_softmax_covariance(&p, 1.0),
        expert_diag: u.iter().map(|&uj| cfg.beta * uj * (1.0 - uj)).collect(),
        mixed_block: DenseMatrix::zeros(scores.class.len(), scores.expert.len()),
    }
}
