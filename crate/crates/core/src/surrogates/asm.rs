//! Asymmetric softmax: a class softmax over the first K logits plus one
//! bounded probability per expert, normalized against the non-max class
//! logits.
//!
//! With k⋆ the argmax class logit and B = Σ_{k≠k⋆} exp(a_k),
//!
//!   ξ_k = softmax(a_{1..K})_k,   ψ_j = σ(a_{K+j} - log B),
//!   Φ(a) = -log ξ_y - Σ_j [ t_j log ψ_j + (1-t_j) log(1-ψ_j) ].
//!
//! Because the class logits sit inside every expert's reference level B,
//! each expert residual ψ_j - t_j leaks into every non-max class gradient
//! with weight π_r = exp(a_r)/B. The second-order trace of the same leak is
//! the rank-one mixed block H_mix = -π dᵀ with d_j = ψ_j(1-ψ_j), whose
//! operator norm is ‖π‖₂‖d‖₂ ≤ √J/4.
//!
//! All formulas hold on a region where k⋆ is fixed; ties are broken by
//! lowest index.

use super::{
    argmax, clamp_prob, AugScores, CorrectSet, LossGrad, Sample, SurrogateError,
    SurrogateIntermediates,
};
use crate::numkit::{log_sum_exp, sigmoid, softmax_unchecked, DenseMatrix, ProbVector};

struct AsmParts {
    kstar: usize,
    xi: Vec<f64>,
    psi: Vec<f64>,
    /// π over classes, zero at k⋆.
    pi: Vec<f64>,
}

fn compute_parts(scores: &AugScores, sample: &Sample) -> Result<AsmParts, SurrogateError> {
    debug_assert_eq!(scores.num_experts(), sample.num_experts());
    let num_experts = sample.num_experts();
    let num_classes = scores.num_classes;
    if num_classes < 2 {
        return Err(SurrogateError::TooFewClasses(num_classes));
    }
    let class_logits = &scores.logits[..num_classes];
    let kstar = argmax(class_logits);

    let non_max: Vec<f64> = class_logits
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != kstar)
        .map(|(_, &v)| v)
        .collect();
    let log_b = log_sum_exp(&non_max);

    let xi = softmax_unchecked(class_logits);
    let pi: Vec<f64> = class_logits
        .iter()
        .enumerate()
        .map(|(k, &v)| if k == kstar { 0.0 } else { (v - log_b).exp() })
        .collect();
    let psi: Vec<f64> = (0..num_experts)
        .map(|j| sigmoid(scores.logits[num_classes + j] - log_b))
        .collect();

    Ok(AsmParts { kstar, xi, psi, pi })
}

pub fn loss_grad(scores: &AugScores, sample: &Sample) -> Result<LossGrad, SurrogateError> {
    let parts = compute_parts(scores, sample)?;
    let num_experts = sample.num_experts();
    let num_classes = scores.num_classes;
    let correct = CorrectSet::from_sample(sample);

    let mut loss = -clamp_prob(parts.xi[sample.label]).ln();
    for j in 0..num_experts {
        let t = correct.targets[j];
        loss -= t * clamp_prob(parts.psi[j]).ln()
            + (1.0 - t) * clamp_prob(1.0 - parts.psi[j]).ln();
    }

    // Aggregate expert residual Σ_j (ψ_j - t_j), injected into every
    // non-max class coordinate through π_r.
    let residual: f64 =
        (0..num_experts).map(|j| parts.psi[j] - correct.targets[j]).sum();

    let mut grad = vec![0.0; scores.logits.len()];
    for r in 0..num_classes {
        let class_term = parts.xi[r] - if r == sample.label { 1.0 } else { 0.0 };
        grad[r] = if r == parts.kstar {
            class_term
        } else {
            class_term - parts.pi[r] * residual
        };
    }
    for j in 0..num_experts {
        grad[num_classes + j] = parts.psi[j] - correct.targets[j];
    }

    Ok(LossGrad {
        loss,
        grad,
        intermediates: SurrogateIntermediates {
            xi: Some(ProbVector::simplex(parts.xi)),
            psi: Some(parts.psi),
            pi: Some(parts.pi),
            kstar: Some(parts.kstar),
            ..Default::default()
        },
    })
}

/// The K×J mixed class-expert Hessian block: row r = -π_r d with
/// d_j = ψ_j(1-ψ_j); the row for k⋆ is zero. Rank at most one.
pub fn mixed_block(scores: &AugScores, sample: &Sample) -> Result<DenseMatrix, SurrogateError> {
    let parts = compute_parts(scores, sample)?;
    let num_experts = sample.num_experts();
    let num_classes = scores.num_classes;

    let d: Vec<f64> = parts.psi.iter().map(|&p| p * (1.0 - p)).collect();
    let mut block = DenseMatrix::zeros(num_classes, num_experts);
    for r in 0..num_classes {
        if r == parts.kstar {
            continue;
        }
        for j in 0..num_experts {
            block.set(r, j, -parts.pi[r] * d[j]);
        }
    }
    Ok(block)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{fd_gradient, fd_hessian, op_norm_rect, rel_vec_error, FD_GRAD_STEP, FD_HESS_STEP};
    use crate::surrogates::{loss_at, SurrogateConfig, SurrogateKind};
    use approx::assert_abs_diff_eq;

    /// Construction pinning ξ_2 = 0.25, π_2 = 0.40, Σ(ψ_j - t_j) = 0.80
    /// with y = 2 and r = 2 ≠ k⋆. The class-2 gradient is then
    /// (0.25 - 1) - 0.40·0.80 = -1.07: an ordinary class signal of -0.75
    /// plus -0.32 of expert leakage.
    fn coupled_instance() -> (AugScores, Sample) {
        // Class exponentials (1.5, 1, 1.5): ξ_2 = 0.25, k⋆ = 0 by the
        // lowest-index rule, B = 2.5, π_2 = 1/2.5 = 0.40. Four incorrect
        // experts with ψ_j = 0.2 each give residual 0.80.
        let e: f64 = 1.5;
        let class = vec![e.ln(), 0.0, e.ln()];
        let expert_logit = (2.5f64 * 0.25).ln(); // σ(ln .625 - ln 2.5) = 0.2
        let mut logits = class;
        logits.extend(std::iter::repeat_n(expert_logit, 4));
        // y = 1 (0-based class 2 of the construction); all experts wrong.
        let sample = Sample::new(vec![], 1, vec![2, 2, 2, 2]);
        (AugScores::new(logits, 3), sample)
    }

    #[test]
    fn class_gradient_carries_expert_leakage() {
        let (scores, sample) = coupled_instance();
        let lg = loss_grad(&scores, &sample).unwrap();
        let inter = &lg.intermediates;
        assert_eq!(inter.kstar, Some(0));
        assert_abs_diff_eq!(inter.xi.as_ref().unwrap()[1], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(inter.pi.as_ref().unwrap()[1], 0.40, epsilon = 1e-12);
        for &psi in inter.psi.as_ref().unwrap() {
            assert_abs_diff_eq!(psi, 0.20, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(lg.grad[1], -1.07, epsilon = 1e-12);
    }

    /// When every ψ_j equals its target the leakage vanishes and the class
    /// gradient reduces to the pure CE term.
    #[test]
    fn zero_leakage_reduces_to_class_ce() {
        let logits = vec![1.0, 0.2, -0.4, 40.0, -40.0];
        let sample = Sample::new(vec![], 0, vec![0, 1]);
        // ψ_0 = σ(40 - log B) ≈ 1 = t_0, ψ_1 ≈ 0 = t_1.
        let lg = loss_grad(&AugScores::new(logits.clone(), 3), &sample).unwrap();
        let xi = softmax_unchecked(&logits[..3]);
        for r in 0..3 {
            let expected = xi[r] - if r == 0 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(lg.grad[r], expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_single_class() {
        let sample = Sample::new(vec![], 0, vec![0]);
        let res = loss_grad(&AugScores::new(vec![0.5, 0.1], 1), &sample);
        assert!(matches!(res, Err(SurrogateError::TooFewClasses(1))));
    }

    #[test]
    fn gradient_matches_finite_differences_away_from_ties() {
        let cfg = SurrogateConfig::new(SurrogateKind::Asm);
        // Clear argmax gap so k⋆ is stable under ±h perturbations.
        let logits = vec![1.4, 0.2, -0.3, 0.6, -0.8];
        let sample = Sample::new(vec![], 1, vec![1, 0]);
        let lg = loss_grad(&AugScores::new(logits.clone(), 3), &sample).unwrap();
        let fd = fd_gradient(|a| loss_at(&cfg, a, &sample), &logits, FD_GRAD_STEP);
        assert!(rel_vec_error(&lg.grad, &fd) <= 1e-6);
    }

    #[test]
    fn mixed_block_is_rank_one_with_zero_reference_row() {
        let logits = vec![1.2, 0.1, -0.5, 0.3, 0.9, -0.2];
        let sample = Sample::new(vec![], 2, vec![2, 1, 2]);
        let scores = AugScores::new(logits, 3);
        let block = mixed_block(&scores, &sample).unwrap();
        let lg = loss_grad(&scores, &sample).unwrap();
        let kstar = lg.intermediates.kstar.unwrap();
        for j in 0..3 {
            assert_eq!(block.get(kstar, j), 0.0);
        }
        // Rank 1: every non-reference row is proportional to d.
        let pi = lg.intermediates.pi.unwrap();
        let psi = lg.intermediates.psi.unwrap();
        for r in 0..3 {
            for j in 0..3 {
                let expected =
                    if r == kstar { 0.0 } else { -pi[r] * psi[j] * (1.0 - psi[j]) };
                assert_abs_diff_eq!(block.get(r, j), expected, epsilon = 1e-15);
            }
        }
        // Operator norm equals ‖π‖₂‖d‖₂ and respects the √J/4 bound.
        let d: Vec<f64> = psi.iter().map(|&p| p * (1.0 - p)).collect();
        let pi_norm = pi.iter().map(|x| x * x).sum::<f64>().sqrt();
        let d_norm = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        let norm = op_norm_rect(&block);
        assert_abs_diff_eq!(norm, pi_norm * d_norm, epsilon = 1e-10);
        assert!(norm <= (3.0f64).sqrt() / 4.0 + 1e-12);
    }

    #[test]
    fn mixed_block_matches_finite_differences() {
        let cfg = SurrogateConfig::new(SurrogateKind::Asm);
        let logits = vec![1.5, 0.3, -0.2, 0.4, -0.6];
        let sample = Sample::new(vec![], 0, vec![0, 2]);
        let scores = AugScores::new(logits.clone(), 3);
        let block = mixed_block(&scores, &sample).unwrap();
        let full = fd_hessian(|a| loss_at(&cfg, a, &sample), &logits, FD_HESS_STEP);
        for r in 0..3 {
            for j in 0..2 {
                assert_abs_diff_eq!(block.get(r, j), full.get(r, 3 + j), epsilon = 1e-5);
            }
        }
    }
}
