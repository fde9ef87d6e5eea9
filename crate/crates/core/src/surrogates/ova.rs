//! One-vs-all surrogate: K+J independent binary logistic losses, one per
//! class ("is the label k?") and one per expert ("is expert j correct?").
//!
//! Every coordinate is optimized on its own, so the loss decomposes as
//! Σ softplus terms with gradient σ(v) - target per coordinate and a
//! diagonal Hessian. The class head is a vector of independent sigmoids,
//! not a categorical distribution.

use super::{softplus, CorrectSet, DecScores, LossGrad, Sample, SurrogateIntermediates};
use crate::numkit::sigmoid;

pub fn loss_grad(scores: &DecScores, sample: &Sample) -> LossGrad {
    let num_classes = scores.class.len();
    debug_assert!(sample.label < num_classes);
    debug_assert_eq!(scores.expert.len(), sample.num_experts());
    let correct = CorrectSet::from_sample(sample);

    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(num_classes + scores.expert.len());

    for (k, &v) in scores.class.iter().enumerate() {
        let target = if k == sample.label { 1.0 } else { 0.0 };
        // -b log σ(v) - (1-b) log(1-σ(v)) = softplus(v) - b·v
        loss += softplus(v) - target * v;
        grad.push(sigmoid(v) - target);
    }
    let mut expert_probs = Vec::with_capacity(scores.expert.len());
    for (j, &v) in scores.expert.iter().enumerate() {
        let target = correct.targets[j];
        loss += softplus(v) - target * v;
        let u = sigmoid(v);
        grad.push(u - target);
        expert_probs.push(u);
    }

    LossGrad {
        loss,
        grad,
        intermediates: SurrogateIntermediates { u: Some(expert_probs), ..Default::default() },
    }
}
