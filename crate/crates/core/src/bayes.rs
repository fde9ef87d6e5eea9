//! The Bayes routing rule, conditional risks, and exact defer regret.
//!
//! Analytic ground truth per test point carries the class posterior η and
//! the per-expert correctness probabilities α. Predicting class k costs
//! 1-η_k; deferring to expert j costs 1-α_j; the Bayes rule classifies
//! whenever max η ≥ max α. Regret is evaluated from these conditional
//! risks directly, with no label sampling on the test side.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::surrogates::argmax;

#[derive(Debug, Error)]
pub enum BayesError {
    #[error("decision/ground-truth length mismatch: {decisions} vs {truths}")]
    LengthMismatch { decisions: usize, truths: usize },
}

/// Generator region a sample was drawn from. Defer-flavored regions carry
/// the sector index when the suite has one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// Region where the Bayes action is to defer.
    Defer,
    /// Defer region with a designated best-expert sector.
    DeferSector(usize),
    /// Region where the Bayes action is to classify.
    Classify,
}

impl Region {
    pub fn is_defer(self) -> bool {
        !matches!(self, Region::Classify)
    }

    pub fn sector(self) -> Option<usize> {
        match self {
            Region::DeferSector(q) => Some(q),
            _ => None,
        }
    }

    /// Short tag used in dataset CSV output.
    pub fn tag(self) -> String {
        match self {
            Region::Defer => "D".to_string(),
            Region::Classify => "C".to_string(),
            Region::DeferSector(q) => format!("D{q}"),
        }
    }
}

/// Analytic per-sample truth: full class posterior, per-expert correctness
/// probabilities, and the generator region.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub class_posterior: Vec<f64>,
    pub expert_utility: Vec<f64>,
    pub region: Region,
}

impl GroundTruth {
    pub fn new(class_posterior: Vec<f64>, expert_utility: Vec<f64>, region: Region) -> Self {
        debug_assert!((class_posterior.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        debug_assert!(expert_utility.iter().all(|&a| (0.0..=1.0).contains(&a)));
        Self { class_posterior, expert_utility, region }
    }

    pub fn max_posterior(&self) -> f64 {
        self.class_posterior.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_utility(&self) -> f64 {
        self.expert_utility.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A routing decision: predict a class or hand off to an expert.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Classify(usize),
    Defer(usize),
}

impl Action {
    pub fn is_classify(self) -> bool {
        matches!(self, Action::Classify(_))
    }
}

/// Bayes action: classify at the posterior argmax when max η ≥ max α
/// (ties classify), otherwise defer to the best expert. Inner argmax ties
/// go to the lowest index.
pub fn bayes_action(gt: &GroundTruth) -> Action {
    if gt.max_posterior() >= gt.max_utility() {
        Action::Classify(argmax(&gt.class_posterior))
    } else {
        Action::Defer(argmax(&gt.expert_utility))
    }
}

/// Conditional risk of an action: 1-η_k when classifying, 1-α_j when
/// deferring.
pub fn conditional_risk(action: Action, gt: &GroundTruth) -> f64 {
    match action {
        Action::Classify(k) => 1.0 - gt.class_posterior[k],
        Action::Defer(j) => 1.0 - gt.expert_utility[j],
    }
}

/// Pointwise minimum conditional risk over all K+J actions.
pub fn bayes_risk(gt: &GroundTruth) -> f64 {
    1.0 - gt.max_posterior().max(gt.max_utility())
}

/// Mean over test points of the chosen action's conditional risk minus the
/// pointwise Bayes risk. Zero iff every decision attains the conditional
/// minimum.
pub fn exact_regret(decisions: &[Action], truths: &[GroundTruth]) -> Result<f64, BayesError> {
    if decisions.len() != truths.len() {
        return Err(BayesError::LengthMismatch {
            decisions: decisions.len(),
            truths: truths.len(),
        });
    }
    if decisions.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = decisions
        .iter()
        .zip(truths)
        .map(|(&a, gt)| conditional_risk(a, gt) - bayes_risk(gt))
        .sum();
    Ok(total / decisions.len() as f64)
}
