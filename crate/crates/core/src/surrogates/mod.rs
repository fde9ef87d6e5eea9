//! The six samplewise surrogate losses with analytic gradients and Hessians.
//!
//! Four surrogates score one augmented action vector of length K+J
//! (additive CE, PiCCE, Mao25, A-SM); two keep separate class and expert
//! heads (OvA, decoupled). Gradients are always returned as one flat vector
//! of length K+J: for the split kinds the first K entries belong to the
//! class head and the last J to the expert head.
//!
//! Argmax ties (the A-SM reference class, the PiCCE winner) are broken by
//! lowest index. Probabilities are clamped to [1e-12, 1-1e-12] before logs.

pub mod add_ce;
pub mod asm;
pub mod decoupled;
pub mod mao25;
pub mod ova;
pub mod picce;

use crate::numkit::{DenseMatrix, ProbVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lower clamp applied to probabilities before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

/// Default per-expert weight β = λ/J.
pub const DEFAULT_BETA: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("A-SM requires at least two classes, got {0}")]
    TooFewClasses(usize),
}

/// One labeled observation: features, realized label, and the J expert
/// predictions. Labels and predictions are 0-based class indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
    pub expert_preds: Vec<usize>,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: usize, expert_preds: Vec<usize>) -> Self {
        Self { features, label, expert_preds }
    }

    pub fn num_experts(&self) -> usize {
        self.expert_preds.len()
    }
}

/// Experts that predicted the realized label on a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectSet {
    /// Indices j with m_j = y, ascending.
    pub indices: Vec<usize>,
    /// Binary targets t_j = 1{m_j = y}, one per expert.
    pub targets: Vec<f64>,
}

impl CorrectSet {
    pub fn from_sample(sample: &Sample) -> Self {
        let targets: Vec<f64> = sample
            .expert_preds
            .iter()
            .map(|&m| if m == sample.label { 1.0 } else { 0.0 })
            .collect();
        let indices = targets
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == 1.0)
            .map(|(j, _)| j)
            .collect();
        Self { indices, targets }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.targets[j] == 1.0
    }
}

/// Augmented score vector: K class logits followed by J expert logits.
#[derive(Debug, Clone, PartialEq)]
pub struct AugScores {
    pub logits: Vec<f64>,
    pub num_classes: usize,
}

impl AugScores {
    pub fn new(logits: Vec<f64>, num_classes: usize) -> Self {
        debug_assert!(num_classes <= logits.len());
        Self { logits, num_classes }
    }

    pub fn num_experts(&self) -> usize {
        self.logits.len() - self.num_classes
    }
}

/// Split scores: a class-head logit vector and an expert-head logit vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DecScores {
    pub class: Vec<f64>,
    pub expert: Vec<f64>,
}

impl DecScores {
    pub fn new(class: Vec<f64>, expert: Vec<f64>) -> Self {
        Self { class, expert }
    }

    /// Flatten to the (class | expert) layout used for gradients.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.class.clone();
        v.extend_from_slice(&self.expert);
        v
    }

    pub fn from_flat(flat: &[f64], num_classes: usize) -> Self {
        Self { class: flat[..num_classes].to_vec(), expert: flat[num_classes..].to_vec() }
    }
}

/// Scores in whichever layout the surrogate expects.
#[derive(Debug, Clone, PartialEq)]
pub enum Scores {
    Augmented(AugScores),
    Split(DecScores),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    AddCe,
    Picce,
    Mao25,
    Asm,
    Ova,
    Decoupled,
}

impl SurrogateKind {
    pub const ALL: [SurrogateKind; 6] = [
        SurrogateKind::AddCe,
        SurrogateKind::Picce,
        SurrogateKind::Mao25,
        SurrogateKind::Asm,
        SurrogateKind::Ova,
        SurrogateKind::Decoupled,
    ];

    /// True when the surrogate scores one shared augmented action vector.
    pub fn is_augmented(self) -> bool {
        !matches!(self, SurrogateKind::Ova | SurrogateKind::Decoupled)
    }

    pub fn name(self) -> &'static str {
        match self {
            SurrogateKind::AddCe => "add_ce",
            SurrogateKind::Picce => "picce",
            SurrogateKind::Mao25 => "mao25",
            SurrogateKind::Asm => "asm",
            SurrogateKind::Ova => "ova",
            SurrogateKind::Decoupled => "decoupled",
        }
    }
}

impl std::fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SurrogateKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        SurrogateKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown surrogate kind '{s}'"))
    }
}

/// Argmax tie-breaking policy. Only the deterministic lowest-index rule is
/// supported; it is what the fixed-reference analyses assume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
}

/// Surrogate selection plus the per-expert weight β = λ/J. The total expert
/// weight λ = β·J is derived; β is the quantity to hold fixed when the
/// expert pool size changes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub kind: SurrogateKind,
    pub beta: f64,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl SurrogateConfig {
    pub fn new(kind: SurrogateKind) -> Self {
        Self { kind, beta: DEFAULT_BETA, tie_break: TieBreak::LowestIndex }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        assert!(beta > 0.0, "beta must be positive");
        self.beta = beta;
        self
    }

    /// λ = β·J for a pool of `num_experts` experts.
    pub fn lambda(&self, num_experts: usize) -> f64 {
        self.beta * num_experts as f64
    }
}

/// Quantities computed on the way to a loss/gradient, kept for diagnostics.
/// Which fields are populated depends on the surrogate kind.
#[derive(Debug, Clone, Default)]
pub struct SurrogateIntermediates {
    /// Shared softmax over K+J actions (CE, PiCCE, Mao25).
    pub q: Option<ProbVector>,
    /// A-SM class softmax over K classes.
    pub xi: Option<ProbVector>,
    /// A-SM per-expert probabilities.
    pub psi: Option<Vec<f64>>,
    /// A-SM leakage weights over the non-reference classes (entry for the
    /// reference class is zero).
    pub pi: Option<Vec<f64>>,
    /// A-SM reference class (argmax class logit).
    pub kstar: Option<usize>,
    /// PiCCE winning correct expert, if any expert is correct.
    pub jstar: Option<usize>,
    /// Mao25 acceptable action set, as augmented indices.
    pub acc_set: Option<Vec<usize>>,
    /// Total softmax mass on the acceptable set.
    pub acc_mass: Option<f64>,
    /// Decoupled class posterior over K classes.
    pub p: Option<ProbVector>,
    /// Per-expert sigmoid probabilities (decoupled, OvA).
    pub u: Option<Vec<f64>>,
}

/// A samplewise loss value with its gradient over the score layout.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    /// Length K+J. For the split kinds the first K entries are the class
    /// head and the last J the expert head.
    pub grad: Vec<f64>,
    pub intermediates: SurrogateIntermediates,
}

/// Dispatch to the surrogate selected by `cfg`. The score layout must match
/// the kind (augmented vs. split).
pub fn loss_grad(
    cfg: &SurrogateConfig,
    scores: &Scores,
    sample: &Sample,
) -> Result<LossGrad, SurrogateError> {
    match (cfg.kind, scores) {
        (SurrogateKind::AddCe, Scores::Augmented(a)) => Ok(add_ce::loss_grad(a, sample)),
        (SurrogateKind::Picce, Scores::Augmented(a)) => Ok(picce::loss_grad(a, sample)),
        (SurrogateKind::Mao25, Scores::Augmented(a)) => Ok(mao25::loss_grad(a, sample)),
        (SurrogateKind::Asm, Scores::Augmented(a)) => asm::loss_grad(a, sample),
        (SurrogateKind::Ova, Scores::Split(ds)) => Ok(ova::loss_grad(ds, sample)),
        (SurrogateKind::Decoupled, Scores::Split(ds)) => Ok(decoupled::loss_grad(ds, sample, cfg)),
        _ => panic!("score layout does not match surrogate kind {:?}", cfg.kind),
    }
}

/// Loss value at a flat logit vector of length K+J, interpreted per the
/// kind's layout. This is the scalar function handed to the
/// finite-difference oracles.
pub fn loss_at(cfg: &SurrogateConfig, flat: &[f64], sample: &Sample) -> f64 {
    let j = sample.num_experts();
    let k = flat.len() - j;
    let scores = if cfg.kind.is_augmented() {
        Scores::Augmented(AugScores::new(flat.to_vec(), k))
    } else {
        Scores::Split(DecScores::from_flat(flat, k))
    };
    loss_grad(cfg, &scores, sample).expect("loss evaluation failed").loss
}

/// Finite-difference Hessian of the surrogate loss at a flat logit vector,
/// using the default Hessian step. The independent cross-check for every
/// analytic second-derivative formula.
pub fn fd_full_hessian(
    cfg: &SurrogateConfig,
    flat: &[f64],
    sample: &Sample,
) -> crate::numkit::DenseMatrix {
    crate::numkit::fd_hessian(|a| loss_at(cfg, a, sample), flat, crate::numkit::FD_HESS_STEP)
}

/// scale · (Diag(q) - q qᵀ), the softmax covariance that shows up in every
/// shared-softmax Hessian.
pub(crate) fn scaled_softmax_covariance(q: &[f64], scale: f64) -> DenseMatrix {
    let n = q.len();
    let mut h = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for r in 0..n {
            let v = if i == r { q[i] * (1.0 - q[i]) } else { -q[i] * q[r] };
            h.set(i, r, scale * v);
        }
    }
    h
}

pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Lowest-index argmax.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable log(1 + exp(v)).
pub(crate) fn softplus(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}
