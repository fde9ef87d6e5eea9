//! Linear models (no hidden layer) for both head layouts, first-order
//! optimizers, and the training loop with validation-based checkpointing.
//!
//! Both layouts store one (K+J)×d weight matrix plus biases; the layout
//! only decides how the forward pass is interpreted (one augmented score
//! vector vs. a class/expert split). Training is deterministic: parameters
//! start at zero, batch order comes from a dedicated counter-RNG stream per
//! epoch, and the reported model is the snapshot from the epoch with the
//! lowest validation defer loss (earliest epoch on ties).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::exact_regret;
use crate::eval::{realized_defer_loss, route};
use crate::suites::rng::{CounterRng, DrawPurpose};
use crate::suites::{DatasetView, LabeledDataset};
use crate::surrogates::{
    loss_grad, AugScores, DecScores, Sample, Scores, SurrogateConfig, SurrogateError,
    SurrogateKind,
};

/// RNG domain tag for trainer streams (batch shuffling).
const TRAINER_RNG_DOMAIN: u64 = 0x5452414e;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite training loss at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("empty {0} split")]
    EmptySplit(&'static str),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
}

/// Score layout produced by a model's forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// One shared (K+J)-dimensional score vector.
    Augmented,
    /// Separate class (K) and expert (J) heads.
    Split,
}

impl Layout {
    pub fn for_kind(kind: SurrogateKind) -> Layout {
        if kind.is_augmented() {
            Layout::Augmented
        } else {
            Layout::Split
        }
    }
}

/// Linear scorer: scores = W·x + b with W of shape (K+J)×d. Rows 0..K are
/// the class head, rows K..K+J the expert head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub layout: Layout,
    pub num_classes: usize,
    pub num_experts: usize,
    pub feature_dim: usize,
    /// Row-major (K+J)×d.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LinearModel {
    /// Zero-initialized model: uniform initial probabilities on every head.
    pub fn zeros(
        layout: Layout,
        num_classes: usize,
        num_experts: usize,
        feature_dim: usize,
    ) -> Self {
        let rows = num_classes + num_experts;
        Self {
            layout,
            num_classes,
            num_experts,
            feature_dim,
            weights: vec![0.0; rows * feature_dim],
            biases: vec![0.0; rows],
        }
    }

    fn rows(&self) -> usize {
        self.num_classes + self.num_experts
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    /// Raw logits W·x + b.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.feature_dim);
        let d = self.feature_dim;
        (0..self.rows())
            .map(|r| {
                let row = &self.weights[r * d..(r + 1) * d];
                row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + self.biases[r]
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Scores {
        let logits = self.logits(x);
        match self.layout {
            Layout::Augmented => Scores::Augmented(AugScores::new(logits, self.num_classes)),
            Layout::Split => Scores::Split(DecScores::from_flat(&logits, self.num_classes)),
        }
    }

    /// Copy parameters out as one flat vector (weights then biases).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut p = self.weights.clone();
        p.extend_from_slice(&self.biases);
        p
    }

    pub fn set_flat_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.num_params());
        let nw = self.weights.len();
        self.weights.copy_from_slice(&params[..nw]);
        self.biases.copy_from_slice(&params[nw..]);
    }

    /// JSON snapshot of the model.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model serialization");
        s.push('\n');
        s
    }

    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }
}

/// Mean surrogate loss and its gradient over the flattened parameters for
/// one batch. The chain rule through the linear map is
/// ∂Φ/∂W[r] = g_r·xᵀ and ∂Φ/∂b[r] = g_r for the per-sample logit
/// gradient g.
pub fn param_grad(
    model: &LinearModel,
    batch: &[&Sample],
    cfg: &SurrogateConfig,
) -> Result<(f64, Vec<f64>), TrainError> {
    let d = model.feature_dim;
    let rows = model.rows();
    let mut grad = vec![0.0; model.num_params()];
    let mut total_loss = 0.0;

    for sample in batch {
        let scores = model.forward(&sample.features);
        let lg = loss_grad(cfg, &scores, sample)?;
        total_loss += lg.loss;
        for r in 0..rows {
            let g = lg.grad[r];
            if g == 0.0 {
                continue;
            }
            let wrow = &mut grad[r * d..(r + 1) * d];
            for (acc, &xi) in wrow.iter_mut().zip(&sample.features) {
                *acc += g * xi;
            }
            grad[rows * d + r] += g;
        }
    }

    let scale = 1.0 / batch.len() as f64;
    for g in &mut grad {
        *g *= scale;
    }
    Ok((total_loss * scale, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    SgdMomentum { momentum: f64 },
    AdamW { beta1: f64, beta2: f64, eps: f64, weight_decay: f64 },
}

impl OptimizerKind {
    /// AdamW with the usual moment constants and no weight decay.
    pub fn adamw_default() -> Self {
        OptimizerKind::AdamW { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 0.0 }
    }
}

/// First-order optimizer over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step_count: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, dim: usize) -> Self {
        let needs_m = !matches!(kind, OptimizerKind::Sgd);
        let needs_v = matches!(kind, OptimizerKind::AdamW { .. });
        Self {
            kind,
            lr,
            step_count: 0,
            m: if needs_m { vec![0.0; dim] } else { vec![] },
            v: if needs_v { vec![0.0; dim] } else { vec![] },
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len());
        self.step_count += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, &g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::SgdMomentum { momentum } => {
                for ((p, &g), vel) in params.iter_mut().zip(grad).zip(&mut self.m) {
                    *vel = momentum * *vel + g;
                    *p -= self.lr * *vel;
                }
            }
            OptimizerKind::AdamW { beta1, beta2, eps, weight_decay } => {
                let t = self.step_count as i32;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    let m_hat = self.m[i] / bc1;
                    let v_hat = self.v[i] / bc2;
                    // Decoupled weight decay.
                    params[i] -= self.lr * (m_hat / (v_hat.sqrt() + eps))
                        + self.lr * weight_decay * params[i];
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    pub surrogate: SurrogateConfig,
}

impl TrainConfig {
    /// Synthetic-suite defaults: AdamW, lr 1e-2, batch 128, 200 epochs.
    pub fn new(surrogate: SurrogateConfig, seed: u64) -> Self {
        Self {
            lr: 1e-2,
            epochs: 200,
            batch_size: 128,
            optimizer: OptimizerKind::adamw_default(),
            seed,
            surrogate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub train_loss: f64,
    pub val_defer_loss: f64,
    pub val_exact_regret: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    /// Epoch whose validation defer loss is minimal (earliest on ties).
    pub best_epoch: usize,
}

impl TrainHistory {
    /// CSV rendering: epoch, train loss, validation defer loss, validation
    /// exact regret.
    pub fn to_csv(&self) -> String {
        use crate::textio::fmt_f64;
        let mut out = String::from("epoch,train_loss,val_defer_loss,val_exact_regret\n");
        for (e, s) in self.epochs.iter().enumerate() {
            out.push_str(&format!(
                "{e},{},{},{}\n",
                fmt_f64(s.train_loss),
                fmt_f64(s.val_defer_loss),
                fmt_f64(s.val_exact_regret)
            ));
        }
        out
    }
}

/// Validation metrics (empirical defer loss, exact regret) for one
/// parameter snapshot.
fn validate(model: &LinearModel, val: DatasetView<'_>, kind: SurrogateKind) -> (f64, f64) {
    let mut defer_loss = 0.0;
    let mut decisions = Vec::with_capacity(val.len());
    for sample in val.samples {
        let action = route(kind, &model.forward(&sample.features));
        defer_loss += realized_defer_loss(action, sample);
        decisions.push(action);
    }
    let regret = exact_regret(&decisions, val.truths).expect("aligned validation split");
    (defer_loss / val.len() as f64, regret)
}

/// Train a linear model on the dataset's train split, tracking validation
/// defer loss per epoch, and return the parameters of the best epoch
/// together with the full history.
pub fn train(
    data: &LabeledDataset,
    cfg: &TrainConfig,
) -> Result<(LinearModel, TrainHistory), TrainError> {
    assert!(cfg.lr > 0.0 && cfg.epochs >= 1 && cfg.batch_size >= 1);
    let train_split = data.train();
    let val_split = data.val();
    if train_split.is_empty() {
        return Err(TrainError::EmptySplit("train"));
    }
    if val_split.is_empty() {
        return Err(TrainError::EmptySplit("validation"));
    }

    let kind = cfg.surrogate.kind;
    let mut model = LinearModel::zeros(
        Layout::for_kind(kind),
        data.meta.num_classes,
        data.meta.num_experts,
        data.meta.feature_dim(),
    );
    let mut params = model.flat_params();
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.lr, params.len());

    let n = train_split.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;

    for epoch in 0..cfg.epochs {
        // Fisher-Yates from the epoch's dedicated stream.
        let mut rng =
            CounterRng::for_draw(TRAINER_RNG_DOMAIN, cfg.seed, epoch as u64, DrawPurpose::Shuffle);
        for i in (1..n).rev() {
            order.swap(i, rng.below(i + 1));
        }

        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_split.samples[i]).collect();
            model.set_flat_params(&params);
            let (loss, grad) = param_grad(&model, &batch, &cfg.surrogate)?;
            if !loss.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            optimizer.step(&mut params, &grad);
            epoch_loss += loss;
            batches += 1;
        }

        model.set_flat_params(&params);
        let (val_defer_loss, val_exact_regret) = validate(&model, val_split, kind);
        history.push(EpochStats {
            train_loss: epoch_loss / batches as f64,
            val_defer_loss,
            val_exact_regret,
        });
        // Strict improvement keeps the earliest epoch on ties.
        if best.as_ref().is_none_or(|(b, _, _)| val_defer_loss < *b) {
            best = Some((val_defer_loss, epoch, params.clone()));
        }
    }

    let (_, best_epoch, best_params) = best.expect("at least one epoch");
    model.set_flat_params(&best_params);
    Ok((model, TrainHistory { epochs: history, best_epoch }))
}
