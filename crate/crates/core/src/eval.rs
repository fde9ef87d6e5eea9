//! Per-surrogate prediction rules, system-level metrics, transfer
//! constants, and the conditional-minimizer recovery check.
//!
//! Routing: the augmented surrogates take the argmax over the shared score
//! vector; the decoupled rule compares max_k p_k against max_j u_j and
//! classifies on ties; OvA compares raw head logits and classifies only on
//! a strict win. System accuracy and exact regret are computed from the
//! analytic conditional risks; the empirical defer loss uses the realized
//! labels and expert predictions.

use crate::bayes::{conditional_risk, exact_regret, Action, GroundTruth};
use crate::numkit::{sigmoid, softmax_unchecked};
use crate::suites::{LabeledDataset, SuiteKind};
use crate::surrogates::{argmax, Sample, Scores, SurrogateKind};
use crate::textio::{fmt_f64, fmt_opt_f64};
use crate::trainer::{LinearModel, Layout};

/// Deterministic routing rule for the given surrogate kind. Argmax ties go
/// to the lowest index.
pub fn route(kind: SurrogateKind, scores: &Scores) -> Action {
    match (kind, scores) {
        (k, Scores::Augmented(a)) if k.is_augmented() => {
            let idx = argmax(&a.logits);
            if idx < a.num_classes {
                Action::Classify(idx)
            } else {
                Action::Defer(idx - a.num_classes)
            }
        }
        (SurrogateKind::Ova, Scores::Split(ds)) => {
            // Strict > for classify; monotone in the sigmoids, so comparing
            // logits is equivalent to comparing probabilities.
            let kmax = argmax(&ds.class);
            let jmax = argmax(&ds.expert);
            if ds.class[kmax] > ds.expert[jmax] {
                Action::Classify(kmax)
            } else {
                Action::Defer(jmax)
            }
        }
        (SurrogateKind::Decoupled, Scores::Split(ds)) => {
            let p = softmax_unchecked(&ds.class);
            let kmax = argmax(&p);
            let jmax = argmax(&ds.expert);
            let u_max = sigmoid(ds.expert[jmax]);
            // Ties classify.
            if p[kmax] >= u_max {
                Action::Classify(kmax)
            } else {
                Action::Defer(jmax)
            }
        }
        _ => panic!("score layout does not match surrogate kind {kind:?}"),
    }
}

/// Realized 0-1 defer loss of an action on one sample.
pub fn realized_defer_loss(action: Action, sample: &Sample) -> f64 {
    let wrong = match action {
        Action::Classify(k) => k != sample.label,
        Action::Defer(j) => sample.expert_preds[j] != sample.label,
    };
    if wrong {
        1.0
    } else {
        0.0
    }
}

/// System-level evaluation of a routing policy on a test split.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// 1 - mean conditional risk of the chosen actions.
    pub system_accuracy: f64,
    /// Mean realized 0-1 defer loss (sampled labels/expert predictions).
    pub empirical_defer_loss: f64,
    /// Fraction of points the system classifies itself.
    pub coverage: f64,
    /// Mean conditional-risk gap to the pointwise Bayes action.
    pub exact_regret: f64,
    /// Rare-specialist suite: P(defer to the specialist | rare region);
    /// classifying counts as not selecting.
    pub specialist_selection: Option<f64>,
    /// Rare-specialist suite: specialist selection restricted to rare-region
    /// points where both experts are correct.
    pub shared_correct_routing: Option<f64>,
    /// Shared-acceptability suite: among defer decisions on the defer
    /// region, the fraction routed to the sector-best expert.
    pub best_expert_selection: Option<f64>,
}

struct Ratio {
    hits: usize,
    total: usize,
}

impl Ratio {
    fn new() -> Self {
        Self { hits: 0, total: 0 }
    }

    fn push(&mut self, hit: bool) {
        self.total += 1;
        self.hits += hit as usize;
    }

    fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.hits as f64 / self.total as f64)
    }
}

/// Evaluate decisions against aligned samples/truths.
pub fn evaluate_decisions(
    decisions: &[Action],
    samples: &[Sample],
    truths: &[GroundTruth],
    suite: SuiteKind,
) -> Metrics {
    assert_eq!(decisions.len(), samples.len());
    assert_eq!(decisions.len(), truths.len());
    let n = decisions.len() as f64;

    let mut risk_sum = 0.0;
    let mut defer_loss_sum = 0.0;
    let mut classified = 0usize;
    let mut specialist = Ratio::new();
    let mut shared_correct = Ratio::new();
    let mut best_expert = Ratio::new();

    for ((&action, sample), gt) in decisions.iter().zip(samples).zip(truths) {
        risk_sum += conditional_risk(action, gt);
        defer_loss_sum += realized_defer_loss(action, sample);
        classified += action.is_classify() as usize;

        match suite {
            SuiteKind::RareSpecialist if gt.region.is_defer() => {
                use crate::suites::rare::{GENERALIST, SPECIALIST};
                let picked_specialist = action == Action::Defer(SPECIALIST);
                specialist.push(picked_specialist);
                let both_correct = sample.expert_preds[GENERALIST] == sample.label
                    && sample.expert_preds[SPECIALIST] == sample.label;
                if both_correct {
                    shared_correct.push(picked_specialist);
                }
            }
            SuiteKind::SharedAcceptability => {
                if let (Some(q), Action::Defer(j)) = (gt.region.sector(), action) {
                    best_expert.push(j == q);
                }
            }
            _ => {}
        }
    }

    Metrics {
        system_accuracy: 1.0 - risk_sum / n,
        empirical_defer_loss: defer_loss_sum / n,
        coverage: classified as f64 / n,
        exact_regret: exact_regret(decisions, truths).expect("aligned decisions"),
        specialist_selection: specialist.rate(),
        shared_correct_routing: shared_correct.rate(),
        best_expert_selection: best_expert.rate(),
    }
}

/// Route every test-split point through the model and compute metrics.
pub fn evaluate(model: &LinearModel, kind: SurrogateKind, data: &LabeledDataset) -> Metrics {
    let test = data.test();
    let decisions: Vec<Action> = test
        .samples
        .iter()
        .map(|s| route(kind, &model.forward(&s.features)))
        .collect();
    evaluate_decisions(&decisions, test.samples, test.truths, data.meta.suite)
}

/// Surrogate-regret transfer constant, where one is known:
/// decoupled max{2√2, √(2/β)}, additive CE √(2(J+1)), Mao25 K+J.
pub fn transfer_constant(
    kind: SurrogateKind,
    beta: f64,
    num_classes: usize,
    num_experts: usize,
) -> Option<f64> {
    match kind {
        SurrogateKind::Decoupled => {
            Some((2.0 * 2.0f64.sqrt()).max((2.0 / beta).sqrt()))
        }
        SurrogateKind::AddCe => Some((2.0 * (num_experts as f64 + 1.0)).sqrt()),
        SurrogateKind::Mao25 => Some((num_classes + num_experts) as f64),
        SurrogateKind::Picce | SurrogateKind::Asm | SurrogateKind::Ova => None,
    }
}

/// Header of the run-level metrics CSV.
pub const METRICS_CSV_HEADER: &str = "suite,surrogate,seed,j,system_accuracy,defer_loss,\
coverage,exact_regret,specialist_selection,shared_correct_routing,best_expert_selection";

/// One metrics CSV row (without trailing newline).
pub fn metrics_csv_row(
    suite: SuiteKind,
    kind: SurrogateKind,
    seed: u64,
    num_experts: usize,
    m: &Metrics,
) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        suite,
        kind,
        seed,
        num_experts,
        fmt_f64(m.system_accuracy),
        fmt_f64(m.empirical_defer_loss),
        fmt_f64(m.coverage),
        fmt_f64(m.exact_regret),
        fmt_opt_f64(m.specialist_selection),
        fmt_opt_f64(m.shared_correct_routing),
        fmt_opt_f64(m.best_expert_selection),
    )
}

/// Recovery of the conditional minimizer per region: coordinatewise mean
/// absolute error between the model's probabilities and the analytic
/// (η, α), maximized over coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionRecovery {
    pub region: String,
    pub samples: usize,
    /// max over classes of mean |p_k(x) - η_k(x)|.
    pub max_class_err: f64,
    /// max over experts of mean |u_j(x) - α_j(x)|.
    pub max_expert_err: f64,
}

/// Check how closely a trained split-head model recovers (η, α) on the
/// test split, grouped by generator region.
pub fn fit_recovery_check(model: &LinearModel, data: &LabeledDataset) -> Vec<RegionRecovery> {
    assert_eq!(model.layout, Layout::Split, "recovery check needs a split-head model");
    let test = data.test();
    let k = model.num_classes;
    let j = model.num_experts;

    // region tag -> (count, class error sums, expert error sums)
    let mut groups: Vec<(String, usize, Vec<f64>, Vec<f64>)> = Vec::new();
    for (sample, gt) in test.samples.iter().zip(test.truths) {
        let Scores::Split(ds) = model.forward(&sample.features) else { unreachable!() };
        let p = softmax_unchecked(&ds.class);
        let tag = gt.region.tag();
        let entry = match groups.iter_mut().find(|(t, ..)| *t == tag) {
            Some(e) => e,
            None => {
                groups.push((tag, 0, vec![0.0; k], vec![0.0; j]));
                groups.last_mut().unwrap()
            }
        };
        entry.1 += 1;
        for c in 0..k {
            entry.2[c] += (p[c] - gt.class_posterior[c]).abs();
        }
        for e in 0..j {
            entry.3[e] += (sigmoid(ds.expert[e]) - gt.expert_utility[e]).abs();
        }
    }

    groups.sort_by(|a, b| a.0.cmp(&b.0));
    groups
        .into_iter()
        .map(|(region, n, class_sums, expert_sums)| {
            let scale = 1.0 / n as f64;
            RegionRecovery {
                region,
                samples: n,
                max_class_err: class_sums.iter().map(|s| s * scale).fold(0.0, f64::max),
                max_expert_err: expert_sums.iter().map(|s| s * scale).fold(0.0, f64::max),
            }
        })
        .collect()
}

/// Mean conditional risk implied by a metrics row; the complement of
/// system accuracy by construction.
pub fn mean_conditional_risk(m: &Metrics) -> f64 {
    1.0 - m.system_accuracy
}
