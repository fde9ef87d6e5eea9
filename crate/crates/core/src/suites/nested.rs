//! Nested redundant experts.
//!
//! A region indicator R ~ Bernoulli(0.65) selects the defer side D. On D
//! the label is uniform over [K], features sit at 3.5·1 + ε with no class
//! signal, and expert accuracies decay log-spaced from 0.99 down to 0.75.
//! On the classify side the posterior is near-deterministic (0.998 on a
//! random dominant class whose feature is shifted to 5) and experts are
//! near-random (0.04 down to 0.002).
//!
//! Correctness is driven by a single shared latent U ~ Unif[0,1]: expert j
//! is correct iff U ≤ α_j, so weaker experts' correct sets are exact
//! subsets of stronger ones'. Growing J changes only the realized overlap,
//! never the Bayes action (defer to expert 0 on D, classify elsewhere).

use super::rng::{CounterRng, DrawPurpose};
use super::{LabeledDataset, SuiteSpec, NOISE_STD};
use crate::bayes::{GroundTruth, Region};
use crate::surrogates::Sample;

const DEFER_REGION_MASS: f64 = 0.65;
const ALPHA_TOP_DEFER: f64 = 0.99;
const ALPHA_BOTTOM_DEFER: f64 = 0.75;
const ALPHA_TOP_CLASSIFY: f64 = 0.04;
const ALPHA_BOTTOM_CLASSIFY: f64 = 0.002;
const DOMINANT_POSTERIOR: f64 = 0.998;
const FEATURE_BASE: f64 = 3.5;
const FEATURE_DOMINANT: f64 = 5.0;

/// Log spacing ρ_j = ln(1+j)/ln(J): the first experts are close in
/// quality, the tail markedly weaker. Requires J ≥ 2.
fn rho(j: usize, num_experts: usize) -> f64 {
    (1.0 + j as f64).ln() / (num_experts as f64).ln()
}

/// Closed-form expert accuracies on the defer (true) or classify side.
pub fn alphas(num_experts: usize, defer_side: bool) -> Vec<f64> {
    let (top, bottom) = if defer_side {
        (ALPHA_TOP_DEFER, ALPHA_BOTTOM_DEFER)
    } else {
        (ALPHA_TOP_CLASSIFY, ALPHA_BOTTOM_CLASSIFY)
    };
    (0..num_experts).map(|j| top - (top - bottom) * rho(j, num_experts)).collect()
}

pub fn generate(spec: &SuiteSpec) -> LabeledDataset {
    let k = spec.num_classes;
    let j = spec.num_experts;
    let domain = spec.suite.rng_domain();
    let alpha_defer = alphas(j, true);
    let alpha_classify = alphas(j, false);

    let mut samples = Vec::with_capacity(spec.total());
    let mut truths = Vec::with_capacity(spec.total());

    for idx in 0..spec.total() as u64 {
        let stream = |p| CounterRng::for_draw(domain, spec.seed, idx, p);
        let defer_side = stream(DrawPurpose::Region).bernoulli(DEFER_REGION_MASS);

        let (label, eta, mut base) = if defer_side {
            let label = stream(DrawPurpose::Label).below(k);
            (label, vec![1.0 / k as f64; k], vec![FEATURE_BASE; k])
        } else {
            let dominant = stream(DrawPurpose::DominantClass).below(k);
            let mut eta = vec![(1.0 - DOMINANT_POSTERIOR) / (k - 1) as f64; k];
            eta[dominant] = DOMINANT_POSTERIOR;
            let label = stream(DrawPurpose::Label).categorical(&eta);
            let mut base = vec![FEATURE_BASE; k];
            base[dominant] = FEATURE_DOMINANT;
            (label, eta, base)
        };

        let noise = stream(DrawPurpose::FeatureNoise).normals(k);
        for (b, n) in base.iter_mut().zip(&noise) {
            *b += NOISE_STD * n;
        }

        let alpha = if defer_side { &alpha_defer } else { &alpha_classify };
        let latent = stream(DrawPurpose::ExpertLatent).uniform();
        let mut wrong = stream(DrawPurpose::WrongLabel);
        let preds: Vec<usize> = alpha
            .iter()
            .map(|&a| if latent <= a { label } else { wrong.wrong_label(k, label) })
            .collect();

        samples.push(Sample::new(base, label, preds));
        truths.push(GroundTruth::new(
            eta,
            alpha.clone(),
            if defer_side { Region::Defer } else { Region::Classify },
        ));
    }

    LabeledDataset { samples, truths, meta: spec.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suites::SuiteKind;
    use approx::assert_abs_diff_eq;

    fn small_spec(seed: u64) -> SuiteSpec {
        let mut spec = SuiteSpec::new(SuiteKind::NestedRedundant, seed);
        spec.n_train = 400;
        spec.n_val = 100;
        spec.n_test = 100;
        spec
    }

    #[test]
    fn alpha_endpoints() {
        for j in [2, 4, 24] {
            let a = alphas(j, true);
            assert_abs_diff_eq!(a[0], 0.99, epsilon = 1e-15);
            assert_abs_diff_eq!(a[j - 1], 0.75, epsilon = 1e-15);
            let c = alphas(j, false);
            assert_abs_diff_eq!(c[0], 0.04, epsilon = 1e-15);
            assert_abs_diff_eq!(c[j - 1], 0.002, epsilon = 1e-15);
        }
    }

    /// Correct sets are nested: expert j+1 correct implies expert j correct.
    #[test]
    fn correctness_chain_is_nested() {
        let ds = generate(&small_spec(11));
        for sample in &ds.samples {
            for j in 0..sample.expert_preds.len() - 1 {
                let stronger = sample.expert_preds[j] == sample.label;
                let weaker = sample.expert_preds[j + 1] == sample.label;
                assert!(!weaker || stronger, "nesting violated at expert {j}");
            }
        }
    }

    #[test]
    fn incorrect_experts_never_predict_the_label() {
        let ds = generate(&small_spec(5));
        for (sample, gt) in ds.samples.iter().zip(&ds.truths) {
            assert_eq!(sample.expert_preds.len(), gt.expert_utility.len());
            for &p in &sample.expert_preds {
                assert!(p < ds.meta.num_classes);
            }
        }
    }

    /// Monte Carlo check of the per-expert marginal correctness against the
    /// closed-form accuracies, 1e5 samples, ±0.01.
    #[test]
    fn empirical_expert_accuracy_matches_alpha() {
        let mut spec = SuiteSpec::new(SuiteKind::NestedRedundant, 123);
        spec.num_experts = 4;
        spec.n_train = 100_000;
        spec.n_val = 1;
        spec.n_test = 1;
        let ds = generate(&spec);

        let mut correct = vec![0usize; 4];
        let mut expected = vec![0.0f64; 4];
        for (sample, gt) in ds.samples.iter().zip(&ds.truths) {
            for j in 0..4 {
                if sample.expert_preds[j] == sample.label {
                    correct[j] += 1;
                }
                expected[j] += gt.expert_utility[j];
            }
        }
        let n = ds.len() as f64;
        for j in 0..4 {
            let rate = correct[j] as f64 / n;
            assert!(
                (rate - expected[j] / n).abs() < 0.01,
                "expert {j}: rate {rate} vs mean alpha {}",
                expected[j] / n
            );
        }
    }
}
