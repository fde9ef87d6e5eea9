//! One useful expert plus always-incorrect distractors.
//!
//! Used by the coupling probe: growing J adds experts that are never
//! correct, so any change in the class-side geometry is attributable to
//! the expert pool size alone. Expert 1 is correct at a configurable rate
//! (default 0.9) on a defer region covering half the data and at 0.05 on
//! the classify side; experts 2..J always predict a wrong label. Features
//! are the K class coordinates plus an explicit region flag. Bayes: defer
//! to expert 1 on the defer region, classify elsewhere.

use super::rng::{CounterRng, DrawPurpose};
use super::{LabeledDataset, SuiteSpec, NOISE_STD};
use crate::bayes::{GroundTruth, Region};
use crate::surrogates::Sample;

pub const DEFER_REGION_MASS: f64 = 0.5;
pub const EXPERT_RATE_CLASSIFY_SIDE: f64 = 0.05;
const DOMINANT_POSTERIOR: f64 = 0.998;
const CLASS_FEATURE_BASE: f64 = 3.0;
const CLASS_FEATURE_DOMINANT: f64 = 5.0;

pub fn generate(spec: &SuiteSpec) -> LabeledDataset {
    let k = spec.num_classes;
    let j = spec.num_experts;
    let domain = spec.suite.rng_domain();

    let mut samples = Vec::with_capacity(spec.total());
    let mut truths = Vec::with_capacity(spec.total());

    for idx in 0..spec.total() as u64 {
        let stream = |p| CounterRng::for_draw(domain, spec.seed, idx, p);
        let on_defer = stream(DrawPurpose::Region).bernoulli(DEFER_REGION_MASS);

        let (label, eta, mut base) = if on_defer {
            let label = stream(DrawPurpose::Label).below(k);
            (label, vec![1.0 / k as f64; k], vec![CLASS_FEATURE_BASE; k])
        } else {
            let dominant = stream(DrawPurpose::DominantClass).below(k);
            let mut eta = vec![(1.0 - DOMINANT_POSTERIOR) / (k - 1) as f64; k];
            eta[dominant] = DOMINANT_POSTERIOR;
            let label = stream(DrawPurpose::Label).categorical(&eta);
            let mut base = vec![CLASS_FEATURE_BASE; k];
            base[dominant] = CLASS_FEATURE_DOMINANT;
            (label, eta, base)
        };

        let noise = stream(DrawPurpose::FeatureNoise).normals(k);
        for (b, n) in base.iter_mut().zip(&noise) {
            *b += NOISE_STD * n;
        }
        base.push(if on_defer { 1.0 } else { 0.0 });

        let rate = if on_defer { spec.expert_rate } else { EXPERT_RATE_CLASSIFY_SIDE };
        let expert1_correct = stream(DrawPurpose::ExpertEvent).bernoulli(rate);
        let mut wrong = stream(DrawPurpose::WrongLabel);
        let preds: Vec<usize> = (0..j)
            .map(|e| {
                if e == 0 && expert1_correct {
                    label
                } else {
                    wrong.wrong_label(k, label)
                }
            })
            .collect();

        let mut alpha = vec![0.0; j];
        alpha[0] = rate;

        samples.push(Sample::new(base, label, preds));
        truths.push(GroundTruth::new(
            eta,
            alpha,
            if on_defer { Region::Defer } else { Region::Classify },
        ));
    }

    LabeledDataset { samples, truths, meta: spec.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suites::SuiteKind;

    fn spec_with(j: usize, n: usize, seed: u64) -> SuiteSpec {
        let mut spec = SuiteSpec::new(SuiteKind::CouplingDistractors, seed);
        spec.num_experts = j;
        spec.n_train = n;
        spec.n_val = 1;
        spec.n_test = 1;
        spec
    }

    #[test]
    fn distractors_are_never_correct() {
        let ds = generate(&spec_with(5, 3000, 2));
        for sample in &ds.samples {
            for e in 1..5 {
                assert_ne!(sample.expert_preds[e], sample.label);
            }
        }
    }

    #[test]
    fn single_expert_variant_has_no_distractors() {
        let ds = generate(&spec_with(1, 200, 3));
        for (sample, gt) in ds.samples.iter().zip(&ds.truths) {
            assert_eq!(sample.expert_preds.len(), 1);
            assert_eq!(gt.expert_utility.len(), 1);
        }
    }

    /// Expert 1's empirical correctness on the defer region within ±0.01 of
    /// the configured rate.
    #[test]
    fn expert_one_rate_matches_configuration() {
        let mut spec = spec_with(3, 100_000, 17);
        spec.expert_rate = 0.9;
        let ds = generate(&spec);
        let mut correct = 0usize;
        let mut n_defer = 0usize;
        for (sample, gt) in ds.samples.iter().zip(&ds.truths) {
            if gt.region == Region::Defer {
                n_defer += 1;
                if sample.expert_preds[0] == sample.label {
                    correct += 1;
                }
            }
        }
        let rate = correct as f64 / n_defer as f64;
        assert!((rate - 0.9).abs() < 0.01, "rate {rate}");
    }
}
