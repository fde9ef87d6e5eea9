//! Rare specialist (K=2, J=2: generalist then specialist).
//!
//! A rare region R ~ Bernoulli(0.15) is where the specialist matters.
//! Features are (Z₁, Z₂, 1{R}) with Z ~ Unif[-1,1]²; the maximizing class
//! follows sign(Z₁) with posterior 0.60 on R and 0.90 off it.
//!
//! On R the joint correctness of (generalist, specialist) is drawn from a
//! 2x2 table — both 0.55, generalist only 0.05, specialist only 0.20,
//! neither 0.20 — so the marginals are α_gen = 0.60, α_spec = 0.75 while
//! 73% of the specialist's correct events are shared with the generalist.
//! Off R correctness is independent with α_gen = 0.45, α_spec = 0.15.
//! Bayes: defer to the specialist on R, classify elsewhere.

use super::rng::{CounterRng, DrawPurpose};
use super::{LabeledDataset, SuiteSpec};
use crate::bayes::{GroundTruth, Region};
use crate::surrogates::Sample;

pub const RARE_REGION_MASS: f64 = 0.15;
pub const POSTERIOR_ON_R: f64 = 0.60;
pub const POSTERIOR_OFF_R: f64 = 0.90;
/// Joint correctness on R: (both, generalist only, specialist only).
pub const JOINT_ON_R: [f64; 3] = [0.55, 0.05, 0.20];
pub const ALPHA_GEN_ON_R: f64 = 0.60;
pub const ALPHA_SPEC_ON_R: f64 = 0.75;
pub const ALPHA_GEN_OFF_R: f64 = 0.45;
pub const ALPHA_SPEC_OFF_R: f64 = 0.15;

pub const GENERALIST: usize = 0;
pub const SPECIALIST: usize = 1;

pub fn generate(spec: &SuiteSpec) -> LabeledDataset {
    let k = spec.num_classes;
    let domain = spec.suite.rng_domain();

    let mut samples = Vec::with_capacity(spec.total());
    let mut truths = Vec::with_capacity(spec.total());

    for idx in 0..spec.total() as u64 {
        let stream = |p| CounterRng::for_draw(domain, spec.seed, idx, p);
        let on_r = stream(DrawPurpose::Region).bernoulli(RARE_REGION_MASS);

        let mut raw = stream(DrawPurpose::RawFeatures);
        let z1 = 2.0 * raw.uniform() - 1.0;
        let z2 = 2.0 * raw.uniform() - 1.0;
        let max_class = if z1 >= 0.0 { 0 } else { 1 };

        let top = if on_r { POSTERIOR_ON_R } else { POSTERIOR_OFF_R };
        let mut eta = vec![1.0 - top; k];
        eta[max_class] = top;
        let label = stream(DrawPurpose::Label).categorical(&eta);

        let mut event = stream(DrawPurpose::ExpertEvent);
        let (gen_correct, spec_correct) = if on_r {
            let v = event.uniform();
            if v < JOINT_ON_R[0] {
                (true, true)
            } else if v < JOINT_ON_R[0] + JOINT_ON_R[1] {
                (true, false)
            } else if v < JOINT_ON_R[0] + JOINT_ON_R[1] + JOINT_ON_R[2] {
                (false, true)
            } else {
                (false, false)
            }
        } else {
            (event.bernoulli(ALPHA_GEN_OFF_R), event.bernoulli(ALPHA_SPEC_OFF_R))
        };

        let mut wrong = stream(DrawPurpose::WrongLabel);
        let mut pred = |correct: bool| if correct { label } else { wrong.wrong_label(k, label) };
        let preds = vec![pred(gen_correct), pred(spec_correct)];

        let alpha = if on_r {
            vec![ALPHA_GEN_ON_R, ALPHA_SPEC_ON_R]
        } else {
            vec![ALPHA_GEN_OFF_R, ALPHA_SPEC_OFF_R]
        };

        samples.push(Sample::new(vec![z1, z2, if on_r { 1.0 } else { 0.0 }], label, preds));
        truths.push(GroundTruth::new(
            eta,
            alpha,
            if on_r { Region::Defer } else { Region::Classify },
        ));
    }

    LabeledDataset { samples, truths, meta: spec.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::suites::SuiteKind;
    use approx::assert_abs_diff_eq;

    #[test]
    fn marginals_from_joint_table() {
        // α_spec = both + spec-only, α_gen = both + gen-only.
        assert_abs_diff_eq!(JOINT_ON_R[0] + JOINT_ON_R[2], ALPHA_SPEC_ON_R, epsilon = 1e-15);
        assert_abs_diff_eq!(JOINT_ON_R[0] + JOINT_ON_R[1], ALPHA_GEN_ON_R, epsilon = 1e-15);
        // Pr(gen correct | spec correct, R) = 0.55/0.75 ≈ 0.733.
        assert_abs_diff_eq!(JOINT_ON_R[0] / ALPHA_SPEC_ON_R, 0.7333333333333333, epsilon = 1e-10);
    }

    /// Empirical 2x2 cell frequencies over the R samples of a 1e5 draw stay
    /// within ±0.01 of the table.
    #[test]
    fn empirical_joint_table_on_r() {
        let mut spec = SuiteSpec::new(SuiteKind::RareSpecialist, 77);
        spec.n_train = 100_000;
        spec.n_val = 1;
        spec.n_test = 1;
        let ds = generate(&spec);

        let mut cells = [0usize; 4];
        let mut n_r = 0usize;
        for (sample, gt) in ds.samples.iter().zip(&ds.truths) {
            if gt.region != Region::Defer {
                continue;
            }
            n_r += 1;
            let gen = sample.expert_preds[GENERALIST] == sample.label;
            let spc = sample.expert_preds[SPECIALIST] == sample.label;
            cells[match (gen, spc) {
                (true, true) => 0,
                (true, false) => 1,
                (false, true) => 2,
                (false, false) => 3,
            }] += 1;
        }
        let expected = [0.55, 0.05, 0.20, 0.20];
        for (i, &e) in expected.iter().enumerate() {
            let freq = cells[i] as f64 / n_r as f64;
            assert!((freq - e).abs() < 0.01, "cell {i}: {freq} vs {e}");
        }
        // And the region mass itself.
        let mass = n_r as f64 / ds.len() as f64;
        assert!((mass - RARE_REGION_MASS).abs() < 0.01);
    }

    #[test]
    fn features_carry_region_flag_and_sign_signal() {
        let mut spec = SuiteSpec::new(SuiteKind::RareSpecialist, 9);
        spec.n_train = 2000;
        spec.n_val = 10;
        spec.n_test = 10;
        let ds = generate(&spec);
        for (sample, gt) in ds.samples.iter().zip(&ds.truths) {
            assert_eq!(sample.features.len(), 3);
            let flag = sample.features[2];
            assert_eq!(flag == 1.0, gt.region == Region::Defer);
            let max_class = if sample.features[0] >= 0.0 { 0 } else { 1 };
            assert_eq!(
                gt.class_posterior[max_class],
                gt.max_posterior(),
                "posterior must peak at the sign class"
            );
        }
    }
}
