//! Shared acceptability with a rotating sector-best expert (K=10, J=4).
//!
//! A defer region D ~ Bernoulli(0.60) draws a sector Q ~ Unif[J]; the
//! label is uniform, the class features sit at 3.1·1 + ε (uninformative),
//! and the sector feature X_{K+Q} = 2.2 + ε identifies the locally best
//! expert. Joint correctness on D follows the event model
//!
//!   all correct 0.10 | Q + one random other 0.78 | Q only 0.05 |
//!   one random non-Q only 0.03 | none 0.04
//!
//! giving marginals α_Q = 0.93 and α_{j≠Q} = 0.37, with at least two
//! experts correct on 88% of D. Off D the posterior is near-deterministic
//! as in the nested suite and experts are independently correct with 0.05.
//! Bayes: defer to expert Q on D, classify elsewhere.

use super::rng::{CounterRng, DrawPurpose};
use super::{LabeledDataset, SuiteSpec, NOISE_STD};
use crate::bayes::{GroundTruth, Region};
use crate::surrogates::Sample;

pub const DEFER_REGION_MASS: f64 = 0.60;
/// Event probabilities: all, Q+other, Q only, non-Q only (none = rest).
pub const EVENTS: [f64; 4] = [0.10, 0.78, 0.05, 0.03];
pub const ALPHA_SECTOR: f64 = 0.93;
pub const ALPHA_OTHER: f64 = 0.37;
pub const ALPHA_CLASSIFY_SIDE: f64 = 0.05;
const DOMINANT_POSTERIOR: f64 = 0.998;
const CLASS_FEATURE_BASE: f64 = 3.1;
const CLASS_FEATURE_DOMINANT: f64 = 5.0;
const SECTOR_FEATURE: f64 = 2.2;

pub fn generate(spec: &SuiteSpec) -> LabeledDataset {
    let k = spec.num_classes;
    let j = spec.num_experts;
    let domain = spec.suite.rng_domain();

    let mut samples = Vec::with_capacity(spec.total());
    let mut truths = Vec::with_capacity(spec.total());

    for idx in 0..spec.total() as u64 {
        let stream = |p| CounterRng::for_draw(domain, spec.seed, idx, p);
        let on_d = stream(DrawPurpose::Region).bernoulli(DEFER_REGION_MASS);

        let mut base = vec![CLASS_FEATURE_BASE; k];
        base.extend(std::iter::repeat_n(0.0, j));

        let (label, eta, sector, correct) = if on_d {
            let sector = stream(DrawPurpose::Sector).below(j);
            base[k + sector] = SECTOR_FEATURE;
            let label = stream(DrawPurpose::Label).below(k);
            let eta = vec![1.0 / k as f64; k];

            let mut event = stream(DrawPurpose::ExpertEvent);
            let v = event.uniform();
            let mut correct = vec![false; j];
            // "One random other" draws uniformly among the J-1 non-sector
            // experts from the same per-sample stream.
            let random_other = |event: &mut CounterRng| {
                let r = event.below(j - 1);
                if r >= sector {
                    r + 1
                } else {
                    r
                }
            };
            if v < EVENTS[0] {
                correct.fill(true);
            } else if v < EVENTS[0] + EVENTS[1] {
                correct[sector] = true;
                correct[random_other(&mut event)] = true;
            } else if v < EVENTS[0] + EVENTS[1] + EVENTS[2] {
                correct[sector] = true;
            } else if v < EVENTS[0] + EVENTS[1] + EVENTS[2] + EVENTS[3] {
                correct[random_other(&mut event)] = true;
            }
            (label, eta, Some(sector), correct)
        } else {
            let dominant = stream(DrawPurpose::DominantClass).below(k);
            base[dominant] = CLASS_FEATURE_DOMINANT;
            let mut eta = vec![(1.0 - DOMINANT_POSTERIOR) / (k - 1) as f64; k];
            eta[dominant] = DOMINANT_POSTERIOR;
            let label = stream(DrawPurpose::Label).categorical(&eta);
            let mut event = stream(DrawPurpose::ExpertEvent);
            let correct: Vec<bool> =
                (0..j).map(|_| event.bernoulli(ALPHA_CLASSIFY_SIDE)).collect();
            (label, eta, None, correct)
        };

        let noise = stream(DrawPurpose::FeatureNoise).normals(k + j);
        for (b, n) in base.iter_mut().zip(&noise) {
            *b += NOISE_STD * n;
        }

        let mut wrong = stream(DrawPurpose::WrongLabel);
        let preds: Vec<usize> = correct
            .iter()
            .map(|&c| if c { label } else { wrong.wrong_label(k, label) })
            .collect();

        let alpha: Vec<f64> = match sector {
            Some(q) => {
                (0..j).map(|e| if e == q { ALPHA_SECTOR } else { ALPHA_OTHER }).collect()
            }
            None => vec![ALPHA_CLASSIFY_SIDE; j],
        };

        samples.push(Sample::new(base, label, preds));
        truths.push(GroundTruth::new(
            eta,
            alpha,
            match sector {
                Some(q) => Region::DeferSector(q),
                None => Region::Classify,
            },
        ));
    }

    LabeledDataset { samples, truths, meta: spec.clone() }
}
