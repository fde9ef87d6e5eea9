//! Synthetic benchmark generators with analytically known Bayes solutions.
//!
//! Each suite emits samples together with their exact ground truth (full
//! class posterior, per-expert correctness probabilities, region tag), so
//! defer regret can be evaluated without Monte Carlo noise. Generation is
//! driven by counter-based RNG streams split per (suite, seed, sample,
//! purpose): the same seed yields bit-identical datasets, independently of
//! generation order.

pub mod distractor;
pub mod io;
pub mod nested;
pub mod rare;
pub mod rng;
pub mod shared;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bayes::GroundTruth;
use crate::surrogates::Sample;

/// Feature noise standard deviation used by every suite.
pub const NOISE_STD: f64 = 0.05;

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("invalid suite spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteKind {
    /// Log-spaced expert accuracies with nested correctness events; overlap
    /// multiplicity grows with J while the Bayes action stays fixed.
    NestedRedundant,
    /// A strong generalist plus a rarely-needed specialist whose correct
    /// events are mostly shared with the generalist.
    RareSpecialist,
    /// A rotating sector-best expert under heavy shared acceptability.
    SharedAcceptability,
    /// One useful expert plus always-incorrect distractors.
    CouplingDistractors,
}

impl SuiteKind {
    pub const ALL: [SuiteKind; 4] = [
        SuiteKind::NestedRedundant,
        SuiteKind::RareSpecialist,
        SuiteKind::SharedAcceptability,
        SuiteKind::CouplingDistractors,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SuiteKind::NestedRedundant => "nested_redundant",
            SuiteKind::RareSpecialist => "rare_specialist",
            SuiteKind::SharedAcceptability => "shared_acceptability",
            SuiteKind::CouplingDistractors => "coupling_distractors",
        }
    }

    /// Domain tag separating the RNG streams of different suites.
    pub(crate) fn rng_domain(self) -> u64 {
        match self {
            SuiteKind::NestedRedundant => 0x4e455354,
            SuiteKind::RareSpecialist => 0x52415245,
            SuiteKind::SharedAcceptability => 0x53484152,
            SuiteKind::CouplingDistractors => 0x44495354,
        }
    }
}

impl std::fmt::Display for SuiteKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SuiteKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        SuiteKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown suite '{s}'"))
    }
}

/// Full description of one dataset draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub suite: SuiteKind,
    pub num_classes: usize,
    pub num_experts: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub seed: u64,
    /// Correct rate of expert 1 on the defer region. Only the distractor
    /// suite reads this.
    #[serde(default = "default_expert_rate")]
    pub expert_rate: f64,
}

fn default_expert_rate() -> f64 {
    0.9
}

impl SuiteSpec {
    /// Suite defaults (class/expert counts and split sizes).
    pub fn new(suite: SuiteKind, seed: u64) -> Self {
        let (num_classes, num_experts, n_train, n_val, n_test) = match suite {
            SuiteKind::NestedRedundant => (16, 24, 900, 1000, 8000),
            SuiteKind::RareSpecialist => (2, 2, 7000, 2000, 18_000),
            SuiteKind::SharedAcceptability => (10, 4, 1000, 1500, 12_000),
            SuiteKind::CouplingDistractors => (3, 5, 4500, 1500, 7000),
        };
        Self {
            suite,
            num_classes,
            num_experts,
            n_train,
            n_val,
            n_test,
            seed,
            expert_rate: default_expert_rate(),
        }
    }

    pub fn with_experts(mut self, num_experts: usize) -> Self {
        self.num_experts = num_experts;
        self
    }

    pub fn with_sizes(mut self, n_train: usize, n_val: usize, n_test: usize) -> Self {
        self.n_train = n_train;
        self.n_val = n_val;
        self.n_test = n_test;
        self
    }

    pub fn total(&self) -> usize {
        self.n_train + self.n_val + self.n_test
    }

    /// Feature dimension of this suite.
    pub fn feature_dim(&self) -> usize {
        match self.suite {
            SuiteKind::NestedRedundant => self.num_classes,
            SuiteKind::RareSpecialist => 3,
            SuiteKind::SharedAcceptability => self.num_classes + self.num_experts,
            SuiteKind::CouplingDistractors => self.num_classes + 1,
        }
    }

    pub fn validate(&self) -> Result<(), SuiteError> {
        let err = |msg: String| Err(SuiteError::InvalidSpec(msg));
        if self.n_train == 0 || self.n_val == 0 || self.n_test == 0 {
            return err("split sizes must be positive".into());
        }
        match self.suite {
            SuiteKind::NestedRedundant => {
                if self.num_experts < 2 {
                    return err(format!(
                        "nested_redundant needs at least 2 experts, got {}",
                        self.num_experts
                    ));
                }
                if self.num_classes < 2 {
                    return err("nested_redundant needs at least 2 classes".into());
                }
            }
            SuiteKind::RareSpecialist => {
                if self.num_classes != 2 || self.num_experts != 2 {
                    return err("rare_specialist is defined for K=2, J=2".into());
                }
            }
            SuiteKind::SharedAcceptability => {
                if self.num_classes != 10 || self.num_experts != 4 {
                    return err("shared_acceptability is defined for K=10, J=4".into());
                }
            }
            SuiteKind::CouplingDistractors => {
                if self.num_classes < 2 || self.num_experts < 1 {
                    return err("coupling_distractors needs K>=2 and J>=1".into());
                }
                if !(0.0..=1.0).contains(&self.expert_rate) {
                    return err("expert_rate must lie in [0, 1]".into());
                }
            }
        }
        Ok(())
    }
}

/// Samples plus aligned analytic truths plus the spec that produced them.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub samples: Vec<Sample>,
    pub truths: Vec<GroundTruth>,
    pub meta: SuiteSpec,
}

/// Borrowed view of one split.
#[derive(Debug, Clone, Copy)]
pub struct DatasetView<'a> {
    pub samples: &'a [Sample],
    pub truths: &'a [GroundTruth],
}

impl DatasetView<'_> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn view(&self, range: std::ops::Range<usize>) -> DatasetView<'_> {
        DatasetView { samples: &self.samples[range.clone()], truths: &self.truths[range] }
    }

    pub fn train(&self) -> DatasetView<'_> {
        self.view(0..self.meta.n_train)
    }

    pub fn val(&self) -> DatasetView<'_> {
        self.view(self.meta.n_train..self.meta.n_train + self.meta.n_val)
    }

    pub fn test(&self) -> DatasetView<'_> {
        self.view(self.meta.n_train + self.meta.n_val..self.meta.total())
    }
}

/// Generate the dataset described by `spec`.
pub fn generate(spec: &SuiteSpec) -> Result<LabeledDataset, SuiteError> {
    spec.validate()?;
    let ds = match spec.suite {
        SuiteKind::NestedRedundant => nested::generate(spec),
        SuiteKind::RareSpecialist => rare::generate(spec),
        SuiteKind::SharedAcceptability => shared::generate(spec),
        SuiteKind::CouplingDistractors => distractor::generate(spec),
    };
    Ok(ds)
}
