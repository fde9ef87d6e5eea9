//! Logit-space geometry diagnostics on trained models.
//!
//! Three probes measure the differential quantities behind the surrogate
//! pathologies at the operating point training actually reaches:
//!
//! - curvature vs. overlap: per-sample gradient norms and top Hessian
//!   eigenvalues on the nested suite, bucketed by pool size J and by the
//!   realized overlap |𝒥|;
//! - starvation signs: gradients on correct-but-non-winning expert logits
//!   (PiCCE) vs. all correct expert logits (decoupled) on the
//!   rare-specialist suite;
//! - coupling norms: operator norm of the class-expert mixed Hessian block
//!   on the distractor suite as J grows.
//!
//! Eigenvalues come from power iteration; runs that fail to converge are
//! excluded from aggregates and counted per row.

use rayon::prelude::*;

use crate::numkit::{op_norm_rect, top_eig_sym, DenseMatrix, FD_HESS_STEP};
use crate::suites::{generate, SuiteKind, SuiteSpec};
use crate::surrogates::{
    self, asm, decoupled, fd_full_hessian, CorrectSet, Scores, SurrogateConfig, SurrogateKind,
};
use crate::textio::{fmt_f64, fmt_opt_f64};
use crate::trainer::{train, LinearModel, TrainConfig};

/// Aggregation bucket of a report row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bucket {
    /// Expert pool size J of the trained model.
    PoolSize(usize),
    /// Exact realized overlap |𝒥| on the measured samples.
    Overlap(usize),
    /// Realized overlap at least this large.
    OverlapAtLeast(usize),
}

impl std::fmt::Display for Bucket {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bucket::PoolSize(j) => write!(f, "J={j}"),
            Bucket::Overlap(o) => write!(f, "overlap={o}"),
            Bucket::OverlapAtLeast(o) => write!(f, "overlap>={o}"),
        }
    }
}

/// One aggregate row of a geometry report.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryRow {
    pub surrogate: SurrogateKind,
    pub bucket: Bucket,
    pub samples: usize,
    /// Gradient statistic: the norm ‖∇Φ‖₂ for curvature rows, the signed
    /// per-coordinate gradient for starvation rows.
    pub mean_grad: f64,
    pub std_grad: f64,
    pub mean_top_eig: Option<f64>,
    pub std_top_eig: Option<f64>,
    /// Fraction of measured gradients that are strictly positive.
    pub positive_rate: Option<f64>,
    pub mean_mixed_norm: Option<f64>,
    pub std_mixed_norm: Option<f64>,
    /// Power iterations that failed to converge (excluded from means).
    pub nonconverged: usize,
    /// Worst excess of a per-sample eigenvalue/norm over its analytic
    /// bound; at most ~1e-9 when everything is in order.
    pub max_over_bound: Option<f64>,
    /// Largest entrywise gap between the analytic mixed block and the
    /// finite-difference Hessian, over the cross-checked samples.
    pub fd_mixed_err: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeometryReport {
    pub rows: Vec<GeometryRow>,
}

impl GeometryReport {
    pub const CSV_HEADER: &'static str = "surrogate,bucket,samples,mean_grad,std_grad,\
mean_top_eig,std_top_eig,positive_rate,mean_mixed_norm,std_mixed_norm,nonconverged,\
max_over_bound,fd_mixed_err";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.surrogate,
                r.bucket,
                r.samples,
                fmt_f64(r.mean_grad),
                fmt_f64(r.std_grad),
                fmt_opt_f64(r.mean_top_eig),
                fmt_opt_f64(r.std_top_eig),
                fmt_opt_f64(r.positive_rate),
                fmt_opt_f64(r.mean_mixed_norm),
                fmt_opt_f64(r.std_mixed_norm),
                r.nonconverged,
                fmt_opt_f64(r.max_over_bound),
                fmt_opt_f64(r.fd_mixed_err),
            ));
        }
        out
    }

    pub fn row(&self, surrogate: SurrogateKind, bucket: Bucket) -> Option<&GeometryRow> {
        self.rows.iter().find(|r| r.surrogate == surrogate && r.bucket == bucket)
    }
}

/// Training and measurement knobs shared by the probes.
#[derive(Debug, Clone)]
pub struct ProbeConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Total expert weight λ; the decoupled per-expert weight is β = λ/J.
    pub lambda: f64,
    /// Qualifying test samples measured per (J, seed) run.
    pub samples_per_run: usize,
    pub eig_iters: usize,
    pub eig_tol: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            lr: 1e-2,
            epochs: 200,
            batch_size: 128,
            lambda: 1.0,
            samples_per_run: 200,
            eig_iters: 1000,
            eig_tol: 1e-10,
        }
    }
}

impl ProbeConfig {
    fn train_config(&self, kind: SurrogateKind, num_experts: usize, seed: u64) -> TrainConfig {
        let beta = self.lambda / num_experts as f64;
        let mut cfg =
            TrainConfig::new(SurrogateConfig::new(kind).with_beta(beta), seed);
        cfg.lr = self.lr;
        cfg.epochs = self.epochs;
        cfg.batch_size = self.batch_size;
        cfg
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn grad_norm(grad: &[f64]) -> f64 {
    grad.iter().map(|g| g * g).sum::<f64>().sqrt()
}

/// One curvature measurement.
struct CurvaturePoint {
    overlap: usize,
    grad_norm: f64,
    top_eig: Option<f64>,
    /// λ minus its analytic bound.
    over_bound: f64,
}

fn train_on_nested(
    kind: SurrogateKind,
    num_experts: usize,
    seed: u64,
    probe: &ProbeConfig,
) -> (LinearModel, crate::suites::LabeledDataset) {
    let spec = SuiteSpec::new(SuiteKind::NestedRedundant, seed)
        .with_experts(num_experts)
        .with_sizes(3500, 1000, 6000);
    let data = generate(&spec).expect("valid nested spec");
    let cfg = probe.train_config(kind, num_experts, seed);
    let (model, _) = train(&data, &cfg).expect("nested probe training");
    (model, data)
}

fn curvature_points(
    kind: SurrogateKind,
    num_experts: usize,
    seed: u64,
    probe: &ProbeConfig,
) -> Vec<CurvaturePoint> {
    let (model, data) = train_on_nested(kind, num_experts, seed, probe);
    let test = data.test();
    let cfg = probe.train_config(kind, num_experts, seed).surrogate;

    let mut points = Vec::new();
    for sample in test.samples {
        if points.len() >= probe.samples_per_run {
            break;
        }
        let overlap = CorrectSet::from_sample(sample).len();
        if overlap == 0 {
            continue;
        }
        let scores = model.forward(&sample.features);
        let lg = surrogates::loss_grad(&cfg, &scores, sample).expect("probe loss");
        let gn = grad_norm(&lg.grad);

        let (top_eig, bound) = match (&scores, kind) {
            (Scores::Augmented(a), SurrogateKind::AddCe) => {
                let h = surrogates::add_ce::hessian(a, sample);
                let est = top_eig_sym(&h, probe.eig_iters, probe.eig_tol).expect("symmetric");
                let bound = (1.0 + overlap as f64) / 2.0;
                (est.converged.then_some(est.value), bound)
            }
            (Scores::Split(ds), SurrogateKind::Decoupled) => {
                let blocks = decoupled::hessian(ds, sample, &cfg);
                let class =
                    top_eig_sym(&blocks.class_block, probe.eig_iters, probe.eig_tol)
                        .expect("symmetric");
                let expert_max =
                    blocks.expert_diag.iter().copied().fold(0.0f64, f64::max);
                (class.converged.then(|| class.value.max(expert_max)), 0.5)
            }
            _ => unreachable!("curvature probe runs AddCe and Decoupled only"),
        };
        points.push(CurvaturePoint {
            overlap,
            grad_norm: gn,
            over_bound: top_eig.map_or(f64::NEG_INFINITY, |e| e - bound),
            top_eig,
        });
    }
    points
}

fn curvature_rows(
    kind: SurrogateKind,
    bucket: Bucket,
    points: Vec<&CurvaturePoint>,
) -> GeometryRow {
    let norms: Vec<f64> = points.iter().map(|p| p.grad_norm).collect();
    let eigs: Vec<f64> = points.iter().filter_map(|p| p.top_eig).collect();
    let (mean_grad, std_grad) = mean_std(&norms);
    let (mean_eig, std_eig) = mean_std(&eigs);
    GeometryRow {
        surrogate: kind,
        bucket,
        samples: points.len(),
        mean_grad,
        std_grad,
        mean_top_eig: Some(mean_eig),
        std_top_eig: Some(std_eig),
        positive_rate: None,
        mean_mixed_norm: None,
        std_mixed_norm: None,
        nonconverged: points.len() - eigs.len(),
        max_over_bound: Some(
            points.iter().map(|p| p.over_bound).fold(f64::NEG_INFINITY, f64::max),
        ),
        fd_mixed_err: None,
    }
}

/// Curvature-vs-overlap sweep on the nested suite: trains additive-CE and
/// decoupled models per (J, seed), measures per-sample gradient norms and
/// top Hessian eigenvalues on held-out samples with at least one correct
/// expert, and aggregates per pool size J and per realized overlap |𝒥|
/// (1, 2, 3, >=4).
pub fn curvature_sweep(seeds: &[u64], j_values: &[usize], probe: &ProbeConfig) -> GeometryReport {
    let kinds = [SurrogateKind::AddCe, SurrogateKind::Decoupled];
    let mut runs: Vec<(SurrogateKind, usize, u64)> = Vec::new();
    for &kind in &kinds {
        for &j in j_values {
            for &seed in seeds {
                runs.push((kind, j, seed));
            }
        }
    }

    let mut results: Vec<((SurrogateKind, usize, u64), Vec<CurvaturePoint>)> = runs
        .par_iter()
        .map(|&(kind, j, seed)| ((kind, j, seed), curvature_points(kind, j, seed, probe)))
        .collect();
    results.sort_by_key(|((kind, j, seed), _)| (kind.name(), *j, *seed));

    let mut rows = Vec::new();
    for &kind in &kinds {
        // Per pool size J.
        for &j in j_values {
            let points: Vec<&CurvaturePoint> = results
                .iter()
                .filter(|((k, jj, _), _)| *k == kind && *jj == j)
                .flat_map(|(_, pts)| pts.iter())
                .collect();
            rows.push(curvature_rows(kind, Bucket::PoolSize(j), points));
        }
        // Per realized overlap, pooled over J and seeds.
        let all: Vec<&CurvaturePoint> = results
            .iter()
            .filter(|((k, ..), _)| *k == kind)
            .flat_map(|(_, pts)| pts.iter())
            .collect();
        for overlap in 1..=3usize {
            let pts: Vec<&CurvaturePoint> =
                all.iter().copied().filter(|p| p.overlap == overlap).collect();
            if !pts.is_empty() {
                rows.push(curvature_rows(kind, Bucket::Overlap(overlap), pts));
            }
        }
        let big: Vec<&CurvaturePoint> = all.iter().copied().filter(|p| p.overlap >= 4).collect();
        if !big.is_empty() {
            rows.push(curvature_rows(kind, Bucket::OverlapAtLeast(4), big));
        }
    }
    GeometryReport { rows }
}

/// Starvation probe on the rare-specialist suite: on test samples where
/// both experts are correct, record the gradient on every suppressed
/// correct expert logit (PiCCE: the non-winner; decoupled: each correct
/// expert) and the rate at which it is strictly positive.
pub fn starvation_probe(seeds: &[u64], probe: &ProbeConfig) -> GeometryReport {
    let kinds = [SurrogateKind::Picce, SurrogateKind::Decoupled];
    let mut runs: Vec<(SurrogateKind, u64)> = Vec::new();
    for &kind in &kinds {
        for &seed in seeds {
            runs.push((kind, seed));
        }
    }

    let mut results: Vec<((SurrogateKind, u64), Vec<f64>)> = runs
        .par_iter()
        .map(|&(kind, seed)| {
            let spec = SuiteSpec::new(SuiteKind::RareSpecialist, seed).with_sizes(4500, 1500, 7000);
            let data = generate(&spec).expect("valid rare spec");
            let cfg = probe.train_config(kind, spec.num_experts, seed);
            let (model, _) = train(&data, &cfg).expect("rare probe training");

            let mut grads = Vec::new();
            let test = data.test();
            for sample in test.samples {
                if grads.len() >= probe.samples_per_run {
                    break;
                }
                let correct = CorrectSet::from_sample(sample);
                if correct.len() < 2 {
                    continue;
                }
                let scores = model.forward(&sample.features);
                let lg = surrogates::loss_grad(&cfg.surrogate, &scores, sample).expect("probe loss");
                let k = data.meta.num_classes;
                match kind {
                    SurrogateKind::Picce => {
                        let winner = lg.intermediates.jstar.expect("nonempty correct set");
                        for &j in &correct.indices {
                            if j != winner {
                                grads.push(lg.grad[k + j]);
                            }
                        }
                    }
                    SurrogateKind::Decoupled => {
                        for &j in &correct.indices {
                            grads.push(lg.grad[k + j]);
                        }
                    }
                    _ => unreachable!(),
                }
            }
            ((kind, seed), grads)
        })
        .collect();
    results.sort_by_key(|((kind, seed), _)| (kind.name(), *seed));

    let rows = kinds
        .iter()
        .map(|&kind| {
            let grads: Vec<f64> = results
                .iter()
                .filter(|((k, _), _)| *k == kind)
                .flat_map(|(_, g)| g.iter().copied())
                .collect();
            let (mean_grad, std_grad) = mean_std(&grads);
            let positive = grads.iter().filter(|&&g| g > 0.0).count();
            GeometryRow {
                surrogate: kind,
                bucket: Bucket::OverlapAtLeast(2),
                samples: grads.len(),
                mean_grad,
                std_grad,
                mean_top_eig: None,
                std_top_eig: None,
                positive_rate: Some(positive as f64 / grads.len().max(1) as f64),
                mean_mixed_norm: None,
                std_mixed_norm: None,
                nonconverged: 0,
                max_over_bound: None,
                fd_mixed_err: None,
            }
        })
        .collect();
    GeometryReport { rows }
}

/// Class logit gap to the runner-up; fd cross-checks need it comfortably
/// larger than the differencing step so the reference class stays fixed.
fn reference_class_gap(class_logits: &[f64]) -> f64 {
    let kstar = surrogates::argmax(class_logits);
    let mut runner_up = f64::NEG_INFINITY;
    for (k, &v) in class_logits.iter().enumerate() {
        if k != kstar {
            runner_up = runner_up.max(v);
        }
    }
    class_logits[kstar] - runner_up
}

/// Coupling probe on the distractor suite: the operator norm of the K×J
/// mixed class-expert Hessian block on trained A-SM models as J grows,
/// with the decoupled block reported as the exact zero it is. Analytic
/// blocks are cross-checked against `fd_hessian` on tie-safe samples.
pub fn coupling_probe(seeds: &[u64], j_values: &[usize], probe: &ProbeConfig) -> GeometryReport {
    const FD_CHECKS_PER_RUN: usize = 3;
    let kinds = [SurrogateKind::Asm, SurrogateKind::Decoupled];
    let mut runs: Vec<(SurrogateKind, usize, u64)> = Vec::new();
    for &kind in &kinds {
        for &j in j_values {
            for &seed in seeds {
                runs.push((kind, j, seed));
            }
        }
    }

    struct RunResult {
        norms: Vec<f64>,
        over_bound: f64,
        fd_err: f64,
        fd_checked: usize,
    }

    let mut results: Vec<((SurrogateKind, usize, u64), RunResult)> = runs
        .par_iter()
        .map(|&(kind, j, seed)| {
            let mut spec = SuiteSpec::new(SuiteKind::CouplingDistractors, seed);
            spec.num_experts = j;
            spec = spec.with_sizes(4500, 1500, 7000);
            let data = generate(&spec).expect("valid distractor spec");
            let cfg = probe.train_config(kind, j, seed);
            let (model, _) = train(&data, &cfg).expect("distractor probe training");
            let k = data.meta.num_classes;
            let bound = (j as f64).sqrt() / 4.0;

            let mut out = RunResult {
                norms: Vec::new(),
                over_bound: f64::NEG_INFINITY,
                fd_err: 0.0,
                fd_checked: 0,
            };
            for sample in data.test().samples {
                if out.norms.len() >= probe.samples_per_run {
                    break;
                }
                let scores = model.forward(&sample.features);
                let (block, flat): (DenseMatrix, Vec<f64>) = match &scores {
                    Scores::Augmented(a) => {
                        (asm::mixed_block(a, sample).expect("K>=2"), a.logits.clone())
                    }
                    Scores::Split(ds) => (
                        decoupled::hessian(ds, sample, &cfg.surrogate).mixed_block,
                        ds.to_flat(),
                    ),
                };
                let norm = op_norm_rect(&block);
                out.norms.push(norm);
                out.over_bound = out.over_bound.max(norm - bound);

                if out.fd_checked < FD_CHECKS_PER_RUN
                    && reference_class_gap(&flat[..k]) > 10.0 * FD_HESS_STEP
                {
                    let full = fd_full_hessian(&cfg.surrogate, &flat, sample);
                    let mut err = 0.0f64;
                    for r in 0..k {
                        for c in 0..j {
                            err = err.max((block.get(r, c) - full.get(r, k + c)).abs());
                        }
                    }
                    out.fd_err = out.fd_err.max(err);
                    out.fd_checked += 1;
                }
            }
            ((kind, j, seed), out)
        })
        .collect();
    results.sort_by_key(|((kind, j, seed), _)| (kind.name(), *j, *seed));

    let mut rows = Vec::new();
    for &kind in &kinds {
        for &j in j_values {
            let run_results: Vec<&RunResult> = results
                .iter()
                .filter(|((k, jj, _), _)| *k == kind && *jj == j)
                .map(|(_, r)| r)
                .collect();
            let norms: Vec<f64> =
                run_results.iter().flat_map(|r| r.norms.iter().copied()).collect();
            let (mean_norm, std_norm) = mean_std(&norms);
            rows.push(GeometryRow {
                surrogate: kind,
                bucket: Bucket::PoolSize(j),
                samples: norms.len(),
                mean_grad: f64::NAN,
                std_grad: f64::NAN,
                mean_top_eig: None,
                std_top_eig: None,
                positive_rate: None,
                mean_mixed_norm: Some(mean_norm),
                std_mixed_norm: Some(std_norm),
                nonconverged: 0,
                max_over_bound: Some(
                    run_results.iter().map(|r| r.over_bound).fold(f64::NEG_INFINITY, f64::max),
                ),
                fd_mixed_err: Some(
                    run_results.iter().map(|r| r.fd_err).fold(0.0, f64::max),
                ),
            });
        }
    }
    GeometryReport { rows }
}
