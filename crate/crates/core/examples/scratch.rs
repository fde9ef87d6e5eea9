// Temporary exploration harness; not part of the deliverable.
use deferlab::eval::{evaluate, fit_recovery_check};
use deferlab::suites::{generate, SuiteKind, SuiteSpec};
use deferlab::surrogates::{SurrogateConfig, SurrogateKind};
use deferlab::trainer::{train, TrainConfig};

fn run_suite(kind_label: &str, spec: &SuiteSpec, seeds: &[u64], kinds: &[SurrogateKind]) {
    println!("=== {} K={} J={} n_train={} ===", kind_label, spec.num_classes, spec.num_experts, spec.n_train);
    for &kind in kinds {
        for &seed in seeds {
            let mut spec = spec.clone();
            spec.seed = seed;
            let data = generate(&spec).unwrap();
            let cfg = TrainConfig::new(SurrogateConfig::new(kind), seed);
            let t0 = std::time::Instant::now();
            let (model, hist) = train(&data, &cfg).unwrap();
            let m = evaluate(&model, kind, &data);
            println!(
                "{:10} seed={} regret={:.4} acc={:.3} cov={:.3} spec_sel={:?} shared={:?} best={:?} best_ep={} [{:.1?}]",
                kind.name(), seed, m.exact_regret, m.system_accuracy, m.coverage,
                m.specialist_selection.map(|x| (x*1000.0).round()/1000.0),
                m.shared_correct_routing.map(|x| (x*1000.0).round()/1000.0),
                m.best_expert_selection.map(|x| (x*1000.0).round()/1000.0),
                hist.best_epoch, t0.elapsed()
            );
        }
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let what = args.get(1).map(String::as_str).unwrap_or("nested");

    match what {
        "nested" => {
            let spec = SuiteSpec::new(SuiteKind::NestedRedundant, 0);
            run_suite("nested", &spec, &[1], &SurrogateKind::ALL);
        }
        "rare" => {
            let spec = SuiteSpec::new(SuiteKind::RareSpecialist, 0);
            run_suite("rare", &spec, &[1, 2], &SurrogateKind::ALL);
        }
        "shared" => {
            let spec = SuiteSpec::new(SuiteKind::SharedAcceptability, 0);
            run_suite("shared", &spec, &[1, 2], &SurrogateKind::ALL);
        }
        "recovery" => {
            let mut spec = SuiteSpec::new(SuiteKind::NestedRedundant, 1);
            spec.n_train = 10_000;
            let data = generate(&spec).unwrap();
            let cfg = TrainConfig::new(SurrogateConfig::new(SurrogateKind::Decoupled), 1);
            let (model, _) = train(&data, &cfg).unwrap();
            for row in fit_recovery_check(&model, &data) {
                println!("{:?}", row);
            }
        }
        "curvature" => {
            let probe = deferlab::geom::ProbeConfig::default();
            let report = deferlab::geom::curvature_sweep(&[1, 2, 3], &[2, 4, 8, 16, 32], &probe);
            print!("{}", report.to_csv());
        }
        "coupling" => {
            let probe = deferlab::geom::ProbeConfig::default();
            let report = deferlab::geom::coupling_probe(&[1, 2, 3], &[1, 3, 5, 9, 17], &probe);
            print!("{}", report.to_csv());
        }
        "starve" => {
            let probe = deferlab::geom::ProbeConfig::default();
            let report = deferlab::geom::starvation_probe(&[1, 2, 3], &probe);
            print!("{}", report.to_csv());
        }
        other => eprintln!("unknown scratch mode {other}"),
    }
}
