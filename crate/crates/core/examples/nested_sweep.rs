// inspect decoupled head dynamics on the classify side
use deferlab::bayes::Region;
use deferlab::numkit::{sigmoid, softmax};
use deferlab::suites::{generate, SuiteKind, SuiteSpec};
use deferlab::surrogates::{Scores, SurrogateConfig, SurrogateKind};
use deferlab::trainer::{train, TrainConfig};

fn main() {
    let spec = SuiteSpec::new(SuiteKind::NestedRedundant, 1);
    let data = generate(&spec).unwrap();
    for epochs in [50usize, 100, 200, 300, 400] {
        let mut cfg = TrainConfig::new(SurrogateConfig::new(SurrogateKind::Decoupled), 1);
        cfg.epochs = epochs;
        // report the LAST epoch model, not best checkpoint: tweak via history
        let (model, hist) = train(&data, &cfg).unwrap();
        let test = data.test();
        let (mut pmax_c, mut umax_c, mut n_c) = (0.0, 0.0, 0usize);
        let (mut pmax_d, mut umax_d, mut n_d) = (0.0, 0.0, 0usize);
        for (s, gt) in test.samples.iter().zip(test.truths) {
            let Scores::Split(ds) = model.forward(&s.features) else { panic!() };
            let p = softmax(&ds.class).unwrap();
            let pm = p.values().iter().cloned().fold(f64::MIN, f64::max);
            let um = ds.expert.iter().cloned().map(sigmoid).fold(f64::MIN, f64::max);
            if gt.region == Region::Classify { pmax_c += pm; umax_c += um; n_c += 1; }
            else { pmax_d += pm; umax_d += um; n_d += 1; }
        }
        println!("ep={epochs:4} best={:3}  Dc: p_max={:.3} u_max={:.3} | D: p_max={:.3} u_max={:.3} | reg_last={:.4}",
            hist.best_epoch,
            pmax_c / n_c as f64, umax_c / n_c as f64,
            pmax_d / n_d as f64, umax_d / n_d as f64,
            hist.epochs.last().unwrap().val_exact_regret);
    }
}
