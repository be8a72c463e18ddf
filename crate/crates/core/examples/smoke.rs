use mpbandit::harness::*;
use mpbandit::strategy::ScheduleConstants;

fn main() {
    let horizon = 200_000;
    let config = ExperimentConfig {
        k: 3, m: 2, horizon,
        deltas: ExperimentConfig::complete_deltas(&[0.1], horizon),
        means: vec![0.9, 0.5, 0.45], trials: 16, shared_seed: 11, private_seed_base: 1000,
        feedback: FeedbackKind::Undetectable,
        consts: ScheduleConstants::default(),
        algorithm: Algorithm::Pareto,
    };
    let t0 = std::time::Instant::now();
    let results = run_trials(&config, 16).unwrap();
    println!("16 trials wall: {:?}  (mean regret {:.0})", t0.elapsed(),
        results.iter().map(|r| r.pseudo_regret).sum::<f64>() / 16.0);
}
