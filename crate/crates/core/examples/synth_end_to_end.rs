//! Trains a small forest on a synthetic two-peak dataset and compares the
//! held-out KL against a constant predictor emitting the training-set mean.
//!
//!     cargo run --release --example synth_end_to_end -- [seed]

use std::time::Instant;

use ldlf::data::{kfold_split, synthesize, SynthSpec};
use ldlf::metrics::evaluate_predictions;
use ldlf::{evaluate, train, Measure, TrainConfig};

fn main() -> ldlf::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = SynthSpec { seed, ..SynthSpec::default() };
    let (data, _truth) = synthesize(&spec)?;

    let split = kfold_split(data.len(), 5, seed)?;
    let train_set = data.subset(&split.train_indices(0))?;
    let test_set = data.subset(&split.test_indices(0))?;

    let config = TrainConfig {
        tree_count: 5,
        tree_depth: 5,
        output_units: 32,
        max_iterations: 2000,
        seed,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let forest = train(&train_set, &config, |_| {})?;
    let secs = start.elapsed().as_secs_f64();

    let model_kl = evaluate(&forest, &test_set)?.mean.get(Measure::Kl);
    let mean = train_set.mean_distribution();
    let targets: Vec<_> = test_set.samples().iter().map(|s| s.target.clone()).collect();
    let constant = vec![mean; targets.len()];
    let baseline_kl = evaluate_predictions(&targets, &constant)?.mean.get(Measure::Kl);

    println!("train {} / test {} samples, {secs:.1}s", train_set.len(), test_set.len());
    println!("forest   KL {model_kl:.4}");
    println!("baseline KL {baseline_kl:.4}");
    println!("ratio       {:.3}", model_kl / baseline_kl);
    Ok(())
}
