//! Per-sample prediction time as the number of trees grows. The forward pass
//! is linear in the tree count at fixed depth and label count.
//!
//!     cargo run --release --example forward_cost

use std::hint::black_box;
use std::time::Instant;

use ldlf::forest::PredictScratch;
use ldlf::{build_forest, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ldlf::Result<()> {
    let (m, c, depth) = (4, 16, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let inputs: Vec<Vec<f64>> = (0..2000)
        .map(|_| (0..m).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();

    println!("{:>6} {:>12}", "trees", "ns/sample");
    for trees in [1, 2, 4, 8, 16, 32] {
        let config = TrainConfig { tree_count: trees, tree_depth: depth, output_units: 64, ..TrainConfig::default() };
        let forest = build_forest(&config, m, c, 0)?;
        let mut scratch = PredictScratch::new(&forest);
        let mut out = vec![0.0; c];
        let mut best = f64::INFINITY;
        for _ in 0..7 {
            let start = Instant::now();
            for x in &inputs {
                forest.predict_with(x, &mut scratch, &mut out)?;
                black_box(&out);
            }
            best = best.min(start.elapsed().as_secs_f64());
        }
        println!("{trees:>6} {:>12.0}", best / inputs.len() as f64 * 1e9);
    }
    Ok(())
}
