//! Compare the analytic gradient with respect to the split parameters
//! against central finite differences of the loss.
//!
//!     cargo run --release --example gradient_check

use ldlf::training::{loss, theta_gradient};
use ldlf::{build_forest, LabelDistribution, Sample, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> ldlf::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (m, c) = (3, 4);
    let config = TrainConfig { tree_count: 2, tree_depth: 3, output_units: 4, theta_init_std: 0.8, ..TrainConfig::default() };
    let mut forest = build_forest(&config, m, c, 1)?;
    for tree in forest.trees_mut() {
        let leaves: Vec<f64> = (0..tree.leaf_count())
            .flat_map(|_| {
                let w = (0..c).map(|_| rng.random_range(0.05..1.0)).collect();
                LabelDistribution::normalized(w).unwrap().into_vec()
            })
            .collect();
        tree.set_leaf_dists(leaves)?;
    }
    let batch: Vec<Sample> = (0..6)
        .map(|_| {
            let x = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w = (0..c).map(|_| rng.random_range(0.0..1.0)).collect();
            Sample::new(x, LabelDistribution::normalized(w).unwrap())
        })
        .collect();

    let eps = config.epsilon;
    let analytic = theta_gradient(&forest, &batch, eps)?.d_theta;
    let h = 1e-6;
    let mut worst = 0.0f64;
    println!("{:>5} {:>14} {:>14}", "entry", "analytic", "numeric");
    for i in 0..analytic.len() {
        let orig = forest.feature_fn().theta()[i];
        forest.feature_fn_mut().theta_mut()[i] = orig + h;
        let up = loss(&forest, &batch, eps)?;
        forest.feature_fn_mut().theta_mut()[i] = orig - h;
        let down = loss(&forest, &batch, eps)?;
        forest.feature_fn_mut().theta_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        worst = worst.max((numeric - analytic[i]).abs());
        println!("{i:>5} {:>14.8} {numeric:>14.8}", analytic[i]);
    }
    println!("max abs difference {worst:.2e}");
    Ok(())
}
