//! The leaf update on its own: with the routing held fixed, each iteration
//! lowers the tree loss on the buffer without any step size.
//!
//!     cargo run --release --example leaf_update

use ldlf::data::{synthesize, SynthSpec};
use ldlf::training::{leaf_update_iteration, LeafRouting};
use ldlf::{build_forest, TrainConfig};

fn main() -> ldlf::Result<()> {
    let spec = SynthSpec { samples: 300, seed: 3, ..SynthSpec::default() };
    let (data, _) = synthesize(&spec)?;
    let config = TrainConfig { tree_count: 1, tree_depth: 5, output_units: 16, theta_init_std: 0.5, ..TrainConfig::default() };
    let forest = build_forest(&config, data.feature_dim(), data.label_count(), 7)?;

    let routing = LeafRouting::compute(&forest, 0, data.samples())?;
    let mut tree = forest.trees()[0].clone();
    println!("iteration  tree loss");
    println!("{:>9}  {:.6}", 0, routing.tree_loss(&tree, config.epsilon)?);
    for it in 1..=20 {
        let leaves = leaf_update_iteration(&tree, &routing, config.epsilon)?;
        tree.set_leaf_dists(leaves)?;
        println!("{it:>9}  {:.6}", routing.tree_loss(&tree, config.epsilon)?);
    }
    Ok(())
}
