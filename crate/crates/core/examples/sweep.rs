//! Held-out KL as the number of trees grows, then as the depth of a single
//! tree grows (with 2^(depth-1) output units).
//!
//!     cargo run --release --example sweep

use ldlf::data::{synthesize, SynthSpec};
use ldlf::{cross_validate, Measure, TrainConfig};

fn main() -> ldlf::Result<()> {
    let (data, _) = synthesize(&SynthSpec { samples: 400, seed: 5, ..SynthSpec::default() })?;
    let base = TrainConfig { tree_depth: 4, output_units: 64, max_iterations: 400, ..TrainConfig::default() };

    println!("trees  KL mean ± std");
    for trees in [1, 2, 5, 10] {
        let config = TrainConfig { tree_count: trees, ..base.clone() };
        let r = cross_validate(&data, &config, 5, 0)?;
        println!("{trees:>5}  {:.4} ± {:.4}", r.mean.get(Measure::Kl), r.std.get(Measure::Kl));
    }

    println!("depth  KL mean ± std");
    for depth in [2, 3, 4, 5, 6] {
        let config = TrainConfig { tree_count: 1, tree_depth: depth, output_units: 1 << (depth - 1), ..base.clone() };
        let r = cross_validate(&data, &config, 5, 0)?;
        println!("{depth:>5}  {:.4} ± {:.4}", r.mean.get(Measure::Kl), r.std.get(Measure::Kl));
    }
    Ok(())
}
