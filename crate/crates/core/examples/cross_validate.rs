//! Ten-fold cross-validation on a synthetic dataset, printed as a table and
//! as JSON.
//!
//!     cargo run --release --example cross_validate

use ldlf::data::{synthesize, SynthMode, SynthSpec};
use ldlf::{cross_validate, TrainConfig};

fn main() -> ldlf::Result<()> {
    let spec = SynthSpec { samples: 500, mode: SynthMode::GaussianUnimodal, seed: 1, ..SynthSpec::default() };
    let (data, _) = synthesize(&spec)?;
    let config = TrainConfig { tree_count: 3, tree_depth: 5, output_units: 16, max_iterations: 600, ..TrainConfig::default() };

    let report = cross_validate(&data, &config, 10, 0)?;
    print!("{report}");
    println!("{}", report.to_json()?);
    Ok(())
}
