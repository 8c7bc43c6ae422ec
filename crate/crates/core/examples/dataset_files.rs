//! Synthesize a dataset, write it as `.ldl` and `.csv`, and read both back.
//!
//!     cargo run --example dataset_files

use ldlf::data::{load_dataset, save_dataset, synthesize, DatasetFormat, SynthSpec};

fn main() -> ldlf::Result<()> {
    let spec = SynthSpec { samples: 5, feature_dim: 2, label_count: 6, seed: 9, ..SynthSpec::default() };
    let (data, truth) = synthesize(&spec)?;
    println!("component peaks: {:?}", truth.components.iter().map(|c| &c.peaks).collect::<Vec<_>>());

    let dir = std::env::temp_dir();
    for (name, format) in [("ldlf_demo.ldl", DatasetFormat::Ldl), ("ldlf_demo.csv", DatasetFormat::Csv)] {
        let path = dir.join(name);
        save_dataset(&data, &path, format)?;
        let back = load_dataset(&path, format)?;
        assert_eq!(back.samples(), data.samples());
        println!("--- {} ---", path.display());
        print!("{}", std::fs::read_to_string(&path)?);
    }
    Ok(())
}
