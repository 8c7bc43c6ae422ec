//! Train on an in-memory dataset, predict, and round-trip the model file.
//!
//!     cargo run --release --example train_predict

use ldlf::forest::{load_model, save_model};
use ldlf::{train, Dataset, LabelDistribution, Sample, TrainConfig};

fn main() -> ldlf::Result<()> {
    // Two regions of a 1-d input, each with its own label distribution.
    let samples: Vec<Sample> = (0..200)
        .map(|i| {
            let x = i as f64 / 100.0 - 1.0;
            let d = if x < 0.0 { vec![0.7, 0.2, 0.1] } else { vec![0.1, 0.3, 0.6] };
            Sample::new(vec![x], LabelDistribution::new(d).unwrap())
        })
        .collect();
    let data = Dataset::new(samples, Some(vec!["low".into(), "mid".into(), "high".into()]))?;

    let config = TrainConfig {
        tree_count: 3,
        tree_depth: 4,
        output_units: 8,
        batch_size: 20,
        buffer_batches: 10,
        max_iterations: 500,
        ..TrainConfig::default()
    };
    let forest = train(&data, &config, |_| {})?;

    for x in [-0.8, -0.1, 0.1, 0.8] {
        let g = forest.predict(&[x])?;
        let label = &data.label_names().unwrap()[g.argmax()];
        println!("x = {x:+.1}  ->  {:.3?}  ({label})", g.as_slice());
    }

    let path = std::env::temp_dir().join("ldlf_train_predict.json");
    save_model(&forest, &path)?;
    let reloaded = load_model(&path)?;
    assert_eq!(reloaded, forest);
    println!("model written to {} and reloaded unchanged", path.display());
    Ok(())
}
