//! The six distribution measures between a target and a prediction.
//!
//!     cargo run --example measures

use ldlf::metrics::measure;
use ldlf::{LabelDistribution, Measure};

fn main() -> ldlf::Result<()> {
    let d = LabelDistribution::new(vec![0.5, 0.3, 0.2, 0.0])?;
    let close = LabelDistribution::new(vec![0.45, 0.35, 0.15, 0.05])?;
    let far = LabelDistribution::uniform(4);

    println!("{:<14} {:>10} {:>10} {:>10}", "measure", "d vs d", "close", "uniform");
    for m in Measure::ALL {
        println!(
            "{:<14} {:>10.4} {:>10.4} {:>10.4}   {}",
            m.name(),
            measure(m, &d, &d)?,
            measure(m, &d, &close)?,
            measure(m, &d, &far)?,
            if m.lower_is_better() { "lower is better" } else { "higher is better" },
        );
    }
    Ok(())
}
