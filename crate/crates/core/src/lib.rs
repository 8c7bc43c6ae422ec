//! Label distribution learning forests.
//!
//! A forest of differentiable decision trees maps a feature vector to a
//! probability distribution over `C` labels. Split nodes are sigmoid gates
//! on a shared linear feature function; leaves hold label distributions.
//! Training alternates momentum SGD on the feature function with a
//! step-size-free fixed-point update of the leaves.
//!
//! ```no_run
//! use ldlf::data::{synthesize, SynthSpec};
//! use ldlf::training::{train, TrainConfig};
//!
//! let (dataset, _truth) = synthesize(&SynthSpec::default()).unwrap();
//! let config = TrainConfig { tree_depth: 5, output_units: 32, max_iterations: 2000, ..TrainConfig::default() };
//! let forest = train(&dataset, &config, |_| {}).unwrap();
//! let prediction = forest.predict(&dataset.samples()[0].features).unwrap();
//! println!("{:?}", prediction.as_slice());
//! ```

pub mod cli;
pub mod data;
pub mod error;
pub mod forest;
pub mod metrics;
mod rng;
pub mod training;

pub use data::{Dataset, LabelDistribution, Sample};
pub use error::{Error, Result};
pub use forest::{build_forest, Forest};
pub use metrics::{cross_validate, evaluate, EvaluationReport, Measure};
pub use training::{train, TrainConfig};
