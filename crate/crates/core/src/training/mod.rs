//! Fitting a forest: cross-entropy loss, analytic split-node gradients,
//! momentum SGD on `Θ`, and the multiplicative fixed-point update of the
//! leaf distributions, alternated by [`train`].

mod gradient;
mod leaf;
mod loss;
mod optimizer;
mod trainer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::check_depth_constraint;

pub use gradient::{split_gradient, theta_gradient, theta_gradient_with, GradientBuffer};
pub use leaf::{leaf_update_iteration, update_leaves, LeafRouting, LeafStatistics};
pub use loss::{loss, tree_loss};
pub use optimizer::{sgd_step, Velocity};
pub use trainer::{train, train_forest, TrainEvent};

/// Every knob of the training loop. Defaults follow the reference setup:
/// 5 trees of depth 7 over 64 output units, 20 leaf iterations after every
/// 100 mini-batches, and at most 25000 SGD steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub tree_count: usize,
    pub tree_depth: usize,
    /// Output units of the feature function; at least `2^(depth-1) - 1`.
    pub output_units: usize,
    /// Fixed-point iterations per leaf phase.
    pub leaf_update_iters: usize,
    /// Mini-batches collected between leaf phases.
    pub buffer_batches: usize,
    /// Capped at the training-set size.
    pub batch_size: usize,
    /// Total SGD steps.
    pub max_iterations: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub theta_init_std: f64,
    pub bias: bool,
    pub seed: u64,
    /// Floor for every division and log argument.
    pub epsilon: f64,
    /// Worker threads; 1 selects the sequential reference path.
    pub threads: usize,
    /// Stop once the mean batch loss of a buffer cycle improves by less than
    /// 1e-6 over the previous ten cycles.
    pub early_stop: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            tree_count: 5,
            tree_depth: 7,
            output_units: 64,
            leaf_update_iters: 20,
            buffer_batches: 100,
            batch_size: 64,
            max_iterations: 25000,
            learning_rate: 0.1,
            momentum: 0.9,
            theta_init_std: 0.01,
            bias: true,
            seed: 0,
            epsilon: 1e-12,
            threads: 1,
            early_stop: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.tree_count == 0 {
            return bad("tree_count must be at least 1".into());
        }
        check_depth_constraint(self.tree_depth, self.output_units)?;
        if self.buffer_batches == 0 {
            return bad("buffer_batches must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.theta_init_std > 0.0 && self.theta_init_std.is_finite()) {
            return bad(format!("theta_init_std must be positive, got {}", self.theta_init_std));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1e-3) {
            return bad(format!("epsilon must lie in (0, 1e-3), got {}", self.epsilon));
        }
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        Ok(())
    }
}
