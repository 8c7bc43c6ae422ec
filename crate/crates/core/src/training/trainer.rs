use std::time::{Duration, Instant};

use rayon::ThreadPool;

use crate::data::{minibatches, Dataset, Sample};
use crate::error::{Error, Result};
use crate::forest::{build_forest, Forest};
use crate::training::{sgd_step, theta_gradient_with, update_leaves, TrainConfig, Velocity};

/// Cycles compared by the optional early stop.
const EARLY_STOP_WINDOWS: usize = 10;
const EARLY_STOP_MIN_GAIN: f64 = 1e-6;

/// Progress reported to the caller's sink.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainEvent {
    /// One SGD step finished; `loss` is the forest loss on that batch before
    /// the step.
    Step {
        iteration: usize,
        loss: f64,
        elapsed: Duration,
    },
    /// A leaf phase finished after `batches` SGD steps since the previous
    /// one.
    LeafUpdate {
        iteration: usize,
        batches: usize,
        samples: usize,
    },
}

/// Builds a fresh forest from `config` and trains it on `dataset`.
pub fn train(
    dataset: &Dataset,
    config: &TrainConfig,
    sink: impl FnMut(&TrainEvent),
) -> Result<Forest> {
    let forest = build_forest(config, dataset.feature_dim(), dataset.label_count(), config.seed)?;
    train_forest(forest, dataset, config, sink)
}

/// Alternates SGD on `Θ` with leaf phases:
///
/// 1. draw the next mini-batch (epoch-wise permutations of the data), take
///    one SGD step on it, and keep it in the buffer;
/// 2. after `buffer_batches` steps, run `leaf_update_iters` fixed-point
///    iterations for every tree over the buffered samples, then clear the
///    buffer;
/// 3. stop after `max_iterations` steps. A partially filled buffer gets one
///    last leaf phase.
pub fn train_forest(
    forest: Forest,
    dataset: &Dataset,
    config: &TrainConfig,
    sink: impl FnMut(&TrainEvent),
) -> Result<Forest> {
    config.validate()?;
    if forest.input_dim() != dataset.feature_dim() || forest.label_count() != dataset.label_count() {
        return Err(Error::Dimension {
            context: "forest vs dataset",
            expected: forest.input_dim() * forest.label_count(),
            found: dataset.feature_dim() * dataset.label_count(),
        });
    }
    let pool = if config.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Some(pool)
    } else {
        None
    };
    run(forest, dataset, config, pool.as_ref(), sink)
}

fn run(
    mut forest: Forest,
    dataset: &Dataset,
    config: &TrainConfig,
    pool: Option<&ThreadPool>,
    mut sink: impl FnMut(&TrainEvent),
) -> Result<Forest> {
    let start = Instant::now();
    let samples = dataset.samples();
    let batch_size = config.batch_size.min(samples.len());
    let mut velocity = Velocity::zeros_like(&forest);

    let mut epoch = 0u64;
    let mut batches = minibatches(samples.len(), batch_size, config.seed, epoch)?;
    let mut cursor = 0;

    let mut buffer: Vec<&Sample> = Vec::with_capacity(config.buffer_batches * batch_size);
    let mut buffered_batches = 0;
    let mut cycle_loss = 0.0;
    let mut cycle_means: Vec<f64> = Vec::new();

    let mut iteration = 0;
    while iteration < config.max_iterations {
        if cursor == batches.len() {
            epoch += 1;
            batches = minibatches(samples.len(), batch_size, config.seed, epoch)?;
            cursor = 0;
        }
        let batch: Vec<&Sample> = batches[cursor].iter().map(|&i| &samples[i]).collect();
        cursor += 1;

        let grad = match pool {
            Some(p) => p.install(|| theta_gradient_with(&forest, &batch, config.epsilon, true))?,
            None => theta_gradient_with(&forest, &batch, config.epsilon, false)?,
        };
        if !grad.loss.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss at iteration {iteration}")));
        }
        sgd_step(&mut forest, &grad, config, &mut velocity)?;
        iteration += 1;
        sink(&TrainEvent::Step {
            iteration,
            loss: grad.loss,
            elapsed: start.elapsed(),
        });

        cycle_loss += grad.loss;
        buffer.extend(batch);
        buffered_batches += 1;
        if buffered_batches == config.buffer_batches {
            leaf_phase(&mut forest, &buffer, config, pool)?;
            sink(&TrainEvent::LeafUpdate {
                iteration,
                batches: buffered_batches,
                samples: buffer.len(),
            });
            buffer.clear();
            buffered_batches = 0;

            cycle_means.push(cycle_loss / config.buffer_batches as f64);
            cycle_loss = 0.0;
            if config.early_stop && converged(&cycle_means) {
                break;
            }
        }
    }
    if buffered_batches > 0 {
        leaf_phase(&mut forest, &buffer, config, pool)?;
        sink(&TrainEvent::LeafUpdate {
            iteration,
            batches: buffered_batches,
            samples: buffer.len(),
        });
    }
    Ok(forest)
}

fn leaf_phase(forest: &mut Forest, buffer: &[&Sample], config: &TrainConfig, pool: Option<&ThreadPool>) -> Result<()> {
    let iters = config.leaf_update_iters;
    match pool {
        Some(p) => p.install(|| update_leaves(forest, buffer, iters, config.epsilon, true)),
        None => update_leaves(forest, buffer, iters, config.epsilon, false),
    }
}

fn converged(cycle_means: &[f64]) -> bool {
    let n = cycle_means.len();
    n > EARLY_STOP_WINDOWS && cycle_means[n - 1 - EARLY_STOP_WINDOWS] - cycle_means[n - 1] < EARLY_STOP_MIN_GAIN
}
