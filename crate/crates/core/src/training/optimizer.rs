use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::training::{GradientBuffer, TrainConfig};

/// Momentum state, shaped like `Θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Velocity(Vec<f64>);

impl Velocity {
    pub fn zeros_like(forest: &Forest) -> Self {
        Velocity(vec![0.0; forest.feature_fn().theta().len()])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// `v ← momentum·v − lr·∇`, then `Θ ← Θ + v`. Leaves are not touched.
pub fn sgd_step(
    forest: &mut Forest,
    grad: &GradientBuffer,
    config: &TrainConfig,
    velocity: &mut Velocity,
) -> Result<()> {
    let theta = forest.feature_fn_mut().theta_mut();
    if grad.d_theta.len() != theta.len() || velocity.0.len() != theta.len() {
        return Err(Error::Dimension {
            context: "gradient vs theta",
            expected: theta.len(),
            found: grad.d_theta.len(),
        });
    }
    if let Some(pos) = grad.d_theta.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite gradient entry {} at theta index {pos} (batch loss {})",
            grad.d_theta[pos], grad.loss
        )));
    }
    for ((t, v), g) in theta.iter_mut().zip(&mut velocity.0).zip(&grad.d_theta) {
        *v = config.momentum * *v - config.learning_rate * g;
        *t += *v;
    }
    Ok(())
}
