//! Synthetic label-distribution data.
//!
//! Features come from a mixture of isotropic Gaussians. Each component owns
//! a canonical target distribution, either a single discretized Gaussian
//! over the label indices or a two-peak mixture of them. A per-sample shift
//! of the peak positions, proportional to where the sample sits inside its
//! component along a fixed direction, makes the targets vary smoothly with
//! the features. `noise` scales that shift; at zero every target is exactly
//! its component's canonical distribution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelDistribution, Sample};
use crate::error::{Error, Result};

/// Largest peak shift, kept below half a label so a peak never ties with its
/// neighbour.
const MAX_SHIFT: f64 = 0.45;

/// Discretized Gaussian over label indices `0..label_count`:
/// `p[c] ∝ exp(-(c - mean_index)² / (2 sigma²))`.
pub fn gaussian_label_distribution(
    mean_index: f64,
    sigma: f64,
    label_count: usize,
) -> Result<LabelDistribution> {
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    if label_count < 2 {
        return Err(Error::Config(format!(
            "need at least 2 labels, got {label_count}"
        )));
    }
    let top = (label_count - 1) as f64;
    if !(0.0..=top).contains(&mean_index) {
        return Err(Error::Config(format!(
            "mean index {mean_index} outside [0, {top}]"
        )));
    }
    let weights = gaussian_weights(mean_index, sigma, label_count);
    LabelDistribution::normalized(weights)
}

fn gaussian_weights(mean_index: f64, sigma: f64, label_count: usize) -> Vec<f64> {
    let two_var = 2.0 * sigma * sigma;
    (0..label_count)
        .map(|c| {
            let diff = c as f64 - mean_index;
            (-(diff * diff) / two_var).exp()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthMode {
    GaussianUnimodal,
    TwoComponentMixture,
}

impl std::str::FromStr for SynthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-unimodal" | "unimodal" => Ok(SynthMode::GaussianUnimodal),
            "two-component-mixture" | "mixture" => Ok(SynthMode::TwoComponentMixture),
            other => Err(Error::Config(format!("unknown synth mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub samples: usize,
    pub feature_dim: usize,
    pub label_count: usize,
    pub mode: SynthMode,
    /// Number of feature clusters.
    pub components: usize,
    pub noise: f64,
    /// Width of every label peak, in label-index units.
    pub sigma: f64,
    /// Spread of cluster centres.
    pub center_std: f64,
    /// Spread of samples around their cluster centre.
    pub feature_std: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            samples: 1000,
            feature_dim: 10,
            label_count: 8,
            mode: SynthMode::TwoComponentMixture,
            components: 4,
            noise: 0.3,
            sigma: 1.0,
            center_std: 3.0,
            feature_std: 1.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Minimum distance between the two peaks in mixture mode.
    pub fn peak_separation(&self) -> usize {
        (4.0 * self.sigma).ceil() as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.samples == 0 || self.feature_dim == 0 || self.components == 0 {
            return bad("samples, feature_dim and components must be positive".into());
        }
        if self.label_count < 2 {
            return bad(format!("need at least 2 labels, got {}", self.label_count));
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return bad(format!("noise must be non-negative, got {}", self.noise));
        }
        if !(self.center_std >= 0.0 && self.feature_std >= 0.0) {
            return bad("feature spreads must be non-negative".into());
        }
        if self.mode == SynthMode::TwoComponentMixture
            && self.label_count < self.peak_separation() + 1
        {
            return bad(format!(
                "mixture mode with sigma {} needs at least {} labels",
                self.sigma,
                self.peak_separation() + 1
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthComponent {
    pub center: Vec<f64>,
    /// Label-index positions of the peaks (one or two).
    pub peaks: Vec<f64>,
    /// Mixing weight of each peak.
    pub weights: Vec<f64>,
    pub canonical: LabelDistribution,
}

/// The generating process, written next to a synthesized dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: SynthSpec,
    /// Unit vector along which feature offsets shift the label peaks.
    pub shift_direction: Vec<f64>,
    pub components: Vec<SynthComponent>,
    /// Generating component of every sample.
    pub assignments: Vec<usize>,
}

impl GroundTruth {
    /// Target distribution for a feature vector drawn from `component`.
    pub fn target_for(&self, component: usize, features: &[f64]) -> LabelDistribution {
        let comp = &self.components[component];
        let offset: f64 = features
            .iter()
            .zip(&comp.center)
            .zip(&self.shift_direction)
            .map(|((x, c), w)| (x - c) * w)
            .sum();
        let shift = (self.spec.noise * offset).clamp(-MAX_SHIFT, MAX_SHIFT);
        peaked_distribution(&comp.peaks, &comp.weights, shift, self.spec.sigma, self.spec.label_count)
    }
}

fn peaked_distribution(
    peaks: &[f64],
    weights: &[f64],
    shift: f64,
    sigma: f64,
    label_count: usize,
) -> LabelDistribution {
    let top = (label_count - 1) as f64;
    let mut mix = vec![0.0; label_count];
    for (&peak, &w) in peaks.iter().zip(weights) {
        let dist = gaussian_label_distribution((peak + shift).clamp(0.0, top), sigma, label_count)
            .expect("validated synth parameters");
        for (m, p) in mix.iter_mut().zip(dist.as_slice()) {
            *m += w * p;
        }
    }
    if peaks.len() == 1 {
        // A single peak with weight one is already normalized.
        return LabelDistribution::from_vec_unchecked(mix);
    }
    LabelDistribution::normalized(mix).expect("positive mixture")
}

/// Draws a dataset and the ground truth that produced it. Deterministic in
/// `spec` (including its seed).
pub fn synthesize(spec: &SynthSpec) -> Result<(Dataset, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let m = spec.feature_dim;
    let c_top = spec.label_count - 1;

    let mut direction: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        direction.iter_mut().for_each(|v| *v /= norm);
    }

    let mut components = Vec::with_capacity(spec.components);
    for _ in 0..spec.components {
        let center: Vec<f64> = (0..m)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                spec.center_std * z
            })
            .collect();
        let (peaks, weights) = match spec.mode {
            SynthMode::GaussianUnimodal => (vec![rng.random_range(0..=c_top) as f64], vec![1.0]),
            SynthMode::TwoComponentMixture => {
                let sep = spec.peak_separation();
                let a = rng.random_range(0..=c_top - sep);
                let b = rng.random_range(a + sep..=c_top);
                let w = rng.random_range(0.35..=0.65);
                (vec![a as f64, b as f64], vec![w, 1.0 - w])
            }
        };
        let canonical = peaked_distribution(&peaks, &weights, 0.0, spec.sigma, spec.label_count);
        components.push(SynthComponent {
            center,
            peaks,
            weights,
            canonical,
        });
    }

    let mut truth = GroundTruth {
        spec: spec.clone(),
        shift_direction: direction,
        components,
        assignments: Vec::with_capacity(spec.samples),
    };

    let mut samples = Vec::with_capacity(spec.samples);
    for _ in 0..spec.samples {
        let k = rng.random_range(0..spec.components);
        let features: Vec<f64> = truth.components[k]
            .center
            .iter()
            .map(|c| {
                let z: f64 = StandardNormal.sample(&mut rng);
                c + spec.feature_std * z
            })
            .collect();
        let target = truth.target_for(k, &features);
        truth.assignments.push(k);
        samples.push(Sample::new(features, target));
    }
    let dataset = Dataset::new(samples, None)?;
    Ok((dataset, truth))
}
