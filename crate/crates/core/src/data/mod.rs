//! Datasets of (feature vector, label distribution) pairs.
//!
//! A [`LabelDistribution`] is a point on the probability simplex over `C`
//! labels. A [`Dataset`] pairs `N` feature vectors of length `m` with one
//! distribution each. Everything here is immutable once constructed.

mod format;
mod partition;
mod synth;

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use format::{load_dataset, save_dataset, DatasetFormat, SUM_REPAIR_TOLERANCE};
pub use partition::{kfold_split, minibatches, FoldSplit};
pub use synth::{
    gaussian_label_distribution, synthesize, GroundTruth, SynthComponent, SynthMode, SynthSpec,
};

/// Tolerance on `|Σ p − 1|` for a vector to count as a distribution.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelDistribution(Vec<f64>);

impl LabelDistribution {
    /// Validates that every entry lies in `[0, 1]` and the entries sum to one
    /// within [`SIMPLEX_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_simplex(&probs, SIMPLEX_TOLERANCE)?;
        Ok(LabelDistribution(probs))
    }

    /// Divides by the sum. Fails on negative or non-finite entries and on an
    /// all-zero vector.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty vector".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidDistribution(format!("bad weight {w}")));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        for w in &mut weights {
            *w /= total;
        }
        Ok(LabelDistribution(weights))
    }

    pub fn uniform(label_count: usize) -> Self {
        LabelDistribution(vec![1.0 / label_count as f64; label_count])
    }

    pub fn one_hot(label_count: usize, label: usize) -> Self {
        let mut probs = vec![0.0; label_count];
        probs[label] = 1.0;
        LabelDistribution(probs)
    }

    /// Skips validation; callers guarantee the simplex invariant.
    pub(crate) fn from_vec_unchecked(probs: Vec<f64>) -> Self {
        debug_assert!(check_simplex(&probs, 1e-6).is_ok(), "{probs:?}");
        LabelDistribution(probs)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest probability, ties going to the lower index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

impl Index<usize> for LabelDistribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub(crate) fn check_simplex(probs: &[f64], tolerance: f64) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution("empty vector".into()));
    }
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} = {p} outside [0, 1]"
            )));
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > tolerance {
        return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub target: LabelDistribution,
}

impl Sample {
    pub fn new(features: Vec<f64>, target: LabelDistribution) -> Self {
        Sample { features, target }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    feature_dim: usize,
    label_count: usize,
    label_names: Option<Vec<String>>,
}

impl Dataset {
    /// Checks that the set is non-empty, that every sample agrees on the
    /// feature and label dimensions, and that all features are finite.
    pub fn new(samples: Vec<Sample>, label_names: Option<Vec<String>>) -> Result<Self> {
        let first = samples
            .first()
            .ok_or(Error::Data(crate::error::DataError::Empty))?;
        let feature_dim = first.features.len();
        let label_count = first.target.len();
        for sample in &samples {
            if sample.features.len() != feature_dim {
                return Err(Error::Dimension {
                    context: "sample features",
                    expected: feature_dim,
                    found: sample.features.len(),
                });
            }
            if sample.target.len() != label_count {
                return Err(Error::Dimension {
                    context: "sample target",
                    expected: label_count,
                    found: sample.target.len(),
                });
            }
            if sample.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("non-finite feature value".into()));
            }
        }
        if let Some(names) = &label_names {
            if names.len() != label_count {
                return Err(Error::Dimension {
                    context: "label names",
                    expected: label_count,
                    found: names.len(),
                });
            }
        }
        Ok(Dataset {
            samples,
            feature_dim,
            label_count,
            label_names,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// Always false; a dataset holds at least one sample.
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn label_names(&self) -> Option<&[String]> {
        self.label_names.as_deref()
    }

    /// New dataset holding the samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let samples = indices.iter().map(|&i| self.samples[i].clone()).collect();
        Dataset::new(samples, self.label_names.clone())
    }

    /// Per-label mean of all targets.
    pub fn mean_distribution(&self) -> LabelDistribution {
        let mut mean = vec![0.0; self.label_count];
        for sample in &self.samples {
            for (m, p) in mean.iter_mut().zip(sample.target.as_slice()) {
                *m += p;
            }
        }
        LabelDistribution::normalized(mean).expect("targets are distributions")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_validation() {
        assert!(LabelDistribution::new(vec![0.2, 0.3, 0.5]).is_ok());
        assert!(LabelDistribution::new(vec![0.2, 0.3, 0.6]).is_err());
        assert!(LabelDistribution::new(vec![-0.1, 0.6, 0.5]).is_err());
        assert!(LabelDistribution::new(vec![f64::NAN, 1.0]).is_err());
        assert!(LabelDistribution::new(vec![]).is_err());
    }

    #[test]
    fn argmax_prefers_lower_index_on_ties() {
        let d = LabelDistribution::new(vec![0.1, 0.45, 0.45]).unwrap();
        assert_eq!(d.argmax(), 1);
        assert_eq!(LabelDistribution::uniform(4).argmax(), 0);
    }

    #[test]
    fn dataset_rejects_mixed_dims() {
        let a = Sample::new(vec![1.0, 2.0], LabelDistribution::uniform(2));
        let b = Sample::new(vec![1.0], LabelDistribution::uniform(2));
        assert!(Dataset::new(vec![a.clone(), b], None).is_err());
        assert!(Dataset::new(vec![], None).is_err());
        let c = Sample::new(vec![1.0, 2.0], LabelDistribution::uniform(3));
        assert!(Dataset::new(vec![a, c], None).is_err());
    }

    #[test]
    fn mean_distribution_of_one_hots() {
        let ds = Dataset::new(
            vec![
                Sample::new(vec![0.0], LabelDistribution::one_hot(2, 0)),
                Sample::new(vec![1.0], LabelDistribution::one_hot(2, 1)),
            ],
            None,
        )
        .unwrap();
        assert_eq!(ds.mean_distribution().as_slice(), &[0.5, 0.5]);
    }
}
