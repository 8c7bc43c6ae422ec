//! The six label-distribution measures and dataset-level reports.
//!
//! Distances (lower is better): K-L, Euclidean, Sørensen, squared χ².
//! Similarities (higher is better): fidelity, intersection.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{kfold_split, Dataset, LabelDistribution};
use crate::error::{Error, Result};
use crate::forest::routing::PredictScratch;
use crate::forest::Forest;
use crate::rng::derive_seed;
use crate::training::{train, TrainConfig};

/// Floor on `g_c` inside the K-L logarithm.
pub const KL_FLOOR: f64 = 1e-12;
/// Inputs further than this from the simplex are rejected.
const MEASURE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    Kl,
    Euclidean,
    Sorensen,
    SquaredChi2,
    Fidelity,
    Intersection,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Measure::Kl,
        Measure::Euclidean,
        Measure::Sorensen,
        Measure::SquaredChi2,
        Measure::Fidelity,
        Measure::Intersection,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Kl => "K-L",
            Measure::Euclidean => "Euclidean",
            Measure::Sorensen => "Sorensen",
            Measure::SquaredChi2 => "Squared X2",
            Measure::Fidelity => "Fidelity",
            Measure::Intersection => "Intersection",
        }
    }

    pub fn lower_is_better(self) -> bool {
        !matches!(self, Measure::Fidelity | Measure::Intersection)
    }

    pub fn formula(self) -> &'static str {
        match self {
            Measure::Kl => "sum_c d_c ln(d_c / max(g_c, 1e-12)), 0 ln 0 = 0",
            Measure::Euclidean => "sqrt(sum_c (d_c - g_c)^2)",
            Measure::Sorensen => "sum_c |d_c - g_c| / sum_c (d_c + g_c)",
            Measure::SquaredChi2 => "sum_c (d_c - g_c)^2 / (d_c + g_c), 0/0 = 0",
            Measure::Fidelity => "sum_c sqrt(d_c g_c)",
            Measure::Intersection => "sum_c min(d_c, g_c)",
        }
    }

    fn raw(self, d: &[f64], g: &[f64]) -> f64 {
        let pairs = d.iter().zip(g);
        match self {
            Measure::Kl => pairs
                .filter(|(d, _)| **d > 0.0)
                .map(|(d, g)| d * (d / g.max(KL_FLOOR)).ln())
                .sum(),
            Measure::Euclidean => pairs.map(|(d, g)| (d - g) * (d - g)).sum::<f64>().sqrt(),
            Measure::Sorensen => {
                let (num, den) = pairs.fold((0.0, 0.0), |(n, s), (d, g)| (n + (d - g).abs(), s + d + g));
                if den > 0.0 {
                    num / den
                } else {
                    0.0
                }
            }
            Measure::SquaredChi2 => pairs
                .map(|(d, g)| {
                    let s = d + g;
                    if s > 0.0 {
                        (d - g) * (d - g) / s
                    } else {
                        0.0
                    }
                })
                .sum(),
            Measure::Fidelity => pairs.map(|(d, g)| (d * g).sqrt()).sum(),
            Measure::Intersection => pairs.map(|(d, g)| d.min(*g)).sum(),
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Value of `which` between target `d` and prediction `g`.
pub fn measure(which: Measure, d: &LabelDistribution, g: &LabelDistribution) -> Result<f64> {
    measure_slices(which, d.as_slice(), g.as_slice())
}

/// Like [`measure`] on raw slices; both must be on the simplex.
pub fn measure_slices(which: Measure, d: &[f64], g: &[f64]) -> Result<f64> {
    check_pair(d, g)?;
    Ok(which.raw(d, g))
}

fn check_pair(d: &[f64], g: &[f64]) -> Result<()> {
    if d.len() != g.len() {
        return Err(Error::Dimension {
            context: "measure inputs",
            expected: d.len(),
            found: g.len(),
        });
    }
    crate::data::check_simplex(d, MEASURE_TOLERANCE)?;
    crate::data::check_simplex(g, MEASURE_TOLERANCE)?;
    Ok(())
}

/// One value per measure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MeasureSet {
    pub kl: f64,
    pub euclidean: f64,
    pub sorensen: f64,
    pub squared_chi2: f64,
    pub fidelity: f64,
    pub intersection: f64,
}

impl MeasureSet {
    pub fn between(d: &[f64], g: &[f64]) -> Result<Self> {
        check_pair(d, g)?;
        Ok(Self::from_fn(|m| m.raw(d, g)))
    }

    pub fn get(&self, which: Measure) -> f64 {
        match which {
            Measure::Kl => self.kl,
            Measure::Euclidean => self.euclidean,
            Measure::Sorensen => self.sorensen,
            Measure::SquaredChi2 => self.squared_chi2,
            Measure::Fidelity => self.fidelity,
            Measure::Intersection => self.intersection,
        }
    }

    fn from_fn(mut f: impl FnMut(Measure) -> f64) -> Self {
        MeasureSet {
            kl: f(Measure::Kl),
            euclidean: f(Measure::Euclidean),
            sorensen: f(Measure::Sorensen),
            squared_chi2: f(Measure::SquaredChi2),
            fidelity: f(Measure::Fidelity),
            intersection: f(Measure::Intersection),
        }
    }

    /// Per-measure mean and sample standard deviation (zero for one value).
    fn summarize(values: &[MeasureSet]) -> (MeasureSet, MeasureSet) {
        let n = values.len() as f64;
        let mean = Self::from_fn(|m| values.iter().map(|v| v.get(m)).sum::<f64>() / n);
        let std = Self::from_fn(|m| {
            if values.len() < 2 {
                return 0.0;
            }
            let mu = mean.get(m);
            let ss: f64 = values.iter().map(|v| (v.get(m) - mu).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        });
        (mean, std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureInfo {
    pub name: String,
    pub formula: String,
    pub lower_is_better: bool,
}

/// Mean ± sample standard deviation of every measure over a set of units:
/// samples for [`evaluate`], folds for [`cross_validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub measures: Vec<MeasureInfo>,
    /// `"samples"` or `"folds"`.
    pub unit: String,
    pub count: usize,
    pub mean: MeasureSet,
    pub std: MeasureSet,
    /// Per-fold means; empty for single-set evaluations.
    pub per_fold: Vec<MeasureSet>,
}

impl EvaluationReport {
    fn from_values(unit: &str, values: &[MeasureSet], keep_values: bool) -> Self {
        let (mean, std) = MeasureSet::summarize(values);
        EvaluationReport {
            measures: Measure::ALL
                .iter()
                .map(|m| MeasureInfo {
                    name: m.name().to_owned(),
                    formula: m.formula().to_owned(),
                    lower_is_better: m.lower_is_better(),
                })
                .collect(),
            unit: unit.to_owned(),
            count: values.len(),
            mean,
            std,
            per_fold: if keep_values { values.to_vec() } else { Vec::new() },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# {} {}; mean ± std", self.count, self.unit)?;
        for m in Measure::ALL {
            writeln!(f, "# {:<12} = {}", m.name(), m.formula())?;
        }
        writeln!(f, "{:<14} {:<4} {:>22}", "measure", "", "value")?;
        for m in Measure::ALL {
            let arrow = if m.lower_is_better() { "(↓)" } else { "(↑)" };
            writeln!(
                f,
                "{:<14} {:<4} {:>10.4}±{:<10.4}",
                m.name(),
                arrow,
                self.mean.get(m),
                self.std.get(m)
            )?;
        }
        Ok(())
    }
}

/// Measures for a list of (target, prediction) pairs, averaged over samples.
pub fn evaluate_predictions(
    targets: &[LabelDistribution],
    predictions: &[LabelDistribution],
) -> Result<EvaluationReport> {
    if targets.is_empty() {
        return Err(Error::Config("evaluation on an empty set".into()));
    }
    if targets.len() != predictions.len() {
        return Err(Error::Dimension {
            context: "predictions",
            expected: targets.len(),
            found: predictions.len(),
        });
    }
    let values = targets
        .iter()
        .zip(predictions)
        .map(|(d, g)| MeasureSet::between(d.as_slice(), g.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport::from_values("samples", &values, false))
}

/// Predicts every sample of `dataset` with `forest` and averages the
/// measures.
pub fn evaluate(forest: &Forest, dataset: &Dataset) -> Result<EvaluationReport> {
    if forest.input_dim() != dataset.feature_dim() || forest.label_count() != dataset.label_count() {
        return Err(Error::Dimension {
            context: "forest vs dataset",
            expected: forest.input_dim() * forest.label_count(),
            found: dataset.feature_dim() * dataset.label_count(),
        });
    }
    let mut scratch = PredictScratch::new(forest);
    let mut g = vec![0.0; forest.label_count()];
    let values = dataset
        .samples()
        .iter()
        .map(|s| {
            forest.predict_into(&s.features, &mut scratch, &mut g);
            MeasureSet::between(s.target.as_slice(), &g)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvaluationReport::from_values("samples", &values, false))
}

/// Seed used to train fold `fold`.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    derive_seed(seed, fold as u64 + 1)
}

/// `folds`-fold cross-validation: each fold is predicted by a forest
/// trained on the other folds (with seed [`fold_seed`]), and the report
/// holds mean ± sample std of the per-fold mean measures.
pub fn cross_validate(
    dataset: &Dataset,
    config: &TrainConfig,
    folds: usize,
    seed: u64,
) -> Result<EvaluationReport> {
    config.validate()?;
    let split = kfold_split(dataset.len(), folds, seed)?;
    let mut per_fold = Vec::with_capacity(folds);
    for fold in 0..folds {
        let train_set = dataset.subset(&split.train_indices(fold))?;
        let test_set = dataset.subset(&split.test_indices(fold))?;
        let fold_config = TrainConfig {
            seed: fold_seed(seed, fold),
            ..config.clone()
        };
        let forest = train(&train_set, &fold_config, |_| {})?;
        per_fold.push(evaluate(&forest, &test_set)?.mean);
    }
    Ok(EvaluationReport::from_values("folds", &per_fold, true))
}
