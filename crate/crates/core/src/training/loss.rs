use std::borrow::Borrow;

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::forest::routing::{gate_activations, mix_leaves, route};
use crate::forest::Forest;

/// `-Σ_c d_c ln max(g_c, ε)`, skipping labels with `d_c = 0`.
#[inline]
pub(crate) fn cross_entropy(target: &[f64], prediction: &[f64], epsilon: f64) -> f64 {
    target
        .iter()
        .zip(prediction)
        .filter(|(d, _)| **d > 0.0)
        .map(|(d, g)| -d * g.max(epsilon).ln())
        .sum()
}

/// Mean cross-entropy of tree `tree_index` over `samples`.
pub fn tree_loss<S: Borrow<Sample>>(
    forest: &Forest,
    tree_index: usize,
    samples: &[S],
    epsilon: f64,
) -> Result<f64> {
    let losses = per_tree_losses(forest, samples, epsilon)?;
    losses
        .get(tree_index)
        .copied()
        .ok_or_else(|| Error::Config(format!("no tree {tree_index}")))
}

/// Forest loss: the average over trees of each tree's mean cross-entropy.
pub fn loss<S: Borrow<Sample>>(forest: &Forest, samples: &[S], epsilon: f64) -> Result<f64> {
    let losses = per_tree_losses(forest, samples, epsilon)?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

fn per_tree_losses<S: Borrow<Sample>>(
    forest: &Forest,
    samples: &[S],
    epsilon: f64,
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Config("loss of an empty sample list".into()));
    }
    let mut totals = vec![0.0; forest.tree_count()];
    let mut preacts = vec![0.0; forest.feature_fn().output_dim()];
    let max_splits = forest.trees().iter().map(|t| t.topology().split_count()).max().unwrap_or(0);
    let mut gates = vec![0.0; max_splits];
    let mut mass = vec![0.0; 2 * max_splits + 1];
    let mut g = vec![0.0; forest.label_count()];
    for sample in samples {
        let sample = sample.borrow();
        forest.feature_fn().check_input(&sample.features)?;
        if sample.target.len() != forest.label_count() {
            return Err(Error::Dimension {
                context: "sample target",
                expected: forest.label_count(),
                found: sample.target.len(),
            });
        }
        for (u, p) in preacts.iter_mut().enumerate() {
            *p = forest.feature_fn().unit_output(u, &sample.features);
        }
        for (tree, total) in forest.trees().iter().zip(&mut totals) {
            let splits = tree.topology().split_count();
            gate_activations(tree, &preacts, &mut gates[..splits]);
            route(&gates[..splits], &mut mass[..2 * splits + 1]);
            mix_leaves(tree, &mass[splits..2 * splits + 1], &mut g);
            *total += cross_entropy(sample.target.as_slice(), &g, epsilon);
        }
    }
    let n = samples.len() as f64;
    Ok(totals.into_iter().map(|t| t / n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabelDistribution;
    use crate::forest::{build_forest, FeatureFunction, Tree, TreeTopology};
    use crate::training::TrainConfig;

    fn dist(v: &[f64]) -> LabelDistribution {
        LabelDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn uniform_forest_loss_is_log_c() {
        let config = TrainConfig { tree_count: 2, tree_depth: 3, output_units: 3, theta_init_std: 2.0, ..TrainConfig::default() };
        let forest = build_forest(&config, 2, 5, 4).unwrap();
        let samples = vec![
            Sample::new(vec![0.3, -1.0], dist(&[0.2, 0.2, 0.1, 0.4, 0.1])),
            Sample::new(vec![2.0, 1.0], LabelDistribution::one_hot(5, 3)),
        ];
        let r = loss(&forest, &samples, 1e-12).unwrap();
        assert!((r - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_sample_hand_value() {
        // s = 0.5, q rows [0.8, 0.2] and [0.4, 0.6], d = [1, 0] -> g = [0.6, 0.4]
        let topo = TreeTopology::new(2, vec![0], 1).unwrap();
        let tree = Tree::with_leaves(topo, &[dist(&[0.8, 0.2]), dist(&[0.4, 0.6])]).unwrap();
        let forest = Forest::new(vec![tree], FeatureFunction::zeros(1, 1, true)).unwrap();
        let samples = [Sample::new(vec![1.0], dist(&[1.0, 0.0]))];
        let r = loss(&forest, &samples, 1e-12).unwrap();
        assert!((r - 0.5108256237659907).abs() < 1e-12, "{r}");
        assert_eq!(tree_loss(&forest, 0, &samples, 1e-12).unwrap(), r);
        assert!(tree_loss(&forest, 1, &samples, 1e-12).is_err());
    }

    #[test]
    fn exact_prediction_gives_target_entropy() {
        let d = dist(&[0.5, 0.25, 0.25]);
        let topo = TreeTopology::new(2, vec![0], 1).unwrap();
        let tree = Tree::with_leaves(topo, &[d.clone(), d.clone()]).unwrap();
        let forest = Forest::new(vec![tree.clone(), tree], FeatureFunction::new(vec![0.7, 0.1], 1, 1, true).unwrap()).unwrap();
        let samples = [Sample::new(vec![1.0], d.clone()), Sample::new(vec![-3.0], d.clone())];
        let entropy: f64 = d.as_slice().iter().map(|p| -p * p.ln()).sum();
        assert!((loss(&forest, &samples, 1e-12).unwrap() - entropy).abs() < 1e-14);
    }

    #[test]
    fn zero_targets_do_not_touch_log_floor() {
        let topo = TreeTopology::new(2, vec![0], 1).unwrap();
        let tree = Tree::with_leaves(topo, &[dist(&[1.0, 0.0]), dist(&[1.0, 0.0])]).unwrap();
        let forest = Forest::new(vec![tree], FeatureFunction::zeros(1, 1, true)).unwrap();
        let ok = [Sample::new(vec![0.0], dist(&[1.0, 0.0]))];
        assert_eq!(loss(&forest, &ok, 1e-12).unwrap(), 0.0);
        let bad = [Sample::new(vec![0.0], dist(&[0.0, 1.0]))];
        assert!((loss(&forest, &bad, 1e-12).unwrap() - (-(1e-12f64).ln())).abs() < 1e-9);
        let none: [Sample; 0] = [];
        assert!(loss(&forest, &none, 1e-12).is_err());
    }
}
