//! Leaf distributions by variational bounding.
//!
//! With `Θ` fixed, each iteration replaces every leaf row by
//!
//! ```text
//! q'_ℓc ∝ Σ_i d_ic · p(ℓ|x_i) q_ℓc / g_c(x_i)
//! ```
//!
//! normalized over `c`. Each term is leaf `ℓ`'s share of the tree's class-`c`
//! mass for sample `i`. All rows are computed from the current `q` before
//! any is written. The tree loss never increases across iterations.

use std::borrow::Borrow;

use rayon::prelude::*;

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::forest::routing::{gate_activations, route};
use crate::forest::{Forest, Tree};
use crate::training::loss::cross_entropy;

/// Routing probabilities `p(ℓ|x_i)` of one tree over a fixed sample set,
/// alongside the targets. Routing depends only on `Θ`, so it is computed
/// once per leaf phase.
#[derive(Debug, Clone)]
pub struct LeafRouting {
    leaf_count: usize,
    label_count: usize,
    /// `samples × leaf_count`
    probs: Vec<f64>,
    /// `samples × label_count`
    targets: Vec<f64>,
}

impl LeafRouting {
    pub fn compute<S: Borrow<Sample>>(forest: &Forest, tree_index: usize, buffer: &[S]) -> Result<Self> {
        let tree = forest
            .trees()
            .get(tree_index)
            .ok_or_else(|| Error::Config(format!("no tree {tree_index}")))?;
        if buffer.is_empty() {
            return Err(Error::Config("leaf update on an empty buffer".into()));
        }
        let f = forest.feature_fn();
        let splits = tree.topology().split_count();
        let leaves = tree.leaf_count();
        let mut probs = Vec::with_capacity(buffer.len() * leaves);
        let mut targets = Vec::with_capacity(buffer.len() * tree.label_count());
        let mut preacts = vec![0.0; f.output_dim()];
        let mut gates = vec![0.0; splits];
        let mut mass = vec![0.0; 2 * splits + 1];
        for sample in buffer {
            let sample = sample.borrow();
            f.check_input(&sample.features)?;
            if sample.target.len() != tree.label_count() {
                return Err(Error::Dimension {
                    context: "sample target",
                    expected: tree.label_count(),
                    found: sample.target.len(),
                });
            }
            for &unit in tree.topology().index_map() {
                preacts[unit] = f.unit_output(unit, &sample.features);
            }
            gate_activations(tree, &preacts, &mut gates);
            route(&gates, &mut mass);
            probs.extend_from_slice(&mass[splits..]);
            targets.extend_from_slice(sample.target.as_slice());
        }
        Ok(LeafRouting {
            leaf_count: leaves,
            label_count: tree.label_count(),
            probs,
            targets,
        })
    }

    /// Builds routing directly from per-sample leaf probabilities.
    pub fn from_parts(leaf_count: usize, label_count: usize, probs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if leaf_count == 0 || label_count == 0 || !probs.len().is_multiple_of(leaf_count) {
            return Err(Error::Config("routing table shape".into()));
        }
        let n = probs.len() / leaf_count;
        if n == 0 || targets.len() != n * label_count {
            return Err(Error::Dimension {
                context: "routing targets",
                expected: n * label_count,
                found: targets.len(),
            });
        }
        Ok(LeafRouting { leaf_count, label_count, probs, targets })
    }

    pub fn sample_count(&self) -> usize {
        self.probs.len() / self.leaf_count
    }

    fn rows(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.probs
            .chunks_exact(self.leaf_count)
            .zip(self.targets.chunks_exact(self.label_count))
    }

    fn check_tree(&self, tree: &Tree) -> Result<()> {
        if tree.leaf_count() != self.leaf_count || tree.label_count() != self.label_count {
            return Err(Error::Dimension {
                context: "routing table vs tree",
                expected: self.leaf_count * self.label_count,
                found: tree.leaf_count() * tree.label_count(),
            });
        }
        Ok(())
    }

    /// Mean cross-entropy of `tree` on the routed samples.
    pub fn tree_loss(&self, tree: &Tree, epsilon: f64) -> Result<f64> {
        self.check_tree(tree)?;
        let mut g = vec![0.0; self.label_count];
        let mut total = 0.0;
        for (p, d) in self.rows() {
            crate::forest::routing::mix_leaves(tree, p, &mut g);
            total += cross_entropy(d, &g, epsilon);
        }
        Ok(total / self.sample_count() as f64)
    }
}

/// Per-leaf, per-label numerators `Σ_i d_ic ξ_ℓ(q_ℓc, x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafStatistics {
    label_count: usize,
    numerators: Vec<f64>,
}

impl LeafStatistics {
    pub fn accumulate(tree: &Tree, routing: &LeafRouting, epsilon: f64) -> Result<Self> {
        routing.check_tree(tree)?;
        let c = tree.label_count();
        let q = tree.leaf_dists();
        let mut numerators = vec![0.0; q.len()];
        let mut g = vec![0.0; c];
        let mut ratio = vec![0.0; c];
        for (p, d) in routing.rows() {
            crate::forest::routing::mix_leaves(tree, p, &mut g);
            for j in 0..c {
                ratio[j] = if d[j] > 0.0 { d[j] / g[j].max(epsilon) } else { 0.0 };
            }
            for (l, &pl) in p.iter().enumerate() {
                if pl == 0.0 {
                    continue;
                }
                let base = l * c;
                for j in 0..c {
                    numerators[base + j] += pl * q[base + j] * ratio[j];
                }
            }
        }
        Ok(LeafStatistics { label_count: c, numerators })
    }

    pub fn numerators(&self) -> &[f64] {
        &self.numerators
    }

    /// Normalizes each row of numerators. A row whose total is zero (no
    /// routing mass reaches the leaf) keeps the previous distribution.
    pub fn into_leaf_dists(self, previous: &[f64]) -> Vec<f64> {
        let c = self.label_count;
        let mut out = self.numerators;
        for (row, prev) in out.chunks_exact_mut(c).zip(previous.chunks_exact(c)) {
            let total: f64 = row.iter().sum();
            if total > 0.0 && total.is_finite() {
                row.iter_mut().for_each(|v| *v /= total);
            } else {
                row.copy_from_slice(prev);
            }
        }
        out
    }
}

/// One synchronous update of every leaf row; returns the new
/// `leaf_count × label_count` table without modifying `tree`.
pub fn leaf_update_iteration(tree: &Tree, routing: &LeafRouting, epsilon: f64) -> Result<Vec<f64>> {
    Ok(LeafStatistics::accumulate(tree, routing, epsilon)?.into_leaf_dists(tree.leaf_dists()))
}

/// Runs `iterations` leaf updates on every tree of `forest` over `buffer`.
/// Trees are independent, so with `parallel` set they run on the current
/// rayon pool with identical results.
pub fn update_leaves<S: Borrow<Sample> + Sync>(
    forest: &mut Forest,
    buffer: &[S],
    iterations: usize,
    epsilon: f64,
    parallel: bool,
) -> Result<()> {
    if iterations == 0 {
        return Ok(());
    }
    let routings = (0..forest.tree_count())
        .map(|k| LeafRouting::compute(forest, k, buffer))
        .collect::<Result<Vec<_>>>()?;
    let run = |(tree, routing): (&mut Tree, &LeafRouting)| -> Result<()> {
        for _ in 0..iterations {
            let next = leaf_update_iteration(tree, routing, epsilon)?;
            tree.leaf_dists_mut().copy_from_slice(&next);
        }
        Ok(())
    };
    if parallel {
        forest
            .trees_mut()
            .par_iter_mut()
            .zip(routings.par_iter())
            .try_for_each(run)
    } else {
        forest.trees_mut().iter_mut().zip(routings.iter()).try_for_each(run)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabelDistribution;
    use crate::forest::{FeatureFunction, TreeTopology};

    fn dist(v: &[f64]) -> LabelDistribution {
        LabelDistribution::new(v.to_vec()).unwrap()
    }

    fn forest_with(depth: usize, theta: Vec<f64>, m: usize, c: usize) -> Forest {
        let splits = (1 << (depth - 1)) - 1;
        let units = theta.len() / (m + 1);
        let map: Vec<usize> = (0..splits).map(|n| n % units).collect();
        let topo = TreeTopology::new(depth, map, units.max(splits)).unwrap();
        let f = FeatureFunction::new(theta, units, m, true).unwrap();
        Forest::new(vec![Tree::uniform(topo, c)], f).unwrap()
    }

    #[test]
    fn single_sample_from_uniform_lands_on_target() {
        let theta = vec![0.3, -0.2, 0.1, 1.1, 0.4, -0.7, -0.5, 0.9, 0.2];
        let forest = forest_with(3, theta, 2, 4);
        let d = dist(&[0.1, 0.2, 0.3, 0.4]);
        let buffer = [Sample::new(vec![0.8, -1.5], d.clone())];
        let routing = LeafRouting::compute(&forest, 0, &buffer).unwrap();
        let next = leaf_update_iteration(&forest.trees()[0], &routing, 1e-12).unwrap();
        for row in next.chunks(4) {
            for (a, b) in row.iter().zip(d.as_slice()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rows_stay_on_simplex_and_loss_decreases() {
        let theta = vec![0.3, -0.2, 0.1, 1.1, 0.4, -0.7, -0.5, 0.9, 0.2];
        let mut forest = forest_with(3, theta, 2, 3);
        let buffer: Vec<Sample> = (0..12)
            .map(|i| {
                let t = i as f64;
                let w = [1.0 + (t * 0.7).sin(), 1.0 + (t * 1.3).cos(), 0.2 + (t * 0.1)];
                Sample::new(vec![t.sin() * 2.0, t.cos()], LabelDistribution::normalized(w.to_vec()).unwrap())
            })
            .collect();
        let routing = LeafRouting::compute(&forest, 0, &buffer).unwrap();
        let mut prev = routing.tree_loss(&forest.trees()[0], 1e-12).unwrap();
        let start = prev;
        for _ in 0..20 {
            let next = leaf_update_iteration(&forest.trees()[0], &routing, 1e-12).unwrap();
            for row in next.chunks(3) {
                assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
            forest.trees_mut()[0].set_leaf_dists(next).unwrap();
            let now = routing.tree_loss(&forest.trees()[0], 1e-12).unwrap();
            assert!(now <= prev + 1e-12, "{now} > {prev}");
            prev = now;
        }
        assert!(prev < start);
    }

    #[test]
    fn unreached_leaf_keeps_its_row() {
        // Routing puts all mass on leaf 0.
        let tree = Tree::with_leaves(
            TreeTopology::new(2, vec![0], 1).unwrap(),
            &[dist(&[0.5, 0.5]), dist(&[0.9, 0.1])],
        )
        .unwrap();
        let routing = LeafRouting::from_parts(2, 2, vec![1.0, 0.0], vec![1.0, 0.0]).unwrap();
        let next = leaf_update_iteration(&tree, &routing, 1e-12).unwrap();
        assert_eq!(next, vec![1.0, 0.0, 0.9, 0.1]);
    }

    #[test]
    fn converged_rows_are_a_fixed_point() {
        let tree0 = Tree::uniform(TreeTopology::new(3, vec![0, 0, 0], 3).unwrap(), 3);
        let probs = vec![
            0.4, 0.3, 0.2, 0.1, //
            0.1, 0.2, 0.3, 0.4, //
            0.25, 0.25, 0.25, 0.25, //
            0.7, 0.1, 0.1, 0.1, //
            0.05, 0.05, 0.1, 0.8,
        ];
        let targets = vec![
            0.6, 0.3, 0.1, //
            0.1, 0.2, 0.7, //
            0.3, 0.4, 0.3, //
            0.8, 0.1, 0.1, //
            0.0, 0.3, 0.7,
        ];
        let routing = LeafRouting::from_parts(4, 3, probs, targets).unwrap();
        let mut tree = tree0;
        let mut moved = f64::INFINITY;
        for _ in 0..200_000 {
            let next = leaf_update_iteration(&tree, &routing, 1e-12).unwrap();
            moved = next.iter().zip(tree.leaf_dists()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            tree.set_leaf_dists(next).unwrap();
            if moved < 1e-14 {
                break;
            }
        }
        assert!(moved < 1e-14, "did not converge: {moved}");
        let next = leaf_update_iteration(&tree, &routing, 1e-12).unwrap();
        let shift = next.iter().zip(tree.leaf_dists()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(shift < 1e-10);
    }

    #[test]
    fn parallel_leaf_updates_match() {
        let theta = vec![0.3, -0.2, 0.1, 1.1, 0.4, -0.7, -0.5, 0.9, 0.2];
        let base = forest_with(3, theta, 2, 3);
        let mut forest = Forest::new(
            vec![base.trees()[0].clone(), base.trees()[0].clone(), base.trees()[0].clone()],
            base.feature_fn().clone(),
        )
        .unwrap();
        let buffer: Vec<Sample> = (0..30)
            .map(|i| Sample::new(vec![i as f64 * 0.1, -(i as f64) * 0.05], LabelDistribution::one_hot(3, i % 3)))
            .collect();
        let mut other = forest.clone();
        update_leaves(&mut forest, &buffer, 5, 1e-12, false).unwrap();
        update_leaves(&mut other, &buffer, 5, 1e-12, true).unwrap();
        assert_eq!(forest, other);
        let empty: [Sample; 0] = [];
        assert!(update_leaves(&mut forest, &empty, 5, 1e-12, false).is_err());
    }
}
