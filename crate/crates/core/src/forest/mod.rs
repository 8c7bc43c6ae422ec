//! Differentiable decision trees and forests.
//!
//! Every split node `n` of a tree reads one output of a shared linear map
//! `f(x) = Θ [x; 1]` through the tree's index map `φ`, and routes a sample
//! left with probability `s_n = σ(f_φ(n)(x))`. A leaf's routing probability
//! is the product of the gate probabilities on its root path, and the tree
//! predicts the routing-weighted mixture of its leaf distributions. A forest
//! averages its trees.
//!
//! Trees are complete and stored in heap order: split nodes occupy
//! positions `0..split_count`, the children of `n` are `2n + 1` and
//! `2n + 2`, and leaves occupy `split_count..2 * split_count + 1`.

mod model_io;
pub(crate) mod routing;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::LabelDistribution;
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::training::TrainConfig;

pub use model_io::{load_model, save_model, MODEL_FORMAT_VERSION};
pub use routing::{sigmoid, PredictScratch};

/// Split nodes in a complete tree of depth `depth`, i.e. `2^(depth-1) - 1`.
pub fn split_count_for_depth(depth: usize) -> usize {
    (1usize << (depth - 1)) - 1
}

/// Output units needed to give every split node of a depth-`depth` tree its
/// own unit.
pub fn check_depth_constraint(depth: usize, output_units: usize) -> Result<()> {
    if depth < 2 {
        return Err(Error::Config(format!("tree depth must be at least 2, got {depth}")));
    }
    if depth > 30 {
        return Err(Error::Config(format!("tree depth {depth} is too large")));
    }
    let required = split_count_for_depth(depth);
    if output_units < required {
        return Err(Error::DepthConstraint {
            depth,
            required,
            output_units,
        });
    }
    Ok(())
}

/// Linear feature-learning function `f(x) = Θ [x; 1]` with `output_dim`
/// rows. Without the bias column `Θ` is `output_dim × input_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFunction {
    theta: Vec<f64>,
    output_dim: usize,
    input_dim: usize,
    bias: bool,
}

impl FeatureFunction {
    pub fn new(theta: Vec<f64>, output_dim: usize, input_dim: usize, bias: bool) -> Result<Self> {
        let cols = input_dim + usize::from(bias);
        if theta.len() != output_dim * cols {
            return Err(Error::Dimension {
                context: "theta",
                expected: output_dim * cols,
                found: theta.len(),
            });
        }
        if output_dim == 0 || input_dim == 0 {
            return Err(Error::Config("feature function dimensions must be positive".into()));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite theta entry".into()));
        }
        Ok(FeatureFunction {
            theta,
            output_dim,
            input_dim,
            bias,
        })
    }

    pub fn zeros(output_dim: usize, input_dim: usize, bias: bool) -> Self {
        let cols = input_dim + usize::from(bias);
        FeatureFunction {
            theta: vec![0.0; output_dim * cols],
            output_dim,
            input_dim,
            bias,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn has_bias(&self) -> bool {
        self.bias
    }

    /// Row length of `Θ`: `input_dim`, plus one with a bias.
    pub fn cols(&self) -> usize {
        self.input_dim + usize::from(self.bias)
    }

    /// Row-major `Θ`.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn row(&self, unit: usize) -> &[f64] {
        let cols = self.cols();
        &self.theta[unit * cols..(unit + 1) * cols]
    }

    pub fn row_mut(&mut self, unit: usize) -> &mut [f64] {
        let cols = self.cols();
        &mut self.theta[unit * cols..(unit + 1) * cols]
    }

    /// Pre-activation of one output unit, without dimension checks.
    #[inline]
    pub(crate) fn unit_output(&self, unit: usize, x: &[f64]) -> f64 {
        let row = self.row(unit);
        let dot: f64 = row[..self.input_dim].iter().zip(x).map(|(w, v)| w * v).sum();
        if self.bias {
            dot + row[self.input_dim]
        } else {
            dot
        }
    }

    /// All `output_dim` pre-activations for `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok((0..self.output_dim).map(|u| self.unit_output(u, x)).collect())
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::Dimension {
                context: "feature vector",
                expected: self.input_dim,
                found: x.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeTopology {
    depth: usize,
    index_map: Vec<usize>,
}

impl TreeTopology {
    /// `index_map[n]` is the output unit that feeds split node `n`.
    pub fn new(depth: usize, index_map: Vec<usize>, output_units: usize) -> Result<Self> {
        check_depth_constraint(depth, output_units)?;
        let splits = split_count_for_depth(depth);
        if index_map.len() != splits {
            return Err(Error::Dimension {
                context: "index map",
                expected: splits,
                found: index_map.len(),
            });
        }
        if let Some(&bad) = index_map.iter().find(|&&u| u >= output_units) {
            return Err(Error::Config(format!(
                "index map entry {bad} out of range for {output_units} output units"
            )));
        }
        Ok(TreeTopology { depth, index_map })
    }

    /// Draws each split node's unit uniformly with replacement from
    /// `0..output_units`.
    pub fn random(depth: usize, output_units: usize, rng: &mut impl Rng) -> Result<Self> {
        check_depth_constraint(depth, output_units)?;
        let index_map = (0..split_count_for_depth(depth))
            .map(|_| rng.random_range(0..output_units))
            .collect();
        Ok(TreeTopology { depth, index_map })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn split_count(&self) -> usize {
        self.index_map.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.index_map.len() + 1
    }

    /// Split nodes plus leaves.
    pub fn node_count(&self) -> usize {
        2 * self.index_map.len() + 1
    }

    pub fn index_map(&self) -> &[usize] {
        &self.index_map
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    topology: TreeTopology,
    /// `leaf_count × label_count`, row-major.
    leaf_dists: Vec<f64>,
    label_count: usize,
}

impl Tree {
    /// A tree whose leaves all hold the uniform distribution.
    pub fn uniform(topology: TreeTopology, label_count: usize) -> Self {
        let leaf_dists = vec![1.0 / label_count as f64; topology.leaf_count() * label_count];
        Tree {
            topology,
            leaf_dists,
            label_count,
        }
    }

    pub fn with_leaves(topology: TreeTopology, leaves: &[LabelDistribution]) -> Result<Self> {
        let label_count = leaves.first().map_or(0, LabelDistribution::len);
        if leaves.len() != topology.leaf_count() {
            return Err(Error::Dimension {
                context: "leaf distributions",
                expected: topology.leaf_count(),
                found: leaves.len(),
            });
        }
        if label_count < 2 || leaves.iter().any(|l| l.len() != label_count) {
            return Err(Error::Config("leaf distributions need a common length ≥ 2".into()));
        }
        let leaf_dists = leaves.iter().flat_map(|l| l.as_slice().iter().copied()).collect();
        Ok(Tree {
            topology,
            leaf_dists,
            label_count,
        })
    }

    pub fn topology(&self) -> &TreeTopology {
        &self.topology
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn leaf_count(&self) -> usize {
        self.topology.leaf_count()
    }

    pub fn leaf(&self, leaf: usize) -> &[f64] {
        let c = self.label_count;
        &self.leaf_dists[leaf * c..(leaf + 1) * c]
    }

    /// All leaf rows, `leaf_count × label_count` row-major.
    pub fn leaf_dists(&self) -> &[f64] {
        &self.leaf_dists
    }

    /// Replaces every leaf row. Each row must lie on the simplex.
    pub fn set_leaf_dists(&mut self, leaf_dists: Vec<f64>) -> Result<()> {
        if leaf_dists.len() != self.leaf_dists.len() {
            return Err(Error::Dimension {
                context: "leaf distributions",
                expected: self.leaf_dists.len(),
                found: leaf_dists.len(),
            });
        }
        for row in leaf_dists.chunks(self.label_count) {
            crate::data::check_simplex(row, crate::data::SIMPLEX_TOLERANCE)?;
        }
        self.leaf_dists = leaf_dists;
        Ok(())
    }

    pub(crate) fn leaf_dists_mut(&mut self) -> &mut [f64] {
        &mut self.leaf_dists
    }
}

/// `K` trees over one shared feature function.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    feature_fn: FeatureFunction,
    label_count: usize,
}

impl Forest {
    pub fn new(trees: Vec<Tree>, feature_fn: FeatureFunction) -> Result<Self> {
        let first = trees
            .first()
            .ok_or_else(|| Error::Config("a forest needs at least one tree".into()))?;
        let label_count = first.label_count;
        for tree in &trees {
            if tree.label_count != label_count {
                return Err(Error::Dimension {
                    context: "tree label count",
                    expected: label_count,
                    found: tree.label_count,
                });
            }
            check_depth_constraint(tree.topology.depth, feature_fn.output_dim)?;
            if tree.topology.index_map.iter().any(|&u| u >= feature_fn.output_dim) {
                return Err(Error::Config("index map refers to a missing output unit".into()));
            }
        }
        Ok(Forest {
            trees,
            feature_fn,
            label_count,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn trees_mut(&mut self) -> &mut [Tree] {
        &mut self.trees
    }

    pub fn feature_fn(&self) -> &FeatureFunction {
        &self.feature_fn
    }

    pub fn feature_fn_mut(&mut self) -> &mut FeatureFunction {
        &mut self.feature_fn
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn label_count(&self) -> usize {
        self.label_count
    }

    pub fn input_dim(&self) -> usize {
        self.feature_fn.input_dim
    }

    /// Depth shared by the trees (the first tree's depth).
    pub fn depth(&self) -> usize {
        self.trees[0].topology.depth
    }
}

/// Fresh forest: `Θ` from a zero-mean Gaussian with standard deviation
/// `config.theta_init_std`, uniform leaves, and random index maps. The same
/// `(config, seed)` always gives the same forest.
pub fn build_forest(
    config: &TrainConfig,
    input_dim: usize,
    label_count: usize,
    seed: u64,
) -> Result<Forest> {
    config.validate()?;
    if input_dim == 0 {
        return Err(Error::Config("feature dimension must be positive".into()));
    }
    if label_count < 2 {
        return Err(Error::Config(format!("need at least 2 labels, got {label_count}")));
    }
    let mut theta_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x7468657461_u64));
    let normal = Normal::new(0.0, config.theta_init_std)
        .map_err(|e| Error::Config(format!("theta_init_std: {e}")))?;
    let cols = input_dim + usize::from(config.bias);
    let theta: Vec<f64> = (0..config.output_units * cols)
        .map(|_| normal.sample(&mut theta_rng))
        .collect();
    let feature_fn = FeatureFunction::new(theta, config.output_units, input_dim, config.bias)?;

    let mut map_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x6d6170_u64));
    let trees = (0..config.tree_count)
        .map(|_| {
            TreeTopology::random(config.tree_depth, config.output_units, &mut map_rng)
                .map(|t| Tree::uniform(t, label_count))
        })
        .collect::<Result<Vec<_>>>()?;
    Forest::new(trees, feature_fn)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_constraint() {
        assert!(check_depth_constraint(7, 64).is_ok());
        let err = check_depth_constraint(8, 64).unwrap_err();
        assert!(matches!(
            err,
            Error::DepthConstraint {
                depth: 8,
                required: 127,
                output_units: 64
            }
        ));
        assert!(err.to_string().contains("127") && err.to_string().contains("64"));
        assert_eq!(err.exit_code(), 2);
        assert!(check_depth_constraint(1, 64).is_err());
    }

    #[test]
    fn build_defaults() {
        let config = TrainConfig::default();
        let forest = build_forest(&config, 4, 3, 11).unwrap();
        assert_eq!(forest.tree_count(), 5);
        assert_eq!(forest.depth(), 7);
        assert_eq!(forest.feature_fn().output_dim(), 64);
        assert_eq!(forest.feature_fn().cols(), 5);
        for tree in forest.trees() {
            assert_eq!(tree.leaf_count(), 64);
            assert!(tree.leaf_dists().iter().all(|&q| q == 1.0 / 3.0));
            assert!(tree.topology().index_map().iter().all(|&u| u < 64));
        }
        assert_eq!(forest, build_forest(&config, 4, 3, 11).unwrap());
        assert_ne!(forest, build_forest(&config, 4, 3, 12).unwrap());
    }

    #[test]
    fn build_rejects_depth_beyond_units() {
        let config = TrainConfig {
            tree_depth: 8,
            ..TrainConfig::default()
        };
        assert!(matches!(
            build_forest(&config, 4, 3, 0),
            Err(Error::DepthConstraint { .. })
        ));
    }

    #[test]
    fn theta_init_spread() {
        let config = TrainConfig {
            theta_init_std: 0.5,
            ..TrainConfig::default()
        };
        let forest = build_forest(&config, 20, 3, 3).unwrap();
        let theta = forest.feature_fn().theta();
        let n = theta.len() as f64;
        let mean = theta.iter().sum::<f64>() / n;
        let var = theta.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "{mean}");
        assert!((var.sqrt() - 0.5).abs() < 0.05, "{var}");
    }

    #[test]
    fn bias_off_shrinks_theta() {
        let config = TrainConfig {
            bias: false,
            ..TrainConfig::default()
        };
        let forest = build_forest(&config, 4, 3, 0).unwrap();
        assert_eq!(forest.feature_fn().theta().len(), 64 * 4);
        let f = FeatureFunction::new(vec![1.0, 2.0], 1, 2, false).unwrap();
        assert_eq!(f.evaluate(&[3.0, 4.0]).unwrap(), vec![11.0]);
        let g = FeatureFunction::new(vec![1.0, 2.0, 0.5], 1, 2, true).unwrap();
        assert_eq!(g.evaluate(&[3.0, 4.0]).unwrap(), vec![11.5]);
        assert!(g.evaluate(&[3.0]).is_err());
    }

    #[test]
    fn topology_validation() {
        assert!(TreeTopology::new(3, vec![0, 1, 2], 3).is_ok());
        assert!(TreeTopology::new(3, vec![0, 1], 3).is_err());
        assert!(TreeTopology::new(3, vec![0, 1, 3], 3).is_err());
        let t = TreeTopology::new(3, vec![2, 2, 2], 3).unwrap();
        assert_eq!((t.split_count(), t.leaf_count(), t.node_count()), (3, 4, 7));
    }
}
