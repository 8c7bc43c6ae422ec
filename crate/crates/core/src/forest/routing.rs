use crate::data::LabelDistribution;
use crate::error::{Error, Result};
use crate::forest::{Forest, Tree};

const SIGMOID_LO: f64 = f64::MIN_POSITIVE;
const SIGMOID_HI: f64 = 1.0 - f64::EPSILON / 2.0;

/// Logistic function, evaluated without overflow and kept strictly inside
/// `(0, 1)`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(SIGMOID_LO, SIGMOID_HI)
}

/// Gate probabilities of one tree given all pre-activations of the shared
/// feature function.
#[inline]
pub(crate) fn gate_activations(tree: &Tree, preacts: &[f64], out: &mut [f64]) {
    for (s, &unit) in out.iter_mut().zip(tree.topology.index_map()) {
        *s = sigmoid(preacts[unit]);
    }
}

/// Routing mass of every heap node: `mass[0] = 1`, the left child of `n`
/// gets `mass[n] * s_n` and the right child `mass[n] * (1 - s_n)`. The
/// trailing `leaf_count` entries are `p(leaf | x)`.
#[inline]
pub(crate) fn route(activations: &[f64], mass: &mut [f64]) {
    mass[0] = 1.0;
    for (n, &s) in activations.iter().enumerate() {
        let m = mass[n];
        mass[2 * n + 1] = m * s;
        mass[2 * n + 2] = m * (1.0 - s);
    }
}

/// `g_c = Σ_ℓ p(ℓ|x) q_ℓc`, written into `out`.
#[inline]
pub(crate) fn mix_leaves(tree: &Tree, leaf_probs: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    let c = tree.label_count;
    for (p, q) in leaf_probs.iter().zip(tree.leaf_dists.chunks_exact(c)) {
        for (o, qc) in out.iter_mut().zip(q) {
            *o += p * qc;
        }
    }
}

impl Tree {
    /// `p(ℓ|x)` for every leaf, left to right, from the split probabilities
    /// of this tree's split nodes.
    pub fn leaf_probabilities(&self, activations: &[f64]) -> Result<Vec<f64>> {
        if activations.len() != self.topology.split_count() {
            return Err(Error::Dimension {
                context: "split activations",
                expected: self.topology.split_count(),
                found: activations.len(),
            });
        }
        let mut mass = vec![0.0; self.topology.node_count()];
        route(activations, &mut mass);
        Ok(mass.split_off(self.topology.split_count()))
    }

    /// Routing-weighted mixture of the leaf distributions.
    pub fn predict(&self, leaf_probs: &[f64]) -> Result<LabelDistribution> {
        if leaf_probs.len() != self.leaf_count() {
            return Err(Error::Dimension {
                context: "leaf probabilities",
                expected: self.leaf_count(),
                found: leaf_probs.len(),
            });
        }
        let mut out = vec![0.0; self.label_count];
        mix_leaves(self, leaf_probs, &mut out);
        Ok(LabelDistribution::from_vec_unchecked(out))
    }
}

impl Forest {
    /// Split probabilities of every tree for input `x`.
    pub fn split_activations(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let preacts = self.feature_fn.evaluate(x)?;
        Ok(self
            .trees
            .iter()
            .map(|tree| {
                let mut s = vec![0.0; tree.topology.split_count()];
                gate_activations(tree, &preacts, &mut s);
                s
            })
            .collect())
    }

    /// Per-tree predictions for `x`.
    pub fn tree_predictions(&self, x: &[f64]) -> Result<Vec<LabelDistribution>> {
        self.split_activations(x)?
            .iter()
            .zip(&self.trees)
            .map(|(s, tree)| tree.predict(&tree.leaf_probabilities(s)?))
            .collect()
    }

    /// Unweighted mean of the tree predictions.
    pub fn predict(&self, x: &[f64]) -> Result<LabelDistribution> {
        self.feature_fn.check_input(x)?;
        let mut scratch = PredictScratch::new(self);
        let mut out = vec![0.0; self.label_count];
        self.predict_into(x, &mut scratch, &mut out);
        Ok(LabelDistribution::from_vec_unchecked(out))
    }

    /// Like [`Forest::predict`], writing into `out` and reusing `scratch`
    /// across calls.
    pub fn predict_with(&self, x: &[f64], scratch: &mut PredictScratch, out: &mut [f64]) -> Result<()> {
        self.feature_fn.check_input(x)?;
        if out.len() != self.label_count {
            return Err(Error::Dimension {
                context: "prediction buffer",
                expected: self.label_count,
                found: out.len(),
            });
        }
        if !scratch.fits(self) {
            *scratch = PredictScratch::new(self);
        }
        self.predict_into(x, scratch, out);
        Ok(())
    }

    /// Allocation-free prediction; `x` must already have the right length.
    pub(crate) fn predict_into(&self, x: &[f64], scratch: &mut PredictScratch, out: &mut [f64]) {
        for (u, p) in scratch.preacts.iter_mut().enumerate() {
            *p = self.feature_fn.unit_output(u, x);
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for tree in &self.trees {
            let splits = tree.topology.split_count();
            gate_activations(tree, &scratch.preacts, &mut scratch.gates[..splits]);
            route(&scratch.gates[..splits], &mut scratch.mass[..2 * splits + 1]);
            mix_leaves(tree, &scratch.mass[splits..2 * splits + 1], &mut scratch.tree_out);
            for (o, g) in out.iter_mut().zip(&scratch.tree_out) {
                *o += g;
            }
        }
        let k = self.trees.len() as f64;
        out.iter_mut().for_each(|v| *v /= k);
    }
}

/// Reusable buffers for repeated predictions with one forest.
pub struct PredictScratch {
    preacts: Vec<f64>,
    gates: Vec<f64>,
    mass: Vec<f64>,
    tree_out: Vec<f64>,
}

impl PredictScratch {
    pub fn new(forest: &Forest) -> Self {
        let splits = max_splits(forest);
        PredictScratch {
            preacts: vec![0.0; forest.feature_fn.output_dim()],
            gates: vec![0.0; splits],
            mass: vec![0.0; 2 * splits + 1],
            tree_out: vec![0.0; forest.label_count],
        }
    }

    fn fits(&self, forest: &Forest) -> bool {
        self.preacts.len() == forest.feature_fn.output_dim()
            && self.gates.len() == max_splits(forest)
            && self.tree_out.len() == forest.label_count
    }
}

fn max_splits(forest: &Forest) -> usize {
    forest.trees.iter().map(|t| t.topology.split_count()).max().unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{build_forest, FeatureFunction, TreeTopology};
    use crate::training::TrainConfig;
    use proptest::prelude::*;

    fn dist(v: &[f64]) -> LabelDistribution {
        LabelDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        // 1 / (1 + e^-2)
        assert!((sigmoid(2.0) - 0.8807970779778823).abs() < 1e-15);
        assert!((sigmoid(-2.0) - 0.11920292202211755).abs() < 1e-15);
        for z in [-1e4, -800.0, -40.0, 40.0, 800.0, 1e4] {
            let s = sigmoid(z);
            assert!(s > 0.0 && s < 1.0, "z={z} s={s}");
        }
        assert!(sigmoid(f64::MAX) < 1.0 && sigmoid(f64::MIN) > 0.0);
    }

    #[test]
    fn zero_theta_gives_half() {
        let topo = TreeTopology::new(3, vec![0, 1, 2], 3).unwrap();
        let forest = Forest::new(vec![Tree::uniform(topo, 2)], FeatureFunction::zeros(3, 4, true)).unwrap();
        let acts = forest.split_activations(&[1.0, -2.0, 3.0, 0.5]).unwrap();
        assert!(acts[0].iter().all(|&s| s == 0.5));
    }

    #[test]
    fn unit_row_at_origin_gives_half_and_preactivation_two() {
        let theta = vec![1.0, 0.0, 0.0, 0.0, 0.0, 2.0];
        let f = FeatureFunction::new(theta, 2, 2, true).unwrap();
        let topo = TreeTopology::new(2, vec![0], 2).unwrap();
        let forest = Forest::new(vec![Tree::uniform(topo, 2)], f).unwrap();
        assert_eq!(forest.split_activations(&[0.0, 5.0]).unwrap()[0][0], 0.5);
        let topo = TreeTopology::new(2, vec![1], 2).unwrap();
        let f = forest.feature_fn().clone();
        let forest = Forest::new(vec![Tree::uniform(topo, 2)], f).unwrap();
        let s = forest.split_activations(&[0.0, 5.0]).unwrap()[0][0];
        assert!((s - 0.880797).abs() < 1e-6);
    }

    #[test]
    fn leaf_probability_examples() {
        let t2 = Tree::uniform(TreeTopology::new(2, vec![0], 1).unwrap(), 2);
        assert_eq!(t2.leaf_probabilities(&[0.5]).unwrap(), vec![0.5, 0.5]);
        let t3 = Tree::uniform(TreeTopology::new(3, vec![0, 0, 0], 3).unwrap(), 2);
        assert_eq!(t3.leaf_probabilities(&[0.5; 3]).unwrap(), vec![0.25; 4]);
        // root 0.9, left 0.6, right 0.2: 0.9*0.6, 0.9*0.4, 0.1*0.2, 0.1*0.8
        let p = t3.leaf_probabilities(&[0.9, 0.6, 0.2]).unwrap();
        for (a, b) in p.iter().zip([0.54, 0.36, 0.02, 0.08]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(t3.leaf_probabilities(&[0.5; 2]).is_err());
    }

    #[test]
    fn tree_predict_examples() {
        let topo = TreeTopology::new(2, vec![0], 1).unwrap();
        let tree = Tree::with_leaves(topo.clone(), &[dist(&[1.0, 0.0]), dist(&[0.0, 1.0])]).unwrap();
        assert_eq!(tree.predict(&[0.5, 0.5]).unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(tree.predict(&[1.0, 0.0]).unwrap().as_slice(), &[1.0, 0.0]);
        assert!(tree.predict(&[1.0]).is_err());

        let q = dist(&[0.1, 0.7, 0.2]);
        let same = Tree::with_leaves(topo, &[q.clone(), q.clone()]).unwrap();
        for p in [0.0, 0.3, 0.77] {
            let g = same.predict(&[p, 1.0 - p]).unwrap();
            for c in 0..3 {
                assert!((g[c] - q[c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn forest_averages_trees() {
        let topo = TreeTopology::new(2, vec![0], 1).unwrap();
        let a = Tree::with_leaves(topo.clone(), &[dist(&[1.0, 0.0]), dist(&[1.0, 0.0])]).unwrap();
        let b = Tree::with_leaves(topo, &[dist(&[0.0, 1.0]), dist(&[0.0, 1.0])]).unwrap();
        let f = FeatureFunction::new(vec![0.3, -0.1], 1, 1, true).unwrap();
        let single = Forest::new(vec![a.clone()], f.clone()).unwrap();
        assert_eq!(single.predict(&[2.0]).unwrap(), single.tree_predictions(&[2.0]).unwrap()[0]);
        let pair = Forest::new(vec![a, b], f).unwrap();
        assert_eq!(pair.predict(&[2.0]).unwrap().as_slice(), &[0.5, 0.5]);
        assert!(pair.predict(&[2.0, 1.0]).is_err());
    }

    #[test]
    fn scratch_prediction_matches_predict() {
        let small = TrainConfig { tree_count: 2, tree_depth: 3, output_units: 4, theta_init_std: 0.5, ..TrainConfig::default() };
        let big = TrainConfig { tree_depth: 4, output_units: 8, ..small.clone() };
        let a = build_forest(&small, 2, 3, 1).unwrap();
        let b = build_forest(&big, 2, 3, 2).unwrap();
        let mut scratch = PredictScratch::new(&a);
        let mut out = vec![0.0; 3];
        for forest in [&a, &b, &a] {
            forest.predict_with(&[0.4, -1.2], &mut scratch, &mut out).unwrap();
            assert_eq!(out, forest.predict(&[0.4, -1.2]).unwrap().into_vec());
        }
        assert!(a.predict_with(&[0.4], &mut scratch, &mut out).is_err());
        assert!(a.predict_with(&[0.4, 1.0], &mut scratch, &mut [0.0; 2]).is_err());
    }

    proptest! {
        #[test]
        fn routing_sums_to_one(acts in prop::collection::vec(1e-6f64..(1.0 - 1e-6), 63)) {
            let tree = Tree::uniform(TreeTopology::new(7, vec![0; 63], 63).unwrap(), 2);
            let p = tree.leaf_probabilities(&acts).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn subtree_masses_add_up(acts in prop::collection::vec(0.01f64..0.99, 15),
                                 raw in prop::collection::vec(0.01f64..1.0, 16 * 3)) {
            let leaves: Vec<LabelDistribution> = raw
                .chunks(3)
                .map(|r| LabelDistribution::normalized(r.to_vec()).unwrap())
                .collect();
            let tree = Tree::with_leaves(TreeTopology::new(5, vec![0; 15], 15).unwrap(), &leaves).unwrap();
            let p = tree.leaf_probabilities(&acts).unwrap();
            // g_c(T_n) summed directly over the leaves below n must equal the
            // sum of its two children.
            let leaves_below = |node: usize| -> Vec<usize> {
                let mut lo = node;
                let mut hi = node;
                while lo < 15 {
                    lo = 2 * lo + 1;
                    hi = 2 * hi + 2;
                }
                (lo - 15..=hi - 15).collect()
            };
            let mass = |node: usize, c: usize| -> f64 {
                leaves_below(node).iter().map(|&l| p[l] * tree.leaf(l)[c]).sum()
            };
            for n in 0..15 {
                for c in 0..3 {
                    let whole = mass(n, c);
                    let parts = mass(2 * n + 1, c) + mass(2 * n + 2, c);
                    prop_assert!((whole - parts).abs() < 1e-15);
                }
            }
            let g = tree.predict(&p).unwrap();
            prop_assert!((g.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
