//! Gradient of the forest loss with respect to `Θ`.
//!
//! For one sample and one tree, the partial of the loss with respect to the
//! pre-activation feeding split node `n` is
//!
//! ```text
//! Σ_c d_c · ( s_n · g_c(right subtree) − (1 − s_n) · g_c(left subtree) ) / g_c(tree)
//! ```
//!
//! where `g_c(subtree)` sums `p(ℓ|x) q_ℓc` over the leaves below. Subtree
//! sums are built bottom-up from the leaves, so one pass over the heap gives
//! every partial. The linear feature function then scatters each partial
//! into row `φ(n)` of `Θ`, multiplied by `[x; 1]`.

use std::borrow::Borrow;

use rayon::prelude::*;

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::forest::routing::{gate_activations, route};
use crate::forest::{Forest, Tree};
use crate::training::loss::cross_entropy;

/// Samples per work unit on the parallel path. Fixed, so the reduction
/// order does not depend on the thread count.
const PAR_CHUNK: usize = 16;

/// `∂R/∂Θ` for one mini-batch, already divided by the batch size and the
/// tree count, plus the forest loss on that batch.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBuffer {
    pub d_theta: Vec<f64>,
    pub loss: f64,
}

impl GradientBuffer {
    pub fn is_finite(&self) -> bool {
        self.loss.is_finite() && self.d_theta.iter().all(|v| v.is_finite())
    }
}

/// Per-sample partials `∂R_i/∂f_φ(n)` for every split node of `tree`, before
/// any `1/N` scaling.
pub fn split_gradient(
    tree: &Tree,
    target: &[f64],
    activations: &[f64],
    leaf_probs: &[f64],
    epsilon: f64,
) -> Result<Vec<f64>> {
    let topo = tree.topology();
    let dims = [
        ("split activations", topo.split_count(), activations.len()),
        ("leaf probabilities", topo.leaf_count(), leaf_probs.len()),
        ("sample target", tree.label_count(), target.len()),
    ];
    for (context, expected, found) in dims {
        if expected != found {
            return Err(Error::Dimension { context, expected, found });
        }
    }
    let mut node_g = vec![0.0; topo.node_count() * tree.label_count()];
    let mut partials = vec![0.0; topo.split_count()];
    backward(tree, activations, leaf_probs, target, epsilon, &mut node_g, &mut partials);
    Ok(partials)
}

/// Fills `node_g` with subtree sums, writes the split partials, and returns
/// this sample's cross-entropy for the tree.
#[inline]
fn backward(
    tree: &Tree,
    gates: &[f64],
    leaf_probs: &[f64],
    target: &[f64],
    epsilon: f64,
    node_g: &mut [f64],
    partials: &mut [f64],
) -> f64 {
    let c = tree.label_count();
    let splits = gates.len();
    for (l, (p, q)) in leaf_probs.iter().zip(tree.leaf_dists().chunks_exact(c)).enumerate() {
        let base = (splits + l) * c;
        for (slot, qc) in node_g[base..base + c].iter_mut().zip(q) {
            *slot = p * qc;
        }
    }
    for n in (0..splits).rev() {
        let (head, tail) = node_g.split_at_mut((2 * n + 1) * c);
        let left = &tail[..c];
        let right = &tail[c..2 * c];
        for ((slot, l), r) in head[n * c..(n + 1) * c].iter_mut().zip(left).zip(right) {
            *slot = l + r;
        }
    }
    let root = &node_g[..c];
    for (n, (partial, &s)) in partials.iter_mut().zip(gates).enumerate() {
        let left = &node_g[(2 * n + 1) * c..(2 * n + 2) * c];
        let right = &node_g[(2 * n + 2) * c..(2 * n + 3) * c];
        let mut acc = 0.0;
        for j in 0..c {
            let d = target[j];
            if d > 0.0 {
                acc += d * (s * right[j] - (1.0 - s) * left[j]) / root[j].max(epsilon);
            }
        }
        *partial = acc;
    }
    cross_entropy(target, root, epsilon)
}

struct Workspace {
    preacts: Vec<f64>,
    gates: Vec<f64>,
    mass: Vec<f64>,
    node_g: Vec<f64>,
    partials: Vec<f64>,
}

impl Workspace {
    fn new(forest: &Forest) -> Self {
        let splits = forest.trees().iter().map(|t| t.topology().split_count()).max().unwrap_or(0);
        let nodes = 2 * splits + 1;
        Workspace {
            preacts: vec![0.0; forest.feature_fn().output_dim()],
            gates: vec![0.0; splits],
            mass: vec![0.0; nodes],
            node_g: vec![0.0; nodes * forest.label_count()],
            partials: vec![0.0; splits],
        }
    }
}

/// Unscaled gradient and loss sums over `samples`.
fn accumulate<S: Borrow<Sample>>(forest: &Forest, samples: &[S], epsilon: f64) -> (Vec<f64>, f64) {
    let f = forest.feature_fn();
    let cols = f.cols();
    let m = f.input_dim();
    let mut d_theta = vec![0.0; f.theta().len()];
    let mut loss = 0.0;
    let mut ws = Workspace::new(forest);
    for sample in samples {
        let sample = sample.borrow();
        let x = &sample.features;
        for (u, p) in ws.preacts.iter_mut().enumerate() {
            *p = f.unit_output(u, x);
        }
        for tree in forest.trees() {
            let splits = tree.topology().split_count();
            let nodes = 2 * splits + 1;
            gate_activations(tree, &ws.preacts, &mut ws.gates[..splits]);
            route(&ws.gates[..splits], &mut ws.mass[..nodes]);
            loss += backward(
                tree,
                &ws.gates[..splits],
                &ws.mass[splits..nodes],
                sample.target.as_slice(),
                epsilon,
                &mut ws.node_g[..nodes * tree.label_count()],
                &mut ws.partials[..splits],
            );
            for (&unit, &partial) in tree.topology().index_map().iter().zip(&ws.partials[..splits]) {
                if partial == 0.0 {
                    continue;
                }
                let row = &mut d_theta[unit * cols..(unit + 1) * cols];
                for (r, v) in row[..m].iter_mut().zip(x) {
                    *r += partial * v;
                }
                if f.has_bias() {
                    row[m] += partial;
                }
            }
        }
    }
    (d_theta, loss)
}

/// Sequential gradient of the forest loss over `batch`.
pub fn theta_gradient<S: Borrow<Sample> + Sync>(
    forest: &Forest,
    batch: &[S],
    epsilon: f64,
) -> Result<GradientBuffer> {
    theta_gradient_with(forest, batch, epsilon, false)
}

/// Gradient of the forest loss over `batch`. With `parallel` set, samples
/// are processed in fixed-size chunks on the current rayon pool and the
/// chunk sums are added in chunk order, so results do not depend on
/// scheduling.
pub fn theta_gradient_with<S: Borrow<Sample> + Sync>(
    forest: &Forest,
    batch: &[S],
    epsilon: f64,
    parallel: bool,
) -> Result<GradientBuffer> {
    if batch.is_empty() {
        return Err(Error::Config("gradient of an empty batch".into()));
    }
    for sample in batch {
        let sample = sample.borrow();
        forest.feature_fn().check_input(&sample.features)?;
        if sample.target.len() != forest.label_count() {
            return Err(Error::Dimension {
                context: "sample target",
                expected: forest.label_count(),
                found: sample.target.len(),
            });
        }
    }
    let (mut d_theta, mut loss) = if parallel && batch.len() > PAR_CHUNK {
        let parts: Vec<(Vec<f64>, f64)> = batch
            .par_chunks(PAR_CHUNK)
            .map(|chunk| accumulate(forest, chunk, epsilon))
            .collect();
        let mut iter = parts.into_iter();
        let (mut total, mut loss) = iter.next().expect("non-empty batch");
        for (part, l) in iter {
            for (t, p) in total.iter_mut().zip(&part) {
                *t += p;
            }
            loss += l;
        }
        (total, loss)
    } else {
        accumulate(forest, batch, epsilon)
    };
    let scale = 1.0 / (batch.len() as f64 * forest.tree_count() as f64);
    d_theta.iter_mut().for_each(|v| *v *= scale);
    loss *= scale;
    Ok(GradientBuffer { d_theta, loss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabelDistribution;
    use crate::forest::{build_forest, FeatureFunction, TreeTopology};
    use crate::training::{loss, TrainConfig};

    fn dist(v: &[f64]) -> LabelDistribution {
        LabelDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn depth_two_hand_value() {
        let tree = Tree::with_leaves(
            TreeTopology::new(2, vec![0], 1).unwrap(),
            &[dist(&[1.0, 0.0]), dist(&[0.0, 1.0])],
        )
        .unwrap();
        let g = split_gradient(&tree, &[1.0, 0.0], &[0.5], &[0.5, 0.5], 1e-12).unwrap();
        assert_eq!(g, vec![-0.5]);
        assert!(split_gradient(&tree, &[1.0, 0.0], &[0.5, 0.5], &[0.5, 0.5], 1e-12).is_err());
    }

    #[test]
    fn identical_leaves_give_zero_partials() {
        let q = dist(&[0.2, 0.5, 0.3]);
        let tree = Tree::with_leaves(TreeTopology::new(3, vec![0, 0, 0], 3).unwrap(), &vec![q; 4]).unwrap();
        let acts = [0.3, 0.8, 0.45];
        let probs = tree.leaf_probabilities(&acts).unwrap();
        let g = split_gradient(&tree, &[0.1, 0.6, 0.3], &acts, &probs, 1e-12).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-16), "{g:?}");
    }

    /// Central difference of the tree loss with respect to one split node's
    /// pre-activation.
    #[test]
    fn split_partials_match_finite_differences() {
        let leaves: Vec<LabelDistribution> = [
            [0.7, 0.2, 0.1],
            [0.1, 0.1, 0.8],
            [0.3, 0.4, 0.3],
            [0.05, 0.9, 0.05],
        ]
        .iter()
        .map(|r| dist(r))
        .collect();
        let tree = Tree::with_leaves(TreeTopology::new(3, vec![0, 1, 2], 3).unwrap(), &leaves).unwrap();
        let target = [0.2, 0.3, 0.5];
        let pre = [0.4, -1.3, 0.9];
        let tree_loss_at = |z: &[f64]| {
            let acts: Vec<f64> = z.iter().map(|v| crate::forest::sigmoid(*v)).collect();
            let p = tree.leaf_probabilities(&acts).unwrap();
            let g = tree.predict(&p).unwrap();
            cross_entropy(&target, g.as_slice(), 1e-12)
        };
        let acts: Vec<f64> = pre.iter().map(|v| crate::forest::sigmoid(*v)).collect();
        let probs = tree.leaf_probabilities(&acts).unwrap();
        let analytic = split_gradient(&tree, &target, &acts, &probs, 1e-12).unwrap();
        let h = 1e-6;
        for n in 0..3 {
            let mut up = pre;
            let mut down = pre;
            up[n] += h;
            down[n] -= h;
            let numeric = (tree_loss_at(&up) - tree_loss_at(&down)) / (2.0 * h);
            let err = (numeric - analytic[n]).abs();
            assert!(err < 1e-9 || err / analytic[n].abs() < 1e-6, "n={n}: {numeric} vs {}", analytic[n]);
        }
    }

    #[test]
    fn single_tree_chain_rule() {
        // One tree, one unit: dR/dθ = partial · [x; 1].
        let tree = Tree::with_leaves(
            TreeTopology::new(2, vec![0], 1).unwrap(),
            &[dist(&[1.0, 0.0]), dist(&[0.0, 1.0])],
        )
        .unwrap();
        let forest = Forest::new(vec![tree], FeatureFunction::zeros(1, 2, true)).unwrap();
        let batch = [Sample::new(vec![2.0, -1.0], dist(&[1.0, 0.0]))];
        let grad = theta_gradient(&forest, &batch, 1e-12).unwrap();
        assert_eq!(grad.d_theta, vec![-1.0, 0.5, -0.5]);
        assert!((grad.loss - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn uniform_leaves_give_zero_gradient() {
        let config = TrainConfig { tree_count: 3, tree_depth: 4, output_units: 7, theta_init_std: 1.0, ..TrainConfig::default() };
        let forest = build_forest(&config, 3, 4, 1).unwrap();
        let batch: Vec<Sample> = (0..5)
            .map(|i| Sample::new(vec![i as f64, 1.0, -0.5], LabelDistribution::one_hot(4, i % 4)))
            .collect();
        let grad = theta_gradient(&forest, &batch, 1e-12).unwrap();
        assert!(grad.d_theta.iter().all(|v| v.abs() < 1e-14), "{:?}", grad.d_theta);
        assert!((grad.loss - loss(&forest, &batch, 1e-12).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn parallel_path_matches_sequential() {
        let config = TrainConfig { tree_count: 2, tree_depth: 3, output_units: 4, theta_init_std: 0.7, ..TrainConfig::default() };
        let mut forest = build_forest(&config, 2, 3, 5).unwrap();
        forest.trees_mut()[0]
            .set_leaf_dists(vec![0.6, 0.3, 0.1, 0.1, 0.8, 0.1, 0.2, 0.2, 0.6, 0.3, 0.3, 0.4])
            .unwrap();
        let batch: Vec<Sample> = (0..100)
            .map(|i| {
                let t = i as f64 / 10.0;
                Sample::new(vec![t.sin(), t.cos()], LabelDistribution::one_hot(3, i % 3))
            })
            .collect();
        let seq = theta_gradient_with(&forest, &batch, 1e-12, false).unwrap();
        let par = theta_gradient_with(&forest, &batch, 1e-12, true).unwrap();
        for (a, b) in seq.d_theta.iter().zip(&par.d_theta) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(par, theta_gradient_with(&forest, &batch, 1e-12, true).unwrap());
        let empty: [Sample; 0] = [];
        assert!(theta_gradient(&forest, &empty, 1e-12).is_err());
    }
}
