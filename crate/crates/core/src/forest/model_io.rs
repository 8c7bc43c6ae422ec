//! JSON model files.
//!
//! One document per forest. Floats are written in shortest round-trip form
//! and parsed with correct rounding, so save followed by load reproduces
//! every bit of `Θ` and the leaf distributions.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{FeatureFunction, Forest, Tree, TreeTopology};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    input_dim: usize,
    label_count: usize,
    tree_count: usize,
    depth: usize,
    output_units: usize,
    bias: bool,
    /// Row-major, `output_units × (input_dim + bias)`.
    theta: Vec<f64>,
    trees: Vec<TreeFile>,
}

#[derive(Serialize, Deserialize)]
struct TreeFile {
    index_map: Vec<usize>,
    leaf_dists: Vec<Vec<f64>>,
}

impl Forest {
    pub fn to_json(&self) -> Result<String> {
        let f = &self.feature_fn;
        let doc = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            input_dim: f.input_dim(),
            label_count: self.label_count,
            tree_count: self.trees.len(),
            depth: self.depth(),
            output_units: f.output_dim(),
            bias: f.has_bias(),
            theta: f.theta().to_vec(),
            trees: self
                .trees
                .iter()
                .map(|t| TreeFile {
                    index_map: t.topology().index_map().to_vec(),
                    leaf_dists: t.leaf_dists().chunks(self.label_count).map(<[f64]>::to_vec).collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Forest> {
        let doc: ModelFile = serde_json::from_str(text)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Model(format!(
                "unsupported format version {}",
                doc.format_version
            )));
        }
        if doc.trees.len() != doc.tree_count {
            return Err(Error::Model(format!(
                "tree_count is {} but {} trees are present",
                doc.tree_count,
                doc.trees.len()
            )));
        }
        let feature_fn = FeatureFunction::new(doc.theta, doc.output_units, doc.input_dim, doc.bias)
            .map_err(|e| Error::Model(e.to_string()))?;
        let mut trees = Vec::with_capacity(doc.trees.len());
        for (k, t) in doc.trees.into_iter().enumerate() {
            let topology = TreeTopology::new(doc.depth, t.index_map, doc.output_units)
                .map_err(|e| Error::Model(format!("tree {k}: {e}")))?;
            if t.leaf_dists.len() != topology.leaf_count()
                || t.leaf_dists.iter().any(|r| r.len() != doc.label_count)
            {
                return Err(Error::Model(format!("tree {k}: leaf table has the wrong shape")));
            }
            let mut tree = Tree::uniform(topology, doc.label_count);
            tree.set_leaf_dists(t.leaf_dists.concat())
                .map_err(|e| Error::Model(format!("tree {k}: {e}")))?;
            trees.push(tree);
        }
        Forest::new(trees, feature_fn).map_err(|e| Error::Model(e.to_string()))
    }
}

pub fn save_model(forest: &Forest, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(forest.to_json()?.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Forest> {
    let mut text = String::new();
    std::io::Read::read_to_string(&mut BufReader::new(File::open(path)?), &mut text)?;
    Forest::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::TrainConfig;

    #[test]
    fn round_trip_is_bit_exact() {
        let config = TrainConfig {
            tree_count: 3,
            tree_depth: 4,
            output_units: 9,
            theta_init_std: 1.7,
            ..TrainConfig::default()
        };
        let mut forest = crate::forest::build_forest(&config, 5, 4, 99).unwrap();
        // Awkward leaf values.
        let leaves: Vec<f64> = (0..8)
            .flat_map(|l| {
                let w = [1.0 / 3.0 + l as f64 * 1e-7, 0.1, std::f64::consts::PI / 10.0, 0.0];
                let s: f64 = w.iter().sum();
                w.map(|v| v / s)
            })
            .collect();
        forest.trees_mut()[1].set_leaf_dists(leaves).unwrap();
        let text = forest.to_json().unwrap();
        let back = Forest::from_json(&text).unwrap();
        assert_eq!(back, forest);
        for (a, b) in back.feature_fn().theta().iter().zip(forest.feature_fn().theta()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn rejects_bad_documents() {
        let forest = crate::forest::build_forest(
            &TrainConfig {
                tree_count: 1,
                tree_depth: 2,
                output_units: 1,
                ..TrainConfig::default()
            },
            2,
            2,
            0,
        )
        .unwrap();
        let good = forest.to_json().unwrap();
        let mut doc: serde_json::Value = serde_json::from_str(&good).unwrap();
        doc["format_version"] = 7.into();
        assert!(matches!(Forest::from_json(&doc.to_string()), Err(Error::Model(_))));

        let mut doc: serde_json::Value = serde_json::from_str(&good).unwrap();
        doc["trees"][0]["leaf_dists"][0] = serde_json::json!([0.9, 0.3]);
        assert!(matches!(Forest::from_json(&doc.to_string()), Err(Error::Model(_))));

        let mut doc: serde_json::Value = serde_json::from_str(&good).unwrap();
        doc["trees"][0]["index_map"][0] = 5.into();
        assert!(matches!(Forest::from_json(&doc.to_string()), Err(Error::Model(_))));

        assert!(matches!(Forest::from_json("{"), Err(Error::Json(_))));
    }
}
