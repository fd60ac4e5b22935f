//! Versioned JSON file format for trained forests.
//!
//! A header (format tag, version, feature count, tree count, hyperparameters,
//! feature scales, training summary) followed by each tree as a preorder node
//! list.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FeatureInfo, Forest, Hyperparams, OobReport, Tree, TrainingSummary, TreeNode};
use crate::error::{Error, Result};

pub const FOREST_FORMAT: &str = "abcrf-forest";
pub const FOREST_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ForestFile {
    format: String,
    version: u32,
    p: usize,
    n_trees: usize,
    hyperparams: Hyperparams,
    features: Vec<FeatureInfo>,
    training: TrainingSummary,
    oob: Option<OobReport>,
    trees: Vec<Vec<TreeNode>>,
}

impl Forest {
    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let file = ForestFile {
            format: FOREST_FORMAT.to_string(),
            version: FOREST_VERSION,
            p: self.n_features(),
            n_trees: self.trees.len(),
            hyperparams: self.hyperparams,
            features: self.features.clone(),
            training: self.training,
            oob: self.oob,
            trees: self.trees.iter().map(|t| t.nodes().to_vec()).collect(),
        };
        serde_json::to_writer(out, &file)?;
        Ok(())
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let file: ForestFile = serde_json::from_reader(input)?;
        if file.format != FOREST_FORMAT {
            return Err(Error::InvalidInput(format!(
                "not a forest file (format tag {:?})",
                file.format
            )));
        }
        if file.version != FOREST_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported forest file version {} (expected {FOREST_VERSION})",
                file.version
            )));
        }
        if file.features.len() != file.p {
            return Err(Error::DimensionMismatch {
                expected: file.p,
                actual: file.features.len(),
            });
        }
        if file.trees.len() != file.n_trees || file.n_trees == 0 {
            return Err(Error::InvalidInput(format!(
                "header declares {} trees, file contains {}",
                file.n_trees,
                file.trees.len()
            )));
        }
        let trees = file
            .trees
            .into_iter()
            .map(|nodes| {
                let tree = Tree::from_nodes(nodes)?;
                tree.validate(file.p)?;
                Ok(tree)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            hyperparams: file.hyperparams,
            features: file.features,
            training: file.training,
            oob: file.oob,
            trees,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file))
    }
}
