//! Versioned JSON parameter snapshots.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{split_edges, AttributedGraph};
use crate::linalg::Dense;
use crate::scorer::PairModel;
use crate::training::{prepare, Params, TrainConfig, TrainedModel};

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u32,
    pub num_nodes: usize,
    pub num_attributes: usize,
    pub dim: usize,
    pub depth: usize,
    /// Mixing weight actually used by the operator.
    pub alpha: f64,
    pub best_epoch: usize,
    pub config: BTreeMap<String, String>,
    /// Row-major `(num_nodes + num_attributes) × dim` base embeddings.
    pub base: Vec<f64>,
    pub model: PairModel,
}

impl Snapshot {
    pub fn from_model(model: &TrainedModel) -> Self {
        Snapshot {
            version: SNAPSHOT_VERSION,
            num_nodes: model.op.num_nodes(),
            num_attributes: model.op.num_attributes(),
            dim: model.cfg.dim,
            depth: model.cfg.depth,
            alpha: model.op.alpha(),
            best_epoch: model.best_epoch,
            config: model
                .cfg
                .to_pairs()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            base: model.params.base.as_slice().to_vec(),
            model: model.params.model.clone(),
        }
    }

    pub fn config(&self) -> Result<TrainConfig> {
        TrainConfig::from_pairs(self.config.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    pub fn params(&self) -> Result<Params> {
        let base = Dense::from_vec(
            self.num_nodes + self.num_attributes,
            self.dim,
            self.base.clone(),
        )?;
        Ok(Params {
            base,
            model: self.model.clone(),
        })
    }

    /// Rebuilds the trained model against `graph`: the same split and
    /// operator as at training time, with the stored weights.
    pub fn restore(&self, graph: &AttributedGraph) -> Result<TrainedModel> {
        if graph.num_nodes() != self.num_nodes || graph.num_attributes() != self.num_attributes {
            return Err(Error::Compatibility(format!(
                "snapshot covers {} nodes and {} attributes, graph has {} and {}",
                self.num_nodes,
                self.num_attributes,
                graph.num_nodes(),
                graph.num_attributes()
            )));
        }
        let cfg = self.config()?;
        let split = split_edges(graph, cfg.task.split_fractions(), cfg.seed)?;
        let (op, _) = prepare(&split.train_graph, &cfg)?;
        Ok(TrainedModel {
            cfg,
            op,
            params: self.params()?,
            best_epoch: self.best_epoch,
            history: Vec::new(),
            split,
        })
    }

    /// Fails when a requested `d`, `K` or `α` disagrees with the snapshot.
    pub fn check_compatible(
        &self,
        dim: Option<usize>,
        depth: Option<usize>,
        alpha: Option<f64>,
    ) -> Result<()> {
        if let Some(d) = dim.filter(|&d| d != self.dim) {
            return Err(Error::Compatibility(format!("snapshot has d={}, requested d={d}", self.dim)));
        }
        if let Some(k) = depth.filter(|&k| k != self.depth) {
            return Err(Error::Compatibility(format!("snapshot has K={}, requested K={k}", self.depth)));
        }
        if let Some(a) = alpha.filter(|a| (a - self.alpha).abs() > 1e-12) {
            return Err(Error::Compatibility(format!(
                "snapshot has alpha={}, requested alpha={a}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: Snapshot = serde_json::from_str(text)?;
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::Compatibility(format!(
                "snapshot version {} is not supported (expected {SNAPSHOT_VERSION})",
                snap.version
            )));
        }
        if snap.base.len() != (snap.num_nodes + snap.num_attributes) * snap.dim {
            return Err(Error::Dimension(format!(
                "snapshot base has {} values for {}×{}",
                snap.base.len(),
                snap.num_nodes + snap.num_attributes,
                snap.dim
            )));
        }
        Ok(snap)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
