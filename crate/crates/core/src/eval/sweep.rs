//! Edge-masking robustness and top-N sweeps.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::report::{AblationRow, SweepRow};
use crate::graph::{split_edges, AttributedGraph, SplitFractions};
use crate::rng::{self, Stream};
use crate::training::{train_on_split, TrainConfig, Variant};

/// Removes `⌊ratio·|E|⌋` undirected edges chosen uniformly at random.
/// For a fixed seed, the removed set at a smaller ratio is a prefix of the
/// removed set at a larger one.
pub fn perturb_edges(graph: &AttributedGraph, ratio: f64, seed: u64) -> Result<AttributedGraph> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::Config(format!("masking ratio {ratio} outside [0, 1)")));
    }
    let mut edges = graph.edges();
    let remove = (edges.len() as f64 * ratio + 1e-9).floor() as usize;
    edges.shuffle(&mut rng::stream(seed, Stream::Perturb));
    graph.with_edges(&edges[remove..])
}

/// For each ratio: mask that share of the training edges, retrain, and score
/// the untouched test split.
pub fn robustness_sweep(
    graph: &AttributedGraph,
    cfg: &TrainConfig,
    ratios: &[f64],
) -> Result<Vec<SweepRow>> {
    let split = split_edges(graph, SplitFractions::LINK_PREDICTION, cfg.seed)?;
    ratios
        .par_iter()
        .map(|&ratio| {
            let masked = perturb_edges(&split.train_graph, ratio, cfg.seed)?;
            let model = train_on_split(&split.with_train_graph(masked), cfg, &mut |_| {})?;
            let (auc, ap) = model.test_metrics()?;
            Ok(SweepRow {
                value: ratio,
                auc,
                ap,
                best_epoch: model.best_epoch,
            })
        })
        .collect()
}

/// For each `N`: keep the top-`N` features per node, retrain, evaluate.
pub fn topn_sweep(
    graph: &AttributedGraph,
    cfg: &TrainConfig,
    n_values: &[usize],
) -> Result<Vec<SweepRow>> {
    let split = split_edges(graph, SplitFractions::LINK_PREDICTION, cfg.seed)?;
    n_values
        .par_iter()
        .map(|&keep| {
            let mut c = cfg.clone();
            c.topn = Some(keep);
            let model = train_on_split(&split, &c, &mut |_| {})?;
            let (auc, ap) = model.test_metrics()?;
            Ok(SweepRow {
                value: keep as f64,
                auc,
                ap,
                best_epoch: model.best_epoch,
            })
        })
        .collect()
}

/// Trains every variant on one shared split and scores the same test edges.
pub fn ablation(graph: &AttributedGraph, cfg: &TrainConfig) -> Result<Vec<AblationRow>> {
    let split = split_edges(graph, SplitFractions::LINK_PREDICTION, cfg.seed)?;
    Variant::ALL
        .par_iter()
        .map(|&variant| {
            let c = TrainConfig {
                variant,
                ..cfg.clone()
            };
            let model = train_on_split(&split, &c, &mut |_| {})?;
            let (auc, ap) = model.test_metrics()?;
            Ok(AblationRow {
                variant: variant.to_string(),
                auc,
                ap,
                best_epoch: model.best_epoch,
            })
        })
        .collect()
}
