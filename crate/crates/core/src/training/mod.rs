//! Joint reconstruction of node-node and node/attribute-category links.

mod adam;
mod config;
mod objective;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamMoments};
pub use config::{NegativeScope, Task, TrainConfig, Variant, CONFIG_KEYS};
pub use objective::{
    accumulate_pair, batch_loss, batch_loss_and_grads, batch_loss_on_stack, pair_loss,
    sample_negative, sigmoid, softplus, BatchGrads, Example, PairLoss,
};

use crate::augment::{
    build_binary_targets, build_transition, sparsify_graph, AugmentedOperator, BinaryTargets,
};
use crate::error::{Error, Result};
use crate::eval::metrics::{auc, average_precision_seeded};
use crate::graph::{split_edges, AttributedGraph, EdgeSplit};
use crate::linalg::Dense;
use crate::propagate::{self, init_embeddings, LayerStack};
use crate::rng::{self, Stream};
use crate::scorer::{feature_width, PairModel, ScorerParams};

/// Trainable parameters: base embeddings and the pair scorer.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub base: Dense,
    pub model: PairModel,
}

impl Params {
    pub fn init(size: usize, cfg: &TrainConfig) -> Result<Self> {
        let base = init_embeddings(size, cfg.dim, cfg.seed)?;
        let model = if cfg.variant == Variant::Inner {
            PairModel::Inner
        } else {
            let mut rng = rng::stream(cfg.seed, Stream::Scorer);
            let width = feature_width(cfg.depth, cfg.dim);
            let shared = ScorerParams::init(width, cfg.dim, &mut rng);
            let attribute = cfg
                .separate_heads
                .then(|| ScorerParams::init(width, cfg.dim, &mut rng));
            PairModel::Mlp { shared, attribute }
        };
        Ok(Params { base, model })
    }
}

#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: Params,
    pub base_moments: AdamMoments,
    pub model_moments: Vec<AdamMoments>,
    pub step: u64,
    pub best_val_ap: f64,
    pub epochs_since_best: usize,
}

impl TrainState {
    pub fn new(params: Params) -> Self {
        let base_moments = AdamMoments::zeros(params.base.as_slice().len());
        let model_moments = params
            .model
            .blocks()
            .iter()
            .map(|(_, b)| AdamMoments::zeros(b.len()))
            .collect();
        TrainState {
            params,
            base_moments,
            model_moments,
            step: 0,
            best_val_ap: f64::NEG_INFINITY,
            epochs_since_best: 0,
        }
    }

    /// One Adam update of every parameter block.
    pub fn apply(&mut self, grads: &BatchGrads, cfg: &AdamConfig) -> Result<()> {
        self.step += 1;
        adam_step(
            "base",
            self.params.base.as_mut_slice(),
            grads.base.as_slice(),
            &mut self.base_moments,
            self.step,
            cfg,
        )?;
        let gblocks = grads.model.blocks();
        for (((name, p), (_, g)), mom) in self
            .params
            .model
            .blocks_mut()
            .into_iter()
            .zip(gblocks)
            .zip(self.model_moments.iter_mut())
        {
            adam_step(&name, p, g, mom, self.step, cfg)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub val_auc: f64,
    pub val_ap: f64,
    pub seconds: f64,
}

/// Directed positive pairs of the objective, in (anchor, partner) order.
pub fn positive_pairs(targets: &BinaryTargets, variant: Variant) -> Vec<(usize, usize)> {
    let n = targets.num_nodes();
    let with_attr = variant.uses_attribute_loss();
    (0..targets.size())
        .filter(|&a| a < n || with_attr)
        .flat_map(|a| targets.neighbors(a).iter().map(move |&b| (a, b)))
        .filter(|&(a, b)| with_attr || (a < n && b < n))
        .collect()
}

/// Everything one training run needs besides the held-out edges.
pub struct Trainer {
    pub cfg: TrainConfig,
    pub op: AugmentedOperator,
    pub targets: BinaryTargets,
    pub positives: Vec<(usize, usize)>,
    pub state: TrainState,
    shuffle_rng: ChaCha8Rng,
    negative_rng: ChaCha8Rng,
}

/// Transition operator and reconstruction targets for a training graph,
/// after optional top-N sparsification.
pub fn prepare(
    train_graph: &AttributedGraph,
    cfg: &TrainConfig,
) -> Result<(AugmentedOperator, BinaryTargets)> {
    let graph = match cfg.topn {
        Some(keep) => sparsify_graph(train_graph, keep)?,
        None => train_graph.clone(),
    };
    let op = build_transition(graph.adjacency(), graph.features(), cfg.effective_alpha())?;
    let targets = build_binary_targets(graph.adjacency(), graph.features())?;
    Ok((op, targets))
}

impl Trainer {
    /// Builds operators and targets from the training graph (after optional
    /// top-N sparsification) and initializes parameters.
    pub fn new(train_graph: &AttributedGraph, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let (op, targets) = prepare(train_graph, cfg)?;
        let positives = positive_pairs(&targets, cfg.variant);
        let state = TrainState::new(Params::init(op.size(), cfg)?);
        Ok(Trainer {
            cfg: cfg.clone(),
            op,
            targets,
            positives,
            state,
            shuffle_rng: rng::stream(cfg.seed, Stream::Shuffle),
            negative_rng: rng::stream(cfg.seed, Stream::Negatives),
        })
    }

    fn negative_range(&self, partner: usize) -> std::ops::Range<usize> {
        let n = self.op.num_nodes();
        match self.cfg.effective_negative_scope() {
            NegativeScope::Union => 0..self.op.size(),
            NegativeScope::TargetType if partner < n => 0..n,
            NegativeScope::TargetType => n..self.op.size(),
        }
    }

    fn examples(&mut self, pairs: &[(usize, usize)]) -> Result<Vec<Example>> {
        let q = self.cfg.negatives;
        let mut out = Vec::with_capacity(pairs.len());
        for &(anchor, positive) in pairs {
            let range = self.negative_range(positive);
            let negatives = (0..q)
                .map(|_| sample_negative(anchor, &self.targets, range.clone(), &mut self.negative_rng))
                .collect::<Result<Vec<_>>>()?;
            out.push(Example {
                anchor,
                positive,
                negatives,
            });
        }
        Ok(out)
    }

    /// One shuffled pass over all positive pairs with an Adam step per
    /// minibatch. Returns the mean loss over positives (0 when there are none).
    pub fn epoch(&mut self) -> Result<f64> {
        let mut order = self.positives.clone();
        order.shuffle(&mut self.shuffle_rng);
        let adam = AdamConfig::with_lr(self.cfg.lr);
        let mut total = 0.0;
        for batch in order.chunks(self.cfg.batch_size) {
            let examples = self.examples(batch)?;
            let grads = batch_loss_and_grads(
                &self.op,
                &self.state.params.base,
                &self.state.params.model,
                self.cfg.depth,
                &examples,
            )?;
            if !grads.loss.is_finite() {
                return Err(Error::NonFinite {
                    param: "loss".into(),
                    index: 0,
                    step: self.state.step,
                });
            }
            total += grads.loss * batch.len() as f64;
            self.state.apply(&grads, &adam)?;
        }
        Ok(if order.is_empty() {
            0.0
        } else {
            total / order.len() as f64
        })
    }

    pub fn stack(&self) -> Result<LayerStack> {
        propagate::forward(&self.op, &self.state.params.base, self.cfg.depth)
    }
}

/// Symmetric scores for a list of node pairs.
pub fn score_pairs(
    model: &PairModel,
    stack: &LayerStack,
    num_nodes: usize,
    pairs: &[(usize, usize)],
) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|&(a, b)| model.score_symmetric(stack, a, b, num_nodes))
        .collect()
}

/// AUC and AP of held-out positives against held-out negatives.
pub fn link_metrics(
    model: &PairModel,
    stack: &LayerStack,
    num_nodes: usize,
    pos: &[(usize, usize)],
    neg: &[(usize, usize)],
    seed: u64,
) -> Result<(f64, f64)> {
    let ps = score_pairs(model, stack, num_nodes, pos)?;
    let ns = score_pairs(model, stack, num_nodes, neg)?;
    Ok((auc(&ps, &ns)?, average_precision_seeded(&ps, &ns, seed)?))
}

/// Outcome of a training run: the best-validation parameters and the
/// operator they were trained against.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub cfg: TrainConfig,
    pub op: AugmentedOperator,
    pub params: Params,
    pub best_epoch: usize,
    pub history: Vec<EpochMetrics>,
    pub split: EdgeSplit,
}

impl TrainedModel {
    pub fn stack(&self) -> Result<LayerStack> {
        propagate::forward(&self.op, &self.params.base, self.cfg.depth)
    }

    pub fn num_nodes(&self) -> usize {
        self.op.num_nodes()
    }

    /// Node rows of the last propagated layer.
    pub fn node_embeddings(&self) -> Result<Dense> {
        Ok(crate::scorer::last_layer_rows(&self.stack()?, self.num_nodes()))
    }

    pub fn evaluate(&self, pos: &[(usize, usize)], neg: &[(usize, usize)]) -> Result<(f64, f64)> {
        let stack = self.stack()?;
        link_metrics(&self.params.model, &stack, self.num_nodes(), pos, neg, self.cfg.seed)
    }

    /// Test-split AUC and AP.
    pub fn test_metrics(&self) -> Result<(f64, f64)> {
        self.evaluate(&self.split.test_pos, &self.split.test_neg)
    }
}

pub fn train(graph: &AttributedGraph, cfg: &TrainConfig) -> Result<TrainedModel> {
    train_with(graph, cfg, &mut |_| {})
}

/// Splits the edges per the task and trains, reporting each epoch.
pub fn train_with(
    graph: &AttributedGraph,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochMetrics),
) -> Result<TrainedModel> {
    cfg.validate()?;
    let split = split_edges(graph, cfg.task.split_fractions(), cfg.seed)?;
    train_on_split(&split, cfg, on_epoch)
}

/// Trains on a prepared split with early stopping on validation AP.
pub fn train_on_split(
    split: &EdgeSplit,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochMetrics),
) -> Result<TrainedModel> {
    let mut trainer = Trainer::new(&split.train_graph, cfg)?;
    let n = trainer.op.num_nodes();
    let mut best = trainer.state.params.clone();
    let mut best_epoch = 0;
    let mut history = Vec::new();
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let loss = trainer.epoch()?;
        let stack = trainer.stack()?;
        let (val_auc, val_ap) = link_metrics(
            &trainer.state.params.model,
            &stack,
            n,
            &split.val_pos,
            &split.val_neg,
            cfg.seed,
        )?;
        let m = EpochMetrics {
            epoch,
            loss,
            val_auc,
            val_ap,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&m);
        history.push(m);
        if val_ap > trainer.state.best_val_ap {
            trainer.state.best_val_ap = val_ap;
            trainer.state.epochs_since_best = 0;
            best = trainer.state.params.clone();
            best_epoch = epoch;
        } else {
            trainer.state.epochs_since_best += 1;
            if trainer.state.epochs_since_best >= cfg.patience {
                break;
            }
        }
    }
    Ok(TrainedModel {
        cfg: cfg.clone(),
        op: trainer.op,
        params: best,
        best_epoch,
        history,
        split: split.clone(),
    })
}
