//! Central finite-difference checks of every hand-written backward pass.

use std::ops::RangeInclusive;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::augment::{build_transition, AugmentedOperator};
use crate::error::Result;
use crate::graph::AttributedGraph;
use crate::linalg::Dense;
use crate::propagate::{self, LayerStack};
use crate::rng::{substream, Stream};
use crate::scorer::{feature_width, PairModel, ScorerParams};
use crate::training::{accumulate_pair, batch_loss, batch_loss_and_grads, pair_loss, Example};

const STEP: f64 = 1e-6;

pub const PROPAGATE_TOL: f64 = 1e-6;
pub const LOSS_TOL: f64 = 1e-6;
pub const SCORER_TOL: f64 = 1e-5;
pub const END_TO_END_TOL: f64 = 1e-4;

/// Deliberate bugs for exercising the harness itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Negates the analytic gradient of the first scorer weight block.
    ScorerSignFlip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckConfig {
    pub instances: usize,
    pub max_nodes: usize,
    pub max_attributes: usize,
    pub dims: RangeInclusive<usize>,
    pub depths: RangeInclusive<usize>,
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig {
            instances: 20,
            max_nodes: 12,
            max_attributes: 5,
            dims: 1..=6,
            depths: 0..=2,
            seed: 0,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub instance: usize,
    pub param: String,
    pub rel_error: f64,
    pub threshold: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.rel_error < self.threshold
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct GradcheckReport {
    pub checks: Vec<Check>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }

    /// Largest error per suite, in first-seen order.
    pub fn worst_by_suite(&self) -> Vec<&Check> {
        let mut out: Vec<&Check> = Vec::new();
        for c in &self.checks {
            match out.iter_mut().find(|w| w.suite == c.suite) {
                Some(w) if c.rel_error > w.rel_error => *w = c,
                Some(_) => {}
                None => out.push(c),
            }
        }
        out
    }

    pub fn max_rel_error(&self) -> f64 {
        self.checks.iter().map(|c| c.rel_error).fold(0.0, f64::max)
    }
}

/// `‖a − n‖ / (‖a‖ + ‖n‖)`, falling back to the absolute difference when
/// both gradients vanish.
pub fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()) + norm(&mut numeric.iter().copied());
    diff / scale.max(1e-8)
}

fn central_difference(
    x: &[f64],
    mut f: impl FnMut(usize, f64) -> Result<f64>,
) -> Result<Vec<f64>> {
    (0..x.len())
        .map(|i| Ok((f(i, x[i] + STEP)? - f(i, x[i] - STEP)?) / (2.0 * STEP)))
        .collect()
}

fn numeric_base_grad(base: &Dense, mut f: impl FnMut(&Dense) -> Result<f64>) -> Result<Vec<f64>> {
    let mut probe = base.clone();
    central_difference(base.as_slice(), |i, v| {
        let old = probe.as_slice()[i];
        probe.as_mut_slice()[i] = v;
        let out = f(&probe);
        probe.as_mut_slice()[i] = old;
        out
    })
}

fn numeric_block_grad(
    model: &PairModel,
    block: usize,
    mut f: impl FnMut(&PairModel) -> Result<f64>,
) -> Result<Vec<f64>> {
    let mut probe = model.clone();
    let x = model.blocks()[block].1.to_vec();
    central_difference(&x, |i, v| {
        probe.blocks_mut()[block].1[i] = v;
        let out = f(&probe);
        probe.blocks_mut()[block].1[i] = x[i];
        out
    })
}

struct Instance {
    op: AugmentedOperator,
    base: Dense,
    model: PairModel,
    depth: usize,
}

fn random_instance(cfg: &GradcheckConfig, rng: &mut ChaCha8Rng, index: usize) -> Result<Instance> {
    let n = rng.gen_range(2..=cfg.max_nodes.max(2));
    let m = rng.gen_range(0..=cfg.max_attributes);
    let dim = rng.gen_range(cfg.dims.clone());
    let depth = rng.gen_range(cfg.depths.clone());
    let alpha = rng.gen_range(0.0..=1.0);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(0.35) {
                edges.push((u, v));
            }
        }
    }
    let mut features = Vec::new();
    for v in 0..n {
        for j in 0..m {
            if rng.gen_bool(0.4) {
                let mag = rng.gen_range(0.2..1.5);
                features.push((v, j, if rng.gen_bool(0.25) { -mag } else { mag }));
            }
        }
    }
    let graph = AttributedGraph::new(n, m, &edges, &features, None)?;
    let op = build_transition(graph.adjacency(), graph.features(), alpha)?;
    let size = n + m;
    let base = Dense::from_vec(size, dim, (0..size * dim).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let width = feature_width(depth, dim);
    let head = |rng: &mut ChaCha8Rng| {
        let mut p = ScorerParams::init(width, dim, rng);
        for (name, block) in p.blocks_mut() {
            if name.starts_with('b') {
                block.iter_mut().for_each(|b| *b = rng.gen_range(-0.3..0.3));
            }
        }
        p
    };
    let model = match index % 3 {
        0 => PairModel::Mlp {
            shared: head(rng),
            attribute: None,
        },
        1 => PairModel::Mlp {
            shared: head(rng),
            attribute: Some(head(rng)),
        },
        _ => PairModel::Inner,
    };
    Ok(Instance {
        op,
        base,
        model,
        depth,
    })
}

fn flip_first_block(fault: Option<Fault>, grads: &mut PairModel) {
    if fault == Some(Fault::ScorerSignFlip) {
        if let Some((_, block)) = grads.blocks_mut().into_iter().next() {
            block.iter_mut().for_each(|g| *g = -*g);
        }
    }
}

/// Scatters per-entity row gradients `[(entity, (K+1)·d values)]` into one
/// matrix per layer.
fn rows_to_layers(rows: &[(usize, Vec<f64>)], size: usize, dim: usize, depth: usize) -> Vec<Dense> {
    let mut layers = vec![Dense::zeros(size, dim); depth + 1];
    for (e, g) in rows {
        for (k, layer) in layers.iter_mut().enumerate() {
            for (dst, src) in layer.row_mut(*e).iter_mut().zip(&g[k * dim..(k + 1) * dim]) {
                *dst += src;
            }
        }
    }
    layers
}

fn check_propagate(inst: &Instance, rng: &mut ChaCha8Rng, i: usize, out: &mut Vec<Check>) -> Result<()> {
    let (size, dim) = inst.base.shape();
    let probes: Vec<Dense> = (0..=inst.depth)
        .map(|_| {
            Dense::from_vec(size, dim, (0..size * dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        })
        .collect::<Result<_>>()?;
    let f = |h: &Dense| -> Result<f64> {
        let stack = propagate::forward(&inst.op, h, inst.depth)?;
        Ok(stack
            .layers()
            .iter()
            .zip(&probes)
            .map(|(l, r)| l.as_slice().iter().zip(r.as_slice()).map(|(a, b)| a * b).sum::<f64>())
            .sum())
    };
    let analytic = propagate::backward(&inst.op, &probes)?;
    let numeric = numeric_base_grad(&inst.base, f)?;
    out.push(Check {
        suite: "propagate",
        instance: i,
        param: "base".into(),
        rel_error: rel_error(analytic.as_slice(), &numeric),
        threshold: PROPAGATE_TOL,
    });
    Ok(())
}

fn check_pair_loss(rng: &mut ChaCha8Rng, i: usize, out: &mut Vec<Check>) -> Result<()> {
    let q = rng.gen_range(1..=5);
    let logits: Vec<f64> = (0..=q).map(|_| rng.gen_range(-4.0..4.0)).collect();
    let pl = pair_loss(logits[0], &logits[1..]);
    let mut analytic = vec![pl.dpos];
    analytic.extend(&pl.dnegs);
    let mut probe = logits.clone();
    let numeric = central_difference(&logits, |j, v| {
        probe[j] = v;
        let loss = pair_loss(probe[0], &probe[1..]).loss;
        probe[j] = logits[j];
        Ok(loss)
    })?;
    out.push(Check {
        suite: "loss",
        instance: i,
        param: "logits".into(),
        rel_error: rel_error(&analytic, &numeric),
        threshold: LOSS_TOL,
    });
    Ok(())
}

fn check_scorer(
    inst: &Instance,
    rng: &mut ChaCha8Rng,
    i: usize,
    fault: Option<Fault>,
    out: &mut Vec<Check>,
) -> Result<()> {
    if matches!(inst.model, PairModel::Inner) {
        return Ok(());
    }
    let (size, dim) = inst.base.shape();
    let n = inst.op.num_nodes();
    let a = rng.gen_range(0..size);
    let b = rng.gen_range(0..size);
    let stack = propagate::forward(&inst.op, &inst.base, inst.depth)?;
    let mut grads = inst.model.zeros_like();
    let mut rows = Vec::new();
    accumulate_pair(&inst.model, &stack, n, a, b, 1.0, &mut grads, &mut rows)?;
    flip_first_block(fault, &mut grads);

    let score_at = |h: &Dense, model: &PairModel| -> Result<f64> {
        let s: LayerStack = propagate::forward(&inst.op, h, inst.depth)?;
        model.score(&s, a, b, n)
    };
    let analytic = propagate::backward(&inst.op, &rows_to_layers(&rows, size, dim, inst.depth))?;
    let numeric = numeric_base_grad(&inst.base, |h| score_at(h, &inst.model))?;
    out.push(Check {
        suite: "scorer",
        instance: i,
        param: "base".into(),
        rel_error: rel_error(analytic.as_slice(), &numeric),
        threshold: SCORER_TOL,
    });
    for (bi, (name, g)) in grads.blocks().into_iter().enumerate() {
        let numeric = numeric_block_grad(&inst.model, bi, |m| score_at(&inst.base, m))?;
        out.push(Check {
            suite: "scorer",
            instance: i,
            param: name,
            rel_error: rel_error(g, &numeric),
            threshold: SCORER_TOL,
        });
    }
    Ok(())
}

fn check_end_to_end(
    inst: &Instance,
    rng: &mut ChaCha8Rng,
    i: usize,
    fault: Option<Fault>,
    out: &mut Vec<Check>,
) -> Result<()> {
    let size = inst.base.rows();
    let examples: Vec<Example> = (0..rng.gen_range(1..=6))
        .map(|_| Example {
            anchor: rng.gen_range(0..size),
            positive: rng.gen_range(0..size),
            negatives: (0..rng.gen_range(1..=3)).map(|_| rng.gen_range(0..size)).collect(),
        })
        .collect();
    let mut grads = batch_loss_and_grads(&inst.op, &inst.base, &inst.model, inst.depth, &examples)?;
    flip_first_block(fault, &mut grads.model);
    let numeric = numeric_base_grad(&inst.base, |h| {
        batch_loss(&inst.op, h, &inst.model, inst.depth, &examples)
    })?;
    out.push(Check {
        suite: "end_to_end",
        instance: i,
        param: "base".into(),
        rel_error: rel_error(grads.base.as_slice(), &numeric),
        threshold: END_TO_END_TOL,
    });
    for (bi, (name, g)) in grads.model.blocks().into_iter().enumerate() {
        let numeric = numeric_block_grad(&inst.model, bi, |m| {
            batch_loss(&inst.op, &inst.base, m, inst.depth, &examples)
        })?;
        out.push(Check {
            suite: "end_to_end",
            instance: i,
            param: name,
            rel_error: rel_error(g, &numeric),
            threshold: END_TO_END_TOL,
        });
    }
    Ok(())
}

/// Runs every suite on `cfg.instances` seeded random instances.
pub fn run(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    let mut checks = Vec::new();
    for i in 0..cfg.instances {
        let mut rng = substream(cfg.seed, Stream::Gradcheck, i as u64);
        let inst = random_instance(cfg, &mut rng, i)?;
        check_propagate(&inst, &mut rng, i, &mut checks)?;
        check_pair_loss(&mut rng, i, &mut checks)?;
        check_scorer(&inst, &mut rng, i, cfg.fault, &mut checks)?;
        check_end_to_end(&inst, &mut rng, i, cfg.fault, &mut checks)?;
    }
    Ok(GradcheckReport { checks })
}
