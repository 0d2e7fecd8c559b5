//! Negative-sampled logistic objective and its gradients.

use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;

use crate::augment::{AugmentedOperator, BinaryTargets};
use crate::error::{Error, Result};
use crate::linalg::Dense;
use crate::propagate::{self, LayerStack};
use crate::scorer::{
    cross_features, cross_features_backward, dot, forward_cached, scorer_backward, PairModel,
};

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairLoss {
    pub loss: f64,
    pub dpos: f64,
    pub dnegs: Vec<f64>,
}

/// `-ln σ(pos) - Σ ln σ(-neg)` and its derivative with respect to each logit.
pub fn pair_loss(pos: f64, negs: &[f64]) -> PairLoss {
    let mut loss = softplus(-pos);
    let dnegs = negs
        .iter()
        .map(|&z| {
            loss += softplus(z);
            sigmoid(z)
        })
        .collect();
    PairLoss {
        loss,
        dpos: -sigmoid(-pos),
        dnegs,
    }
}

/// Draws an entity from `range`, uniformly among those that are neither the
/// anchor nor one of its positive partners.
pub fn sample_negative<R: Rng>(
    anchor: usize,
    targets: &BinaryTargets,
    range: Range<usize>,
    rng: &mut R,
) -> Result<usize> {
    let positives = targets.neighbors(anchor);
    let blocked = positives.iter().filter(|p| range.contains(p)).count()
        + usize::from(range.contains(&anchor));
    let valid = range.len() - blocked;
    if valid == 0 {
        return Err(Error::Sampling(format!(
            "entity {anchor} has no non-neighbor in {range:?}"
        )));
    }
    let ok = |c: usize| c != anchor && positives.binary_search(&c).is_err();
    if valid * 8 >= range.len() {
        loop {
            let c = rng.gen_range(range.clone());
            if ok(c) {
                return Ok(c);
            }
        }
    }
    // dense row: pick the k-th valid candidate directly
    let k = rng.gen_range(0..valid);
    Ok(range.filter(|&c| ok(c)).nth(k).expect("k < valid"))
}

/// One positive pair with its sampled negatives, all sharing the anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub anchor: usize,
    pub positive: usize,
    pub negatives: Vec<usize>,
}

/// Gradients of a minibatch loss.
#[derive(Debug, Clone)]
pub struct BatchGrads {
    pub loss: f64,
    pub base: Dense,
    pub model: PairModel,
}

const CHUNK: usize = 32;

struct ChunkResult {
    loss: f64,
    model: PairModel,
    rows: Vec<(usize, Vec<f64>)>,
}

/// Adds `upstream · ∂y(a,b)/∂·` to the model gradient and records the
/// per-layer row gradients of `a` and `b`.
pub fn accumulate_pair(
    model: &PairModel,
    stack: &LayerStack,
    num_nodes: usize,
    a: usize,
    b: usize,
    upstream: f64,
    model_grads: &mut PairModel,
    rows: &mut Vec<(usize, Vec<f64>)>,
) -> Result<f64> {
    match model.head(a, b, num_nodes) {
        None => {
            let depth = stack.depth();
            let d = stack.dim();
            let ha = stack.row(depth, a);
            let hb = stack.row(depth, b);
            let mut ga = vec![0.0; (depth + 1) * d];
            let mut gb = vec![0.0; (depth + 1) * d];
            for t in 0..d {
                ga[depth * d + t] = upstream * hb[t];
                gb[depth * d + t] = upstream * ha[t];
            }
            rows.push((a, ga));
            rows.push((b, gb));
            Ok(dot(ha, hb))
        }
        Some(params) => {
            let cache = forward_cached(params, &cross_features(stack, a, b)?)?;
            let grads = head_grads_mut(model, model_grads, a, b, num_nodes);
            let dfeat = scorer_backward(params, &cache, upstream, grads);
            let (ga, gb) = cross_features_backward(stack, a, b, &dfeat);
            rows.push((a, ga));
            rows.push((b, gb));
            Ok(cache.logit)
        }
    }
}

fn head_grads_mut<'a>(
    model: &PairModel,
    grads: &'a mut PairModel,
    a: usize,
    b: usize,
    num_nodes: usize,
) -> &'a mut crate::scorer::ScorerParams {
    let use_attr = matches!(model, PairModel::Mlp { attribute: Some(_), .. })
        && (a >= num_nodes || b >= num_nodes);
    match grads {
        PairModel::Mlp { shared, attribute } => {
            if use_attr {
                attribute.as_mut().expect("gradient buffer mirrors model")
            } else {
                shared
            }
        }
        PairModel::Inner => unreachable!("inner model has no head"),
    }
}

fn logits(
    model: &PairModel,
    stack: &LayerStack,
    num_nodes: usize,
    ex: &Example,
) -> Result<(f64, Vec<f64>)> {
    let pos = model.score(stack, ex.anchor, ex.positive, num_nodes)?;
    let negs = ex
        .negatives
        .iter()
        .map(|&z| model.score(stack, ex.anchor, z, num_nodes))
        .collect::<Result<Vec<f64>>>()?;
    Ok((pos, negs))
}

/// Mean loss over `examples` for fixed negatives.
pub fn batch_loss(
    op: &AugmentedOperator,
    base: &Dense,
    model: &PairModel,
    depth: usize,
    examples: &[Example],
) -> Result<f64> {
    let stack = propagate::forward(op, base, depth)?;
    batch_loss_on_stack(&stack, model, op.num_nodes(), examples)
}

pub fn batch_loss_on_stack(
    stack: &LayerStack,
    model: &PairModel,
    num_nodes: usize,
    examples: &[Example],
) -> Result<f64> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for ex in examples {
        let (pos, negs) = logits(model, stack, num_nodes, ex)?;
        total += pair_loss(pos, &negs).loss;
    }
    Ok(total / examples.len() as f64)
}

/// Mean loss over `examples` and its exact gradient with respect to the base
/// embeddings and every scorer weight. Pairs are processed in fixed-size
/// chunks that are reduced in order, so the result does not depend on the
/// thread count.
pub fn batch_loss_and_grads(
    op: &AugmentedOperator,
    base: &Dense,
    model: &PairModel,
    depth: usize,
    examples: &[Example],
) -> Result<BatchGrads> {
    let stack = propagate::forward(op, base, depth)?;
    let num_nodes = op.num_nodes();
    let mut model_grads = model.zeros_like();
    let mut layer_grads = vec![Dense::zeros(base.rows(), base.cols()); depth + 1];
    if examples.is_empty() {
        return Ok(BatchGrads {
            loss: 0.0,
            base: Dense::zeros(base.rows(), base.cols()),
            model: model_grads,
        });
    }
    let scale = 1.0 / examples.len() as f64;

    let chunks: Vec<ChunkResult> = examples
        .par_chunks(CHUNK)
        .map(|chunk| -> Result<ChunkResult> {
            let mut out = ChunkResult {
                loss: 0.0,
                model: model.zeros_like(),
                rows: Vec::new(),
            };
            for ex in chunk {
                let (pos, negs) = logits(model, &stack, num_nodes, ex)?;
                let pl = pair_loss(pos, &negs);
                out.loss += pl.loss;
                accumulate_pair(
                    model,
                    &stack,
                    num_nodes,
                    ex.anchor,
                    ex.positive,
                    pl.dpos * scale,
                    &mut out.model,
                    &mut out.rows,
                )?;
                for (&z, &g) in ex.negatives.iter().zip(&pl.dnegs) {
                    accumulate_pair(
                        model,
                        &stack,
                        num_nodes,
                        ex.anchor,
                        z,
                        g * scale,
                        &mut out.model,
                        &mut out.rows,
                    )?;
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let d = base.cols();
    let mut loss = 0.0;
    for c in chunks {
        loss += c.loss;
        model_grads.add_assign(&c.model);
        for (entity, g) in c.rows {
            for (k, lg) in layer_grads.iter_mut().enumerate() {
                let dst = lg.row_mut(entity);
                for (o, v) in dst.iter_mut().zip(&g[k * d..(k + 1) * d]) {
                    *o += v;
                }
            }
        }
    }
    Ok(BatchGrads {
        loss: loss * scale,
        base: propagate::backward(op, &layer_grads)?,
        model: model_grads,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::build_binary_targets;
    use crate::linalg::Csr;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_logits_cost_ln2_each() {
        let pl = pair_loss(0.0, &[0.0; 5]);
        assert!((pl.loss - 6.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(pl.dpos, -0.5);
        assert!(pl.dnegs.iter().all(|&g| g == 0.5));
    }

    #[test]
    fn confident_logits_cost_nothing_and_stay_finite() {
        let pl = pair_loss(800.0, &[-800.0, -750.0]);
        assert!(pl.loss >= 0.0 && pl.loss < 1e-300);
        let pl = pair_loss(-800.0, &[800.0]);
        assert!(pl.loss.is_finite());
        assert!((pl.loss - 1600.0).abs() < 1e-9);
        assert_eq!(pl.dpos, -1.0);
        assert_eq!(pl.dnegs, vec![1.0]);
    }

    fn star_targets() -> BinaryTargets {
        // node 0 linked to 1..4 and to attribute 0 (entity 5); entity 6 free
        let mut t = Vec::new();
        for u in 1..5 {
            t.push((0, u, 1.0));
            t.push((u, 0, 1.0));
        }
        let a = Csr::from_triplets(5, 5, &t).unwrap();
        let x = Csr::from_triplets(5, 2, &[(0, 0, 1.0)]).unwrap();
        build_binary_targets(&a, &x).unwrap()
    }

    #[test]
    fn only_free_entity_is_drawn() {
        let t = star_targets();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            assert_eq!(sample_negative(0, &t, 0..7, &mut rng).unwrap(), 6);
        }
        assert!(matches!(sample_negative(0, &t, 0..6, &mut rng), Err(Error::Sampling(_))));
    }

    #[test]
    fn sampled_ids_avoid_positives() {
        let t = star_targets();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let z = sample_negative(1, &t, 0..7, &mut rng).unwrap();
            assert!(z != 1 && !t.is_positive(1, z));
        }
    }
}
