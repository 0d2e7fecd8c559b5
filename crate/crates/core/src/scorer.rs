//! Cross-correlation pair scoring.
//!
//! A pair `(a, b)` is described by the element-wise products of every layer
//! of `a` with every layer of `b`, concatenated in `(k, i)` order, and
//! mapped to a logit by a three-layer perceptron.

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Dense;
use crate::propagate::LayerStack;

/// Width of the cross-correlation feature vector.
pub fn feature_width(depth: usize, dim: usize) -> usize {
    (depth + 1) * (depth + 1) * dim
}

fn check_entity(stack: &LayerStack, e: usize) -> Result<()> {
    if e >= stack.size() {
        return Err(Error::bounds("entity", e, stack.size()));
    }
    Ok(())
}

/// Concatenation of `h_a^(k) ⊙ h_b^(i)` over `k, i` in `0..=K`, `k` major.
pub fn cross_features(stack: &LayerStack, a: usize, b: usize) -> Result<Vec<f64>> {
    check_entity(stack, a)?;
    check_entity(stack, b)?;
    let depth = stack.depth();
    let mut out = Vec::with_capacity(feature_width(depth, stack.dim()));
    for k in 0..=depth {
        let ha = stack.row(k, a);
        for i in 0..=depth {
            out.extend(ha.iter().zip(stack.row(i, b)).map(|(x, y)| x * y));
        }
    }
    Ok(out)
}

/// Pulls a gradient on the cross features back onto the layer rows of both
/// entities. Each output holds `K+1` consecutive blocks of width `d`.
pub fn cross_features_backward(
    stack: &LayerStack,
    a: usize,
    b: usize,
    feature_grad: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let depth = stack.depth();
    let d = stack.dim();
    let mut ga = vec![0.0; (depth + 1) * d];
    let mut gb = vec![0.0; (depth + 1) * d];
    for k in 0..=depth {
        let ha = stack.row(k, a);
        for i in 0..=depth {
            let hb = stack.row(i, b);
            let g = &feature_grad[(k * (depth + 1) + i) * d..][..d];
            for t in 0..d {
                ga[k * d + t] += g[t] * hb[t];
                gb[i * d + t] += g[t] * ha[t];
            }
        }
    }
    (ga, gb)
}

/// Weights of the three-layer perceptron, stored output-major
/// (`w1` is `hidden × input`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerParams {
    pub input: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub w3: Vec<f64>,
    pub b3: f64,
}

impl ScorerParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        ScorerParams {
            input,
            hidden,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * hidden],
            b2: vec![0.0; hidden],
            w3: vec![0.0; hidden],
            b3: 0.0,
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = ScorerParams::zeros(input, hidden);
        let mut fill = |w: &mut [f64], fan_in: usize, fan_out: usize| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            w.iter_mut().for_each(|x| *x = dist.sample(rng));
        };
        fill(&mut p.w1, input, hidden);
        fill(&mut p.w2, hidden, hidden);
        fill(&mut p.w3, hidden, 1);
        p
    }

    pub fn zeros_like(&self) -> Self {
        ScorerParams::zeros(self.input, self.hidden)
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len() + self.w3.len() + 1
    }

    /// Named parameter blocks in a fixed order.
    pub fn blocks(&self) -> [(&'static str, &[f64]); 6] {
        [
            ("w1", &self.w1),
            ("b1", &self.b1),
            ("w2", &self.w2),
            ("b2", &self.b2),
            ("w3", &self.w3),
            ("b3", std::slice::from_ref(&self.b3)),
        ]
    }

    pub fn blocks_mut(&mut self) -> [(&'static str, &mut [f64]); 6] {
        [
            ("w1", &mut self.w1),
            ("b1", &mut self.b1),
            ("w2", &mut self.w2),
            ("b2", &mut self.b2),
            ("w3", &mut self.w3),
            ("b3", std::slice::from_mut(&mut self.b3)),
        ]
    }

    /// `self += other`, block by block.
    pub fn add_assign(&mut self, other: &ScorerParams) {
        for ((_, dst), (_, src)) in self.blocks_mut().into_iter().zip(other.blocks()) {
            dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, blk) in self.blocks_mut() {
            blk.iter_mut().for_each(|x| *x *= s);
        }
    }
}

/// Intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct ScorerCache {
    pub features: Vec<f64>,
    pub pre1: Vec<f64>,
    pub act1: Vec<f64>,
    pub pre2: Vec<f64>,
    pub act2: Vec<f64>,
    pub logit: f64,
}

fn dense_layer(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    b.iter()
        .enumerate()
        .map(|(o, bias)| {
            let row = &w[o * cols..(o + 1) * cols];
            bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

fn relu(v: &[f64]) -> Vec<f64> {
    v.iter().map(|&x| x.max(0.0)).collect()
}

pub fn forward_cached(params: &ScorerParams, features: &[f64]) -> Result<ScorerCache> {
    if features.len() != params.input {
        return Err(Error::Dimension(format!(
            "feature width {} but scorer expects {}",
            features.len(),
            params.input
        )));
    }
    let pre1 = dense_layer(&params.w1, &params.b1, features);
    let act1 = relu(&pre1);
    let pre2 = dense_layer(&params.w2, &params.b2, &act1);
    let act2 = relu(&pre2);
    let logit = params.b3 + params.w3.iter().zip(&act2).map(|(a, b)| a * b).sum::<f64>();
    Ok(ScorerCache {
        features: features.to_vec(),
        pre1,
        act1,
        pre2,
        act2,
        logit,
    })
}

pub fn score(params: &ScorerParams, features: &[f64]) -> Result<f64> {
    forward_cached(params, features).map(|c| c.logit)
}

/// Accumulates `upstream · ∂logit/∂θ` into `grads` and returns
/// `upstream · ∂logit/∂features`. ReLU subgradient at zero is zero.
pub fn scorer_backward(
    params: &ScorerParams,
    cache: &ScorerCache,
    upstream: f64,
    grads: &mut ScorerParams,
) -> Vec<f64> {
    let h = params.hidden;
    let input = params.input;
    grads.b3 += upstream;
    let mut d2 = vec![0.0; h];
    for o in 0..h {
        grads.w3[o] += upstream * cache.act2[o];
        if cache.pre2[o] > 0.0 {
            d2[o] = upstream * params.w3[o];
        }
    }
    let mut d1 = vec![0.0; h];
    for (o, &g) in d2.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        grads.b2[o] += g;
        let row = &params.w2[o * h..(o + 1) * h];
        let grow = &mut grads.w2[o * h..(o + 1) * h];
        for j in 0..h {
            grow[j] += g * cache.act1[j];
            d1[j] += g * row[j];
        }
    }
    let mut dfeat = vec![0.0; input];
    for o in 0..h {
        if cache.pre1[o] <= 0.0 || d1[o] == 0.0 {
            continue;
        }
        let g = d1[o];
        grads.b1[o] += g;
        let row = &params.w1[o * input..(o + 1) * input];
        let grow = &mut grads.w1[o * input..(o + 1) * input];
        for j in 0..input {
            grow[j] += g * cache.features[j];
            dfeat[j] += g * row[j];
        }
    }
    dfeat
}

/// How pairs are scored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PairModel {
    /// Dot product of last-layer rows.
    Inner,
    /// Cross-correlation MLP. With `attribute` set, pairs touching an
    /// attribute category use that head instead of `shared`.
    Mlp {
        shared: ScorerParams,
        attribute: Option<ScorerParams>,
    },
}

impl PairModel {
    pub fn head(&self, a: usize, b: usize, num_nodes: usize) -> Option<&ScorerParams> {
        match self {
            PairModel::Inner => None,
            PairModel::Mlp { shared, attribute } => match attribute {
                Some(attr) if a >= num_nodes || b >= num_nodes => Some(attr),
                _ => Some(shared),
            },
        }
    }

    /// Directed logit `y(a, b)`.
    pub fn score(&self, stack: &LayerStack, a: usize, b: usize, num_nodes: usize) -> Result<f64> {
        match self.head(a, b, num_nodes) {
            None => {
                check_entity(stack, a)?;
                check_entity(stack, b)?;
                let k = stack.depth();
                Ok(dot(stack.row(k, a), stack.row(k, b)))
            }
            Some(p) => score(p, &cross_features(stack, a, b)?),
        }
    }

    /// Order-free score for evaluation.
    pub fn score_symmetric(
        &self,
        stack: &LayerStack,
        a: usize,
        b: usize,
        num_nodes: usize,
    ) -> Result<f64> {
        score_pair_symmetric(self, stack, a, b, num_nodes)
    }
}

impl PairModel {
    /// Same structure with every weight zeroed; used as a gradient buffer.
    pub fn zeros_like(&self) -> PairModel {
        match self {
            PairModel::Inner => PairModel::Inner,
            PairModel::Mlp { shared, attribute } => PairModel::Mlp {
                shared: shared.zeros_like(),
                attribute: attribute.as_ref().map(ScorerParams::zeros_like),
            },
        }
    }

    pub fn heads(&self) -> Vec<(&'static str, &ScorerParams)> {
        match self {
            PairModel::Inner => Vec::new(),
            PairModel::Mlp { shared, attribute } => {
                let mut out = vec![("shared", shared)];
                out.extend(attribute.iter().map(|a| ("attribute", a)));
                out
            }
        }
    }

    pub fn heads_mut(&mut self) -> Vec<(&'static str, &mut ScorerParams)> {
        match self {
            PairModel::Inner => Vec::new(),
            PairModel::Mlp { shared, attribute } => {
                let mut out = vec![("shared", shared)];
                out.extend(attribute.iter_mut().map(|a| ("attribute", a)));
                out
            }
        }
    }

    /// All parameter blocks as `(head.block, values)`, in a fixed order.
    pub fn blocks(&self) -> Vec<(String, &[f64])> {
        self.heads()
            .into_iter()
            .flat_map(|(h, p)| p.blocks().into_iter().map(move |(b, v)| (format!("{h}.{b}"), v)))
            .collect()
    }

    pub fn blocks_mut(&mut self) -> Vec<(String, &mut [f64])> {
        self.heads_mut()
            .into_iter()
            .flat_map(|(h, p)| {
                p.blocks_mut()
                    .into_iter()
                    .map(move |(b, v)| (format!("{h}.{b}"), v))
            })
            .collect()
    }

    pub fn add_assign(&mut self, other: &PairModel) {
        for ((_, dst), (_, src)) in self.heads_mut().into_iter().zip(other.heads()) {
            dst.add_assign(src);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (_, h) in self.heads_mut() {
            h.scale(s);
        }
    }
}

/// Mean of the two directed scores.
pub fn score_pair_symmetric(
    model: &PairModel,
    stack: &LayerStack,
    a: usize,
    b: usize,
    num_nodes: usize,
) -> Result<f64> {
    let ab = model.score(stack, a, b, num_nodes)?;
    let ba = model.score(stack, b, a, num_nodes)?;
    Ok((ab + ba) / 2.0)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Rows of `H^(K)` for the first `count` entities.
pub fn last_layer_rows(stack: &LayerStack, count: usize) -> Dense {
    let d = stack.dim();
    let last = stack.last();
    Dense::from_vec(count, d, last.as_slice()[..count * d].to_vec()).expect("prefix of last layer")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::build_transition;
    use crate::linalg::Csr;
    use crate::propagate::{forward, init_embeddings};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stack(depth: usize, dim: usize) -> LayerStack {
        let a = Csr::from_triplets(3, 3, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let x = Csr::from_triplets(3, 2, &[(0, 0, 1.0), (1, 1, 1.0)]).unwrap();
        let op = build_transition(&a, &x, 0.5).unwrap();
        forward(&op, &init_embeddings(5, dim, 2).unwrap(), depth).unwrap()
    }

    #[test]
    fn nine_blocks_at_depth_two() {
        let s = stack(2, 4);
        assert_eq!(cross_features(&s, 0, 3).unwrap().len(), 9 * 4);
        assert!(cross_features(&s, 0, 5).is_err());
    }

    #[test]
    fn swap_permutes_blocks() {
        let s = stack(2, 3);
        let ab = cross_features(&s, 0, 4).unwrap();
        let ba = cross_features(&s, 4, 0).unwrap();
        for k in 0..3 {
            for i in 0..3 {
                assert_eq!(&ab[(k * 3 + i) * 3..][..3], &ba[(i * 3 + k) * 3..][..3]);
            }
        }
    }

    #[test]
    fn zero_rows_annihilate() {
        let a = Csr::empty(2, 2);
        let x = Csr::empty(2, 0);
        let op = build_transition(&a, &x, 0.5).unwrap();
        let mut h = init_embeddings(2, 3, 0).unwrap();
        h.row_mut(1).fill(0.0);
        let s = forward(&op, &h, 2).unwrap();
        assert!(cross_features(&s, 1, 0).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_params_give_zero_logit() {
        let p = ScorerParams::zeros(6, 3);
        assert_eq!(score(&p, &[1.0, -2.0, 3.0, 0.5, 0.1, 9.0]).unwrap(), 0.0);
        assert!(score(&p, &[1.0]).is_err());
    }

    #[test]
    fn selector_weights_reproduce_a_coordinate() {
        let mut p = ScorerParams::zeros(4, 2);
        // hidden unit 0 copies feature 2, second layer passes it through
        p.w1[2] = 1.0;
        p.w2[0] = 1.0;
        p.w3[0] = 1.0;
        assert_eq!(score(&p, &[0.3, 0.1, 0.7, 0.2]).unwrap(), 0.7);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = ScorerParams::init(6, 3, &mut rng);
        let f: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cache = forward_cached(&p, &f).unwrap();
        let mut g = p.zeros_like();
        let df = scorer_backward(&p, &cache, 0.0, &mut g);
        assert!(df.iter().all(|&v| v == 0.0));
        assert!(g.blocks().iter().all(|(_, b)| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn linear_regime_feature_gradient_is_weight_product() {
        // all-positive weights and inputs keep every pre-activation positive
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut p = ScorerParams::init(4, 3, &mut rng);
        for (_, blk) in p.blocks_mut() {
            blk.iter_mut().for_each(|x| *x = x.abs() + 0.1);
        }
        let f = [0.2, 0.4, 0.1, 0.9];
        let cache = forward_cached(&p, &f).unwrap();
        let mut g = p.zeros_like();
        let df = scorer_backward(&p, &cache, 2.0, &mut g);
        for j in 0..4 {
            let mut expect = 0.0;
            for o2 in 0..3 {
                for o1 in 0..3 {
                    expect += p.w3[o2] * p.w2[o2 * 3 + o1] * p.w1[o1 * 4 + j];
                }
            }
            assert!((df[j] - 2.0 * expect).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_score_is_order_free() {
        let s = stack(1, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = PairModel::Mlp {
            shared: ScorerParams::init(feature_width(1, 3), 3, &mut rng),
            attribute: None,
        };
        let ab = model.score_symmetric(&s, 0, 2, 3).unwrap();
        assert_eq!(ab, model.score_symmetric(&s, 2, 0, 3).unwrap());
        let d0 = model.score(&s, 0, 2, 3).unwrap();
        let d1 = model.score(&s, 2, 0, 3).unwrap();
        assert_eq!(ab, (d0 + d1) / 2.0);
        assert_eq!(model.score_symmetric(&s, 1, 1, 3).unwrap(), model.score(&s, 1, 1, 3).unwrap());
    }

    #[test]
    fn separate_attribute_head_is_selected() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shared = ScorerParams::init(4, 2, &mut rng);
        let attr = ScorerParams::init(4, 2, &mut rng);
        let model = PairModel::Mlp {
            shared: shared.clone(),
            attribute: Some(attr.clone()),
        };
        assert_eq!(model.head(0, 1, 3), Some(&shared));
        assert_eq!(model.head(0, 3, 3), Some(&attr));
        assert_eq!(model.head(4, 1, 3), Some(&attr));
        assert_eq!(PairModel::Inner.head(0, 1, 3), None);
    }
}
