//! Linear multi-layer propagation of trainable embeddings through the
//! transition operator, and its adjoint.

use rand::distributions::{Distribution, Uniform};

use crate::augment::AugmentedOperator;
use crate::error::{Error, Result};
use crate::linalg::Dense;
use crate::rng::{self, Stream};

/// `layers[0]` is the base embedding matrix; `layers[k] = P̃ · layers[k-1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    layers: Vec<Dense>,
}

impl LayerStack {
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.layers[0].cols()
    }

    pub fn size(&self) -> usize {
        self.layers[0].rows()
    }

    pub fn layer(&self, k: usize) -> &Dense {
        &self.layers[k]
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn last(&self) -> &Dense {
        self.layers.last().expect("stack holds the base layer")
    }

    /// Representation of `entity` at layer `k`.
    pub fn row(&self, k: usize, entity: usize) -> &[f64] {
        self.layers[k].row(entity)
    }
}

/// Base embeddings drawn i.i.d. from `U[-0.5/d, 0.5/d]`, row by row, so the
/// first `n` rows do not depend on how many attribute rows follow.
pub fn init_embeddings(size: usize, dim: usize, seed: u64) -> Result<Dense> {
    if dim == 0 {
        return Err(Error::Config("embedding dimension must be >= 1".into()));
    }
    let bound = 0.5 / dim as f64;
    let dist = Uniform::new_inclusive(-bound, bound);
    let mut rng = rng::stream(seed, Stream::Embeddings);
    let data = (0..size * dim).map(|_| dist.sample(&mut rng)).collect();
    Dense::from_vec(size, dim, data)
}

pub fn forward(op: &AugmentedOperator, base: &Dense, depth: usize) -> Result<LayerStack> {
    if base.rows() != op.size() {
        return Err(Error::Dimension(format!(
            "base has {} rows, operator size is {}",
            base.rows(),
            op.size()
        )));
    }
    let mut layers = Vec::with_capacity(depth + 1);
    layers.push(base.clone());
    for k in 1..=depth {
        let next = op.transition().mul_dense(&layers[k - 1])?;
        layers.push(next);
    }
    Ok(LayerStack { layers })
}

/// Gradient with respect to the base embeddings given gradients on every
/// layer: `Σ_k (P̃ᵀ)^k · grads[k]`, evaluated Horner-style.
pub fn backward(op: &AugmentedOperator, grads: &[Dense]) -> Result<Dense> {
    let Some((last, rest)) = grads.split_last() else {
        return Err(Error::Dimension("no layer gradients".into()));
    };
    for g in grads {
        if g.rows() != op.size() || g.shape() != last.shape() {
            return Err(Error::Dimension(format!(
                "layer gradient {:?} does not match operator size {}",
                g.shape(),
                op.size()
            )));
        }
    }
    let mut acc = last.clone();
    for g in rest.iter().rev() {
        acc = op.transition_t().mul_dense(&acc)?;
        acc.axpy(1.0, g);
    }
    Ok(acc)
}
