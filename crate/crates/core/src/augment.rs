//! The augmented node/attribute-category graph.
//!
//! Entities are indexed in one space of size `n + m`: nodes occupy `0..n`
//! and attribute category `j` sits at `n + j`.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::graph::AttributedGraph;
use crate::linalg::Csr;

/// Keeps the `keep` largest entries (by signed value) of every row of `x`.
/// Ties at the cut go to the lower column index.
pub fn topn_sparsify(x: &Csr, keep: usize) -> Result<Csr> {
    if keep == 0 {
        return Err(Error::Config("top-N requires N >= 1".into()));
    }
    let mut trip = Vec::with_capacity(x.nnz());
    for r in 0..x.rows() {
        let mut row: Vec<(usize, f64)> = x.row(r).collect();
        if row.len() > keep {
            // stable sort on value keeps ascending column order among ties
            row.sort_by(|a, b| b.1.total_cmp(&a.1));
            row.truncate(keep);
        }
        trip.extend(row.into_iter().map(|(c, v)| (r, c, v)));
    }
    Csr::from_triplets(x.rows(), x.cols(), &trip)
}

/// Applies [`topn_sparsify`] to a graph's feature matrix.
pub fn sparsify_graph(graph: &AttributedGraph, keep: usize) -> Result<AttributedGraph> {
    let x = topn_sparsify(graph.features(), keep)?;
    let trip: Vec<_> = x.triplets().collect();
    graph.with_features(graph.num_attributes(), &trip)
}

fn check_dims(a: &Csr, x: &Csr) -> Result<()> {
    if a.rows() != a.cols() || x.rows() != a.rows() {
        return Err(Error::Dimension(format!(
            "adjacency {}x{} with features {}x{}",
            a.rows(),
            a.cols(),
            x.rows(),
            x.cols()
        )));
    }
    Ok(())
}

/// `[[A, X], [Xᵀ, 0]]` with raw feature weights.
pub fn build_augmented(a: &Csr, x: &Csr) -> Result<Csr> {
    check_dims(a, x)?;
    let n = a.rows();
    let mut trip: Vec<(usize, usize, f64)> = a.triplets().collect();
    for (v, j, w) in x.triplets() {
        trip.push((v, n + j, w));
        trip.push((n + j, v, w));
    }
    Csr::from_triplets(n + x.cols(), n + x.cols(), &trip)
}

/// Row-normalized, α-weighted transition matrix over nodes and attribute
/// categories. The transpose is kept for the backward pass.
#[derive(Debug, Clone)]
pub struct AugmentedOperator {
    n: usize,
    m: usize,
    alpha: f64,
    transition: Csr,
    transition_t: Csr,
}

impl AugmentedOperator {
    pub fn size(&self) -> usize {
        self.n + self.m
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_attributes(&self) -> usize {
        self.m
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn transition(&self) -> &Csr {
        &self.transition
    }

    pub fn transition_t(&self) -> &Csr {
        &self.transition_t
    }
}

/// Divides every row by the sum of absolute values; signs are kept and zero
/// rows stay zero.
pub fn l1_normalize_rows(x: &Csr) -> Csr {
    x.map_rows(|_, _, vals| {
        let norm: f64 = vals.iter().map(|v| v.abs()).sum();
        if norm == 0.0 {
            vals.to_vec()
        } else {
            vals.iter().map(|v| v / norm).collect()
        }
    })
}

pub fn build_transition(a: &Csr, x: &Csr, alpha: f64) -> Result<AugmentedOperator> {
    check_dims(a, x)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha {alpha} outside [0, 1]")));
    }
    let n = a.rows();
    let m = x.cols();
    let xt = l1_normalize_rows(x);
    let beta = 1.0 - alpha;

    let mut trip = Vec::with_capacity(a.nnz() + n + 2 * x.nnz() + m);
    if alpha != 0.0 {
        for v in 0..n {
            // ℓ1-normalized row of (A + I)
            let w = alpha / (a.row_nnz(v) as f64 + 1.0);
            trip.push((v, v, w));
            trip.extend(a.row_indices(v).iter().map(|&u| (v, u, w)));
        }
        trip.extend((0..m).map(|j| (n + j, n + j, alpha)));
    }
    if beta != 0.0 {
        for (v, j, w) in xt.triplets() {
            trip.push((v, n + j, beta * w));
            trip.push((n + j, v, beta * w));
        }
    }
    let transition = Csr::from_triplets(n + m, n + m, &trip)?;
    let transition_t = transition.transpose();
    Ok(AugmentedOperator {
        n,
        m,
        alpha,
        transition,
        transition_t,
    })
}

/// Binary reconstruction targets: node-node edges plus node/attribute links
/// for strictly positive feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTargets {
    n: usize,
    m: usize,
    positives: Csr,
}

impl BinaryTargets {
    pub fn size(&self) -> usize {
        self.n + self.m
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn num_attributes(&self) -> usize {
        self.m
    }

    pub fn positives(&self) -> &Csr {
        &self.positives
    }

    /// Sorted positive partners of an entity.
    pub fn neighbors(&self, entity: usize) -> &[usize] {
        self.positives.row_indices(entity)
    }

    pub fn is_positive(&self, a: usize, b: usize) -> bool {
        self.positives.contains(a, b)
    }
}

pub fn build_binary_targets(a: &Csr, x: &Csr) -> Result<BinaryTargets> {
    check_dims(a, x)?;
    let n = a.rows();
    let m = x.cols();
    let mut trip: Vec<(usize, usize, f64)> = a.triplets().map(|(u, v, _)| (u, v, 1.0)).collect();
    for (v, j, w) in x.triplets() {
        if w > 0.0 {
            trip.push((v, n + j, 1.0));
            trip.push((n + j, v, 1.0));
        }
    }
    Ok(BinaryTargets {
        n,
        m,
        positives: Csr::from_triplets(n + m, n + m, &trip)?,
    })
}

/// Rebuilds targets from an existing `P*` (idempotence check).
pub fn targets_from_positives(n: usize, positives: &Csr) -> Result<BinaryTargets> {
    if positives.rows() != positives.cols() || positives.rows() < n {
        return Err(Error::Dimension("targets must be square and cover all nodes".into()));
    }
    let m = positives.rows() - n;
    let mut a = Vec::new();
    let mut x = Vec::new();
    for (r, c, w) in positives.triplets() {
        if r < n && c < n {
            a.push((r, c, w));
        } else if r < n && c >= n {
            x.push((r, c - n, w));
        }
    }
    build_binary_targets(&Csr::from_triplets(n, n, &a)?, &Csr::from_triplets(n, m, &x)?)
}

fn check_entity(graph: &AttributedGraph, entity: usize) -> Result<()> {
    let size = graph.num_nodes() + graph.num_attributes();
    if entity >= size {
        return Err(Error::bounds("entity", entity, size));
    }
    Ok(())
}

/// Nonzero pattern of the feature matrix.
fn feature_pattern(graph: &AttributedGraph) -> Csr {
    graph.features().map_rows(|_, _, v| vec![1.0; v.len()])
}

/// One row of the boolean product `left * right`.
fn product_row(left: &Csr, row: usize, right: &Csr) -> BTreeSet<usize> {
    left.row_indices(row)
        .iter()
        .flat_map(|&k| right.row_indices(k).iter().copied())
        .collect()
}

/// First-order augmented neighbors of a node or attribute category.
pub fn neighbors_order1(graph: &AttributedGraph, entity: usize) -> Result<BTreeSet<usize>> {
    check_entity(graph, entity)?;
    let n = graph.num_nodes();
    let x = graph.features();
    let out = if entity < n {
        graph
            .neighbors(entity)
            .iter()
            .copied()
            .chain(x.row_indices(entity).iter().map(|j| n + j))
            .collect()
    } else {
        let xt = x.transpose();
        xt.row_indices(entity - n).iter().copied().collect()
    };
    Ok(out)
}

/// Second-order augmented neighbors, from the block products
/// `A², XXᵀ, AX` (nodes) and `XᵀA, XᵀX` (attribute categories) over the
/// unweighted structure.
pub fn neighbors_order2(graph: &AttributedGraph, entity: usize) -> Result<BTreeSet<usize>> {
    check_entity(graph, entity)?;
    let n = graph.num_nodes();
    let a = graph.adjacency();
    let b = feature_pattern(graph);
    let bt = b.transpose();
    let mut out = BTreeSet::new();
    if entity < n {
        out.extend(product_row(a, entity, a));
        out.extend(product_row(&b, entity, &bt));
        out.extend(product_row(a, entity, &b).into_iter().map(|j| n + j));
    } else {
        let j = entity - n;
        out.extend(product_row(&bt, j, a));
        out.extend(product_row(&bt, j, &b).into_iter().map(|i| n + i));
    }
    Ok(out)
}
