#![allow(dead_code)]

use attrgraph::linalg::Dense;
use attrgraph::AttributedGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct GraphParams {
    pub n: usize,
    pub m: usize,
    pub p_edge: f64,
    pub p_feat: f64,
    pub signed: bool,
}

pub fn random_graph(seed: u64, p: &GraphParams) -> AttributedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..p.n {
        for v in u + 1..p.n {
            if rng.gen_bool(p.p_edge) {
                edges.push((u, v));
            }
        }
    }
    let mut feats = Vec::new();
    for v in 0..p.n {
        for j in 0..p.m {
            if rng.gen_bool(p.p_feat) {
                let x: f64 = rng.gen_range(0.1..3.0);
                let neg = p.signed && rng.gen_bool(0.3);
                feats.push((v, j, if neg { -x } else { x }));
            }
        }
    }
    AttributedGraph::new(p.n, p.m, &edges, &feats, None).unwrap()
}

pub fn random_dense(seed: u64, rows: usize, cols: usize) -> Dense {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Dense::from_vec(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Transition matrix assembled entry by entry from the block formula.
pub fn dense_transition(g: &AttributedGraph, alpha: f64) -> Dense {
    let (n, m) = (g.num_nodes(), g.num_attributes());
    let mut p = Dense::zeros(n + m, n + m);
    for v in 0..n {
        let deg = g.neighbors(v).len() as f64;
        p.set(v, v, alpha / (deg + 1.0));
        for &u in g.neighbors(v) {
            p.set(v, u, alpha / (deg + 1.0));
        }
        let l1: f64 = (0..m).map(|j| g.features().get(v, j).unwrap_or(0.0).abs()).sum();
        for j in 0..m {
            if let Some(x) = g.features().get(v, j) {
                p.set(v, n + j, (1.0 - alpha) * x / l1);
                p.set(n + j, v, (1.0 - alpha) * x / l1);
            }
        }
    }
    for j in 0..m {
        p.set(n + j, n + j, alpha);
    }
    p
}

/// The six-node, four-attribute example network; node `i` here is node
/// `i + 1` in the usual 1-based drawing and attribute `j` is δ_{j+1}.
pub fn toy() -> AttributedGraph {
    let edges = [(0, 1), (0, 2), (0, 3), (1, 4), (3, 5)];
    let feats = [
        (0, 0, 1.0),
        (0, 1, 1.0),
        (1, 0, 1.0),
        (2, 2, 1.0),
        (3, 1, 1.0),
        (4, 2, 1.0),
        (4, 3, 1.0),
        (5, 3, 1.0),
    ];
    AttributedGraph::new(6, 4, &edges, &feats, None).unwrap()
}

/// Two `size`-node cliques joined by one bridge, each block sharing one
/// attribute.
pub fn two_cliques(size: usize) -> AttributedGraph {
    let mut edges = Vec::new();
    for b in 0..2 {
        for u in 0..size {
            for v in u + 1..size {
                edges.push((b * size + u, b * size + v));
            }
        }
    }
    edges.push((0, size));
    let feats: Vec<_> = (0..2 * size).map(|v| (v, v / size, 1.0)).collect();
    AttributedGraph::new(2 * size, 2, &edges, &feats, None).unwrap()
}
