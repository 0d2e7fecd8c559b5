mod common;

use attrgraph::augment::{build_transition, topn_sparsify};
use attrgraph::linalg::{Csr, Dense};
use attrgraph::propagate::{backward, forward};
use attrgraph::AttributedGraph;
use common::{dense_transition, random_dense, random_graph, GraphParams};
use proptest::prelude::*;

const ALPHAS: [f64; 5] = [0.0, 0.2, 0.5, 0.8, 1.0];

fn params(n: usize, m: usize, signed: bool) -> GraphParams {
    GraphParams {
        n,
        m,
        p_edge: 0.2,
        p_feat: 0.4,
        signed,
    }
}

fn inner(a: &Dense, b: &Dense) -> f64 {
    a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
}

fn matpow_apply(p: &Dense, h: &Dense, k: usize) -> Dense {
    (0..k).fold(h.clone(), |acc, _| p.matmul(&acc))
}

#[test]
fn node_rows_with_edges_and_features_sum_to_one() {
    for seed in 0..50 {
        let g = random_graph(seed, &params(3 + seed as usize % 20, 1 + seed as usize % 6, false));
        for alpha in ALPHAS {
            let p = build_transition(g.adjacency(), g.features(), alpha).unwrap();
            for v in 0..g.num_nodes() {
                if g.features().row_nnz(v) == 0 {
                    continue;
                }
                let s: f64 = p.transition().row_values(v).iter().sum();
                assert!((s - 1.0).abs() <= 1e-12, "seed {seed} alpha {alpha} row {v}: {s}");
            }
        }
    }
}

#[test]
fn featureless_node_rows_carry_alpha() {
    let g = AttributedGraph::new(3, 1, &[(0, 1)], &[(0, 0, 2.0)], None).unwrap();
    let p = build_transition(g.adjacency(), g.features(), 0.8).unwrap();
    for v in [1, 2] {
        let s: f64 = p.transition().row_values(v).iter().sum();
        assert!((s - 0.8).abs() < 1e-15);
    }
}

#[test]
fn attribute_row_sum_identity() {
    for seed in 0..30 {
        let g = random_graph(seed, &params(12, 5, true));
        let n = g.num_nodes();
        for alpha in ALPHAS {
            let p = build_transition(g.adjacency(), g.features(), alpha).unwrap();
            for j in 0..g.num_attributes() {
                let col: f64 = (0..n)
                    .map(|v| {
                        let l1: f64 = g.features().row_values(v).iter().map(|x| x.abs()).sum();
                        g.features().get(v, j).map_or(0.0, |x| x / l1)
                    })
                    .sum();
                let s: f64 = p.transition().row_values(n + j).iter().sum();
                let want = alpha + (1.0 - alpha) * col;
                assert!((s - want).abs() < 1e-12, "{s} vs {want}");
            }
        }
    }
}

#[test]
fn sparse_operator_matches_dense_formula() {
    for seed in 0..20 {
        let g = random_graph(seed, &params(10, 4, true));
        for alpha in ALPHAS {
            let p = build_transition(g.adjacency(), g.features(), alpha).unwrap();
            let diff = p.transition().to_dense().max_abs_diff(&dense_transition(&g, alpha));
            assert!(diff < 1e-15, "seed {seed} alpha {alpha}: {diff}");
            let diff_t = p.transition_t().to_dense().max_abs_diff(&p.transition().transpose().to_dense());
            assert_eq!(diff_t, 0.0);
        }
    }
}

#[test]
fn alpha_one_node_block_is_pure_graph_convolution() {
    for seed in 0..20 {
        let g = random_graph(seed, &params(15, 4, false));
        let n = g.num_nodes();
        let p = build_transition(g.adjacency(), g.features(), 1.0).unwrap();
        let h = random_dense(seed + 100, n + 4, 5);
        let stack = forward(&p, &h, 2).unwrap();

        // Ã built independently from the edge list
        let mut at = Dense::zeros(n, n);
        for v in 0..n {
            let w = 1.0 / (g.degree(v).unwrap() + 1) as f64;
            at.set(v, v, w);
            for &u in g.neighbors(v) {
                at.set(v, u, w);
            }
        }
        let hn = Dense::from_vec(n, 5, h.as_slice()[..n * 5].to_vec()).unwrap();
        let want = at.matmul(&at.matmul(&hn));
        let got = Dense::from_vec(n, 5, stack.layer(2).as_slice()[..n * 5].to_vec()).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-10);
        for j in 0..4 {
            assert_eq!(stack.row(2, n + j), h.row(n + j));
        }
    }
}

#[test]
fn forward_matches_dense_matrix_power() {
    let g = random_graph(8, &params(8, 3, true));
    let p = build_transition(g.adjacency(), g.features(), 0.6).unwrap();
    let h = random_dense(9, 11, 4);
    let stack = forward(&p, &h, 3).unwrap();
    let dense = dense_transition(&g, 0.6);
    for k in 0..=3 {
        assert!(stack.layer(k).max_abs_diff(&matpow_apply(&dense, &h, k)) < 1e-12);
    }
}

fn graph_strategy() -> impl Strategy<Value = (AttributedGraph, f64, u64)> {
    (2usize..14, 0usize..6, any::<u64>(), 0.0f64..=1.0).prop_map(|(n, m, seed, alpha)| {
        (random_graph(seed, &params(n, m, true)), alpha, seed)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_is_linear((g, alpha, seed) in graph_strategy(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let p = build_transition(g.adjacency(), g.features(), alpha).unwrap();
        let size = p.size();
        let h = random_dense(seed ^ 1, size, 3);
        let q = random_dense(seed ^ 2, size, 3);
        let mut mix = h.clone();
        mix.as_mut_slice().iter_mut().for_each(|x| *x *= a);
        mix.axpy(b, &q);
        let lhs = forward(&p, &mix, 2).unwrap();
        let fh = forward(&p, &h, 2).unwrap();
        let fq = forward(&p, &q, 2).unwrap();
        for k in 0..=2 {
            let mut rhs = fh.layer(k).clone();
            rhs.as_mut_slice().iter_mut().for_each(|x| *x *= a);
            rhs.axpy(b, fq.layer(k));
            prop_assert!(lhs.layer(k).max_abs_diff(&rhs) < 1e-12);
        }
    }

    #[test]
    fn backward_is_the_adjoint((g, alpha, seed) in graph_strategy(), depth in 0usize..4) {
        let p = build_transition(g.adjacency(), g.features(), alpha).unwrap();
        let size = p.size();
        let dh = random_dense(seed ^ 3, size, 2);
        let grads: Vec<Dense> = (0..=depth).map(|k| random_dense(seed ^ (10 + k as u64), size, 2)).collect();
        let stack = forward(&p, &dh, depth).unwrap();
        let lhs: f64 = stack.layers().iter().zip(&grads).map(|(l, g)| inner(l, g)).sum();
        let rhs = inner(&dh, &backward(&p, &grads).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn forward_is_permutation_equivariant((g, alpha, seed) in graph_strategy()) {
        let n = g.num_nodes();
        let m = g.num_attributes();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.reverse();
        perm.rotate_left((seed % n as u64) as usize);
        let edges: Vec<_> = g.edges().into_iter().map(|(u, v)| (perm[u], perm[v])).collect();
        let feats: Vec<_> = g.features().triplets().map(|(v, j, x)| (perm[v], j, x)).collect();
        let pg = AttributedGraph::new(n, m, &edges, &feats, None).unwrap();

        let h = random_dense(seed ^ 5, n + m, 3);
        let mut ph = h.clone();
        for v in 0..n {
            ph.row_mut(perm[v]).copy_from_slice(h.row(v));
        }
        let a = forward(&build_transition(g.adjacency(), g.features(), alpha).unwrap(), &h, 2).unwrap();
        let b = forward(&build_transition(pg.adjacency(), pg.features(), alpha).unwrap(), &ph, 2).unwrap();
        for k in 0..=2 {
            for v in 0..n {
                prop_assert_eq!(a.row(k, v), b.row(k, perm[v]));
            }
            for j in 0..m {
                prop_assert_eq!(a.row(k, n + j), b.row(k, n + j));
            }
        }
    }

    #[test]
    fn topn_keeps_the_largest_entries(seed in any::<u64>(), keep in 1usize..6) {
        let g = random_graph(seed, &GraphParams { n: 8, m: 9, p_edge: 0.0, p_feat: 0.6, signed: true });
        let x = g.features();
        let s: Csr = topn_sparsify(x, keep).unwrap();
        for v in 0..8 {
            prop_assert_eq!(s.row_nnz(v), x.row_nnz(v).min(keep));
            let kept_min = s.row_values(v).iter().copied().fold(f64::INFINITY, f64::min);
            for (j, val) in x.row(v) {
                match s.get(v, j) {
                    Some(kept) => prop_assert_eq!(kept, val),
                    None => prop_assert!(val <= kept_min),
                }
            }
        }
    }
}
