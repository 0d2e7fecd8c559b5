//! Seeded planted-partition graphs with block-indicator attributes.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, Labels};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSpec {
    pub blocks: usize,
    pub block_size: usize,
    pub p_in: f64,
    pub p_cross: f64,
}

impl BlockSpec {
    /// Two 20-node communities, `p_in = 0.4`, `p_cross = 0.02`.
    pub const TWO_BLOCK: BlockSpec = BlockSpec {
        blocks: 2,
        block_size: 20,
        p_in: 0.4,
        p_cross: 0.02,
    };
}

/// Node `v` belongs to block `v / block_size` and carries a single unit
/// attribute equal to its block id; labels are block ids as well.
pub fn planted_partition(spec: &BlockSpec, seed: u64) -> Result<AttributedGraph> {
    if spec.blocks == 0 || spec.block_size == 0 {
        return Err(Error::Config("empty block model".into()));
    }
    for p in [spec.p_in, spec.p_cross] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Config(format!("edge probability {p} outside [0, 1]")));
        }
    }
    let n = spec.blocks * spec.block_size;
    let block = |v: usize| v / spec.block_size;
    let mut rng = rng::stream(seed, Stream::Synthetic);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if block(u) == block(v) { spec.p_in } else { spec.p_cross };
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let features: Vec<_> = (0..n).map(|v| (v, block(v), 1.0)).collect();
    let ids: Vec<usize> = (0..n).map(block).collect();
    let mut labels = Labels::from_ids(&ids);
    labels.classes = (0..spec.blocks).map(|b| format!("block{b}")).collect();
    AttributedGraph::new(n, spec.blocks, &edges, &features, Some(labels))
}

pub fn two_block(seed: u64) -> Result<AttributedGraph> {
    planted_partition(&BlockSpec::TWO_BLOCK, seed)
}
