//! Node and attribute embeddings learned by propagating over an augmented
//! node/attribute graph, scored with cross-layer pair features.

pub mod augment;
pub mod error;
pub mod eval;
pub mod gradcheck;
pub mod graph;
pub mod linalg;
pub mod propagate;
pub mod rng;
pub mod scorer;
pub mod snapshot;
pub mod synthetic;
pub mod training;

pub use error::{Error, Result};
pub use graph::{load_graph, AttributedGraph, Labels};
pub use training::{train, TrainConfig, TrainedModel, Variant};
