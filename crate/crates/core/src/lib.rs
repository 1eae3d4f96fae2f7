//! Unified semantic graph toolkit.
//!
//! Builds compressed document graphs from dependency and coreference
//! annotations, augments them into attention masks, aligns subword tokens
//! to graph nodes, and provides reference forward passes for graph-masked
//! and graph-propagated attention.

pub mod alignment;
pub mod annotation;
pub mod augment;
pub mod builder;
pub mod dense;
pub mod error;
pub mod graph;
pub mod kernels;
pub mod par;
pub mod pipeline;
pub mod sparse;
pub mod stats;
pub mod synth;
pub mod tokenize;

pub use error::{Error, Result};
pub use graph::{GraphEdge, GraphNode, SemanticGraph, TokenRef, Variant};
