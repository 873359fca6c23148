//! Topology configuration and overlay routing.
//!
//! A deployment is described by a bundle of JSON documents: one per
//! simulated QKD pair (`node-*.json`), one per trusted node
//! (`kmstn-*.json`), one per SAE client (`sae-*.json`), plus a single
//! `edges.json`. Every host loads the same bundle so all nodes share a
//! consistent view of the mesh. From the bundle this crate builds the
//! [`KmsGraph`]: validated nodes and edges with a next-hop table computed
//! once at startup.

pub mod config;
pub mod graph;

use thiserror::Error;

pub use config::{
    load_bundle, AttachedKme, Bundle, EdgeConfig, EdgesFile, FaultMode, KmstnConfig,
    LinkProfileConfig, QkdPairConfig, SaeConfig, SimSettings, TlsPaths,
};
pub use graph::{KmsEdge, KmsGraph, KmsNode};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RoutingError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("SAE {0:?} is not bound at any node")]
    UnknownSae(String),
    #[error("SAE {0:?} is bound at multiple nodes: {1:?}")]
    AmbiguousBinding(String, Vec<String>),
    #[error("no route between {src:?} and {dst:?}")]
    Unreachable { src: String, dst: String },
    #[error("unknown node {0:?}")]
    UnknownNode(String),
}
