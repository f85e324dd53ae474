//! Provenance-aware execution of openEO-style process graphs.
//!
//! The crate is split into four layers:
//!
//! * [`graph`] parses process-graph JSON into validated, acyclic graphs and
//!   derives a deterministic execution order.
//! * [`cube`] is the named-dimension data cube that processes operate on.
//! * [`engine`] walks a graph over a [`engine::ProcessRegistry`], calling
//!   provenance hooks around every node.
//! * [`prov`] assembles W3C PROV documents from those hooks and writes them
//!   out as PROV-JSON or Graphviz DOT.

pub mod cube;
pub mod engine;
pub mod graph;
pub mod prov;

/// Engine name and version used for the software agent of every document.
pub const ENGINE_AGENT: &str = concat!("provcube/", env!("CARGO_PKG_VERSION"));
