//! Swarm-demographics driven estimation of BitTorrent inter-ISP traffic.
//!
//! The crate covers the full pipeline used to reason about locality-biased
//! overlays: speed-agnostic bounds on localized unchokes, inherent
//! localizability, overlay construction (Random and the `Locality(delta, mu)`
//! family), stable b-matching of reciprocal unchokes, rate matrices, and the
//! ISP-level transit and QoS metrics built on top of them.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod datamodel;
pub mod error;
pub mod experiment;
pub mod localizability;
pub mod matching;
pub mod overlay;
pub mod seed;
pub mod traffic;

pub use error::{Error, Result};
