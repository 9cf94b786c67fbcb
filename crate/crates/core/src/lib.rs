//! Core algorithms for mobility-aware placement of decomposed MAR services
//! on an edge-cloud tree network.
//!
//! The crate is `no_std` (with `alloc`) and contains only pure, deterministic
//! computation: topology generation and hop metrics, request workloads with
//! per-user mobility distributions, the expected-delay objective and load
//! accounting, an exact branch-and-bound placement solver, four baseline
//! heuristics, a two-layer recurrent sequence classifier trained to imitate
//! the exact solver, and the feasibility-repair and evaluation-metric stages.
//!
//! File formats, wall-clock timing and the command-line front end live in the
//! companion `edgemar` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod fmath;
pub mod heuristics;
pub mod pipeline;
pub mod placement;
pub mod rng;
pub mod seqnet;
pub mod solver;
pub mod topology;
pub mod workload;

pub use error::Error;

/// Identifier of a router node in the tree network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

/// Identifier of a MAR service request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RequestId(pub u32);

/// Identifier of an augmented-reality object (the cached content item).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AroId(pub u32);

impl core::fmt::Display for NodeId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl core::fmt::Display for RequestId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "r{}", self.0)
    }
}

impl core::fmt::Display for AroId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "a{}", self.0)
    }
}
