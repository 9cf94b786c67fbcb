//! Crate-wide error type for parameter and shape violations.

use crate::NodeId;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A node id does not exist in the topology.
    UnknownNode(NodeId),
    /// An access-router operation was applied to a non-leaf node.
    NotALeaf(NodeId),
    /// More active ECs requested than leaf EC sites exist.
    ActiveExceedsLeafSites { requested: u32, leaf_sites: u32 },
    /// An EC ordinal lies outside `[1, m]`.
    OrdinalOutOfRange { ordinal: u32, m: u32 },
    /// A class index lies outside `[1, m^2]`.
    ClassOutOfRange { index: u32, m: u32 },
    /// An assignment names a node that is not an active EC.
    InactiveEc(NodeId),
    /// Vectors that must have equal non-zero length do not.
    LengthMismatch { left: usize, right: usize },
    /// A tensor or sequence has the wrong dimensions.
    ShapeMismatch { expected: usize, got: usize },
    /// A relative-error denominator is zero.
    ZeroPrediction { index: usize },
    /// The determination coefficient is undefined on a constant target.
    ConstantTarget,
    /// Training produced a non-finite loss.
    Diverged { epoch: u32 },
    /// A class label lies outside the model's output range.
    BadLabel { label: u32, num_classes: u32 },
    /// No joint assignment satisfies the capacity and cache limits; names
    /// the first request found without any feasible option and the EC whose
    /// limit blocked its smallest-index assignment.
    Infeasible {
        request: crate::RequestId,
        ec: NodeId,
        cache_bound: bool,
    },
    /// Exhaustive enumeration refused: the joint space has too many states.
    SearchSpaceTooLarge { states: u64, limit: u64 },
    /// A per-scenario stage failed; carries the scenario seed.
    Scenario {
        seed: u64,
        cause: alloc::boxed::Box<Error>,
    },
    /// Anything else that violates a documented precondition.
    InvalidParameter(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UnknownNode(id) => write!(f, "unknown node {id}"),
            Error::NotALeaf(id) => write!(f, "node {id} is not a leaf access router"),
            Error::ActiveExceedsLeafSites { requested, leaf_sites } => write!(
                f,
                "{requested} active ECs requested but only {leaf_sites} leaf EC sites exist"
            ),
            Error::OrdinalOutOfRange { ordinal, m } => {
                write!(f, "EC ordinal {ordinal} outside [1, {m}]")
            }
            Error::ClassOutOfRange { index, m } => {
                write!(f, "class index {index} outside [1, {}]", m * m)
            }
            Error::InactiveEc(id) => write!(f, "node {id} is not an active EC"),
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            Error::ShapeMismatch { expected, got } => {
                write!(f, "shape mismatch: expected {expected}, got {got}")
            }
            Error::ZeroPrediction { index } => {
                write!(f, "prediction {index} is zero; relative error undefined")
            }
            Error::ConstantTarget => write!(f, "r^2 undefined: target vector is constant"),
            Error::Diverged { epoch } => write!(f, "training diverged at epoch {epoch}"),
            Error::BadLabel { label, num_classes } => {
                write!(f, "label {label} outside [1, {num_classes}]")
            }
            Error::Infeasible { request, ec, cache_bound } => {
                let limit = if *cache_bound { "cache" } else { "capacity" };
                write!(f, "request {request} has no feasible assignment ({limit} limit at {ec})")
            }
            Error::SearchSpaceTooLarge { states, limit } => {
                write!(f, "joint space of {states} states exceeds the {limit}-state guard")
            }
            Error::Scenario { seed, cause } => write!(f, "scenario {seed}: {cause}"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
