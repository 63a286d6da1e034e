//! Bouchaud trap model on complete graphs, hypercubes and two-dimensional
//! tori: lazy random landscapes, event-driven dynamics, the arcsine and
//! stable-subordinator limit objects, and exact potential theory used to
//! check them.

// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dense;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod harness;
pub mod landscape;
pub mod levy;
pub mod parallel;
pub mod potential;
pub mod quad;
pub mod rng;
pub mod special;
pub mod stats;

pub use config::{ExperimentConfig, ExperimentKind, ToleranceProfile};
pub use error::{Error, Result};
pub use graph::{Topology, VertexId};
pub use harness::{execute, run, ExperimentReport, Row};
pub use landscape::{
    classify, scales, DepthLaw, Environment, LandscapeSpec, ScaleModel, ScaleOverrides, ScaleSet,
    TrapClass, TrapWindow,
};
