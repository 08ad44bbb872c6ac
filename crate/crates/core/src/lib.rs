//! Bounded-confidence opinion dynamics: classical, social and noisy
//! Hegselmann–Krause updates, energy and spectral diagnostics, runtime checks
//! of the noisy convergence lemmas, and random-network sweeps.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod graphs;
pub mod io;
pub mod seed;
pub mod spectral;

pub use config::{
    communication_graph, components, neighbors, CommunicationGraph, Configuration,
    DEFAULT_CONFIDENCE,
};
pub use dynamics::{
    run, step_classical, step_nd, step_nd_pairwise, step_social, Model, NoiseMode, NoiseSource,
    RunOptions, StopReason, StopRule, Trajectory,
};
pub use error::{HkError, Result};
pub use graphs::{GraphSchedule, SocialGraph};
