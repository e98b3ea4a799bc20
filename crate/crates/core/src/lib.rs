//! Simulation of the component-exploration random walk on `G(n, p)`.
//!
//! The walk examines one vertex per step and reveals the number of edges
//! from it to still-unseen vertices. Given the past, that number is
//! binomial, so the whole exploration (and with it every component size)
//! can be sampled exactly without ever materialising the graph. On top of
//! the walk this crate provides:
//!
//! * [`theory`]: closed-form quantities (survival probability, dual
//!   parameter, limiting variance of the giant component, idealized
//!   trajectories);
//! * [`sampler`]: seedable, splittable random streams and exact binomial
//!   variates;
//! * [`exploration`]: the walk itself, its martingale decomposition and
//!   per-replica diagnostics;
//! * [`oracle`]: independent ground truth (direct graph sampling with
//!   union-find, exhaustive enumeration for tiny `n`);
//! * [`stats`]: streaming moments and goodness-of-fit statistics;
//! * [`harness`]: reproducible parallel Monte Carlo experiments.

pub mod error;
pub mod exploration;
pub mod harness;
pub mod oracle;
pub mod sampler;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
pub use exploration::{
    component_sizes, martingale_series, walk_components, ComponentStats, run_walk, simulate_summary, step, summarize_replica,
    MartingaleSeries, ReplicaSummary, Trajectory, WalkState,
};
pub use harness::{run_experiment, validate, ExperimentConfig, MCReport, Mode, ValidationReport};
pub use oracle::{enumerate_pmf, sample_graph, ExactPmf};
pub use sampler::{binomial, seed_stream, RngStream};
pub use stats::MomentAccumulator;
pub use theory::{Params, TheoryValues};

/// Crate version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
