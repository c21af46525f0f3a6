//! Estimation of the average causal effect of a binary treatment in
//! hidden-variable causal graphs where the treatment is primal fixable.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: ADMGs, latent projection, districts, Markov pillows, the
//!   X/M/L partition.
//! * [`data`]: columnar datasets bound to graph vertices.
//! * [`learn`]: design matrices and the supervised learners.
//! * [`nuisance`]: outcome regression, propensity, sequential regressions and
//!   density-ratio products.
//! * [`estimators`]: plug-in, one-step and TMLE estimators, the influence
//!   function, cross-fitting and an exact enumeration oracle.
//! * [`simulation`]: data-generating processes, truth computation and the
//!   replication harness.

pub mod data;
pub mod estimators;
pub mod graph;
pub mod learn;
pub mod nuisance;
pub mod simulation;

pub use data::{ColumnKind, Dataset};
pub use graph::{Admg, CausalPartition, Dag, GraphSpec, Level, TopoOrder, VertexId};
