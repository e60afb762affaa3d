//! Gaussian random fields on compact metric graphs.
//!
//! * [`graph`]: graph construction, canonical graphs, 1-sums and meshes.
//! * [`metrics`]: geodesic and resistance distances.
//! * [`kernels`]: isotropic covariance models and incompatibility gaps.
//! * [`exact`]: the exact alpha = 1 Whittle-Matern field.
//! * [`spectral`]: finite-element eigenpairs for any alpha > 1/2.
//! * [`inference`]: kriging and log-likelihoods.

pub mod cli;
pub mod cov;
pub mod error;
pub mod exact;
pub mod graph;
pub mod inference;
pub mod kernels;
pub mod metrics;
pub mod model;
pub mod sampling;
pub mod spectral;

pub use cov::{CovMatrix, CovarianceSource, Provenance, PsdReport};
pub use error::{Error, Result};
pub use graph::{build_graph, canonical, classify, mesh, one_sum, Canonical, GraphClass, GraphSpec, MetricGraph, PointOnGraph};
pub use model::{EdgeParams, FieldModel};
