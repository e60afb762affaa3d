//! Exact alpha = 1 fields with piecewise-constant coefficients.

mod checks;
mod edge;
mod field;

pub use checks::{kirchhoff_residual, markov_check};
pub use edge::{edge_basis, neumann_edge_cov, EdgeBasis, EdgeField};
pub use field::{
    continuity_constraints, endpoint_prior, full_cov, vertex_field_cov, ConstraintMatrix, ExactField, PINV_RTOL,
};

use crate::error::Result;
use crate::graph::{MetricGraph, PointOnGraph};
use crate::model::FieldModel;
use nalgebra::DMatrix;

/// `n` draws (one per row) of the exact field at `pts`.
pub fn sample(g: &MetricGraph, m: &FieldModel, pts: &[PointOnGraph], n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let c = full_cov(g, m, pts)?;
    crate::sampling::sample_gaussian(&c.matrix, n, seed)
}

/// Bridge covariance on edge `edge` of `g`.
pub fn bridge_cov(g: &MetricGraph, m: &FieldModel, edge: usize, s: f64, t: f64) -> Result<f64> {
    m.require_markov_exact()?;
    m.check_graph(g)?;
    if edge >= g.edge_count() {
        return Err(crate::error::Error::UnknownEdge(edge.to_string()));
    }
    EdgeField::new(m.edge(edge), m.tau(), g.edge(edge).length)?.bridge_cov(s, t)
}
