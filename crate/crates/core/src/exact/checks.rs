//! Numerical checks of the Markov property and of the Kirchhoff vertex condition.

use std::collections::HashSet;

use nalgebra::DMatrix;

use crate::cov::{CovMatrix, CovarianceSource};
use crate::error::{Error, Result};
use crate::graph::{End, MetricGraph, PointOnGraph};
use crate::metrics::geodesic_distance;
use crate::model::FieldModel;

fn block(c: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| c[(rows[i], cols[j])])
}

/// Largest absolute entry of `C_AB - C_AS C_SS^{-1} C_SB`.
pub fn markov_check(c: &CovMatrix, a: &[usize], b: &[usize], s: &[usize]) -> Result<f64> {
    let n = c.len();
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidParameter("index sets A and B must be non-empty".into()));
    }
    let mut seen = HashSet::new();
    for &i in a.iter().chain(b).chain(s) {
        if i >= n {
            return Err(Error::InvalidParameter(format!("index {i} out of range for {n} points")));
        }
        if !seen.insert(i) {
            return Err(Error::InvalidParameter(format!(
                "index {i} appears more than once; A, B and S must be disjoint"
            )));
        }
    }
    let mut cond = block(&c.matrix, a, b);
    if !s.is_empty() {
        let css = block(&c.matrix, s, s);
        let chol = css
            .cholesky()
            .ok_or_else(|| Error::Singular("C_SS is not positive definite".into()))?;
        let csb = block(&c.matrix, s, b);
        let cas = block(&c.matrix, a, s);
        cond -= cas * chol.solve(&csb);
    }
    Ok(cond.amax())
}

/// `|sum_e a_e d_e rho(., probe)(v)|` with the outward derivative along each
/// incident edge estimated by a one-sided second-order difference at spacing `h`.
///
/// With piecewise-constant `a` the weighted sum is the natural vertex condition
/// of the bilinear form `int a u' v' + kappa^2 u v`; for uniform `a` it is the
/// plain derivative sum up to a constant factor.
pub fn kirchhoff_residual(
    g: &MetricGraph,
    m: &FieldModel,
    source: &dyn CovarianceSource,
    vertex: usize,
    probe: PointOnGraph,
    h: f64,
) -> Result<f64> {
    m.check_graph(g)?;
    if vertex >= g.vertex_count() {
        return Err(Error::InvalidParameter(format!("vertex {vertex} out of range")));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("spacing must be positive, got {h}")));
    }
    let probe = g.point(probe.edge, probe.t)?;
    let at_vertex = g.vertex_point(vertex);
    let gap = geodesic_distance(g, at_vertex, probe);
    if gap <= 2.0 * h {
        return Err(Error::Precondition(format!(
            "probe is {gap} from vertex {vertex}; the stencil needs more than {}",
            2.0 * h
        )));
    }
    let mut stencil = vec![probe];
    let mut weights = Vec::new();
    for end in g.incident(vertex) {
        let e = g.edge(end.edge);
        if 2.0 * h >= e.length {
            return Err(Error::Precondition(format!(
                "spacing {h} too coarse for edge `{}` of length {}",
                e.id, e.length
            )));
        }
        for i in 0..3 {
            let offset = i as f64 * h;
            let t = match end.end {
                End::Start => offset,
                End::Finish => e.length - offset,
            };
            stencil.push(PointOnGraph::new(end.edge, t));
        }
        weights.push(m.edge(end.edge).a);
    }
    let c = source.covariance(&stencil)?;
    let mut total = 0.0;
    for (k, a) in weights.iter().enumerate() {
        let f = |i: usize| c.matrix[(0, 1 + 3 * k + i)];
        total += a * (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h);
    }
    Ok(total.abs())
}
