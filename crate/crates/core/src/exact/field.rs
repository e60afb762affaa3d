//! Continuity conditioning of independent Neumann edge fields and the
//! resulting exact alpha = 1 covariance.

use nalgebra::{DMatrix, SymmetricEigen};

use super::edge::{EdgeBasis, EdgeField};
use crate::cov::{CovMatrix, CovarianceSource, Provenance};
use crate::error::{Error, Result};
use crate::graph::{MetricGraph, PointOnGraph};
use crate::model::FieldModel;

/// Relative eigenvalue cutoff of the pseudo-inverse of `K Sigma K^T`.
pub const PINV_RTOL: f64 = 1e-12;

/// Linear constraints on the endpoint vector `(u_0(0), u_0(l_0), u_1(0), ...)`.
/// Its kernel is exactly the set of endpoint vectors that agree at every vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintMatrix {
    matrix: DMatrix<f64>,
    /// Built by [`continuity_constraints`]: full row rank by construction.
    canonical: bool,
}

impl ConstraintMatrix {
    /// Wrap a user-supplied matrix after checking that it enforces continuity.
    ///
    /// Redundant rows are allowed; the kernel must be the continuity subspace.
    pub fn from_matrix(g: &MetricGraph, matrix: DMatrix<f64>) -> Result<Self> {
        let slots = 2 * g.edge_count();
        if matrix.ncols() != slots {
            return Err(Error::InvalidParameter(format!(
                "constraint matrix has {} columns, expected {slots}",
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("constraint matrix has non-finite entries".into()));
        }
        let scale = matrix.amax().max(1.0);
        // Vertex indicator vectors span the continuity subspace; they must be annihilated.
        for v in 0..g.vertex_count() {
            let mut indicator = nalgebra::DVector::zeros(slots);
            for end in g.incident(v) {
                indicator[end.slot()] = 1.0;
            }
            let residual = (&matrix * indicator).amax();
            if residual > 1e-12 * scale * slots as f64 {
                return Err(Error::InvalidParameter(format!(
                    "constraint matrix does not allow a common value at vertex {v}"
                )));
            }
        }
        let expected = slots - g.vertex_count();
        let rank = if matrix.nrows() == 0 {
            0
        } else {
            matrix.clone().svd(false, false).rank(1e-10 * scale)
        };
        if rank != expected {
            return Err(Error::InvalidParameter(format!(
                "constraint matrix has rank {rank}, continuity needs {expected}"
            )));
        }
        Ok(Self {
            matrix,
            canonical: false,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Chain constraints: at each vertex, consecutive incident edge ends are differenced.
pub fn continuity_constraints(g: &MetricGraph) -> ConstraintMatrix {
    let slots = 2 * g.edge_count();
    let mut rows: Vec<(usize, usize)> = Vec::new();
    for v in 0..g.vertex_count() {
        let ends = g.incident(v);
        for pair in ends.windows(2) {
            rows.push((pair[0].slot(), pair[1].slot()));
        }
    }
    let mut matrix = DMatrix::zeros(rows.len(), slots);
    for (r, (i, j)) in rows.into_iter().enumerate() {
        matrix[(r, i)] = 1.0;
        matrix[(r, j)] = -1.0;
    }
    ConstraintMatrix {
        matrix,
        canonical: true,
    }
}

/// Block-diagonal covariance of the unconstrained endpoint vector.
pub fn endpoint_prior(g: &MetricGraph, m: &FieldModel) -> Result<DMatrix<f64>> {
    m.check_graph(g)?;
    let mut sigma = DMatrix::zeros(2 * g.edge_count(), 2 * g.edge_count());
    for (i, e) in g.edges().iter().enumerate() {
        let block = EdgeField::new(m.edge(i), m.tau(), e.length)?.endpoint_cov();
        for r in 0..2 {
            for c in 0..2 {
                sigma[(2 * i + r, 2 * i + c)] = block[r][c];
            }
        }
    }
    Ok(sigma)
}

/// `Sigma - Sigma K^T (K Sigma K^T)^+ K Sigma`.
fn condition(sigma: &DMatrix<f64>, k: &ConstraintMatrix) -> Result<DMatrix<f64>> {
    if k.rows() == 0 {
        return Ok(sigma.clone());
    }
    let ks = k.matrix() * sigma;
    let s = &ks * k.matrix().transpose();
    let s = (&s + s.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let top = eig.eigenvalues.amax();
    let cutoff = PINV_RTOL * top;
    if k.canonical && eig.eigenvalues.min() <= cutoff {
        return Err(Error::ConditioningFailure(format!(
            "K Sigma K^T is numerically singular (eigenvalues in [{:e}, {:e}])",
            eig.eigenvalues.min(),
            top
        )));
    }
    let inv_vals = eig.eigenvalues.map(|x| if x > cutoff { 1.0 / x } else { 0.0 });
    let pinv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
    let conditioned = sigma - ks.transpose() * pinv * ks;
    Ok((&conditioned + conditioned.transpose()) * 0.5)
}

/// Exact covariance of the alpha = 1 field: Neumann edges conditioned on continuity.
#[derive(Debug, Clone)]
pub struct ExactField<'g> {
    graph: &'g MetricGraph,
    edges: Vec<EdgeField>,
    bases: Vec<EdgeBasis>,
    /// Conditioned covariance of the vertex values.
    vertex_cov: DMatrix<f64>,
}

impl<'g> ExactField<'g> {
    pub fn new(graph: &'g MetricGraph, model: &FieldModel) -> Result<Self> {
        Self::with_constraints(graph, model, &continuity_constraints(graph))
    }

    pub fn with_constraints(graph: &'g MetricGraph, model: &FieldModel, k: &ConstraintMatrix) -> Result<Self> {
        model.require_markov_exact()?;
        let sigma = endpoint_prior(graph, model)?;
        let conditioned = condition(&sigma, k)?;
        // All endpoint slots at one vertex carry the same conditioned value, so
        // averaging them loses nothing and makes the agreement exact.
        let nv = graph.vertex_count();
        let mut average = DMatrix::<f64>::zeros(nv, conditioned.nrows());
        for v in 0..nv {
            let ends = graph.incident(v);
            for end in ends {
                average[(v, end.slot())] += 1.0 / ends.len() as f64;
            }
        }
        let vertex_cov: DMatrix<f64> = &average * conditioned * average.transpose();
        let vertex_cov = (&vertex_cov + vertex_cov.transpose()) * 0.5;
        let edges = graph
            .edges()
            .iter()
            .enumerate()
            .map(|(i, e)| EdgeField::new(model.edge(i), model.tau(), e.length))
            .collect::<Result<Vec<_>>>()?;
        let bases = edges.iter().map(EdgeField::basis).collect();
        Ok(Self {
            graph,
            edges,
            bases,
            vertex_cov,
        })
    }

    pub fn graph(&self) -> &MetricGraph {
        self.graph
    }

    pub fn edge_field(&self, edge: usize) -> &EdgeField {
        &self.edges[edge]
    }

    pub fn basis(&self, edge: usize) -> &EdgeBasis {
        &self.bases[edge]
    }

    /// Covariance of the vertex values, vertex order.
    pub fn vertex_cov(&self) -> &DMatrix<f64> {
        &self.vertex_cov
    }

    /// Conditioned covariance of the endpoint vector `(u_e(0), u_e(l_e))_e`.
    pub fn endpoint_cov(&self) -> DMatrix<f64> {
        let slots = 2 * self.edges.len();
        let vertex = |slot: usize| {
            let e = self.graph.edge(slot / 2);
            if slot % 2 == 0 {
                e.u
            } else {
                e.v
            }
        };
        DMatrix::from_fn(slots, slots, |i, j| self.vertex_cov[(vertex(i), vertex(j))])
    }

    /// Boundary part `G_e(s)^T Cov(B u_e, B u_f) G_f(t)`.
    pub fn boundary_part(&self, p: PointOnGraph, q: PointOnGraph) -> f64 {
        let ep = self.graph.edge(p.edge);
        let eq = self.graph.edge(q.edge);
        let gp = self.bases[p.edge].eval(p.t);
        let gq = self.bases[q.edge].eval(q.t);
        let vp = [ep.u, ep.v];
        let vq = [eq.u, eq.v];
        let mut total = 0.0;
        for i in 0..2 {
            if gp[i] == 0.0 {
                continue;
            }
            for j in 0..2 {
                total += gp[i] * self.vertex_cov[(vp[i], vq[j])] * gq[j];
            }
        }
        total
    }

    /// Zero-boundary part; nonzero only on a shared edge.
    pub fn bridge_part(&self, p: PointOnGraph, q: PointOnGraph) -> f64 {
        if p.edge == q.edge {
            self.edges[p.edge].bridge_unchecked(p.t, q.t)
        } else {
            0.0
        }
    }

    /// Covariance between two validated points.
    pub fn cov(&self, p: PointOnGraph, q: PointOnGraph) -> f64 {
        self.boundary_part(p, q) + self.bridge_part(p, q)
    }
}

impl CovarianceSource for ExactField<'_> {
    fn covariance(&self, points: &[PointOnGraph]) -> Result<CovMatrix> {
        let pts = points
            .iter()
            .map(|p| self.graph.point(p.edge, p.t))
            .collect::<Result<Vec<_>>>()?;
        let n = pts.len();
        let mut matrix = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let c = self.cov(pts[i], pts[j]);
                matrix[(i, j)] = c;
                matrix[(j, i)] = c;
            }
        }
        Ok(CovMatrix::new(pts, matrix, Provenance::Exact))
    }
}

/// Conditioned covariance of one representative point per vertex.
pub fn vertex_field_cov(g: &MetricGraph, m: &FieldModel) -> Result<CovMatrix> {
    let field = ExactField::new(g, m)?;
    let points = (0..g.vertex_count()).map(|v| g.vertex_point(v)).collect();
    Ok(CovMatrix::new(points, field.vertex_cov.clone(), Provenance::Exact))
}

/// Exact alpha = 1 covariance at `pts`.
pub fn full_cov(g: &MetricGraph, m: &FieldModel, pts: &[PointOnGraph]) -> Result<CovMatrix> {
    ExactField::new(g, m)?.covariance(pts)
}
