//! Piecewise-linear finite elements for `kappa^2 - d/dx(a d/dx)` on a metric
//! graph with Kirchhoff vertex conditions, and fractional covariances built
//! from the generalized eigenpairs.
//!
//! Vertex nodes are shared by every incident edge, so continuity is built
//! into the space and the Kirchhoff flux condition is the natural boundary
//! condition of the bilinear form `int a u' v' + kappa^2 u v`.

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, Par, Side};
use nalgebra::{DMatrix, DVector};

use crate::cov::{CovMatrix, CovarianceSource, Provenance};
use crate::error::{Error, Result};
use crate::graph::{GraphMesh, MetricGraph, PointOnGraph};
use crate::model::FieldModel;
use crate::sampling::standard_normals;

/// Assembled operator and its generalized eigenpairs `A e = lambda M e`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub mesh: GraphMesh,
    pub mass: DMatrix<f64>,
    /// Stiffness plus reaction: `int a u' v' + int kappa^2 u v`.
    pub stiffness: DMatrix<f64>,
    /// Nondecreasing.
    pub eigenvalues: DVector<f64>,
    /// Column `k` holds the nodal values of `e_k`; `E^T M E = I`.
    pub eigenvectors: DMatrix<f64>,
    graph_hash: u64,
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Generalized symmetric-definite eigenproblem via `M = L L^T` and the
/// standard problem for `L^{-1} A L^{-T}`.
fn generalized_eigen(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let llt = to_faer(m)
        .llt(Side::Lower)
        .map_err(|e| Error::Eigen(format!("mass matrix factorization failed: {e:?}")))?;
    let l = llt.L();
    let mut c = to_faer(a);
    solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
    let mut c = c.transpose().to_owned();
    solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
    // Symmetrize away rounding before the self-adjoint solve.
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let eig = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let values = eig.S().column_vector();
    let mut vectors = eig.U().to_owned();
    solve_upper_triangular_in_place(l.transpose(), vectors.as_mut(), Par::Seq);
    Ok((
        DVector::from_fn(n, |i, _| values[i]),
        DMatrix::from_fn(n, n, |i, j| vectors[(i, j)]),
    ))
}

#[derive(Debug, Clone, Copy)]
struct Element {
    nodes: [usize; 2],
    length: f64,
    a: f64,
    kappa2: f64,
}

/// Replace each eigenvalue by the Rayleigh quotient of its vector, summed
/// element by element as nonnegative terms. The dense solve carries an absolute
/// error of order `eps * lambda_max`, which swamps the low end of the spectrum
/// on fine meshes; the quotient is accurate to the square of the vector error.
fn refine(elements: &[Element], values: DVector<f64>, vectors: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = values.len();
    let mut refined: Vec<(f64, usize)> = (0..n)
        .map(|k| {
            let v = vectors.column(k);
            let (mut num, mut den) = (0.0, 0.0);
            for el in elements {
                let (x, y) = (v[el.nodes[0]], v[el.nodes[1]]);
                let mass = el.length / 6.0 * ((x + y) * (x + y) + x * x + y * y);
                num += el.a / el.length * (x - y) * (x - y) + el.kappa2 * mass;
                den += mass;
            }
            (num / den, k)
        })
        .collect();
    refined.sort_by(|p, q| p.0.total_cmp(&q.0));
    let eigenvalues = DVector::from_iterator(n, refined.iter().map(|r| r.0));
    let eigenvectors = DMatrix::from_fn(vectors.nrows(), n, |i, j| vectors[(i, refined[j].1)]);
    (eigenvalues, eigenvectors)
}

/// Assemble on a mesh of spacing `<= h` and solve the full eigenproblem.
pub fn assemble(g: &MetricGraph, m: &FieldModel, h: f64) -> Result<DiscreteOperator> {
    m.check_graph(g)?;
    let mesh = GraphMesh::new(g, h)?;
    let n = mesh.len();
    let mut mass = DMatrix::zeros(n, n);
    let mut stiffness = DMatrix::zeros(n, n);
    let mut elements_list = Vec::new();
    for (index, e) in g.edges().iter().enumerate() {
        let p = m.edge(index);
        let elements = mesh.edge_elements[index];
        let he = e.length / elements as f64;
        let along = &mesh.edge_nodes[index];
        for i in 0..elements {
            let nodes = [along[i], along[i + 1]];
            elements_list.push(Element {
                nodes,
                length: he,
                a: p.a,
                kappa2: p.kappa * p.kappa,
            });
            for (r, &a) in nodes.iter().enumerate() {
                for (c, &b) in nodes.iter().enumerate() {
                    let local_mass = he / 6.0 * if r == c { 2.0 } else { 1.0 };
                    let local_stiff = p.a / he * if r == c { 1.0 } else { -1.0 };
                    mass[(a, b)] += local_mass;
                    stiffness[(a, b)] += local_stiff + p.kappa * p.kappa * local_mass;
                }
            }
        }
    }
    let (raw, vectors) = generalized_eigen(&stiffness, &mass)?;
    let (eigenvalues, eigenvectors) = refine(&elements_list, raw, vectors);
    Ok(DiscreteOperator {
        mesh,
        mass,
        stiffness,
        eigenvalues,
        eigenvectors,
        graph_hash: g.content_hash(),
    })
}

impl DiscreteOperator {
    pub fn len(&self) -> usize {
        self.mesh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mesh.is_empty()
    }

    pub fn eigenpair_count(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `max |E^T M E - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.eigenvectors.transpose() * &self.mass * &self.eigenvectors;
        (gram - DMatrix::identity(self.len(), self.len())).amax()
    }

    fn check_graph(&self, g: &MetricGraph) -> Result<()> {
        if g.content_hash() == self.graph_hash {
            Ok(())
        } else {
            Err(Error::InvalidParameter("operator was assembled on a different graph".into()))
        }
    }

    fn truncation(&self, k: Option<usize>) -> Result<usize> {
        let available = self.eigenpair_count();
        match k {
            None => Ok(available),
            Some(0) => Err(Error::InvalidParameter("truncation must keep at least one eigenpair".into())),
            Some(k) if k > available => Err(Error::InvalidParameter(format!(
                "truncation {k} exceeds the {available} available eigenpairs"
            ))),
            Some(k) => Ok(k),
        }
    }

    /// Rows: points; columns: `lambda_k^{-alpha/2} e_k(p) / tau`, `k < trunc`.
    fn scaled_modes(&self, g: &MetricGraph, pts: &[PointOnGraph], alpha: f64, tau: f64, trunc: usize) -> DMatrix<f64> {
        let weights: Vec<f64> = (0..trunc)
            .map(|k| self.eigenvalues[k].powf(-alpha / 2.0) / tau)
            .collect();
        DMatrix::from_fn(pts.len(), trunc, |i, k| {
            let [(a, wa), (b, wb)] = self.mesh.interpolation(g, pts[i]);
            (wa * self.eigenvectors[(a, k)] + wb * self.eigenvectors[(b, k)]) * weights[k]
        })
    }
}

fn check_exponent(alpha: f64, tau: f64) -> Result<()> {
    if !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("alpha must be finite, got {alpha}")));
    }
    if alpha <= 0.5 {
        return Err(Error::NonExistence(alpha));
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidParameter(format!("tau must be positive, got {tau}")));
    }
    Ok(())
}

/// Truncated spectral covariance and its tail estimate.
#[derive(Debug, Clone)]
pub struct SpectralCov {
    pub cov: CovMatrix,
    pub truncation: usize,
    /// `lambda_K^{-(alpha - 1/2)}`.
    pub tail_estimate: f64,
}

/// `tau^{-2} sum_{k<K} lambda_k^{-alpha} e_k(x_i) e_k(x_j)` with `e_k` linearly
/// interpolated between nodes. `k = None` keeps every eigenpair.
pub fn spectral_cov(
    op: &DiscreteOperator,
    g: &MetricGraph,
    alpha: f64,
    tau: f64,
    pts: &[PointOnGraph],
    k: Option<usize>,
) -> Result<SpectralCov> {
    check_exponent(alpha, tau)?;
    op.check_graph(g)?;
    let trunc = op.truncation(k)?;
    let pts = pts
        .iter()
        .map(|p| g.point(p.edge, p.t))
        .collect::<Result<Vec<_>>>()?;
    let modes = op.scaled_modes(g, &pts, alpha, tau, trunc);
    let matrix = &modes * modes.transpose();
    let matrix = (&matrix + matrix.transpose()) * 0.5;
    Ok(SpectralCov {
        cov: CovMatrix::new(pts, matrix, Provenance::Spectral),
        truncation: trunc,
        tail_estimate: op.eigenvalues[trunc - 1].powf(-(alpha - 0.5)),
    })
}

/// A [`CovarianceSource`] backed by a discrete operator.
#[derive(Debug, Clone)]
pub struct SpectralField<'a> {
    graph: &'a MetricGraph,
    op: &'a DiscreteOperator,
    alpha: f64,
    tau: f64,
    truncation: Option<usize>,
}

impl<'a> SpectralField<'a> {
    pub fn new(graph: &'a MetricGraph, op: &'a DiscreteOperator, alpha: f64, tau: f64, truncation: Option<usize>) -> Result<Self> {
        check_exponent(alpha, tau)?;
        op.check_graph(graph)?;
        op.truncation(truncation)?;
        Ok(Self {
            graph,
            op,
            alpha,
            tau,
            truncation,
        })
    }
}

impl CovarianceSource for SpectralField<'_> {
    fn covariance(&self, points: &[PointOnGraph]) -> Result<CovMatrix> {
        Ok(spectral_cov(self.op, self.graph, self.alpha, self.tau, points, self.truncation)?.cov)
    }
}

/// Karhunen-Loeve draws at the mesh nodes, one replicate per row:
/// `u = tau^{-1} sum_k lambda_k^{-alpha/2} xi_k e_k`.
pub fn kl_sample(
    op: &DiscreteOperator,
    alpha: f64,
    tau: f64,
    n: usize,
    seed: u64,
    k: Option<usize>,
) -> Result<DMatrix<f64>> {
    check_exponent(alpha, tau)?;
    let trunc = op.truncation(k)?;
    let mut scaled = op.eigenvectors.columns(0, trunc).into_owned();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= op.eigenvalues[k].powf(-alpha / 2.0) / tau;
    }
    let mut out = DMatrix::zeros(n, op.len());
    for r in 0..n {
        let xi = DVector::from_vec(standard_normals(seed, r as u64, trunc));
        out.row_mut(r).copy_from(&(&scaled * xi).transpose());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{full_cov, markov_check};
    use crate::graph::{canonical, Canonical};
    use std::f64::consts::PI;

    #[test]
    fn interval_neumann_spectrum() {
        let g = canonical(&Canonical::Interval(1.0)).unwrap();
        let m = FieldModel::uniform(&g, 1.0, 1.0, 1.0, 1.0).unwrap();
        let op = assemble(&g, &m, 1e-2).unwrap();
        for k in 0..4 {
            let exact = 1.0 + (k as f64 * PI).powi(2);
            let rel = (op.eigenvalues[k] - exact).abs() / exact;
            assert!(rel < 2e-3, "mode {k}: {} vs {exact}", op.eigenvalues[k]);
        }
        assert!(op.orthonormality_error() < 1e-10);
    }

    #[test]
    fn constant_mode_has_lowest_eigenvalue() {
        let g = canonical(&Canonical::Star(vec![1.0, 0.5, 2.0])).unwrap();
        let m = FieldModel::uniform(&g, 1.7, 0.6, 1.0, 1.0).unwrap();
        let op = assemble(&g, &m, 0.05).unwrap();
        assert!((op.eigenvalues[0] - 1.7 * 1.7).abs() < 1e-10);
        let v = op.eigenvectors.column(0);
        assert!((v.max() - v.min()).abs() < 1e-8 * v.amax());
    }

    #[test]
    fn circle_double_eigenvalues() {
        let g = canonical(&Canonical::Circle { length: 2.0, n: 3 }).unwrap();
        let m = FieldModel::uniform(&g, 1.0, 1.0, 1.0, 1.0).unwrap();
        let op = assemble(&g, &m, 5e-3).unwrap();
        for k in 1..3 {
            let exact = 1.0 + (2.0 * PI * k as f64 / 2.0).powi(2);
            for idx in [2 * k - 1, 2 * k] {
                assert!((op.eigenvalues[idx] - exact).abs() / exact < 1e-3);
            }
        }
    }

    #[test]
    fn alpha_one_approaches_exact() {
        let g = canonical(&Canonical::Star(vec![1.0, 1.0, 1.0])).unwrap();
        let m = FieldModel::uniform(&g, 1.0, 1.0, 1.0, 1.0).unwrap();
        let pts: Vec<_> = (0..3).flat_map(|e| [0.0, 0.5, 1.0].map(|t| PointOnGraph::new(e, t))).collect();
        let exact = full_cov(&g, &m, &pts).unwrap().matrix;
        let errors: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&h| {
                let op = assemble(&g, &m, h).unwrap();
                (spectral_cov(&op, &g, 1.0, 1.0, &pts, None).unwrap().cov.matrix - &exact).amax()
            })
            .collect();
        assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
        assert!(errors[2] < 2e-3, "{errors:?}");
    }

    #[test]
    fn fractional_exponent_is_not_markov() {
        let g = canonical(&Canonical::Star(vec![1.0, 1.0, 1.0])).unwrap();
        let m = FieldModel::uniform(&g, 1.0, 1.0, 1.0, 0.75).unwrap();
        let op = assemble(&g, &m, 0.02).unwrap();
        let pts = [
            PointOnGraph::new(0, 0.9),
            PointOnGraph::new(1, 0.9),
            g.vertex_point(3),
        ];
        let c = spectral_cov(&op, &g, 0.75, 1.0, &pts, None).unwrap().cov;
        assert!(markov_check(&c, &[0], &[1], &[2]).unwrap() > 1e-3);
    }

    #[test]
    fn variance_decreases_with_alpha() {
        let g = canonical(&Canonical::Interval(1.0)).unwrap();
        // kappa > 1 keeps every eigenvalue above one.
        let m = FieldModel::uniform(&g, 1.5, 1.0, 1.0, 1.0).unwrap();
        let op = assemble(&g, &m, 0.05).unwrap();
        let p = [PointOnGraph::new(0, 0.3)];
        let var = |alpha| spectral_cov(&op, &g, alpha, 1.0, &p, None).unwrap().cov.matrix[(0, 0)];
        assert!(var(0.75) > var(1.0) && var(1.0) > var(1.5) && var(1.5) > var(2.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = canonical(&Canonical::Interval(1.0)).unwrap();
        let m = FieldModel::uniform(&g, 1.0, 1.0, 1.0, 1.0).unwrap();
        let op = assemble(&g, &m, 0.1).unwrap();
        let p = [PointOnGraph::new(0, 0.5)];
        assert!(matches!(spectral_cov(&op, &g, 0.5, 1.0, &p, None), Err(Error::NonExistence(_))));
        assert!(spectral_cov(&op, &g, 1.0, 1.0, &p, Some(1000)).is_err());
        let other = canonical(&Canonical::Interval(2.0)).unwrap();
        assert!(spectral_cov(&op, &other, 1.0, 1.0, &p, None).is_err());
    }

    #[test]
    fn kl_sample_variance() {
        let g = canonical(&Canonical::Star(vec![1.0, 1.0, 1.0])).unwrap();
        let m = FieldModel::uniform(&g, 1.0, 1.0, 1.0, 1.0).unwrap();
        let op = assemble(&g, &m, 0.1).unwrap();
        let n = 100_000;
        let draws = kl_sample(&op, 1.0, 1.0, n, 11, None).unwrap();
        assert_eq!(draws, kl_sample(&op, 1.0, 1.0, n, 11, None).unwrap());
        let c = spectral_cov(&op, &g, 1.0, 1.0, &op.mesh.nodes, None).unwrap().cov.matrix;
        for node in 0..op.len() {
            let empirical = draws.column(node).map(|x| x * x).sum() / n as f64;
            let se = c[(node, node)] * (2.0 / n as f64).sqrt();
            assert!((empirical - c[(node, node)]).abs() < 3.0 * se + 1e-12, "node {node}");
        }
    }
}
