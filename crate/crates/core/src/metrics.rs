//! Geodesic distance and the resistance metric on graphs with Euclidean edges.
//!
//! The resistance metric is the variogram of `Z = Z_mu + sum_e B_e`, where
//! `Z_mu` linearly interpolates a vertex Gaussian vector with covariance
//! `L^{-1}` and the `B_e` are independent Brownian bridges on the edges. The
//! variogram is evaluated in closed form; nothing is simulated.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{classify, MetricGraph, PointOnGraph};

/// Shortest-path length between two points.
///
/// Equivalent to inserting `p` and `q` as temporary vertices and running a
/// shortest-path search: either the points share an edge and the direct
/// segment wins, or the path leaves each point through one of its edge's ends.
pub fn geodesic_distance(g: &MetricGraph, p: PointOnGraph, q: PointOnGraph) -> f64 {
    let ep = g.edge(p.edge);
    let eq = g.edge(q.edge);
    let exits_p = [(ep.u, p.t), (ep.v, ep.length - p.t)];
    let exits_q = [(eq.u, q.t), (eq.v, eq.length - q.t)];
    let mut best = if p.edge == q.edge {
        (p.t - q.t).abs()
    } else {
        f64::INFINITY
    };
    for &(x, dx) in &exits_p {
        for &(y, dy) in &exits_q {
            best = best.min(dx + g.vertex_distance(x, y) + dy);
        }
    }
    best
}

/// Vertex-level structure of the auxiliary process behind the resistance metric.
#[derive(Debug, Clone)]
pub struct ResistanceStructure {
    pub root: usize,
    /// `c(v1, v2) = 1 / length` for adjacent vertices, 0 otherwise.
    pub conductance: DMatrix<f64>,
    /// Weighted graph Laplacian with `+1` added at the root.
    pub laplacian: DMatrix<f64>,
    /// Inverse of `laplacian`: the vertex covariance of `Z_mu`.
    pub covariance: DMatrix<f64>,
    graph_hash: u64,
}

/// Build the resistance structure rooted at `root`. Requires Euclidean edges.
pub fn resistance_structure(g: &MetricGraph, root: usize) -> Result<ResistanceStructure> {
    if !classify(g).euclidean_edges {
        return Err(Error::UnsupportedGraph(
            "resistance metric needs a graph with Euclidean edges (no loops, no multi-edges, consistent lengths)".into(),
        ));
    }
    let n = g.vertex_count();
    if root >= n {
        return Err(Error::InvalidParameter(format!("root vertex {root} out of range")));
    }
    let mut conductance = DMatrix::zeros(n, n);
    for e in g.edges() {
        // Euclidean edges: d(u, v) equals the edge length.
        let c = 1.0 / g.vertex_distance(e.u, e.v);
        conductance[(e.u, e.v)] = c;
        conductance[(e.v, e.u)] = c;
    }
    let mut laplacian = -conductance.clone();
    for v in 0..n {
        laplacian[(v, v)] = conductance.row(v).sum();
    }
    laplacian[(root, root)] += 1.0;
    let covariance = laplacian
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("resistance Laplacian is not positive definite".into()))?
        .inverse();
    Ok(ResistanceStructure {
        root,
        conductance,
        laplacian,
        covariance,
        graph_hash: g.content_hash(),
    })
}

impl ResistanceStructure {
    /// Interpolation weights of `Z_mu` at `p` over the two end vertices.
    fn weights(g: &MetricGraph, p: PointOnGraph) -> [(usize, f64); 2] {
        let e = g.edge(p.edge);
        let frac = p.t / e.length;
        [(e.u, 1.0 - frac), (e.v, frac)]
    }

    /// `Var(Z(p) - Z(q))`.
    pub fn distance(&self, g: &MetricGraph, p: PointOnGraph, q: PointOnGraph) -> Result<f64> {
        if g.content_hash() != self.graph_hash {
            return Err(Error::InvalidParameter(
                "resistance structure was built for a different graph".into(),
            ));
        }
        let mut diff: Vec<(usize, f64)> = Vec::with_capacity(4);
        for (v, w) in Self::weights(g, p) {
            diff.push((v, w));
        }
        for (v, w) in Self::weights(g, q) {
            diff.push((v, -w));
        }
        let mut vertex_part = 0.0;
        for &(a, wa) in &diff {
            for &(b, wb) in &diff {
                vertex_part += wa * wb * self.covariance[(a, b)];
            }
        }

        let bridge_var = |t: f64, l: f64| t - t * t / l;
        let lp = g.edge(p.edge).length;
        let lq = g.edge(q.edge).length;
        let mut bridge_part = bridge_var(p.t, lp) + bridge_var(q.t, lq);
        if p.edge == q.edge {
            bridge_part -= 2.0 * (p.t.min(q.t) - p.t * q.t / lp);
        }
        Ok((vertex_part + bridge_part).max(0.0))
    }
}

/// Resistance distance with the structure rooted at vertex 0.
pub fn resistance_distance(g: &MetricGraph, p: PointOnGraph, q: PointOnGraph) -> Result<f64> {
    resistance_structure(g, 0)?.distance(g, p, q)
}
