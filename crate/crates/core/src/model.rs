use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MetricGraph;

/// Constant coefficients of `kappa^2 - d/dx (a d/dx)` on one edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeParams {
    pub kappa: f64,
    pub a: f64,
}

/// Parameters of `(kappa^2 - div(a grad))^{alpha/2} (tau u) = W`, with
/// `kappa` and `a` constant on each edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldModel {
    edges: Vec<EdgeParams>,
    tau: f64,
    alpha: f64,
}

fn positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")))
    }
}

impl FieldModel {
    pub fn new(edges: Vec<EdgeParams>, tau: f64, alpha: f64) -> Result<Self> {
        for (i, p) in edges.iter().enumerate() {
            positive(&format!("kappa on edge {i}"), p.kappa)?;
            positive(&format!("a on edge {i}"), p.a)?;
        }
        positive("tau", tau)?;
        if !alpha.is_finite() {
            return Err(Error::InvalidParameter(format!("alpha must be finite, got {alpha}")));
        }
        if alpha <= 0.5 {
            return Err(Error::NonExistence(alpha));
        }
        Ok(Self { edges, tau, alpha })
    }

    /// Same `kappa`, `a` on every edge of `g`.
    pub fn uniform(g: &MetricGraph, kappa: f64, a: f64, tau: f64, alpha: f64) -> Result<Self> {
        Self::new(vec![EdgeParams { kappa, a }; g.edge_count()], tau, alpha)
    }

    pub fn edge(&self, index: usize) -> EdgeParams {
        self.edges[index]
    }

    pub fn edges(&self) -> &[EdgeParams] {
        &self.edges
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn min_kappa(&self) -> f64 {
        self.edges.iter().map(|p| p.kappa).fold(f64::INFINITY, f64::min)
    }

    /// Copy with a different exponent.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.edges.clone(), self.tau, alpha)
    }

    pub(crate) fn check_graph(&self, g: &MetricGraph) -> Result<()> {
        if self.edges.len() == g.edge_count() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "model has parameters for {} edges, graph has {}",
                self.edges.len(),
                g.edge_count()
            )))
        }
    }

    pub(crate) fn require_markov_exact(&self) -> Result<()> {
        if self.alpha == 1.0 {
            Ok(())
        } else {
            Err(Error::RouteToSpectral(self.alpha))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{canonical, Canonical};

    #[test]
    fn rejects_bad_parameters() {
        let g = canonical(&Canonical::Interval(1.0)).unwrap();
        assert!(FieldModel::uniform(&g, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(FieldModel::uniform(&g, 1.0, -1.0, 1.0, 1.0).is_err());
        assert!(FieldModel::uniform(&g, 1.0, 1.0, 0.0, 1.0).is_err());
        assert!(matches!(
            FieldModel::uniform(&g, 1.0, 1.0, 1.0, 0.5),
            Err(Error::NonExistence(_))
        ));
        assert!(FieldModel::uniform(&g, 1.0, 1.0, 1.0, 0.51).is_ok());
    }
}
