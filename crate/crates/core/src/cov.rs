//! Dense covariance matrices over ordered point lists.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::PointOnGraph;

/// Relative PSD tolerance: the minimum eigenvalue may dip to `-PSD_RTOL * trace`.
pub const PSD_RTOL: f64 = 1e-10;

/// How a covariance matrix was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Exact,
    Spectral,
    Isotropic,
}

#[derive(Debug, Clone)]
pub struct CovMatrix {
    pub points: Vec<PointOnGraph>,
    pub matrix: DMatrix<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdReport {
    pub min_eigenvalue: f64,
    pub trace: f64,
    pub psd: bool,
}

impl CovMatrix {
    pub fn new(points: Vec<PointOnGraph>, matrix: DMatrix<f64>, provenance: Provenance) -> Self {
        debug_assert_eq!(points.len(), matrix.nrows());
        Self {
            points,
            matrix,
            provenance,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn psd_report(&self) -> PsdReport {
        psd_report(&self.matrix)
    }

    /// Largest absolute asymmetry `|C_ij - C_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let n = self.matrix.nrows();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)]).abs());
            }
        }
        worst
    }

    /// Restrict to the given indices, in order.
    pub fn select(&self, indices: &[usize]) -> CovMatrix {
        let matrix = DMatrix::from_fn(indices.len(), indices.len(), |i, j| {
            self.matrix[(indices[i], indices[j])]
        });
        CovMatrix {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            matrix,
            provenance: self.provenance,
        }
    }
}

pub fn psd_report(matrix: &DMatrix<f64>) -> PsdReport {
    let trace = matrix.trace();
    let min_eigenvalue = if matrix.is_empty() {
        0.0
    } else {
        SymmetricEigen::new(matrix.clone()).eigenvalues.min()
    };
    PsdReport {
        min_eigenvalue,
        trace,
        psd: min_eigenvalue >= -PSD_RTOL * trace.abs(),
    }
}

pub(crate) fn ensure_psd(matrix: &DMatrix<f64>) -> Result<PsdReport> {
    let report = psd_report(matrix);
    if report.psd {
        Ok(report)
    } else {
        Err(Error::NotPositiveSemiDefinite {
            min_eigenvalue: report.min_eigenvalue,
            tolerance: PSD_RTOL * report.trace.abs(),
        })
    }
}

/// Anything that can produce the joint covariance of a list of points.
pub trait CovarianceSource {
    fn covariance(&self, points: &[PointOnGraph]) -> Result<CovMatrix>;
}
