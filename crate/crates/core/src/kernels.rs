//! Isotropic covariance models `r(d(s, t))` and the circle Markov covariance.
//!
//! Also hosts the incompatibility-gap demonstrators: on a 1-sum of a
//! Euclidean cycle with a second cycle (of different length) or with an
//! edge, points at matched resistance distance from the joint would need
//! equal covariances with the joint. The demonstrators evaluate both sides
//! of that identity on a grid and report the largest mismatch.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::cov::{psd_report, CovMatrix, CovarianceSource, Provenance, PsdReport};
use crate::error::{Error, Result};
use crate::graph::{MetricGraph, PointOnGraph};
use crate::metrics::{geodesic_distance, resistance_structure, ResistanceStructure};

fn require_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")))
    }
}

/// Covariance of the alpha = 1 Whittle-Matern field on a circle of perimeter
/// `length`, at geodesic distance `h`:
/// `cosh(kappa (h - length/2)) / (2 kappa tau^2 sinh(kappa length / 2))`.
pub fn circle_cov(h: f64, kappa: f64, tau: f64, length: f64) -> Result<f64> {
    require_positive("kappa", kappa)?;
    require_positive("tau", tau)?;
    require_positive("length", length)?;
    let slack = 1e-12 * length;
    if !(h >= -slack && h <= length + slack) {
        return Err(Error::InvalidParameter(format!(
            "distance {h} outside [0, {length}]"
        )));
    }
    let h = h.clamp(0.0, length);
    // Written with decaying exponentials so large kappa * length cannot overflow.
    let num = (-kappa * h).exp() + (-kappa * (length - h)).exp();
    let den = 2.0 * kappa * tau * tau * -(-kappa * length).exp_m1();
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Geodesic,
    Resistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Kernel {
    /// `sigma2 * exp(-kappa h)`.
    Exponential { sigma2: f64, kappa: f64 },
    /// [`circle_cov`] for a circle of perimeter `length`.
    CircleMarkov { kappa: f64, tau: f64, length: f64 },
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Exponential { sigma2, kappa } => {
                require_positive("sigma2", sigma2)?;
                require_positive("kappa", kappa)
            }
            Kernel::CircleMarkov { kappa, tau, length } => {
                require_positive("kappa", kappa)?;
                require_positive("tau", tau)?;
                require_positive("length", length)
            }
        }
    }

    pub fn eval(&self, h: f64) -> Result<f64> {
        match *self {
            Kernel::Exponential { sigma2, kappa } => Ok(sigma2 * (-kappa * h).exp()),
            Kernel::CircleMarkov { kappa, tau, length } => circle_cov(h, kappa, tau, length),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsotropicModel {
    pub metric: Metric,
    pub kernel: Kernel,
}

/// An isotropic model bound to a graph, ready to evaluate covariances.
#[derive(Debug, Clone)]
pub struct IsotropicField<'g> {
    graph: &'g MetricGraph,
    kernel: Kernel,
    resistance: Option<ResistanceStructure>,
}

impl<'g> IsotropicField<'g> {
    pub fn new(graph: &'g MetricGraph, model: IsotropicModel) -> Result<Self> {
        model.kernel.validate()?;
        let resistance = match model.metric {
            Metric::Geodesic => None,
            Metric::Resistance => Some(resistance_structure(graph, 0)?),
        };
        Ok(Self {
            graph,
            kernel: model.kernel,
            resistance,
        })
    }

    pub fn distance(&self, p: PointOnGraph, q: PointOnGraph) -> Result<f64> {
        match &self.resistance {
            None => Ok(geodesic_distance(self.graph, p, q)),
            Some(rs) => rs.distance(self.graph, p, q),
        }
    }
}

impl CovarianceSource for IsotropicField<'_> {
    fn covariance(&self, points: &[PointOnGraph]) -> Result<CovMatrix> {
        let n = points.len();
        let mut matrix = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let value = self.kernel.eval(self.distance(points[i], points[j])?)?;
                matrix[(i, j)] = value;
                matrix[(j, i)] = value;
            }
        }
        Ok(CovMatrix::new(points.to_vec(), matrix, Provenance::Isotropic))
    }
}

/// `r(d(p_i, p_j))` over `points`, with a minimum-eigenvalue report.
pub fn iso_cov_matrix(
    g: &MetricGraph,
    model: IsotropicModel,
    points: &[PointOnGraph],
) -> Result<(CovMatrix, PsdReport)> {
    let cov = IsotropicField::new(g, model)?.covariance(points)?;
    let report = psd_report(&cov.matrix);
    Ok((cov, report))
}

/// Configurations for the incompatibility-gap demonstrators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GapCase {
    /// 1-sum of two Euclidean cycles of lengths `l1 != l2`.
    TwoCycles {
        l1: f64,
        l2: f64,
        kappa: f64,
        tau: f64,
    },
    /// 1-sum of a Euclidean cycle of length `cycle` and an edge of length `edge`.
    CyclePlusEdge {
        cycle: f64,
        edge: f64,
        kappa1: f64,
        kappa2: f64,
        sigma: f64,
        tau: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapRow {
    pub h: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub max_gap: f64,
    pub argmax_h: f64,
    pub rows: Vec<GapRow>,
}

/// Default number of grid points for [`nonexistence_gap`].
pub const GAP_GRID_POINTS: usize = 10_000;

/// Geodesic distance from a point on a cycle of length `length` to a fixed
/// vertex, given their resistance distance `h <= length / 4`. Admissible root
/// of `h = d - d^2 / length`.
pub fn cycle_geodesic_from_resistance(h: f64, length: f64) -> f64 {
    let disc = (1.0 - 4.0 * h / length).max(0.0);
    0.5 * length * (1.0 - disc.sqrt())
}

/// Largest mismatch between the two sides of the matched-resistance identity.
pub fn nonexistence_gap(case: GapCase, grid_points: usize) -> Result<GapReport> {
    if grid_points < 2 {
        return Err(Error::InvalidParameter("gap grid needs at least 2 points".into()));
    }
    let (h_max, lhs, rhs): (f64, Box<dyn Fn(f64) -> Result<f64>>, Box<dyn Fn(f64) -> Result<f64>>) =
        match case {
            GapCase::TwoCycles { l1, l2, kappa, tau } => {
                for (name, v) in [("l1", l1), ("l2", l2), ("kappa", kappa), ("tau", tau)] {
                    require_positive(name, v)?;
                }
                if (l1 - l2).abs() <= 1e-12 * l1.max(l2) {
                    return Err(Error::Degenerate(
                        "two_cycles needs cycles of different lengths".into(),
                    ));
                }
                (
                    l1.min(l2) / 4.0,
                    Box::new(move |h| circle_cov(cycle_geodesic_from_resistance(h, l1), kappa, tau, l1)),
                    Box::new(move |h| circle_cov(cycle_geodesic_from_resistance(h, l2), kappa, tau, l2)),
                )
            }
            GapCase::CyclePlusEdge {
                cycle,
                edge,
                kappa1,
                kappa2,
                sigma,
                tau,
            } => {
                for (name, v) in [
                    ("cycle", cycle),
                    ("edge", edge),
                    ("kappa1", kappa1),
                    ("kappa2", kappa2),
                    ("sigma", sigma),
                    ("tau", tau),
                ] {
                    require_positive(name, v)?;
                }
                (
                    edge.min(cycle / 4.0),
                    // On the edge resistance and geodesic distance coincide.
                    Box::new(move |h| Ok(sigma * sigma * (-kappa1 * h).exp())),
                    Box::new(move |h| {
                        circle_cov(cycle_geodesic_from_resistance(h, cycle), kappa2, tau, cycle)
                    }),
                )
            }
        };

    let mut rows = Vec::with_capacity(grid_points);
    let mut best = GapRow {
        h: 0.0,
        lhs: 0.0,
        rhs: 0.0,
        gap: f64::NEG_INFINITY,
    };
    for i in 0..grid_points {
        let h = h_max * i as f64 / (grid_points - 1) as f64;
        let (l, r) = (lhs(h)?, rhs(h)?);
        let row = GapRow {
            h,
            lhs: l,
            rhs: r,
            gap: (l - r).abs(),
        };
        if row.gap > best.gap {
            best = row;
        }
        rows.push(row);
    }
    Ok(GapReport {
        max_gap: best.gap,
        argmax_h: best.h,
        rows,
    })
}
