//! Gaussian conditioning on top of any covariance source.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::cov::{psd_report, CovarianceSource, PSD_RTOL};
use crate::error::{Error, Result};
use crate::graph::PointOnGraph;

/// Jitter is tried at `JITTER_START * trace / n`, growing tenfold up to `JITTER_MAX * trace / n`.
pub const JITTER_START: f64 = 1e-12;
pub const JITTER_MAX: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct KrigingResult {
    pub pred_points: Vec<PointOnGraph>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// Log marginal likelihood of the observations.
    pub loglik: f64,
    /// Diagonal jitter that was needed to factor the observation covariance (0 if none).
    pub jitter: f64,
}

impl KrigingResult {
    pub fn variance(&self) -> DVector<f64> {
        self.cov.diagonal()
    }
}

struct Factor {
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

fn factor(sigma: DMatrix<f64>) -> Result<Factor> {
    if let Some(chol) = sigma.clone().cholesky() {
        return Ok(Factor { chol, jitter: 0.0 });
    }
    let n = sigma.nrows();
    let report = psd_report(&sigma);
    if !report.psd {
        return Err(Error::NotPositiveSemiDefinite {
            min_eigenvalue: report.min_eigenvalue,
            tolerance: PSD_RTOL * report.trace.abs(),
        });
    }
    let scale = report.trace / n as f64;
    let mut rel = JITTER_START;
    while rel <= JITTER_MAX * (1.0 + 1e-9) {
        let jitter = rel * scale;
        let mut shifted = sigma.clone();
        for i in 0..n {
            shifted[(i, i)] += jitter;
        }
        if let Some(chol) = shifted.cholesky() {
            return Ok(Factor { chol, jitter });
        }
        rel *= 10.0;
    }
    Err(Error::Singular(format!(
        "observation covariance could not be factored with jitter up to {:e}",
        JITTER_MAX * scale
    )))
}

fn validate(obs: &[PointOnGraph], y: &[f64], noise: f64) -> Result<()> {
    if obs.len() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "{} observation points but {} values",
            obs.len(),
            y.len()
        )));
    }
    if obs.is_empty() {
        return Err(Error::InvalidParameter("no observations".into()));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise variance must be >= 0, got {noise}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("observations must be finite".into()));
    }
    if noise == 0.0 {
        for (i, p) in obs.iter().enumerate() {
            if obs[..i].contains(p) {
                return Err(Error::Singular(format!(
                    "duplicate observation point ({}, {}) without noise",
                    p.edge, p.t
                )));
            }
        }
    }
    Ok(())
}

fn loglik_from(f: &Factor, y: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let white = f.chol.l().solve_lower_triangular(y).expect("triangular factor is nonsingular");
    let logdet = 2.0 * f.chol.l().diagonal().map(f64::ln).sum();
    -0.5 * (white.norm_squared() + logdet + n * (2.0 * std::f64::consts::PI).ln())
}

/// Posterior of the field at `pred` given `y = u(obs) + noise`.
pub fn krige(
    source: &dyn CovarianceSource,
    obs: &[PointOnGraph],
    y: &[f64],
    noise: f64,
    pred: &[PointOnGraph],
) -> Result<KrigingResult> {
    validate(obs, y, noise)?;
    let no = obs.len();
    let np = pred.len();
    let all: Vec<PointOnGraph> = obs.iter().chain(pred).copied().collect();
    let joint = source.covariance(&all)?;
    let c = &joint.matrix;
    let mut sigma = c.view((0, 0), (no, no)).into_owned();
    for i in 0..no {
        sigma[(i, i)] += noise;
    }
    let f = factor(sigma)?;
    let y = DVector::from_column_slice(y);
    let l = f.chol.l();
    let cross = c.view((0, no), (no, np)).into_owned();
    let v = l.solve_lower_triangular(&cross).expect("triangular factor is nonsingular");
    let white = l.solve_lower_triangular(&y).expect("triangular factor is nonsingular");
    let mean = v.transpose() * &white;
    let prior = c.view((no, no), (np, np)).into_owned();
    let post = prior - v.transpose() * &v;
    let post = (&post + post.transpose()) * 0.5;
    Ok(KrigingResult {
        pred_points: joint.points[no..].to_vec(),
        mean,
        cov: post,
        loglik: loglik_from(&f, &y),
        jitter: f.jitter,
    })
}

/// `log N(y; 0, C_oo + noise I)`.
pub fn loglik(source: &dyn CovarianceSource, obs: &[PointOnGraph], y: &[f64], noise: f64) -> Result<f64> {
    validate(obs, y, noise)?;
    let mut sigma = source.covariance(obs)?.matrix;
    for i in 0..obs.len() {
        sigma[(i, i)] += noise;
    }
    let f = factor(sigma)?;
    Ok(loglik_from(&f, &DVector::from_column_slice(y)))
}
