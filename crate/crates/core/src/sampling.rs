//! Seeded Gaussian sampling from a dense covariance.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cov::ensure_psd;
use crate::error::Result;

/// A matrix `F` with `F F^T = cov`: Cholesky when possible, otherwise a
/// symmetric square root of the PSD-clamped spectrum.
pub fn covariance_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = cov.clone().cholesky() {
        return Ok(chol.l());
    }
    ensure_psd(cov)?;
    let eig = SymmetricEigen::new(cov.clone());
    let roots = eig.eigenvalues.map(|x| x.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// Independent standard normals for replicate `replicate`: the ChaCha20 stream
/// keyed by `seed`, with the replicate index as stream id.
pub fn standard_normals(seed: u64, replicate: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// `n` zero-mean draws, one per row.
pub fn sample_gaussian(cov: &DMatrix<f64>, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let p = cov.nrows();
    if n == 0 || p == 0 {
        return Ok(DMatrix::zeros(n, p));
    }
    let factor = covariance_factor(cov)?;
    let mut out = DMatrix::zeros(n, p);
    for r in 0..n {
        let z = nalgebra::DVector::from_vec(standard_normals(seed, r as u64, factor.ncols()));
        let x = &factor * z;
        out.row_mut(r).copy_from(&x.transpose());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_deterministic() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        assert_eq!(sample_gaussian(&cov, 0, 1).unwrap().nrows(), 0);
        let a = sample_gaussian(&cov, 5, 42).unwrap();
        let b = sample_gaussian(&cov, 5, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_gaussian(&cov, 5, 43).unwrap());
        // Replicates are streams, so a longer run extends a shorter one.
        let c = sample_gaussian(&cov, 8, 42).unwrap();
        assert_eq!(a, c.rows(0, 5).into_owned());
    }

    #[test]
    fn singular_covariance_falls_back_to_eigen_root() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let f = covariance_factor(&cov).unwrap();
        assert!((&f * f.transpose() - &cov).amax() < 1e-12);
        let x = sample_gaussian(&cov, 10, 7).unwrap();
        for r in 0..10 {
            assert!((x[(r, 0)] - x[(r, 1)]).abs() < 1e-12);
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(sample_gaussian(&cov, 1, 0).is_err());
    }
}
