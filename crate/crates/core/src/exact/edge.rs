//! Closed forms on a single edge `[0, l]` with constant coefficients and alpha = 1.
//!
//! With `k = kappa / sqrt(a)` the homogeneous solutions of
//! `kappa^2 u - a u'' = 0` are spanned by `exp(-k x)` and `exp(-k (l - x))`.
//! Everything here is written in that decaying basis so nothing overflows
//! when `k l` is large.

use crate::error::{Error, Result};
use crate::model::EdgeParams;

/// `1 - exp(-x)` without cancellation for small `x`.
fn one_minus_exp_neg(x: f64) -> f64 {
    -(-x).exp_m1()
}

/// Per-edge constants of the alpha = 1 field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeField {
    /// `kappa / sqrt(a)`.
    pub rate: f64,
    /// `1 / (tau^2 sqrt(a) kappa)`, the Green's function prefactor.
    pub scale: f64,
    pub a: f64,
    pub length: f64,
}

impl EdgeField {
    pub fn new(params: EdgeParams, tau: f64, length: f64) -> Result<Self> {
        for (name, v) in [("kappa", params.kappa), ("a", params.a), ("tau", tau), ("length", length)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            rate: params.kappa / params.a.sqrt(),
            scale: 1.0 / (tau * tau * params.a.sqrt() * params.kappa),
            a: params.a,
            length,
        })
    }

    fn check(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.length;
        if t.is_finite() && t >= -slack && t <= self.length + slack {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "arclength {t} outside [0, {}]",
                self.length
            )))
        }
    }

    /// Covariance of the independent Neumann field on this edge:
    /// `scale * cosh(k min) cosh(k (l - max)) / sinh(k l)`.
    pub fn neumann_cov(&self, s: f64, t: f64) -> Result<f64> {
        self.check(s)?;
        self.check(t)?;
        Ok(self.neumann_unchecked(s, t))
    }

    pub(crate) fn neumann_unchecked(&self, s: f64, t: f64) -> f64 {
        let (k, l) = (self.rate, self.length);
        let lo = s.min(t).clamp(0.0, l);
        let hi = s.max(t).clamp(0.0, l);
        let near = (-k * (hi - lo)).exp();
        let left = 1.0 + (-2.0 * k * lo).exp();
        let right = 1.0 + (-2.0 * k * (l - hi)).exp();
        self.scale * near * left * right / (2.0 * one_minus_exp_neg(2.0 * k * l))
    }

    /// 2x2 Neumann covariance of the endpoint values `(u(0), u(l))`.
    pub fn endpoint_cov(&self) -> [[f64; 2]; 2] {
        let l = self.length;
        let c00 = self.neumann_unchecked(0.0, 0.0);
        let c01 = self.neumann_unchecked(0.0, l);
        let c11 = self.neumann_unchecked(l, l);
        [[c00, c01], [c01, c11]]
    }

    pub fn basis(&self) -> EdgeBasis {
        EdgeBasis::new(self.rate, self.length)
    }

    /// Neumann covariance conditioned on zero values at both endpoints.
    pub fn bridge_cov(&self, s: f64, t: f64) -> Result<f64> {
        self.check(s)?;
        self.check(t)?;
        Ok(self.bridge_unchecked(s, t))
    }

    pub(crate) fn bridge_unchecked(&self, s: f64, t: f64) -> f64 {
        let l = self.length;
        let [[c00, c01], [_, c11]] = self.endpoint_cov();
        let det = c00 * c11 - c01 * c01;
        let ns = [self.neumann_unchecked(s, 0.0), self.neumann_unchecked(s, l)];
        let nt = [self.neumann_unchecked(t, 0.0), self.neumann_unchecked(t, l)];
        // n_s^T [[c00, c01], [c01, c11]]^{-1} n_t
        let correction =
            (ns[0] * (c11 * nt[0] - c01 * nt[1]) + ns[1] * (-c01 * nt[0] + c00 * nt[1])) / det;
        let value = self.neumann_unchecked(s, t) - correction;
        // Exact zeros at the boundary.
        if s <= 0.0 || t <= 0.0 || s >= l || t >= l {
            0.0
        } else {
            value
        }
    }
}

/// Standalone Neumann edge covariance (alpha = 1).
pub fn neumann_edge_cov(kappa: f64, a: f64, tau: f64, length: f64, s: f64, t: f64) -> Result<f64> {
    EdgeField::new(EdgeParams { kappa, a }, tau, length)?.neumann_cov(s, t)
}

/// Homogeneous solutions `G1`, `G2` with `G1(0) = 1, G1(l) = 0, G2(0) = 0, G2(l) = 1`,
/// stored as coefficients on `exp(-k x)` and `exp(-k (l - x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeBasis {
    pub rate: f64,
    pub length: f64,
    /// `coeffs[j] = [c_j1, c_j2]` with `G_j(x) = c_j1 exp(-k x) + c_j2 exp(-k (l - x))`.
    pub coeffs: [[f64; 2]; 2],
}

impl EdgeBasis {
    pub fn new(rate: f64, length: f64) -> Self {
        // Boundary system [[1, q], [q, 1]] c = e_j with q = exp(-k l).
        let q = (-rate * length).exp();
        let det = one_minus_exp_neg(2.0 * rate * length);
        Self {
            rate,
            length,
            coeffs: [[1.0 / det, -q / det], [-q / det, 1.0 / det]],
        }
    }

    /// `[G1(x), G2(x)]`.
    pub fn eval(&self, x: f64) -> [f64; 2] {
        let x = x.clamp(0.0, self.length);
        if x == 0.0 {
            return [1.0, 0.0];
        }
        if x == self.length {
            return [0.0, 1.0];
        }
        let f1 = (-self.rate * x).exp();
        let f2 = (-self.rate * (self.length - x)).exp();
        [
            self.coeffs[0][0] * f1 + self.coeffs[0][1] * f2,
            self.coeffs[1][0] * f1 + self.coeffs[1][1] * f2,
        ]
    }
}

/// Basis functions for edge `params` of length `length`.
pub fn edge_basis(params: EdgeParams, length: f64) -> Result<EdgeBasis> {
    Ok(EdgeField::new(params, 1.0, length)?.basis())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};

    fn unit_edge(length: f64) -> EdgeField {
        EdgeField::new(EdgeParams { kappa: 1.0, a: 1.0 }, 1.0, length).unwrap()
    }

    /// Finite-difference Green's function of `kappa^2 - a d^2/dx^2` with Neumann
    /// ends (ghost-point reflection, second order): column `j`, scaled by `1/(tau^2 h)`.
    fn fd_neumann_column(kappa: f64, a: f64, tau: f64, l: f64, n: usize, j: usize) -> DVector<f64> {
        let h = l / n as f64;
        let m = n + 1;
        let off = -a / (h * h);
        let diag = vec![kappa * kappa + 2.0 * a / (h * h); m];
        let mut lower = vec![off; m];
        let mut upper = vec![off; m];
        // The reflected ghost value doubles the inward coupling at both ends.
        upper[0] = 2.0 * off;
        lower[n] = 2.0 * off;
        let mut rhs = vec![0.0; m];
        // Boundary control volumes are half as wide.
        let weight = if j == 0 || j == n { 0.5 } else { 1.0 };
        rhs[j] = 1.0 / (h * weight) / (tau * tau);
        // Thomas algorithm.
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        c[0] = upper[0] / diag[0];
        d[0] = rhs[0] / diag[0];
        for i in 1..m {
            let denom = diag[i] - lower[i] * c[i - 1];
            c[i] = upper[i] / denom;
            d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
        }
        let mut x = DVector::zeros(m);
        x[m - 1] = d[m - 1];
        for i in (0..m - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        x
    }

    #[test]
    fn neumann_corner_value_matches_fd_oracle() {
        // Richardson extrapolation of the O(h^2) finite-difference value.
        let coarse = fd_neumann_column(1.0, 1.0, 1.0, 1.0, 5_000, 0)[0];
        let fine = fd_neumann_column(1.0, 1.0, 1.0, 1.0, 10_000, 0)[0];
        let extrapolated = (4.0 * fine - coarse) / 3.0;
        let closed = neumann_edge_cov(1.0, 1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(extrapolated, closed, epsilon = 1e-8);
        assert_abs_diff_eq!(closed, 1.0_f64.cosh() / 1.0_f64.sinh(), epsilon = 1e-14);
        assert_abs_diff_eq!(closed, 1.313035, epsilon = 1e-6);
    }

    #[test]
    fn neumann_interior_column_matches_fd_oracle() {
        let (kappa, a, tau, l) = (1.7, 0.6, 1.3, 2.0);
        let n = 800;
        let j = 300;
        let col_c = fd_neumann_column(kappa, a, tau, l, n, j);
        let col_f = fd_neumann_column(kappa, a, tau, l, 2 * n, 2 * j);
        let s = l * j as f64 / n as f64;
        for i in (0..=n).step_by(40) {
            let x = l * i as f64 / n as f64;
            let extrapolated = (4.0 * col_f[2 * i] - col_c[i]) / 3.0;
            let closed = neumann_edge_cov(kappa, a, tau, l, x, s).unwrap();
            assert_abs_diff_eq!(extrapolated, closed, epsilon = 1e-7);
        }
    }

    #[test]
    fn neumann_stationary_limit() {
        let (kappa, tau) = (1.0, 1.0);
        let edge = EdgeField::new(EdgeParams { kappa, a: 1.0 }, tau, 50.0).unwrap();
        for i in 0..=30 {
            let h = 0.1 * i as f64;
            let expected = (-kappa * h).exp() / (2.0 * kappa * tau * tau);
            assert_abs_diff_eq!(edge.neumann_cov(25.0, 25.0 + h).unwrap(), expected, epsilon = 1e-8);
        }
    }

    #[test]
    fn neumann_symmetry_and_domain() {
        let edge = EdgeField::new(EdgeParams { kappa: 2.0, a: 0.5 }, 0.8, 1.5).unwrap();
        for (s, t) in [(0.1, 1.2), (0.7, 0.3), (1.5, 0.0)] {
            assert_eq!(edge.neumann_cov(s, t).unwrap(), edge.neumann_cov(t, s).unwrap());
        }
        assert!(edge.neumann_cov(-0.1, 0.5).is_err());
        assert!(edge.neumann_cov(0.5, 1.6).is_err());
    }

    #[test]
    fn basis_normalization() {
        let b = unit_edge(1.0).basis();
        assert_eq!(b.eval(0.0), [1.0, 0.0]);
        assert_eq!(b.eval(1.0), [0.0, 1.0]);
        // Boundary values through the general formula, not the shortcut.
        let g0 = [
            b.coeffs[0][0] + b.coeffs[0][1] * (-1.0_f64).exp(),
            b.coeffs[1][0] + b.coeffs[1][1] * (-1.0_f64).exp(),
        ];
        assert_abs_diff_eq!(g0[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g0[1], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn basis_closed_form_unit_edge() {
        let b = unit_edge(1.0).basis();
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            assert_abs_diff_eq!(b.eval(x)[0], (1.0 - x).sinh() / 1.0_f64.sinh(), epsilon = 1e-14);
            assert_abs_diff_eq!(b.eval(x)[1], x.sinh() / 1.0_f64.sinh(), epsilon = 1e-14);
        }
    }

    #[test]
    fn basis_solves_homogeneous_equation() {
        let params = EdgeParams { kappa: 2.3, a: 0.4 };
        let b = edge_basis(params, 1.7).unwrap();
        let h = 1e-4;
        for i in 1..20 {
            let x = 1.7 * i as f64 / 20.0;
            for j in 0..2 {
                let f = |y: f64| b.eval(y)[j];
                let second = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
                let residual = params.kappa.powi(2) * f(x) - params.a * second;
                assert!(residual.abs() <= 1e-5, "residual {residual} at x={x}, j={j}");
            }
        }
    }

    #[test]
    fn basis_large_rate_does_not_overflow() {
        let b = edge_basis(EdgeParams { kappa: 1000.0, a: 1.0 }, 10.0).unwrap();
        for i in 0..=100 {
            let [g1, g2] = b.eval(0.1 * i as f64);
            assert!(g1.is_finite() && g2.is_finite());
            assert!((0.0..=1.0).contains(&g1) && (0.0..=1.0).contains(&g2));
        }
        let edge = EdgeField::new(EdgeParams { kappa: 1000.0, a: 1.0 }, 1.0, 10.0).unwrap();
        assert!(edge.neumann_cov(5.0, 5.0).unwrap().is_finite());
        assert!(edge.bridge_cov(5.0, 5.0).unwrap().is_finite());
    }

    #[test]
    fn example_span_matches_normalized_basis() {
        // The stationary exponential kernel r(x), r(x - l) lies in span{G1, G2}:
        // expressing r through its boundary values reproduces it everywhere.
        let (kappa, l) = (1.2, 1.5);
        let b = edge_basis(EdgeParams { kappa, a: 1.0 }, l).unwrap();
        let r = |h: f64| (-kappa * h.abs()).exp() / (2.0 * kappa);
        for f in [&(|x: f64| r(x)) as &dyn Fn(f64) -> f64, &|x: f64| r(x - l)] {
            for i in 0..=10 {
                let x = l * i as f64 / 10.0;
                let [g1, g2] = b.eval(x);
                assert_abs_diff_eq!(f(0.0) * g1 + f(l) * g2, f(x), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn bridge_vanishes_on_boundary() {
        let edge = EdgeField::new(EdgeParams { kappa: 1.4, a: 2.0 }, 1.1, 2.0).unwrap();
        for t in [0.0, 0.3, 1.0, 2.0] {
            assert_eq!(edge.bridge_cov(0.0, t).unwrap(), 0.0);
            assert_eq!(edge.bridge_cov(t, 2.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn bridge_matches_dirichlet_green_function() {
        let (kappa, a, tau, l) = (1.4, 2.0, 1.1, 2.0);
        let edge = EdgeField::new(EdgeParams { kappa, a }, tau, l).unwrap();
        let k = kappa / a.sqrt();
        let dirichlet = |s: f64, t: f64| {
            let (lo, hi) = (s.min(t), s.max(t));
            (k * lo).sinh() * (k * (l - hi)).sinh() / (tau * tau * a * k * (k * l).sinh())
        };
        for (s, t) in [(0.2, 0.2), (0.3, 1.7), (1.0, 1.9), (1.2, 0.4)] {
            assert_abs_diff_eq!(edge.bridge_cov(s, t).unwrap(), dirichlet(s, t), epsilon = 1e-13);
        }
    }

    #[test]
    fn bridge_matrix_is_psd() {
        let edge = EdgeField::new(EdgeParams { kappa: 0.9, a: 1.0 }, 1.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let m = DMatrix::from_fn(20, 20, |i, j| edge.bridge_cov(xs[i], xs[j]).unwrap());
        let eig = nalgebra::SymmetricEigen::new(m.clone()).eigenvalues;
        assert!(eig.min() >= -1e-10 * m.trace());
    }

    #[test]
    fn neumann_conditional_mean_is_basis_combination() {
        // E[u(s) | u(0), u(l)] = G(s)^T B u for the Neumann field itself.
        let edge = EdgeField::new(EdgeParams { kappa: 0.8, a: 1.5 }, 1.0, 1.3).unwrap();
        let b = edge.basis();
        let [[c00, c01], [_, c11]] = edge.endpoint_cov();
        let det = c00 * c11 - c01 * c01;
        for s in [0.1, 0.6, 1.2] {
            let n0 = edge.neumann_cov(s, 0.0).unwrap();
            let nl = edge.neumann_cov(s, 1.3).unwrap();
            let w = [(c11 * n0 - c01 * nl) / det, (-c01 * n0 + c00 * nl) / det];
            let g = b.eval(s);
            assert_abs_diff_eq!(w[0], g[0], epsilon = 1e-12);
            assert_abs_diff_eq!(w[1], g[1], epsilon = 1e-12);
        }
    }
}
