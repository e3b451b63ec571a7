use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gp::Grid1D;
use crate::linalg::{self, frobenius, Matrix, SvdFactorization};

use super::QuasiMatrix;

/// Black-box access to a linear solution operator `f -> u`.
pub trait ForwardOperator {
    fn source_grid(&self) -> &Arc<Grid1D>;
    fn target_grid(&self) -> &Arc<Grid1D>;
    /// Applies the operator to forcing values on the source grid.
    fn apply(&self, f: &[f64]) -> Result<Vec<f64>>;
}

/// Discretized integral operator `(F f)(x) = int G(x, y) f(y) dy`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegralOperator {
    source: Arc<Grid1D>,
    target: Arc<Grid1D>,
    /// `G(x_i, y_j)`, target rows by source columns.
    kernel: Matrix,
}

impl IntegralOperator {
    pub fn new(source: Arc<Grid1D>, target: Arc<Grid1D>, kernel: Matrix) -> Result<Self> {
        if kernel.shape() != (target.len(), source.len()) {
            return Err(Error::Dimension(format!(
                "kernel is {:?}, expected {}x{}",
                kernel.shape(),
                target.len(),
                source.len()
            )));
        }
        if kernel.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("kernel samples".into()));
        }
        Ok(IntegralOperator { source, target, kernel })
    }

    pub fn from_fn(source: Arc<Grid1D>, target: Arc<Grid1D>, g: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let kernel = Matrix::from_fn(target.len(), source.len(), |i, j| g(target.nodes()[i], source.nodes()[j]));
        Self::new(source, target, kernel)
    }

    pub fn zero(source: Arc<Grid1D>, target: Arc<Grid1D>) -> Self {
        let kernel = Matrix::zeros(target.len(), source.len());
        IntegralOperator { source, target, kernel }
    }

    pub fn source(&self) -> &Arc<Grid1D> {
        &self.source
    }

    pub fn target(&self) -> &Arc<Grid1D> {
        &self.target
    }

    pub fn kernel(&self) -> &Matrix {
        &self.kernel
    }

    /// `G W_y F` for a block of forcings sampled on the source grid.
    pub fn apply_block(&self, forcings: &Matrix) -> Matrix {
        let w = self.source.weights();
        let weighted = Matrix::from_fn(forcings.nrows(), forcings.ncols(), |i, j| w[i] * forcings[(i, j)]);
        &self.kernel * weighted
    }

    /// Adjoint `(F^* g)(y) = int G(x, y) g(x) dx`.
    pub fn apply_adjoint(&self, g: &[f64]) -> Vec<f64> {
        let w = self.target.weights();
        (0..self.source.len())
            .map(|j| (0..self.target.len()).map(|i| w[i] * g[i] * self.kernel[(i, j)]).sum())
            .collect()
    }

    /// `W_x^{1/2} G W_y^{1/2}`, whose Euclidean SVD is the operator SVD.
    pub fn weighted_matrix(&self) -> Matrix {
        let sx: Vec<f64> = self.target.weights().iter().map(|w| w.sqrt()).collect();
        let sy: Vec<f64> = self.source.weights().iter().map(|w| w.sqrt()).collect();
        Matrix::from_fn(self.kernel.nrows(), self.kernel.ncols(), |i, j| sx[i] * self.kernel[(i, j)] * sy[j])
    }

    /// Hilbert–Schmidt norm, the quadrature `L^2` norm of the kernel.
    pub fn hs_norm(&self) -> f64 {
        frobenius(&self.weighted_matrix())
    }

    /// Operator singular values, non-increasing.
    pub fn singular_values(&self) -> Vec<f64> {
        linalg::singular_values(&self.weighted_matrix())
    }

    /// Singular triplets with left/right singular functions expressed as
    /// grid values (quadrature-orthonormal columns).
    pub fn singular_functions(&self) -> SvdFactorization {
        let mut f = linalg::svd_matrix(&self.weighted_matrix());
        let tx = self.target.weights();
        let sy = self.source.weights();
        for i in 0..f.u.nrows() {
            let s = 1.0 / tx[i].sqrt();
            f.u.row_mut(i).scale_mut(s);
        }
        for i in 0..f.v.nrows() {
            let s = 1.0 / sy[i].sqrt();
            f.v.row_mut(i).scale_mut(s);
        }
        f
    }

    /// Best rank-`k` operator (Eckart–Young–Mirsky truncation).
    pub fn truncated(&self, k: usize) -> IntegralOperator {
        let f = self.singular_functions();
        IntegralOperator {
            source: self.source.clone(),
            target: self.target.clone(),
            kernel: f.reconstruct(k),
        }
    }

    fn check_same_grids(&self, other: &IntegralOperator) -> Result<()> {
        if self.source != other.source || self.target != other.target {
            return Err(Error::Dimension("operators live on different grids".into()));
        }
        Ok(())
    }

    pub fn difference(&self, other: &IntegralOperator) -> Result<IntegralOperator> {
        self.check_same_grids(other)?;
        Ok(IntegralOperator {
            source: self.source.clone(),
            target: self.target.clone(),
            kernel: &self.kernel - &other.kernel,
        })
    }

    /// `||self - reference||_HS / ||reference||_HS`.
    pub fn relative_error(&self, reference: &IntegralOperator) -> Result<f64> {
        let diff = self.difference(reference)?.hs_norm();
        let nrm = reference.hs_norm();
        Ok(if nrm == 0.0 { diff } else { diff / nrm })
    }

    pub fn scaled(&self, alpha: f64) -> IntegralOperator {
        IntegralOperator {
            source: self.source.clone(),
            target: self.target.clone(),
            kernel: &self.kernel * alpha,
        }
    }

    /// Kernel sub-block on the given target rows and source columns.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        Matrix::from_fn(rows.len(), cols.len(), |i, j| self.kernel[(rows[i], cols[j])])
    }

    /// `||G - G^T||_F / (sqrt(2) ||G||_F)` on the sampled kernel; lies in
    /// `[0, sqrt(2)]`, zero for symmetric and `sqrt(2)` for antisymmetric
    /// kernels.
    pub fn symmetry_score(&self) -> Result<f64> {
        if !self.kernel.is_square() {
            return Err(Error::Dimension("symmetry needs a square kernel".into()));
        }
        let nrm = frobenius(&self.kernel);
        if nrm == 0.0 {
            return Ok(0.0);
        }
        let asym = frobenius(&(&self.kernel - self.kernel.transpose()));
        Ok(asym / (std::f64::consts::SQRT_2 * nrm))
    }
}

impl ForwardOperator for IntegralOperator {
    fn source_grid(&self) -> &Arc<Grid1D> {
        &self.source
    }
    fn target_grid(&self) -> &Arc<Grid1D> {
        &self.target
    }
    fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.source.len() {
            return Err(Error::Dimension(format!(
                "forcing has {} values, source grid has {}",
                f.len(),
                self.source.len()
            )));
        }
        let w = self.source.weights();
        Ok((0..self.target.len())
            .map(|i| {
                let mut s = 0.0;
                for j in 0..f.len() {
                    s += self.kernel[(i, j)] * (w[j] * f[j]);
                }
                s
            })
            .collect())
    }
}

/// Smallest `k` whose best rank-`k` error is at most `eps` times the norm.
pub fn numerical_rank(singular_values: &[f64], eps: f64) -> usize {
    let total = linalg::tail_of(singular_values, 0);
    if total == 0.0 {
        return 0;
    }
    (0..=singular_values.len())
        .find(|&k| linalg::tail_of(singular_values, k) <= eps * total)
        .unwrap_or(singular_values.len())
}

/// `L^2`-orthogonal projection of the range of `F` onto `span(Omega)`:
/// `Omega (Omega^* Omega)^+ Omega^* F`.
pub fn qm_project(omega: &QuasiMatrix, f: &IntegralOperator) -> Result<IntegralOperator> {
    if omega.grid() != f.target() {
        return Err(Error::Dimension("quasimatrix and operator range use different grids".into()));
    }
    let basis = crate::rsvd::orthonormal_range(&omega.half_weighted());
    if basis.rank() == 0 {
        return Ok(IntegralOperator::zero(f.source().clone(), f.target().clone()));
    }
    let sx: Vec<f64> = f.target().weights().iter().map(|w| w.sqrt()).collect();
    // P = W^{-1/2} Q Q^T W^{1/2}
    let half = Matrix::from_fn(f.kernel.nrows(), f.kernel.ncols(), |i, j| sx[i] * f.kernel[(i, j)]);
    let mut projected = &basis.q * (basis.q.transpose() * half);
    for i in 0..projected.nrows() {
        projected.row_mut(i).scale_mut(1.0 / sx[i]);
    }
    IntegralOperator::new(f.source().clone(), f.target().clone(), projected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    fn grid(n: usize) -> Arc<Grid1D> {
        Arc::new(Grid1D::gauss_legendre(n, 0.0, 1.0).unwrap())
    }

    fn poisson_eigen_kernel(terms: usize) -> impl Fn(f64, f64) -> f64 {
        move |x, y| {
            (1..=terms)
                .map(|j| {
                    let jp = j as f64 * PI;
                    2.0 * (jp * x).sin() * (jp * y).sin() / (jp * jp)
                })
                .sum()
        }
    }

    #[test]
    fn hs_norm_simple_kernels() {
        let g = grid(32);
        let one = IntegralOperator::from_fn(g.clone(), g.clone(), |_, _| 1.0).unwrap();
        assert!((one.hs_norm() - 1.0).abs() < 1e-12);
        let sep = IntegralOperator::from_fn(g.clone(), g.clone(), |x, y| SQRT_2 * (PI * x).sin() * SQRT_2 * (2.0 * PI * y).sin()).unwrap();
        assert!((sep.hs_norm() - 1.0).abs() < 1e-10);
        let s = sep.singular_values();
        assert!(s[1] < 1e-12 * s[0]);
    }

    #[test]
    fn hs_norm_equals_singular_value_energy() {
        let g = grid(40);
        let r = crate::linalg::sample_gaussian_matrix(40, 40, None, 4).unwrap();
        let op = IntegralOperator::new(g.clone(), g, r.into_matrix()).unwrap();
        let energy: f64 = op.singular_values().iter().map(|s| s * s).sum();
        assert!((op.hs_norm() - energy.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn poisson_kernel_singular_values() {
        let g = Arc::new(Grid1D::trapezoid(256, 0.0, 1.0).unwrap());
        let closed = |x: f64, y: f64| if x <= y { x * (1.0 - y) } else { y * (1.0 - x) };
        // the eigen-expansion oracle agrees with the closed form
        let series = poisson_eigen_kernel(400);
        for (x, y) in [(0.2, 0.7), (0.5, 0.5), (0.9, 0.1)] {
            assert!((series(x, y) - closed(x, y)).abs() < 1e-3);
        }
        let op = IntegralOperator::from_fn(g.clone(), g, closed).unwrap();
        let s = op.singular_values();
        for j in 0..5 {
            let exact = 1.0 / ((j as f64 + 1.0) * PI).powi(2);
            assert!((s[j] - exact).abs() < 0.02 * exact);
        }
    }

    #[test]
    fn eckart_young_mirsky_truncation() {
        let g = grid(48);
        let op = IntegralOperator::from_fn(g.clone(), g.clone(), |x, y| (-(x - y).powi(2) * 10.0).exp() + x * y * y).unwrap();
        let s = op.singular_values();
        let k = 4;
        let best = op.difference(&op.truncated(k)).unwrap().hs_norm();
        assert!((best - crate::linalg::tail_of(&s, k)).abs() < 1e-8);
        for seed in 0..100 {
            // rank-k candidates near the optimum
            let noise = crate::linalg::sample_gaussian_matrix(48, 48, None, seed).unwrap();
            let perturbed = IntegralOperator::new(g.clone(), g.clone(), op.kernel() + noise.as_matrix() * 1e-2).unwrap();
            let cand = perturbed.truncated(k);
            assert!(op.difference(&cand).unwrap().hs_norm() >= best - 1e-12);
        }
    }

    #[test]
    fn projection_cases() {
        let g = grid(64);
        let u1: Vec<f64> = g.nodes().iter().map(|x| (PI * x).sin()).collect();
        let u2: Vec<f64> = g.nodes().iter().map(|x| x * x).collect();
        let op = IntegralOperator::from_fn(g.clone(), g.clone(), |x, y| (PI * x).sin() * y + 3.0 * x * x * (y * 2.0).cos()).unwrap();

        let mut cols = Matrix::zeros(64, 2);
        cols.column_mut(0).copy_from_slice(&u1);
        cols.column_mut(1).copy_from_slice(&u2);
        let span = QuasiMatrix::from_columns(g.clone(), cols).unwrap();
        let p = qm_project(&span, &op).unwrap();
        assert!(p.relative_error(&op).unwrap() < 1e-10);

        // functions orthogonal to the range
        let perp: Vec<f64> = {
            let q = QuasiMatrix::from_columns(g.clone(), span.columns().clone()).unwrap().orthonormalize().0;
            let mut v: Vec<f64> = g.nodes().iter().map(|x| (7.0 * x).cos()).collect();
            for j in 0..q.ncols() {
                let c = q.column(j);
                let d = g.inner(&c, &v);
                for i in 0..v.len() {
                    v[i] -= d * c[i];
                }
            }
            v
        };
        let orth = QuasiMatrix::from_columns(g.clone(), Matrix::from_column_slice(64, 1, &perp)).unwrap();
        assert!(qm_project(&orth, &op).unwrap().hs_norm() < 1e-10 * op.hs_norm());

        let zero = QuasiMatrix::from_columns(g.clone(), Matrix::zeros(64, 3)).unwrap();
        assert_eq!(qm_project(&zero, &op).unwrap().hs_norm(), 0.0);
    }

    #[test]
    fn projection_is_idempotent_and_contracting() {
        let g = grid(50);
        for seed in 0..10 {
            let om = crate::linalg::sample_gaussian_matrix(50, 6, None, seed).unwrap();
            let k = crate::linalg::sample_gaussian_matrix(50, 50, None, seed + 77).unwrap();
            let op = IntegralOperator::new(g.clone(), g.clone(), k.into_matrix()).unwrap();
            let omega = QuasiMatrix::from_columns(g.clone(), om.into_matrix()).unwrap();
            let once = qm_project(&omega, &op).unwrap();
            let twice = qm_project(&omega, &once).unwrap();
            assert!(once.difference(&twice).unwrap().hs_norm() <= 1e-10 * once.hs_norm());
            assert!(once.hs_norm() <= op.hs_norm() + 1e-10);
        }
    }

    #[test]
    fn numerical_rank_counts() {
        assert_eq!(numerical_rank(&[1.0, 0.0, 0.0], 1e-3), 1);
        assert_eq!(numerical_rank(&[0.0, 0.0], 1e-3), 0);
        assert_eq!(numerical_rank(&[1.0, 0.1, 0.01, 0.0001], 1e-3), 3);
    }

    #[test]
    fn symmetry_score_extremes() {
        let g = grid(10);
        let sym = IntegralOperator::from_fn(g.clone(), g.clone(), |x, y| x * y + 1.0).unwrap();
        assert_eq!(sym.symmetry_score().unwrap(), 0.0);
        let anti = IntegralOperator::from_fn(g.clone(), g, |x, y| x - y).unwrap();
        assert!((anti.symmetry_score().unwrap() - SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn apply_is_linear() {
        let g = grid(30);
        let op = IntegralOperator::from_fn(g.clone(), g.clone(), |x, y| (x - y).abs()).unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|x| x.sin()).collect();
        let h: Vec<f64> = g.nodes().iter().map(|x| x.exp()).collect();
        let comb: Vec<f64> = f.iter().zip(&h).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let lhs = op.apply(&comb).unwrap();
        let (af, ah) = (op.apply(&f).unwrap(), op.apply(&h).unwrap());
        for i in 0..30 {
            let rhs = 2.0 * af[i] - 0.5 * ah[i];
            assert!((lhs[i] - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
        }
    }
}
