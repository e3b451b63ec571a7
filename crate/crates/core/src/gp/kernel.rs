use std::sync::Arc;

use nalgebra::{DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::grid::Grid1D;
use super::jacobi;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Spectral decay law for the weighted-Jacobi kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayLaw {
    /// `lambda_j = (j + 1)^{-nu}`
    Algebraic,
    /// `lambda_j = exp(-nu j)`
    Exponential,
}

/// How eigenfunctions are evaluated away from grid nodes.
#[derive(Clone, Debug)]
enum Basis {
    /// Piecewise-linear interpolation of nodal values.
    Sampled,
    /// Closed-form weighted Jacobi functions followed by the
    /// quadrature orthonormalization `transform` (upper triangular).
    Jacobi {
        alpha: f64,
        beta: f64,
        transform: Matrix,
    },
}

/// Truncated Mercer expansion `K(x, y) = sum_j lambda_j psi_j(x) psi_j(y)`.
#[derive(Clone, Debug)]
pub struct SpectralKernel {
    grid: Arc<Grid1D>,
    eigenvalues: Vec<f64>,
    /// Grid values of the eigenfunctions, one column per eigenpair.
    eigenfunctions: Matrix,
    basis: Basis,
    /// `lambda_{M+1} / lambda_1` when the next eigenvalue is known.
    truncation_ratio: Option<f64>,
}

impl SpectralKernel {
    /// Builds a kernel from explicit eigenpairs sampled on `grid`.
    ///
    /// Eigenvalues must be positive and non-increasing, and the columns of
    /// `eigenfunctions` quadrature-orthonormal within 1e-8.
    pub fn from_eigenpairs(grid: Arc<Grid1D>, eigenvalues: Vec<f64>, eigenfunctions: Matrix) -> Result<Self> {
        let kernel = SpectralKernel {
            grid,
            eigenvalues,
            eigenfunctions,
            basis: Basis::Sampled,
            truncation_ratio: None,
        };
        kernel.validate()?;
        Ok(kernel)
    }

    fn validate(&self) -> Result<()> {
        let m = self.eigenvalues.len();
        if m == 0 {
            return Err(Error::InvalidArgument("kernel needs at least one eigenpair".into()));
        }
        if self.eigenfunctions.shape() != (self.grid.len(), m) {
            return Err(Error::Dimension(format!(
                "eigenfunctions are {:?}, expected {}x{m}",
                self.eigenfunctions.shape(),
                self.grid.len()
            )));
        }
        if self.eigenvalues.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidArgument("eigenvalues must be positive and finite".into()));
        }
        if self.eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument("eigenvalues must be non-increasing".into()));
        }
        let gram = self.gram();
        let dev = (gram - Matrix::identity(m, m)).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if dev > 1e-8 {
            return Err(Error::InvalidArgument(format!(
                "eigenfunctions are not quadrature-orthonormal (deviation {dev:e})"
            )));
        }
        Ok(())
    }

    /// Quadrature Gram matrix `<psi_i, psi_j>`.
    pub fn gram(&self) -> Matrix {
        let w = DVector::from_column_slice(self.grid.weights());
        let weighted = Matrix::from_fn(self.grid.len(), self.rank(), |i, j| w[i] * self.eigenfunctions[(i, j)]);
        self.eigenfunctions.transpose() * weighted
    }

    pub fn grid(&self) -> &Arc<Grid1D> {
        &self.grid
    }

    pub fn domain(&self) -> (f64, f64) {
        self.grid.domain()
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &Matrix {
        &self.eigenfunctions
    }

    pub fn truncation_ratio(&self) -> Option<f64> {
        self.truncation_ratio
    }

    /// The kernel `alpha K`: eigenvalues scaled, eigenfunctions unchanged.
    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::InvalidArgument(format!("scale {alpha} must be positive")));
        }
        let mut out = self.clone();
        for l in &mut out.eigenvalues {
            *l *= alpha;
        }
        Ok(out)
    }

    /// Eigenfunction values `psi_1(x) .. psi_M(x)`.
    pub fn eigenfunctions_at(&self, x: f64) -> Result<Vec<f64>> {
        self.grid.check_contains(x)?;
        Ok(match &self.basis {
            Basis::Sampled => (0..self.rank())
                .map(|j| {
                    let col = self.eigenfunctions.column(j);
                    self.grid.interpolate(col.as_slice(), x)
                })
                .collect(),
            Basis::Jacobi { alpha, beta, transform } => {
                let raw = raw_jacobi_functions(self.rank(), *alpha, *beta, self.domain(), x);
                let raw = DVector::from_vec(raw);
                (transform.transpose() * raw).iter().copied().collect()
            }
        })
    }

    /// `sum_j lambda_j psi_j(x) psi_j(y)`.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let px = self.eigenfunctions_at(x)?;
        let py = self.eigenfunctions_at(y)?;
        Ok(self
            .eigenvalues
            .iter()
            .zip(px.iter().zip(&py))
            .map(|(l, (a, b))| l * (a * b))
            .sum())
    }

    /// `K(x_i, x_i)` at each grid node.
    pub fn diagonal_on_grid(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| {
                self.eigenvalues
                    .iter()
                    .enumerate()
                    .map(|(j, l)| l * self.eigenfunctions[(i, j)] * self.eigenfunctions[(i, j)])
                    .sum()
            })
            .collect()
    }

    /// Dense `K(x_i, x_j)` on the kernel's grid.
    pub fn matrix_on_grid(&self) -> Matrix {
        let mut scaled = self.eigenfunctions.clone();
        for (j, l) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*l);
        }
        scaled * self.eigenfunctions.transpose()
    }

    /// Trace `sum_j lambda_j`.
    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

/// Quadrature Nyström eigendecomposition of a pointwise kernel.
///
/// Diagonalizes `W^{1/2} K W^{1/2}` and keeps at most `m` eigenpairs with
/// `lambda > 1e-14 lambda_1`. Fails if an eigenvalue is below
/// `-1e-10 lambda_1`.
pub fn nystrom_eig(kernel: impl Fn(f64, f64) -> f64, grid: Arc<Grid1D>, m: usize) -> Result<SpectralKernel> {
    let n = grid.len();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "number of eigenpairs {m} must lie in 1..={n}"
        )));
    }
    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let x = grid.nodes();
    let mut s = Matrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = sw[i] * kernel(x[i], x[j]) * sw[j];
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("kernel matrix".into()));
    }
    let eig = SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]];
    if !(top > 0.0) {
        return Err(Error::NotPsd { eigenvalue: top });
    }
    let bottom = eig.eigenvalues[order[n - 1]];
    if bottom < -1e-10 * top {
        return Err(Error::NotPsd { eigenvalue: bottom });
    }
    let keep: Vec<usize> = order
        .iter()
        .copied()
        .take(m)
        .take_while(|&i| eig.eigenvalues[i] > 1e-14 * top)
        .collect();
    let mut psi = Matrix::zeros(n, keep.len());
    let mut lambdas = Vec::with_capacity(keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        let v = eig.eigenvectors.column(src);
        // first non-negligible entry positive; largest-magnitude ties flip under perturbation
        let vmax = v.amax();
        let lead = v.iter().copied().find(|x| x.abs() > 1e-3 * vmax).unwrap_or(0.0);
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            psi[(i, dst)] = sign * v[i] / sw[i];
        }
        lambdas.push(eig.eigenvalues[src]);
    }
    let truncation_ratio = order.get(keep.len()).map(|&i| eig.eigenvalues[i].max(0.0) / top);
    let mut k = SpectralKernel::from_eigenpairs(grid, lambdas, psi)?;
    k.truncation_ratio = truncation_ratio;
    Ok(k)
}

fn affine_to_reference((a, b): (f64, f64), x: f64) -> f64 {
    if x == a {
        -1.0
    } else if x == b {
        1.0
    } else {
        -1.0 + 2.0 * (x - a) / (b - a)
    }
}

fn raw_jacobi_functions(m: usize, alpha: f64, beta: f64, domain: (f64, f64), x: f64) -> Vec<f64> {
    let s = affine_to_reference(domain, x);
    let w = jacobi::boundary_weight(alpha, beta, s);
    jacobi::jacobi_polynomials(m, alpha, beta, s)
        .into_iter()
        .map(|p| w * p)
        .collect()
}

/// Weighted-Jacobi kernel enforcing zero boundary values.
///
/// Eigenfunctions are `(1-s)^{alpha/2} (1+s)^{beta/2} P_j^{(alpha,beta)}(s)`
/// orthonormalized in the grid's quadrature inner product; eigenvalues follow
/// `decay` with rate `nu` and are normalized to unit trace.
pub fn jacobi_kernel(
    grid: Arc<Grid1D>,
    m: usize,
    alpha: f64,
    beta: f64,
    decay: DecayLaw,
    nu: f64,
) -> Result<SpectralKernel> {
    if !(alpha > 0.0) || !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Jacobi exponents must be positive (alpha = {alpha}, beta = {beta})"
        )));
    }
    if m == 0 || m > grid.len() {
        return Err(Error::InvalidArgument(format!(
            "number of eigenpairs {m} must lie in 1..={}",
            grid.len()
        )));
    }
    if !(nu > 0.0) {
        return Err(Error::InvalidArgument(format!("decay rate {nu} must be positive")));
    }
    let n = grid.len();
    let domain = grid.domain();
    let mut raw = Matrix::zeros(n, m);
    for (i, &x) in grid.nodes().iter().enumerate() {
        for (j, v) in raw_jacobi_functions(m, alpha, beta, domain, x).into_iter().enumerate() {
            raw[(i, j)] = v;
        }
    }
    // Gram-Schmidt in the weighted inner product: W^{1/2} raw = Q R
    let sw: Vec<f64> = grid.weights().iter().map(|w| w.sqrt()).collect();
    let scaled = Matrix::from_fn(n, m, |i, j| sw[i] * raw[(i, j)]);
    let (_, mut r) = crate::linalg::householder_qr(scaled, None);
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            for c in j..m {
                r[(j, c)] = -r[(j, c)];
            }
        }
        if r[(j, j)].abs() <= 1e-13 * r[(0, 0)].abs() {
            return Err(Error::Numerical(format!(
                "grid too coarse to resolve {m} Jacobi modes"
            )));
        }
    }
    let transform = r
        .try_inverse()
        .ok_or_else(|| Error::Numerical("Jacobi orthonormalization failed".into()))?;
    let psi = &raw * &transform;

    let mut lambdas: Vec<f64> = (0..m)
        .map(|j| match decay {
            DecayLaw::Algebraic => (j as f64 + 1.0).powf(-nu),
            DecayLaw::Exponential => (-nu * j as f64).exp(),
        })
        .collect();
    let total: f64 = lambdas.iter().sum();
    for l in &mut lambdas {
        *l /= total;
    }
    let next = match decay {
        DecayLaw::Algebraic => (m as f64 + 1.0).powf(-nu),
        DecayLaw::Exponential => (-nu * m as f64).exp(),
    };

    let mut k = SpectralKernel::from_eigenpairs(grid, lambdas, psi)?;
    k.basis = Basis::Jacobi { alpha, beta, transform };
    k.truncation_ratio = Some(next);
    Ok(k)
}

/// `min(x, y) - x y` on `[0, 1]`.
pub fn brownian_bridge(x: f64, y: f64) -> f64 {
    x.min(y) - x * y
}

/// `exp(-(x - y)^2 / (2 ell^2))`.
pub fn squared_exponential(ell: f64) -> impl Fn(f64, f64) -> f64 {
    move |x, y| (-(x - y) * (x - y) / (2.0 * ell * ell)).exp()
}
