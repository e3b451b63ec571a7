//! Gaussian-process forcing generation: quadrature grids, Mercer kernels
//! and Karhunen–Loève sampling.

mod grid;
mod jacobi;
mod kernel;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use grid::{gauss_legendre_reference, Grid1D, QuadratureRule};
pub use jacobi::{boundary_weight, jacobi_polynomials};
pub use kernel::{brownian_bridge, jacobi_kernel, nystrom_eig, squared_exponential, DecayLaw, SpectralKernel};

use crate::error::{Error, Result};
use crate::hs::QuasiMatrix;
use crate::linalg::Matrix;
use crate::rng::{self, derive_seed};

/// Function values at the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFunction {
    pub grid: Arc<Grid1D>,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(grid: Arc<Grid1D>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} values on a {}-node grid",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sampled function".into()));
        }
        Ok(SampledFunction { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid1D>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self::new(grid, values)
    }

    pub fn l2_norm(&self) -> f64 {
        self.grid.l2_norm(&self.values)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        self.grid.check_contains(x)?;
        Ok(self.grid.interpolate(&self.values, x))
    }
}

/// Karhunen–Loève coefficients `sqrt(lambda_j) c_j` for a seed.
fn kl_coefficients(kernel: &SpectralKernel, seed: u64) -> Vec<f64> {
    let mut g = rng::seeded(seed);
    kernel
        .eigenvalues()
        .iter()
        .map(|l| l.sqrt() * rng::standard_normal(&mut g))
        .collect()
}

fn kl_values(kernel: &SpectralKernel, seed: u64) -> Vec<f64> {
    let coef = kl_coefficients(kernel, seed);
    let psi = kernel.eigenfunctions();
    (0..psi.nrows())
        .map(|i| {
            let mut s = 0.0;
            for (j, c) in coef.iter().enumerate() {
                s += c * psi[(i, j)];
            }
            s
        })
        .collect()
}

/// One draw `omega = sum_j sqrt(lambda_j) c_j psi_j` with `c_j` i.i.d.
/// standard normal, sampled on the kernel's grid.
pub fn kl_sample(kernel: &SpectralKernel, seed: u64) -> SampledFunction {
    SampledFunction {
        grid: kernel.grid().clone(),
        values: kl_values(kernel, seed),
    }
}

/// `n` draws with seeds `seed ^ 1 .. seed ^ n`, as quasimatrix columns.
pub fn kl_sample_batch(kernel: &SpectralKernel, n: usize, seed: u64) -> QuasiMatrix {
    let grid = kernel.grid().clone();
    let mut cols = Matrix::zeros(grid.len(), n);
    for j in 0..n {
        let v = kl_values(kernel, derive_seed(seed, j as u64 + 1));
        cols.column_mut(j).copy_from_slice(&v);
    }
    QuasiMatrix::from_columns(grid, cols).expect("KL samples are finite")
}

/// Grid description used by kernel specs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rule: QuadratureRule,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            rule: QuadratureRule::ClenshawCurtis,
            n: 257,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelType {
    Jacobi,
    NystromSe,
    /// Nyström decomposition of a named pointwise kernel.
    Custom,
}

/// JSON description of a covariance kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    #[serde(rename = "type")]
    pub kind: KernelType,
    #[serde(default = "default_domain")]
    pub domain: [f64; 2],
    #[serde(rename = "M", default = "default_truncation")]
    pub m: usize,
    #[serde(default = "default_exponent")]
    pub alpha: f64,
    #[serde(default = "default_exponent")]
    pub beta: f64,
    #[serde(default = "default_decay")]
    pub decay_law: DecayLaw,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_ell")]
    pub ell: f64,
    /// Pointwise kernel for `custom`: `brownian-bridge` or `squared-exponential`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

fn default_domain() -> [f64; 2] {
    [0.0, 1.0]
}
fn default_truncation() -> usize {
    50
}
fn default_exponent() -> f64 {
    1.0
}
fn default_decay() -> DecayLaw {
    DecayLaw::Algebraic
}
fn default_nu() -> f64 {
    2.0
}
fn default_ell() -> f64 {
    0.2
}

impl KernelSpec {
    pub fn jacobi(m: usize, alpha: f64, beta: f64, decay_law: DecayLaw, nu: f64) -> Self {
        KernelSpec {
            kind: KernelType::Jacobi,
            domain: default_domain(),
            m,
            alpha,
            beta,
            decay_law,
            nu,
            ell: default_ell(),
            name: None,
            grid: None,
        }
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.grid.clone().unwrap_or_default()
    }

    /// Builds the kernel on the grid named by the spec.
    pub fn build(&self) -> Result<SpectralKernel> {
        let gs = self.grid_spec();
        let grid = Arc::new(Grid1D::with_rule(gs.rule, gs.n, self.domain[0], self.domain[1])?);
        self.build_on(grid)
    }

    /// Builds the kernel on an externally supplied grid (ignores `grid`).
    pub fn build_on(&self, grid: Arc<Grid1D>) -> Result<SpectralKernel> {
        let (a, b) = grid.domain();
        if (a, b) != (self.domain[0], self.domain[1]) {
            return Err(Error::InvalidArgument(format!(
                "kernel domain {:?} differs from grid domain [{a}, {b}]",
                self.domain
            )));
        }
        match self.kind {
            KernelType::Jacobi => jacobi_kernel(grid, self.m, self.alpha, self.beta, self.decay_law, self.nu),
            KernelType::NystromSe => {
                if !(self.ell > 0.0) {
                    return Err(Error::InvalidArgument(format!("length scale {} must be positive", self.ell)));
                }
                nystrom_eig(squared_exponential(self.ell), grid, self.m)
            }
            KernelType::Custom => match self.name.as_deref() {
                Some("brownian-bridge") => {
                    let len = b - a;
                    nystrom_eig(move |x, y| len * brownian_bridge((x - a) / len, (y - a) / len), grid, self.m)
                }
                Some("squared-exponential") => nystrom_eig(squared_exponential(self.ell), grid, self.m),
                other => Err(Error::InvalidArgument(format!(
                    "unknown custom kernel {other:?}; expected brownian-bridge or squared-exponential"
                ))),
            },
        }
    }
}
