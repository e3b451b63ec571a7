use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gp::Grid1D;
use crate::linalg::{DenseMatrix, Matrix};

/// Functions sampled on a shared grid, stored as the columns of a matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct QuasiMatrix {
    grid: Arc<Grid1D>,
    cols: Matrix,
}

impl QuasiMatrix {
    pub fn from_columns(grid: Arc<Grid1D>, cols: Matrix) -> Result<Self> {
        if cols.nrows() != grid.len() {
            return Err(Error::Dimension(format!(
                "columns have {} rows on a {}-node grid",
                cols.nrows(),
                grid.len()
            )));
        }
        if cols.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("quasimatrix column".into()));
        }
        Ok(QuasiMatrix { grid, cols })
    }

    pub fn empty(grid: Arc<Grid1D>) -> Self {
        let n = grid.len();
        QuasiMatrix {
            grid,
            cols: Matrix::zeros(n, 0),
        }
    }

    pub fn grid(&self) -> &Arc<Grid1D> {
        &self.grid
    }

    pub fn ncols(&self) -> usize {
        self.cols.ncols()
    }

    pub fn columns(&self) -> &Matrix {
        &self.cols
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.cols.column(j).iter().copied().collect()
    }

    /// `W^{1/2} Omega`: columns scaled so that Euclidean products equal
    /// quadrature inner products.
    pub(crate) fn half_weighted(&self) -> Matrix {
        let sw: Vec<f64> = self.grid.weights().iter().map(|w| w.sqrt()).collect();
        Matrix::from_fn(self.cols.nrows(), self.cols.ncols(), |i, j| sw[i] * self.cols[(i, j)])
    }

    /// Gram matrix `Omega^* Omega` of quadrature inner products.
    pub fn gram(&self) -> DenseMatrix {
        let hw = self.half_weighted();
        let mut g = hw.transpose() * &hw;
        // exact symmetry
        let k = g.nrows();
        for i in 0..k {
            for j in (i + 1)..k {
                let v = 0.5 * (g[(i, j)] + g[(j, i)]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        DenseMatrix::new(g).expect("finite columns give a finite Gram matrix")
    }

    /// Quadrature-weighted modified Gram–Schmidt with one re-orthogonalization
    /// pass. Columns whose remaining norm falls below `1e-12` times the largest
    /// input norm are dropped; returns the orthonormal quasimatrix and the
    /// number of dropped columns.
    pub fn orthonormalize(&self) -> (QuasiMatrix, usize) {
        let w = self.grid.weights();
        let n = self.cols.nrows();
        let norms: Vec<f64> = (0..self.ncols())
            .map(|j| self.grid.l2_norm(self.cols.column(j).as_slice()))
            .collect();
        let scale = norms.iter().fold(0.0f64, |m, v| m.max(*v));
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut dropped = 0;
        for j in 0..self.ncols() {
            let mut v: Vec<f64> = self.cols.column(j).iter().copied().collect();
            for _ in 0..2 {
                for q in &basis {
                    let d: f64 = (0..n).map(|i| w[i] * q[i] * v[i]).sum();
                    for i in 0..n {
                        v[i] -= d * q[i];
                    }
                }
            }
            let nrm = self.grid.l2_norm(&v);
            if scale == 0.0 || nrm <= 1e-12 * scale {
                dropped += 1;
                continue;
            }
            for x in &mut v {
                *x /= nrm;
            }
            basis.push(v);
        }
        let mut cols = Matrix::zeros(n, basis.len());
        for (j, q) in basis.iter().enumerate() {
            cols.column_mut(j).copy_from_slice(q);
        }
        (
            QuasiMatrix {
                grid: self.grid.clone(),
                cols,
            },
            dropped,
        )
    }
}
