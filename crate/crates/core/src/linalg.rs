//! Dense linear algebra primitives: matrices, SVD, QR, Cholesky, truncation
//! and Gaussian test matrices.
//!
//! `DenseMatrix` wraps an `nalgebra` matrix and validates finiteness at the
//! boundary. Logical layout for files and constructors is row-major.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::rng;

pub type Matrix = DMatrix<f64>;

/// Dense real matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix(Matrix);

impl DenseMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Self::new(Matrix::from_row_slice(rows, cols, &entries))
    }

    pub fn new(m: Matrix) -> Result<Self> {
        if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % m.nrows(), pos / m.nrows());
            return Err(Error::NonFinite(format!("matrix entry ({r}, {c})")));
        }
        Ok(DenseMatrix(m))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix(Matrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        DenseMatrix(Matrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(Matrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(Matrix::from_fn(rows, cols, f))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        DenseMatrix(self.0.transpose())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self> {
        if self.cols() != other.rows() {
            return Err(Error::Dimension(format!(
                "cannot multiply {:?} by {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(DenseMatrix(&self.0 * &other.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

impl From<DenseMatrix> for Matrix {
    fn from(m: DenseMatrix) -> Matrix {
        m.0
    }
}

impl AsRef<Matrix> for DenseMatrix {
    fn as_ref(&self) -> &Matrix {
        &self.0
    }
}

/// Frobenius norm with scaling to avoid overflow on large entries.
pub fn frobenius(m: &Matrix) -> f64 {
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let ss: f64 = m.iter().map(|v| (v / scale) * (v / scale)).sum();
    scale * ss.sqrt()
}

/// Economized singular value decomposition `A = U diag(s) V^T`.
#[derive(Clone, Debug)]
pub struct SvdFactorization {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

impl SvdFactorization {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// Reassembles `U_k diag(s_k) V_k^T` from the leading `k` triplets.
    pub fn reconstruct(&self, k: usize) -> Matrix {
        let k = k.min(self.rank());
        let mut us = self.u.columns(0, k).into_owned();
        for (j, s) in self.singular_values.iter().take(k).enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.columns(0, k).transpose()
    }

    /// Keeps the leading `k` triplets.
    pub fn truncate(&self, k: usize) -> SvdFactorization {
        let k = k.min(self.rank());
        SvdFactorization {
            u: self.u.columns(0, k).into_owned(),
            singular_values: self.singular_values[..k].to_vec(),
            v: self.v.columns(0, k).into_owned(),
        }
    }
}

pub fn svd(a: &DenseMatrix) -> SvdFactorization {
    svd_matrix(a.as_matrix())
}

/// SVD of a raw matrix with singular triplets sorted by non-increasing value.
pub fn svd_matrix(a: &Matrix) -> SvdFactorization {
    let (m, n) = a.shape();
    let r = m.min(n);
    if r == 0 {
        return SvdFactorization {
            u: Matrix::zeros(m, 0),
            singular_values: Vec::new(),
            v: Matrix::zeros(n, 0),
        };
    }
    let dec = nalgebra::linalg::SVD::new(a.clone(), true, true);
    let u = dec.u.expect("left singular vectors requested");
    let vt = dec.v_t.expect("right singular vectors requested");
    let s = dec.singular_values;

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));

    let mut uo = Matrix::zeros(m, r);
    let mut vo = Matrix::zeros(n, r);
    let mut so = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        uo.set_column(dst, &u.column(src));
        vo.set_column(dst, &vt.row(src).transpose());
        so.push(s[src].max(0.0));
    }
    SvdFactorization {
        u: uo,
        singular_values: so,
        v: vo,
    }
}

pub fn singular_values(a: &Matrix) -> Vec<f64> {
    if a.nrows().min(a.ncols()) == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().iter().map(|v| v.max(0.0)).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Householder QR with `Q` of size m x n and upper-triangular `R` (n x n).
#[derive(Clone, Debug)]
pub struct QrFactorization {
    pub q: Matrix,
    pub r: Matrix,
    /// Set when some `|R_jj| <= 1e-12 * max|R|`.
    pub rank_deficient: bool,
}

impl QrFactorization {
    /// Number of diagonal entries of `R` above the deficiency threshold.
    pub fn numerical_rank(&self) -> usize {
        let thresh = qr_drop_threshold(&self.r);
        (0..self.r.ncols())
            .filter(|&j| self.r[(j, j)].abs() > thresh)
            .count()
    }
}

pub(crate) const QR_RELATIVE_DROP: f64 = 1e-12;

fn qr_drop_threshold(r: &Matrix) -> f64 {
    QR_RELATIVE_DROP * r.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn economized_qr(a: &DenseMatrix) -> Result<QrFactorization> {
    let (m, n) = a.shape();
    if m < n {
        return Err(Error::Dimension(format!(
            "economized QR needs rows >= cols, got {m}x{n}"
        )));
    }
    let (q, r) = householder_qr(a.as_matrix().clone(), None);
    let thresh = qr_drop_threshold(&r);
    let rank_deficient = (0..n).any(|j| r[(j, j)].abs() <= thresh);
    Ok(QrFactorization {
        q,
        r,
        rank_deficient,
    })
}

/// Householder QR. With `pivots` supplied, performs column pivoting on the
/// largest remaining column norm and records the permutation.
pub(crate) fn householder_qr(mut a: Matrix, mut pivots: Option<&mut Vec<usize>>) -> (Matrix, Matrix) {
    let (m, n) = a.shape();
    let steps = n.min(m);
    let mut reflectors: Vec<Option<DVector<f64>>> = Vec::with_capacity(steps);
    if let Some(p) = pivots.as_deref_mut() {
        p.clear();
        p.extend(0..n);
    }

    for j in 0..steps {
        if let Some(p) = pivots.as_deref_mut() {
            let mut best = j;
            let mut best_norm = -1.0;
            for c in j..n {
                let nrm = a.view((j, c), (m - j, 1)).norm_squared();
                if nrm > best_norm {
                    best_norm = nrm;
                    best = c;
                }
            }
            if best != j {
                a.swap_columns(j, best);
                p.swap(j, best);
            }
        }

        let x = a.view((j, j), (m - j, 1)).clone_owned();
        let norm_x = x.norm();
        if norm_x == 0.0 {
            reflectors.push(None);
            continue;
        }
        let alpha = if x[0] >= 0.0 { -norm_x } else { norm_x };
        let mut v = DVector::from_iterator(m - j, x.iter().copied());
        v[0] -= alpha;
        let vnorm = v.norm();
        if vnorm == 0.0 {
            reflectors.push(None);
            continue;
        }
        v /= vnorm;
        // A[j.., j..] -= 2 v (v^T A[j.., j..])
        for c in j..n {
            let mut col = a.view_mut((j, c), (m - j, 1));
            let d = 2.0 * v.dot(&col.column(0));
            col.column_mut(0).axpy(-d, &v, 1.0);
        }
        for i in (j + 1)..m {
            a[(i, j)] = 0.0;
        }
        reflectors.push(Some(v));
    }

    let mut r = Matrix::zeros(n.min(m), n);
    for i in 0..n.min(m) {
        for c in i..n {
            r[(i, c)] = a[(i, c)];
        }
    }

    let mut q = Matrix::identity(m, steps);
    for (j, refl) in reflectors.iter().enumerate().rev() {
        if let Some(v) = refl {
            for c in 0..steps {
                let mut col = q.view_mut((j, c), (m - j, 1));
                let d = 2.0 * v.dot(&col.column(0));
                col.column_mut(0).axpy(-d, v, 1.0);
            }
        }
    }
    (q, r)
}

fn check_rank(a: &DenseMatrix, k: usize) -> Result<()> {
    let max = a.rows().min(a.cols());
    if k > max {
        return Err(Error::InvalidArgument(format!(
            "rank {k} exceeds min(rows, cols) = {max}"
        )));
    }
    Ok(())
}

/// Truncated SVD `A_k`; `k = 0` gives the zero matrix.
pub fn best_rank_k(a: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    check_rank(a, k)?;
    if k == 0 {
        return Ok(DenseMatrix::zeros(a.rows(), a.cols()));
    }
    DenseMatrix::new(svd(a).reconstruct(k))
}

/// Best rank-k Frobenius error `sqrt(sum_{j>k} s_j^2)`.
pub fn tail_energy(a: &DenseMatrix, k: usize) -> Result<f64> {
    check_rank(a, k)?;
    if k == 0 {
        return Ok(a.frobenius_norm());
    }
    Ok(tail_of(&svd(a).singular_values, k))
}

/// `sqrt(sum_{j>k} s_j^2)` of an already computed spectrum.
pub fn tail_of(singular_values: &[f64], k: usize) -> f64 {
    singular_values
        .iter()
        .skip(k)
        .map(|s| s * s)
        .sum::<f64>()
        .sqrt()
}

/// Checks symmetry against `tol * max|C|` and returns `(C + C^T) / 2`.
pub fn symmetrized(c: &Matrix, tol: f64) -> Result<Matrix> {
    if !c.is_square() {
        return Err(Error::Dimension(format!(
            "covariance must be square, got {:?}",
            c.shape()
        )));
    }
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut asym = 0.0f64;
    let n = c.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((c[(i, j)] - c[(j, i)]).abs());
        }
    }
    if asym > tol * scale {
        return Err(Error::NotSymmetric {
            asymmetry: asym,
            tolerance: tol * scale,
        });
    }
    Ok((c + c.transpose()) * 0.5)
}

pub(crate) const SYMMETRY_TOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor `L` with `L L^T = C`.
pub fn cholesky(c: &DenseMatrix) -> Result<DenseMatrix> {
    let c = symmetrized(c.as_matrix(), SYMMETRY_TOL)?;
    let n = c.nrows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = c[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { index: j, pivot: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = c[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(DenseMatrix(l))
}

/// `n` columns drawn i.i.d. from `N(0, C)` (identity covariance when `None`).
///
/// Standard normal draws fill the matrix column by column; with a covariance
/// each column is mapped through its Cholesky factor.
pub fn sample_gaussian_matrix(
    m: usize,
    n: usize,
    covariance: Option<&DenseMatrix>,
    seed: u64,
) -> Result<DenseMatrix> {
    let factor = match covariance {
        Some(c) => {
            if c.shape() != (m, m) {
                return Err(Error::Dimension(format!(
                    "covariance is {:?}, expected {m}x{m}",
                    c.shape()
                )));
            }
            Some(cholesky(c)?)
        }
        None => None,
    };
    let mut g = rng::seeded(seed);
    let mut z = Matrix::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            z[(i, j)] = rng::standard_normal(&mut g);
        }
    }
    Ok(match factor {
        Some(l) => DenseMatrix(lower_times(l.as_matrix(), &z)),
        None => DenseMatrix(z),
    })
}

/// `L * Z` for lower-triangular `L`, summing in a fixed order.
fn lower_times(l: &Matrix, z: &Matrix) -> Matrix {
    let (m, n) = z.shape();
    let mut out = Matrix::zeros(m, n);
    for j in 0..n {
        for i in 0..m {
            let mut s = 0.0;
            for k in 0..=i {
                s += l[(i, k)] * z[(k, j)];
            }
            out[(i, j)] = s;
        }
    }
    out
}
