//! Randomized SVD with standard or covariance-weighted Gaussian test
//! vectors, the Frobenius-norm probabilistic error bound, and a seeded
//! Monte Carlo verifier for that bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, frobenius, DenseMatrix, Matrix, SvdFactorization};
use crate::rng::derive_seed;

/// Target rank `k`, oversampling `p` and sketch seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RsvdConfig {
    pub k: usize,
    pub p: usize,
    pub seed: u64,
}

impl RsvdConfig {
    pub fn new(k: usize, p: usize, seed: u64) -> Self {
        RsvdConfig { k, p, seed }
    }

    pub fn sketch_size(&self) -> usize {
        self.k + self.p
    }

    /// Checks `k >= 1`, `p >= 1` and `k + p <= min(rows, cols)`.
    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        if self.k == 0 || self.p == 0 {
            return Err(Error::InvalidArgument(format!(
                "k and p must be at least 1 (k = {}, p = {})",
                self.k, self.p
            )));
        }
        if self.k + self.p > rows.min(cols) {
            return Err(Error::InvalidArgument(format!(
                "k + p = {} exceeds min(rows, cols) = {}",
                self.k + self.p,
                rows.min(cols)
            )));
        }
        Ok(())
    }
}

/// Deviation parameters of the tail bound; both must be at least one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub t: f64,
    pub u: f64,
}

impl BoundParams {
    pub fn new(t: f64, u: f64) -> Result<Self> {
        if !(t >= 1.0 && u >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "bound parameters need t, u >= 1 (t = {t}, u = {u})"
            )));
        }
        Ok(BoundParams { t, u })
    }

    /// Upper bound `2 t^{-p} + exp(-u^2)` on the probability that the
    /// error exceeds [`bound_rhs`].
    pub fn failure_probability(&self, p: usize) -> f64 {
        2.0 * self.t.powi(-(p as i32)) + (-self.u * self.u).exp()
    }
}

/// Anything that can be applied to a block of column vectors.
pub trait LinearMap {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// Returns `A X` for an `ncols x s` block `X`.
    fn apply(&self, x: &Matrix) -> Matrix;
}

impl LinearMap for DenseMatrix {
    fn nrows(&self) -> usize {
        self.rows()
    }
    fn ncols(&self) -> usize {
        self.cols()
    }
    fn apply(&self, x: &Matrix) -> Matrix {
        self.as_matrix() * x
    }
}

/// Adapter turning a closure into a [`LinearMap`].
pub struct FnMap<F> {
    pub rows: usize,
    pub cols: usize,
    pub f: F,
}

impl<F: Fn(&Matrix) -> Matrix> LinearMap for FnMap<F> {
    fn nrows(&self) -> usize {
        self.rows
    }
    fn ncols(&self) -> usize {
        self.cols
    }
    fn apply(&self, x: &Matrix) -> Matrix {
        (self.f)(x)
    }
}

/// Orthonormal basis for the sampled range.
#[derive(Clone, Debug)]
pub struct RangeBasis {
    pub q: Matrix,
    /// Number of sketch columns drawn (`k + p`).
    pub requested: usize,
    /// Set when numerically dependent sketch columns were dropped.
    pub deficient: bool,
}

impl RangeBasis {
    pub fn rank(&self) -> usize {
        self.q.ncols()
    }
}

/// Orthonormal basis of `span(Y)` via column-pivoted Householder QR,
/// dropping columns with `|R_jj| <= 1e-12 max|R|`.
pub fn orthonormal_range(y: &Matrix) -> RangeBasis {
    let requested = y.ncols();
    let mut piv = Vec::new();
    let (q, r) = linalg::householder_qr(y.clone(), Some(&mut piv));
    let rmax = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let thresh = linalg::QR_RELATIVE_DROP * rmax;
    let keep = (0..r.nrows().min(r.ncols()))
        .take_while(|&j| rmax > 0.0 && r[(j, j)].abs() > thresh)
        .count();
    RangeBasis {
        q: q.columns(0, keep).into_owned(),
        requested,
        deficient: keep < requested,
    }
}

/// Sketches `A` with `k + p` Gaussian vectors `x_j ~ N(0, C)` and returns an
/// orthonormal basis for `span{A x_j}`.
pub fn randomized_range_finder<A: LinearMap + ?Sized>(
    a: &A,
    cfg: &RsvdConfig,
    covariance: Option<&DenseMatrix>,
) -> Result<RangeBasis> {
    cfg.validate(a.nrows(), a.ncols())?;
    let x = linalg::sample_gaussian_matrix(a.ncols(), cfg.sketch_size(), covariance, cfg.seed)?;
    let y = a.apply(x.as_matrix());
    if y.shape() != (a.nrows(), cfg.sketch_size()) {
        return Err(Error::Dimension(format!(
            "linear map returned {:?}, expected {}x{}",
            y.shape(),
            a.nrows(),
            cfg.sketch_size()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("sketch A X".into()));
    }
    Ok(orthonormal_range(&y))
}

/// Randomized SVD output: factors of `Q Q^T A` and the exact projection error.
#[derive(Clone, Debug)]
pub struct RsvdResult {
    pub q: Matrix,
    /// `B = Q^T A`.
    pub b: Matrix,
    pub svd: SvdFactorization,
    /// `||A - Q Q^T A||_F`.
    pub achieved_error: f64,
    pub deficient: bool,
}

/// Two-pass randomized SVD of a dense matrix.
pub fn randomized_svd(
    a: &DenseMatrix,
    cfg: &RsvdConfig,
    covariance: Option<&DenseMatrix>,
) -> Result<RsvdResult> {
    let basis = randomized_range_finder(a, cfg, covariance)?;
    let am = a.as_matrix();
    let b = basis.q.transpose() * am;
    let achieved_error = frobenius(&(am - &basis.q * &b));
    let small = linalg::svd_matrix(&b);
    let svd = SvdFactorization {
        u: &basis.q * &small.u,
        singular_values: small.singular_values,
        v: small.v,
    };
    Ok(RsvdResult {
        q: basis.q,
        b,
        svd,
        achieved_error,
        deficient: basis.deficient,
    })
}

/// Right-hand side of the Frobenius error bound for a sketch of size `k + p`:
///
/// `(1 + t sqrt(3k / (p + 1))) sqrt(sum_{j>k} s_j^2) + u t sqrt(k + p) / (p + 1) s_{k+1}`
///
/// `singular_values` must be sorted non-increasing. Returns 0 when the tail
/// is empty.
pub fn bound_rhs(singular_values: &[f64], k: usize, p: usize, params: &BoundParams) -> Result<f64> {
    if p == 0 {
        return Err(Error::InvalidArgument("oversampling p must be at least 1".into()));
    }
    let n = singular_values.len();
    if k >= n {
        return Ok(0.0);
    }
    if k + p > n {
        return Err(Error::InvalidArgument(format!(
            "k + p = {} exceeds the {n} available singular values",
            k + p
        )));
    }
    let (kf, pf) = (k as f64, p as f64);
    let tail = linalg::tail_of(singular_values, k);
    let lead = 1.0 + params.t * (3.0 * kf / (pf + 1.0)).sqrt();
    let spectral = params.u * params.t * (kf + pf).sqrt() / (pf + 1.0) * singular_values[k];
    Ok(lead * tail + spectral)
}

/// Outcome of a seeded Monte Carlo check of the error bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundReport {
    pub k: usize,
    pub p: usize,
    pub t: f64,
    pub u: f64,
    pub trials: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub bound_rhs: f64,
    /// `2 t^{-p} + e^{-u^2}`.
    pub failure_probability_bound: f64,
    /// Largest achieved error over the trials.
    pub worst_error: f64,
    /// Whether the bound's hypotheses hold (identity covariance only).
    pub bound_applies: bool,
}

const ROUNDOFF_FLOOR: f64 = 1e-13;

/// Runs `trials` sketches with seeds `cfg.seed ^ trial` and counts how often
/// `||A - Q Q^T A||_F` exceeds [`bound_rhs`].
pub fn verify_bound(
    a: &DenseMatrix,
    cfg: &RsvdConfig,
    params: &BoundParams,
    trials: usize,
    covariance: Option<&DenseMatrix>,
) -> Result<BoundReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    cfg.validate(a.rows(), a.cols())?;
    let sv = linalg::svd(a).singular_values;
    let rhs = bound_rhs(&sv, cfg.k, cfg.p, params)?;
    // errors at the round-off level of A are not bound violations
    let floor = ROUNDOFF_FLOOR * a.frobenius_norm();
    let mut failures = 0;
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let trial_cfg = RsvdConfig {
            seed: derive_seed(cfg.seed, trial as u64),
            ..*cfg
        };
        let basis = randomized_range_finder(a, &trial_cfg, covariance)?;
        let am = a.as_matrix();
        let err = frobenius(&(am - &basis.q * (basis.q.transpose() * am)));
        worst = worst.max(err);
        if err > rhs + floor {
            failures += 1;
        }
    }
    Ok(BoundReport {
        k: cfg.k,
        p: cfg.p,
        t: params.t,
        u: params.u,
        trials,
        failures,
        failure_rate: failures as f64 / trials as f64,
        bound_rhs: rhs,
        failure_probability_bound: params.failure_probability(cfg.p),
        worst_error: worst,
        bound_applies: covariance.is_none(),
    })
}

/// `U diag(s) V^T` with random orthonormal factors and the given spectrum.
pub fn matrix_with_spectrum(m: usize, n: usize, spectrum: &[f64], seed: u64) -> Result<DenseMatrix> {
    let r = spectrum.len();
    if r > m.min(n) {
        return Err(Error::Dimension(format!(
            "{r} singular values for a {m}x{n} matrix"
        )));
    }
    let gu = linalg::sample_gaussian_matrix(m, r, None, seed)?;
    let gv = linalg::sample_gaussian_matrix(n, r, None, derive_seed(seed, 0x5eed))?;
    let (qu, _) = linalg::householder_qr(gu.into_matrix(), None);
    let (qv, _) = linalg::householder_qr(gv.into_matrix(), None);
    let mut us = qu;
    for (j, s) in spectrum.iter().enumerate() {
        us.column_mut(j).scale_mut(*s);
    }
    DenseMatrix::new(us * qv.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn max_abs(m: &Matrix) -> f64 {
        m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    #[test]
    fn config_validation() {
        assert!(RsvdConfig::new(0, 1, 0).validate(10, 10).is_err());
        assert!(RsvdConfig::new(1, 0, 0).validate(10, 10).is_err());
        assert!(RsvdConfig::new(5, 6, 0).validate(10, 20).is_err());
        assert!(RsvdConfig::new(5, 5, 0).validate(10, 20).is_ok());
        assert!(BoundParams::new(0.5, 2.0).is_err());
        assert!(BoundParams::new(1.0, 1.0).is_ok());
    }

    #[test]
    fn rank_one_range_is_captured() {
        let u = DVector::from_fn(8, |i, _| (i as f64 + 1.0).sin()).normalize();
        let v = DVector::from_fn(6, |i, _| (i as f64 * 0.3).cos());
        let a = DenseMatrix::new(&u * v.transpose()).unwrap();
        let basis = randomized_range_finder(&a, &RsvdConfig::new(1, 1, 3), None).unwrap();
        assert_eq!(basis.rank(), 1);
        assert!(basis.deficient);
        // principal angle: ||u - Q Q^T u|| ~ 0
        let resid = &u - &basis.q * (basis.q.transpose() * &u);
        assert!(resid.norm() < 1e-10);
    }

    #[test]
    fn zero_matrix_gives_empty_basis() {
        let a = DenseMatrix::zeros(5, 5);
        let basis = randomized_range_finder(&a, &RsvdConfig::new(2, 1, 0), None).unwrap();
        assert_eq!(basis.rank(), 0);
        assert!(basis.deficient);
        let res = randomized_svd(&a, &RsvdConfig::new(2, 1, 0), None).unwrap();
        assert_eq!(res.achieved_error, 0.0);
    }

    #[test]
    fn weighted_sketch_still_orthonormal() {
        let diag: Vec<f64> = (0..20).map(|j| 0.7f64.powi(j)).collect();
        let a = DenseMatrix::from_diagonal(&diag).unwrap();
        let cdiag: Vec<f64> = (0..20).map(|j| 1.0 / (1.0 + j as f64)).collect();
        let c = DenseMatrix::from_diagonal(&cdiag).unwrap();
        let cfg = RsvdConfig::new(4, 2, 17);
        for cov in [None, Some(&c)] {
            let res = randomized_svd(&a, &cfg, cov).unwrap();
            let r = res.q.ncols();
            assert!(max_abs(&(res.q.transpose() * &res.q - Matrix::identity(r, r))) <= 1e-10);
            // oracle: dense projection error
            let am = a.as_matrix();
            let proj = &res.q * (res.q.transpose() * am);
            let oracle = frobenius(&(am - proj));
            assert_eq!(res.achieved_error, oracle);
            assert!(res.achieved_error >= linalg::tail_of(&diag, 6) - 1e-8);
        }
    }

    #[test]
    fn exact_rank_three_recovered() {
        let a = matrix_with_spectrum(30, 20, &[5.0, 2.0, 0.5], 8).unwrap();
        let res = randomized_svd(&a, &RsvdConfig::new(3, 2, 1), None).unwrap();
        assert!(res.achieved_error <= 1e-9 * a.frobenius_norm());
        let s = &res.svd.singular_values;
        assert!((s[0] - 5.0).abs() < 1e-10 && (s[2] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn identity_projection_trace() {
        let a = DenseMatrix::identity(10);
        let res = randomized_svd(&a, &RsvdConfig::new(5, 2, 4), None).unwrap();
        assert_eq!(res.q.ncols(), 7);
        assert!((res.achieved_error.powi(2) - 3.0).abs() < 1e-10);
    }

    #[test]
    fn identity_covariance_matches_standard_path() {
        let a = matrix_with_spectrum(12, 12, &[3.0, 1.0, 0.5, 0.1, 0.01], 2).unwrap();
        let cfg = RsvdConfig::new(3, 2, 77);
        let std = randomized_range_finder(&a, &cfg, None).unwrap();
        let gen = randomized_range_finder(&a, &cfg, Some(&DenseMatrix::identity(12))).unwrap();
        assert_eq!(std.q, gen.q);
    }

    #[test]
    fn covariance_scaling_leaves_basis_unchanged() {
        let a = matrix_with_spectrum(12, 12, &[3.0, 1.0, 0.5, 0.1, 0.01, 1e-3], 2).unwrap();
        let c = DenseMatrix::from_fn(12, 12, |i, j| (-((i as f64 - j as f64).powi(2)) / 8.0).exp() + if i == j { 0.1 } else { 0.0 }).unwrap();
        // power-of-four scaling keeps sqrt(alpha) exact in binary
        let c4 = DenseMatrix::new(c.as_matrix() * 4.0).unwrap();
        let cfg = RsvdConfig::new(3, 2, 5);
        let r1 = randomized_svd(&a, &cfg, Some(&c)).unwrap();
        let r4 = randomized_svd(&a, &cfg, Some(&c4)).unwrap();
        assert_eq!(r1.q, r4.q);
        assert_eq!(r1.achieved_error.to_bits(), r4.achieved_error.to_bits());
    }

    #[test]
    fn bound_rhs_cases() {
        let params = BoundParams::new(2.0, 2.0).unwrap();
        let mut s = vec![0.0; 10];
        s[0] = 1.0;
        assert_eq!(bound_rhs(&s, 1, 2, &params).unwrap(), 0.0);
        assert_eq!(bound_rhs(&s, 10, 2, &params).unwrap(), 0.0);
        assert!(bound_rhs(&s, 1, 0, &params).is_err());
        assert!(bound_rhs(&s, 5, 6, &params).is_err());
    }

    #[test]
    fn bound_rhs_matches_independent_arithmetic() {
        let s: Vec<f64> = (1..=100).map(|j| 2f64.powi(-j)).collect();
        let params = BoundParams::new(2.0, 2.0).unwrap();
        let got = bound_rhs(&s, 10, 5, &params).unwrap();
        // tail sum of a geometric series with ratio 1/4 starting at 4^-11
        let tail = (4f64.powi(-11) * (1.0 - 4f64.powi(-90)) / (1.0 - 0.25)).sqrt();
        let expected = (1.0 + 2.0 * (30.0f64 / 6.0).sqrt()) * tail + 4.0 * 15f64.sqrt() / 6.0 * 2f64.powi(-11);
        assert!((got - expected).abs() <= 1e-15 * expected);
    }

    #[test]
    fn bound_rhs_limit_large_oversampling() {
        let s: Vec<f64> = (0..4000).map(|j| if j < 3 { 1.0 } else if j < 6 { 0.1 } else { 0.0 }).collect();
        let params = BoundParams::new(1.0, 1.0).unwrap();
        let tail = linalg::tail_of(&s, 3);
        let mut prev = f64::INFINITY;
        for p in [10, 100, 1000, 3990] {
            let v = bound_rhs(&s, 3, p, &params).unwrap();
            assert!(v > tail && v < prev);
            prev = v;
        }
        assert!(prev - tail < 0.1 * tail);
    }

    #[test]
    fn exact_rank_never_fails() {
        let a = matrix_with_spectrum(25, 25, &[1.0, 0.5, 0.25, 0.125], 3).unwrap();
        let cfg = RsvdConfig::new(4, 2, 9);
        let report = verify_bound(&a, &cfg, &BoundParams::new(1.0, 1.0).unwrap(), 50, None).unwrap();
        assert_eq!(report.failures, 0);
        assert!(report.bound_applies);
        assert!(verify_bound(&a, &cfg, &BoundParams::new(1.0, 1.0).unwrap(), 0, None).is_err());
    }
}
