use crate::error::{Error, Result};
use crate::gp::{kl_sample_batch, SpectralKernel};
use crate::linalg::{self, Matrix};

use super::{ForwardOperator, IntegralOperator, QuasiMatrix};

/// How `Q^* F` is formed once the range basis is known.
pub enum AdjointAccess<'a> {
    /// `F^* = F` on a shared grid.
    SelfAdjoint,
    /// Separate black-box adjoint.
    Operator(&'a dyn ForwardOperator),
    /// Dense kernel samples.
    Dense(&'a IntegralOperator),
}

/// Randomized SVD of an integral operator sketched with GP forcings.
#[derive(Clone, Debug)]
pub struct HsRsvdResult {
    /// Quadrature-orthonormal basis for the sampled range.
    pub q: QuasiMatrix,
    /// `P_Q F`.
    pub operator: IntegralOperator,
    pub dropped: usize,
    pub forward_applications: usize,
    /// `||F - P_Q F||_HS / ||F||_HS` when a reference was supplied.
    pub relative_error: Option<f64>,
    /// Best rank-`(k+p)` relative error of the reference.
    pub best_relative_error: Option<f64>,
}

/// Draws `k + p` forcings from `GP(0, K)`, applies `F`, orthonormalizes the
/// responses in the quadrature inner product and returns `P_Q F`.
pub fn hs_randomized_svd(
    forward: &dyn ForwardOperator,
    adjoint: AdjointAccess<'_>,
    kernel: &SpectralKernel,
    k: usize,
    p: usize,
    seed: u64,
    reference: Option<&IntegralOperator>,
) -> Result<HsRsvdResult> {
    if k == 0 || p == 0 {
        return Err(Error::InvalidArgument(format!("k and p must be at least 1 (k = {k}, p = {p})")));
    }
    let source = forward.source_grid().clone();
    let target = forward.target_grid().clone();
    if kernel.grid() != &source {
        return Err(Error::Dimension("covariance kernel and operator source use different grids".into()));
    }
    let forcings = kl_sample_batch(kernel, k + p, seed);
    let mut responses = Matrix::zeros(target.len(), k + p);
    for j in 0..k + p {
        let u = forward.apply(&forcings.column(j))?;
        if u.len() != target.len() {
            return Err(Error::Dimension(format!("operator returned {} values, expected {}", u.len(), target.len())));
        }
        responses.column_mut(j).copy_from_slice(&u);
    }
    let (q, dropped) = QuasiMatrix::from_columns(target.clone(), responses)?.orthonormalize();
    if dropped > 0 {
        log::warn!("{dropped} numerically dependent sketch columns dropped");
    }

    // rows of Q^* F as functions of y
    let mut coeffs = Matrix::zeros(q.ncols(), source.len());
    for j in 0..q.ncols() {
        let qj = q.column(j);
        let row = match &adjoint {
            AdjointAccess::SelfAdjoint => {
                if source != target {
                    return Err(Error::InvalidArgument("a self-adjoint operator needs matching grids".into()));
                }
                forward.apply(&qj)?
            }
            AdjointAccess::Operator(adj) => adj.apply(&qj)?,
            AdjointAccess::Dense(op) => op.apply_adjoint(&qj),
        };
        if row.len() != source.len() {
            return Err(Error::Dimension("adjoint returned the wrong number of values".into()));
        }
        for (c, v) in row.into_iter().enumerate() {
            coeffs[(j, c)] = v;
        }
    }
    let kernel_values = q.columns() * coeffs;
    let operator = IntegralOperator::new(source, target, kernel_values)?;

    let (relative_error, best_relative_error) = match reference {
        Some(r) => {
            let rel = operator.relative_error(r)?;
            let s = r.singular_values();
            let total = linalg::tail_of(&s, 0);
            let best = if total == 0.0 { 0.0 } else { linalg::tail_of(&s, k + p) / total };
            (Some(rel), Some(best))
        }
        None => (None, None),
    };
    let forward_applications = k + p + if matches!(adjoint, AdjointAccess::SelfAdjoint) { q.ncols() } else { 0 };
    Ok(HsRsvdResult {
        q,
        operator,
        dropped,
        forward_applications,
        relative_error,
        best_relative_error,
    })
}
