//! Finite-difference solvers for `-(a u')' + b u' + c u = f` with
//! homogeneous Dirichlet conditions, reference Green's functions and
//! training-data generation.

mod dataset;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use dataset::{generate_dataset, generate_dataset_with, read_dataset, write_dataset, Dataset, DatasetManifest, SensorSpec, TrainingPair};

use crate::error::{Error, Result};
use crate::gp::{Grid1D, SampledFunction};
use crate::hs::{ForwardOperator, IntegralOperator};
use crate::linalg::Matrix;

type Coefficient = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Named operator configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorPreset {
    /// `a = 1, b = 0, c = 0`.
    Poisson,
    /// `a = 0.1, b = 1, c = 0`.
    AdvectionDiffusion,
    /// `a = 1, b = 0, c = -25`.
    Helmholtz,
    /// `a = 1 + x, b = 0, c = 0`.
    VariableDiffusion,
}

impl OperatorPreset {
    pub fn tag(&self) -> &'static str {
        match self {
            OperatorPreset::Poisson => "poisson",
            OperatorPreset::AdvectionDiffusion => "advection-diffusion",
            OperatorPreset::Helmholtz => "helmholtz",
            OperatorPreset::VariableDiffusion => "variable-diffusion",
        }
    }
}

/// JSON description of an operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub preset: OperatorPreset,
    #[serde(default = "default_domain")]
    pub domain: [f64; 2],
}

fn default_domain() -> [f64; 2] {
    [0.0, 1.0]
}

impl OperatorSpec {
    pub fn new(preset: OperatorPreset) -> Self {
        OperatorSpec { preset, domain: default_domain() }
    }

    pub fn build(&self) -> Result<EllipticOperator1D> {
        let (a, b) = (self.domain[0], self.domain[1]);
        let constant = |v: f64| -> Coefficient { Arc::new(move |_| v) };
        let (diff, adv, react) = match self.preset {
            OperatorPreset::Poisson => (constant(1.0), constant(0.0), constant(0.0)),
            OperatorPreset::AdvectionDiffusion => (constant(0.1), constant(1.0), constant(0.0)),
            OperatorPreset::Helmholtz => (constant(1.0), constant(0.0), constant(-25.0)),
            OperatorPreset::VariableDiffusion => (Arc::new(|x: f64| 1.0 + x) as Coefficient, constant(0.0), constant(0.0)),
        };
        EllipticOperator1D::new((a, b), diff, adv, react, self.preset.tag())
    }
}

/// `L u = -(a u')' + b u' + c u` on `[lo, hi]` with `u(lo) = u(hi) = 0`.
#[derive(Clone)]
pub struct EllipticOperator1D {
    domain: (f64, f64),
    diffusion: Coefficient,
    advection: Coefficient,
    reaction: Coefficient,
    tag: String,
}

impl fmt::Debug for EllipticOperator1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EllipticOperator1D")
            .field("domain", &self.domain)
            .field("tag", &self.tag)
            .finish_non_exhaustive()
    }
}

impl EllipticOperator1D {
    pub fn new(
        domain: (f64, f64),
        diffusion: Coefficient,
        advection: Coefficient,
        reaction: Coefficient,
        tag: impl Into<String>,
    ) -> Result<Self> {
        if !(domain.0 < domain.1) || !domain.0.is_finite() || !domain.1.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid domain {domain:?}")));
        }
        Ok(EllipticOperator1D { domain, diffusion, advection, reaction, tag: tag.into() })
    }

    pub fn from_fns(
        domain: (f64, f64),
        diffusion: impl Fn(f64) -> f64 + Send + Sync + 'static,
        advection: impl Fn(f64) -> f64 + Send + Sync + 'static,
        reaction: impl Fn(f64) -> f64 + Send + Sync + 'static,
        tag: impl Into<String>,
    ) -> Result<Self> {
        Self::new(domain, Arc::new(diffusion), Arc::new(advection), Arc::new(reaction), tag)
    }

    pub fn poisson(domain: (f64, f64)) -> Result<Self> {
        Self::from_fns(domain, |_| 1.0, |_| 0.0, |_| 0.0, "poisson")
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    /// Assembles the interior tridiagonal system on a uniform grid that
    /// includes both endpoints.
    pub fn discretize(&self, grid: Arc<Grid1D>) -> Result<DiscreteSolver> {
        if grid.domain() != self.domain {
            return Err(Error::InvalidArgument("grid and operator domains differ".into()));
        }
        let x = grid.nodes();
        let n = x.len();
        if n < 3 {
            return Err(Error::InvalidArgument(format!("{n} nodes leave no interior unknowns")));
        }
        let h = (self.domain.1 - self.domain.0) / (n - 1) as f64;
        let uniform = x[0] == self.domain.0
            && x[n - 1] == self.domain.1
            && x.windows(2).all(|p| ((p[1] - p[0]) - h).abs() <= 1e-9 * h);
        if !uniform {
            return Err(Error::InvalidArgument(
                "finite differences need a uniform grid including both endpoints".into(),
            ));
        }
        let m = n - 2;
        let (mut lower, mut diag, mut upper) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
        for r in 0..m {
            let i = r + 1;
            let am = (self.diffusion)(0.5 * (x[i - 1] + x[i]));
            let ap = (self.diffusion)(0.5 * (x[i] + x[i + 1]));
            let ai = (self.diffusion)(x[i]);
            for v in [am, ap, ai] {
                if !(v > 0.0) {
                    return Err(Error::InvalidArgument(format!("diffusion coefficient {v} is not positive near x = {}", x[i])));
                }
            }
            let bi = (self.advection)(x[i]);
            let ci = (self.reaction)(x[i]);
            lower[r] = -am / (h * h) - bi / (2.0 * h);
            diag[r] = (am + ap) / (h * h) + ci;
            upper[r] = -ap / (h * h) + bi / (2.0 * h);
        }
        if [&lower, &diag, &upper].iter().any(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFinite("operator coefficients".into()));
        }
        Ok(DiscreteSolver { grid, lower, diag, upper })
    }

    pub fn solve(&self, f: &SampledFunction) -> Result<SampledFunction> {
        let solver = self.discretize(f.grid.clone())?;
        solver.solve(f)
    }

    /// Discrete Green's function: column `j` solves with forcing
    /// `e_j / w_j`. Boundary rows and columns are zero.
    pub fn greens_reference(&self, grid: Arc<Grid1D>) -> Result<IntegralOperator> {
        self.discretize(grid)?.greens_function()
    }
}

/// Assembled interior system `A u = f` (rows `1..n-1` of the grid).
#[derive(Clone, Debug)]
pub struct DiscreteSolver {
    grid: Arc<Grid1D>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl DiscreteSolver {
    pub fn grid(&self) -> &Arc<Grid1D> {
        &self.grid
    }

    /// Solves on interior nodes; `f` at the endpoints is ignored.
    pub fn solve_values(&self, f: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.len();
        if f.len() != n {
            return Err(Error::Dimension(format!("{} forcing values on a {n}-node grid", f.len())));
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("forcing".into()));
        }
        let rhs = &f[1..n - 1];
        let interior = solve_tridiagonal(&self.lower, &self.diag, &self.upper, rhs)?;
        self.check_residual(&interior, rhs)?;
        let mut u = Vec::with_capacity(n);
        u.push(0.0);
        u.extend_from_slice(&interior);
        u.push(0.0);
        Ok(u)
    }

    pub fn solve(&self, f: &SampledFunction) -> Result<SampledFunction> {
        if f.grid != self.grid {
            return Err(Error::Dimension("forcing is not on the solver grid".into()));
        }
        SampledFunction::new(self.grid.clone(), self.solve_values(&f.values)?)
    }

    fn check_residual(&self, u: &[f64], f: &[f64]) -> Result<()> {
        let m = u.len();
        let mut res: f64 = 0.0;
        let mut a_norm: f64 = 0.0;
        for r in 0..m {
            let mut v = self.diag[r] * u[r] - f[r];
            if r > 0 {
                v += self.lower[r] * u[r - 1];
            }
            if r + 1 < m {
                v += self.upper[r] * u[r + 1];
            }
            res = res.max(v.abs());
            a_norm = a_norm.max(self.lower[r].abs() + self.diag[r].abs() + self.upper[r].abs());
        }
        let u_max = u.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let f_max = f.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        // ||A|| ||u|| / ||f|| bounds the condition number from below
        if f_max > 0.0 && a_norm * u_max > 1e12 * f_max {
            return Err(Error::Singular(format!(
                "condition estimate {:e} exceeds 1e12",
                a_norm * u_max / f_max
            )));
        }
        let scale = a_norm * u_max + f_max;
        if res > 1e-10 * scale {
            return Err(Error::Numerical(format!("discrete residual {res:e} exceeds tolerance (scale {scale:e})")));
        }
        Ok(())
    }

    pub fn greens_function(&self) -> Result<IntegralOperator> {
        let n = self.grid.len();
        let w = self.grid.weights();
        let mut g = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 1..n - 1 {
            e[j] = 1.0 / w[j];
            let col = self.solve_values(&e)?;
            e[j] = 0.0;
            g.column_mut(j).copy_from_slice(&col);
        }
        IntegralOperator::new(self.grid.clone(), self.grid.clone(), g)
    }
}

impl ForwardOperator for DiscreteSolver {
    fn source_grid(&self) -> &Arc<Grid1D> {
        &self.grid
    }

    fn target_grid(&self) -> &Arc<Grid1D> {
        &self.grid
    }

    fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.solve_values(f)
    }
}

/// Tridiagonal solve with partial pivoting; `lower[0]` and `upper[m-1]`
/// are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = diag.len();
    if lower.len() != m || upper.len() != m || rhs.len() != m {
        return Err(Error::Dimension("tridiagonal bands and right-hand side differ in length".into()));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let scale = (0..m).fold(0.0f64, |s, i| s.max(lower[i].abs()).max(diag[i].abs()).max(upper[i].abs()));
    let tiny = 1e-14 * scale;
    // dl[i] = subdiagonal entry of row i+1; du2 is fill-in from pivoting
    let dl: Vec<f64> = (0..m.saturating_sub(1)).map(|i| lower[i + 1]).collect();
    let mut d = diag.to_vec();
    let mut du: Vec<f64> = upper[..m - 1].to_vec();
    let mut du2 = vec![0.0; m.saturating_sub(2)];
    let mut b = rhs.to_vec();
    let singular = |i: usize, v: f64| Error::Singular(format!("pivot {i} is {v:e}"));
    for i in 0..m - 1 {
        if d[i].abs() >= dl[i].abs() {
            if d[i].abs() <= tiny {
                return Err(singular(i, d[i]));
            }
            let fact = dl[i] / d[i];
            d[i + 1] -= fact * du[i];
            b[i + 1] -= fact * b[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 2 < m {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du2[i];
            }
            du[i] = temp;
            let tb = b[i];
            b[i] = b[i + 1];
            b[i + 1] = tb - fact * b[i + 1];
        }
    }
    if d[m - 1].abs() <= tiny {
        return Err(singular(m - 1, d[m - 1]));
    }
    b[m - 1] /= d[m - 1];
    if m > 1 {
        b[m - 2] = (b[m - 2] - du[m - 2] * b[m - 1]) / d[m - 2];
    }
    for i in (0..m.saturating_sub(2)).rev() {
        b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / d[i];
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Arc<Grid1D> {
        Arc::new(Grid1D::trapezoid(n, 0.0, 1.0).unwrap())
    }

    fn max_err(u: &[f64], exact: impl Fn(f64) -> f64, g: &Grid1D) -> f64 {
        u.iter().zip(g.nodes()).map(|(v, &x)| (v - exact(x)).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn tridiagonal_matches_dense_solve() {
        let lower = [0.0, 5.0, -1.0, 2.0, 7.0];
        let diag = [1.0, 0.5, 3.0, 0.1, -2.0];
        let upper = [4.0, 1.0, 2.5, -3.0, 0.0];
        let rhs = [1.0, 2.0, -1.0, 0.5, 3.0];
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        let a = Matrix::from_fn(5, 5, |i, j| {
            if i == j {
                diag[i]
            } else if j + 1 == i {
                lower[i]
            } else if i + 1 == j {
                upper[i]
            } else {
                0.0
            }
        });
        let dense = a.clone().lu().solve(&nalgebra::DVector::from_column_slice(&rhs)).unwrap();
        for i in 0..5 {
            assert!((x[i] - dense[i]).abs() < 1e-12);
        }
        assert!(solve_tridiagonal(&[0.0, 1.0], &[1.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn manufactured_sine() {
        let g = grid(256);
        let op = EllipticOperator1D::poisson((0.0, 1.0)).unwrap();
        let f = SampledFunction::from_fn(g.clone(), |x| PI * PI * (PI * x).sin()).unwrap();
        let u = op.solve(&f).unwrap();
        assert!(max_err(&u.values, |x| (PI * x).sin(), &g) < 1e-3);
    }

    #[test]
    fn constant_forcing_is_exact() {
        let g = grid(101);
        let op = EllipticOperator1D::poisson((0.0, 1.0)).unwrap();
        let u = op.solve(&SampledFunction::from_fn(g.clone(), |_| 1.0).unwrap()).unwrap();
        assert!(max_err(&u.values, |x| x * (1.0 - x) / 2.0, &g) < 1e-4);
    }

    #[test]
    fn variable_diffusion_refinement() {
        let op = OperatorSpec::new(OperatorPreset::VariableDiffusion).build().unwrap();
        let f = |x: f64| (3.0 * x).exp();
        let coarse_g = grid(65);
        let fine_g = grid(257);
        let coarse = op.solve(&SampledFunction::from_fn(coarse_g.clone(), f).unwrap()).unwrap();
        let fine = op.solve(&SampledFunction::from_fn(fine_g, f).unwrap()).unwrap();
        for i in 0..65 {
            assert!((coarse.values[i] - fine.values[4 * i]).abs() < 1e-3);
        }
    }

    #[test]
    fn second_order_convergence() {
        let op = EllipticOperator1D::poisson((0.0, 1.0)).unwrap();
        let errs: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&n| {
                // doubling the interval count
                let g = grid(n + 1);
                let u = op.solve(&SampledFunction::from_fn(g.clone(), |x| PI * PI * (PI * x).sin()).unwrap()).unwrap();
                max_err(&u.values, |x| (PI * x).sin(), &g)
            })
            .collect();
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..=4.5).contains(&ratio), "{ratio}");
        }
    }

    #[test]
    fn poisson_green_closed_form() {
        let g = grid(256);
        let op = EllipticOperator1D::poisson((0.0, 1.0)).unwrap();
        let green = op.greens_reference(g.clone()).unwrap();
        let x = g.nodes();
        let mut worst: f64 = 0.0;
        for i in 0..256 {
            for j in 0..256 {
                let exact = if x[i] <= x[j] { x[i] * (1.0 - x[j]) } else { x[j] * (1.0 - x[i]) };
                worst = worst.max((green.kernel()[(i, j)] - exact).abs());
                assert!(green.kernel()[(i, j)] >= 0.0);
            }
        }
        assert!(worst < 1e-3, "{worst}");
        assert!(green.symmetry_score().unwrap() <= 1e-8);
        for i in 0..256 {
            assert_eq!(green.kernel()[(0, i)], 0.0);
            assert_eq!(green.kernel()[(i, 255)], 0.0);
        }
    }

    #[test]
    fn green_reproduces_solver() {
        let g = grid(200);
        for preset in [OperatorPreset::Poisson, OperatorPreset::AdvectionDiffusion, OperatorPreset::Helmholtz] {
            let op = OperatorSpec::new(preset).build().unwrap();
            let solver = op.discretize(g.clone()).unwrap();
            let green = solver.greens_function().unwrap();
            let mut rng = crate::rng::seeded(4);
            for _ in 0..20 {
                let f = crate::rng::normal_vec(&mut rng, 200);
                let a = green.apply(&f).unwrap();
                let b = solver.solve_values(&f).unwrap();
                let diff = a.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
                let nrm = b.iter().map(|q| q * q).sum::<f64>().sqrt();
                assert!(diff <= 1e-8 * nrm);
            }
        }
    }

    #[test]
    fn solve_is_linear() {
        let g = grid(128);
        let op = OperatorSpec::new(OperatorPreset::AdvectionDiffusion).build().unwrap();
        let s = op.discretize(g).unwrap();
        let mut rng = crate::rng::seeded(1);
        let f = crate::rng::normal_vec(&mut rng, 128);
        let h = crate::rng::normal_vec(&mut rng, 128);
        let comb: Vec<f64> = f.iter().zip(&h).map(|(a, b)| 2.5 * a - 0.75 * b).collect();
        let (uf, uh, uc) = (s.solve_values(&f).unwrap(), s.solve_values(&h).unwrap(), s.solve_values(&comb).unwrap());
        let scale = uc.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..128 {
            assert!((uc[i] - (2.5 * uf[i] - 0.75 * uh[i])).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn singular_and_invalid_operators_rejected() {
        let g = grid(65);
        // c = -pi^2 makes the continuous problem singular; the discrete first
        // eigenvalue of the Dirichlet Laplacian on 64 intervals is matched exactly
        let h = 1.0 / 64.0;
        let lam = 4.0 / (h * h) * (PI * h / 2.0).sin().powi(2);
        let op = EllipticOperator1D::from_fns((0.0, 1.0), |_| 1.0, |_| 0.0, move |_| -lam, "singular").unwrap();
        let f = SampledFunction::from_fn(g.clone(), |x| x).unwrap();
        let err = op.solve(&f).unwrap_err();
        assert!(err.is_numerical(), "{err}");
        let bad = EllipticOperator1D::from_fns((0.0, 1.0), |x| x - 0.5, |_| 0.0, |_| 0.0, "bad").unwrap();
        assert!(matches!(bad.solve(&f), Err(Error::InvalidArgument(_))));
        let gl = Arc::new(Grid1D::gauss_legendre(16, 0.0, 1.0).unwrap());
        assert!(op.discretize(gl).is_err());
    }

    #[test]
    fn advection_reference_is_asymmetric() {
        let g = grid(128);
        let p = OperatorSpec::new(OperatorPreset::Poisson).build().unwrap().greens_reference(g.clone()).unwrap();
        let a = OperatorSpec::new(OperatorPreset::AdvectionDiffusion).build().unwrap().greens_reference(g).unwrap();
        assert!(a.symmetry_score().unwrap() > 0.1);
        assert!(p.symmetry_score().unwrap() < 1e-10);
    }
}
