use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quadrature rule used to build a [`Grid1D`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    GaussLegendre,
    ClenshawCurtis,
    /// Uniform nodes including both endpoints.
    Trapezoid,
}

/// Quadrature nodes and weights on an interval `[a, b]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid1D {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid1D {
    /// Validates nodes (strictly increasing, inside `[a, b]`) and weights
    /// (positive, summing to `b - a`).
    pub fn new(a: f64, b: f64, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid domain [{a}, {b}]")));
        }
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::Dimension(format!(
                "{} nodes and {} weights",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("grid nodes must be strictly increasing".into()));
        }
        if nodes[0] < a || nodes[nodes.len() - 1] > b {
            return Err(Error::InvalidArgument(format!("grid nodes leave [{a}, {b}]")));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidArgument("quadrature weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - (b - a)).abs() > 1e-10 * (b - a).max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {total}, expected {}",
                b - a
            )));
        }
        Ok(Grid1D { a, b, nodes, weights })
    }

    pub fn with_rule(rule: QuadratureRule, n: usize, a: f64, b: f64) -> Result<Self> {
        match rule {
            QuadratureRule::GaussLegendre => Self::gauss_legendre(n, a, b),
            QuadratureRule::ClenshawCurtis => Self::clenshaw_curtis(n, a, b),
            QuadratureRule::Trapezoid => Self::trapezoid(n, a, b),
        }
    }

    /// `n`-point Gauss–Legendre rule mapped to `[a, b]`.
    pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("grid needs at least one node".into()));
        }
        let (x, w) = gauss_legendre_reference(n);
        let half = 0.5 * (b - a);
        let nodes = x.iter().map(|s| a + half * (s + 1.0)).collect();
        let weights = w.iter().map(|v| v * half).collect();
        Self::new(a, b, nodes, weights)
    }

    /// `n`-point Clenshaw–Curtis rule (Chebyshev extrema, endpoints included).
    pub fn clenshaw_curtis(n: usize, a: f64, b: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("Clenshaw-Curtis needs at least two nodes".into()));
        }
        let m = n - 1;
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        for (k, xk) in x.iter_mut().enumerate() {
            // increasing order: -cos(k pi / m)
            *xk = -(k as f64 * PI / m as f64).cos();
        }
        x[0] = -1.0;
        x[m] = 1.0;
        if m.is_multiple_of(2) {
            x[m / 2] = 0.0;
        }
        for (k, wk) in w.iter_mut().enumerate() {
            let theta = k as f64 * PI / m as f64;
            let mut s = 0.0;
            for j in 1..=(m / 2) {
                let bj = if 2 * j == m { 1.0 } else { 2.0 };
                s += bj / (4.0 * (j * j) as f64 - 1.0) * (2.0 * j as f64 * theta).cos();
            }
            let ck = if k == 0 || k == m { 1.0 } else { 2.0 };
            *wk = ck / m as f64 * (1.0 - s);
        }
        let half = 0.5 * (b - a);
        let mut nodes: Vec<f64> = x.iter().map(|s| a + half * (s + 1.0)).collect();
        nodes[0] = a;
        nodes[m] = b;
        let weights = w.iter().map(|v| v * half).collect();
        Self::new(a, b, nodes, weights)
    }

    /// `n` uniform nodes from `a` to `b` with trapezoid weights.
    pub fn trapezoid(n: usize, a: f64, b: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("trapezoid grid needs at least two nodes".into()));
        }
        let h = (b - a) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| a + i as f64 * h).collect();
        nodes[n - 1] = b;
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        Self::new(a, b, nodes, weights)
    }

    /// Trapezoid weights on an arbitrary increasing node set; the end cells
    /// extend to the domain boundary so the weights still sum to `b - a`.
    pub fn trapezoid_on(a: f64, b: f64, nodes: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::InvalidArgument("grid needs at least one node".into()));
        }
        // cell i spans from the midpoint with its left neighbour (or a) to
        // the midpoint with its right neighbour (or b)
        let weights = (0..n)
            .map(|i| {
                let lo = if i == 0 { a } else { 0.5 * (nodes[i - 1] + nodes[i]) };
                let hi = if i == n - 1 { b } else { 0.5 * (nodes[i] + nodes[i + 1]) };
                hi - lo
            })
            .collect();
        Self::new(a, b, nodes, weights)
    }

    /// Sub-grid of the given node indices with trapezoid weights.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let nodes = indices
            .iter()
            .map(|&i| {
                self.nodes
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::InvalidArgument(format!("node index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::trapezoid_on(self.a, self.b, nodes)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.a && x <= self.b
    }

    pub fn check_contains(&self, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                point: x,
                lo: self.a,
                hi: self.b,
            })
        }
    }

    /// `sum_i w_i f_i g_i`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (x, y))| w * x * y)
            .sum()
    }

    pub fn l2_norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).max(0.0).sqrt()
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Piecewise-linear interpolation of nodal values at `x`; the end
    /// segments are extended linearly to the domain boundary.
    pub fn interpolate(&self, values: &[f64], x: f64) -> f64 {
        let n = self.nodes.len();
        if n == 1 {
            return values[0];
        }
        let seg = match self.nodes.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => return values[i],
            Err(0) => 0,
            Err(i) if i >= n => n - 2,
            Err(i) => i - 1,
        };
        let (x0, x1) = (self.nodes[seg], self.nodes[seg + 1]);
        let t = (x - x0) / (x1 - x0);
        values[seg] + t * (values[seg + 1] - values[seg])
    }
}

/// Gauss–Legendre nodes (increasing) and weights on `[-1, 1]` by Newton
/// iteration on the three-term recurrence.
pub fn gauss_legendre_reference(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}
