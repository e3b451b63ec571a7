use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Denominator magnitudes below this are clamped and flagged.
pub const POLE_CLAMP: f64 = 1e-12;

/// Least-squares fit of `P/Q` to `max(0, x)` on 1000 uniform points in
/// `[-1, 1]`, produced by `examples/fit_relu_init.rs`.
const RELU_NUM: [f64; 4] = [
    4.2885813698360885e-2,
    4.999_999_999_999_997e-1,
    1.2556015055177348e0,
    8.461_678_388_928_606e-1,
];
const RELU_DEN: [f64; 3] = [1.0, -1.1102230246251565e-16, 1.6923356777857195e0];

/// Trainable `P(x) / Q(x)` with coefficients in increasing degree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalActivation {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

/// Value and all partial derivatives at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationGrad {
    pub value: f64,
    pub dx: f64,
    pub dnum: Vec<f64>,
    pub dden: Vec<f64>,
    pub pole: bool,
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

/// Derivative of the polynomial with coefficients `c`.
fn horner_deriv(c: &[f64], x: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (i, &a)| acc * x + i as f64 * a)
}

impl RationalActivation {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.len() < 2 {
            return Err(Error::InvalidArgument("numerator degree must be at least 1".into()));
        }
        if den.is_empty() {
            return Err(Error::InvalidArgument("denominator needs at least a constant term".into()));
        }
        if num.iter().chain(&den).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("activation coefficients".into()));
        }
        Ok(RationalActivation { num, den })
    }

    /// `P(x) = x`, `Q = 1`.
    pub fn identity() -> Self {
        RationalActivation { num: vec![0.0, 1.0], den: vec![1.0] }
    }

    /// Rational approximation of ReLU with degrees `(3, 2)`.
    pub fn relu_like() -> Self {
        RationalActivation { num: RELU_NUM.to_vec(), den: RELU_DEN.to_vec() }
    }

    /// Degrees `(rp, rq)` initialized from the ReLU fit; only `(3, 2)` is
    /// tabulated, other degrees start as the identity map.
    pub fn init_relu_like(rp: usize, rq: usize) -> Result<Self> {
        if rp == 0 {
            return Err(Error::InvalidArgument("numerator degree must be at least 1".into()));
        }
        if (rp, rq) == (3, 2) {
            let act = Self::relu_like();
            let worst = act.relu_fit_error();
            if worst > 0.1 {
                return Err(Error::Numerical(format!("ReLU fit error {worst} exceeds 0.1")));
            }
            return Ok(act);
        }
        let mut num = vec![0.0; rp + 1];
        num[1] = 1.0;
        let mut den = vec![0.0; rq + 1];
        den[0] = 1.0;
        Ok(RationalActivation { num, den })
    }

    /// Max deviation from `max(0, x)` on 1000 uniform points in `[-1, 1]`.
    pub fn relu_fit_error(&self) -> f64 {
        (0..1000)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / 999.0;
                (self.eval(x).0 - x.max(0.0)).abs()
            })
            .fold(0.0, f64::max)
    }

    pub fn degrees(&self) -> (usize, usize) {
        (self.num.len() - 1, self.den.len() - 1)
    }

    pub fn param_count(&self) -> usize {
        self.num.len() + self.den.len()
    }

    fn clamped_den(&self, x: f64) -> (f64, bool) {
        let q = horner(&self.den, x);
        if q.abs() < POLE_CLAMP {
            (if q < 0.0 { -POLE_CLAMP } else { POLE_CLAMP }, true)
        } else {
            (q, false)
        }
    }

    /// `(P(x)/Q(x), pole flag)`.
    pub fn eval(&self, x: f64) -> (f64, bool) {
        let (q, pole) = self.clamped_den(x);
        (horner(&self.num, x) / q, pole)
    }

    /// Value and derivative in `x` only.
    pub fn eval_dx(&self, x: f64) -> (f64, f64, bool) {
        let (q, pole) = self.clamped_den(x);
        let p = horner(&self.num, x);
        let dp = horner_deriv(&self.num, x);
        let dq = horner_deriv(&self.den, x);
        (p / q, (dp * q - p * dq) / (q * q), pole)
    }

    pub fn grads(&self, x: f64) -> ActivationGrad {
        let (q, pole) = self.clamped_den(x);
        let p = horner(&self.num, x);
        let dp = horner_deriv(&self.num, x);
        let dq = horner_deriv(&self.den, x);
        let mut xi = 1.0;
        let mut dnum = Vec::with_capacity(self.num.len());
        for _ in 0..self.num.len() {
            dnum.push(xi / q);
            xi *= x;
        }
        let mut xi = 1.0;
        let mut dden = Vec::with_capacity(self.den.len());
        for _ in 0..self.den.len() {
            dden.push(-p * xi / (q * q));
            xi *= x;
        }
        ActivationGrad { value: p / q, dx: (dp * q - p * dq) / (q * q), dnum, dden, pole }
    }

    /// Smallest `|Q|` over `n` uniform points of `[lo, hi]`.
    pub fn min_abs_den(&self, lo: f64, hi: f64, n: usize) -> f64 {
        (0..n)
            .map(|i| horner(&self.den, lo + (hi - lo) * i as f64 / (n - 1) as f64).abs())
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_hand_values() {
        let id = RationalActivation::identity();
        for x in [-2.0, 0.0, 3.5] {
            let g = id.grads(x);
            assert_eq!(g.value, x);
            assert_eq!(g.dx, 1.0);
        }
        let a = RationalActivation::new(vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 1.0]).unwrap();
        let g = a.grads(1.0);
        assert_eq!(g.value, 0.5);
        assert_eq!(g.dx, 0.5);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let a = RationalActivation::new(vec![0.3, -1.0, 0.5, 0.2], vec![1.0, 0.4, 0.9]).unwrap();
        let h = 1e-5;
        let rel = |an: f64, fd: f64| (an - fd).abs() / an.abs().max(fd.abs()).max(1e-8);
        let mut g = crate::rng::seeded(3);
        use rand::Rng;
        for _ in 0..100 {
            let x: f64 = g.random_range(-3.0..3.0);
            let an = a.grads(x);
            assert!(!an.pole);
            let fd = (a.eval(x + h).0 - a.eval(x - h).0) / (2.0 * h);
            assert!(rel(an.dx, fd) <= 1e-5);
            for i in 0..a.num.len() {
                let (mut p, mut m) = (a.clone(), a.clone());
                p.num[i] += h;
                m.num[i] -= h;
                assert!(rel(an.dnum[i], (p.eval(x).0 - m.eval(x).0) / (2.0 * h)) <= 1e-5);
            }
            for i in 0..a.den.len() {
                let (mut p, mut m) = (a.clone(), a.clone());
                p.den[i] += h;
                m.den[i] -= h;
                assert!(rel(an.dden[i], (p.eval(x).0 - m.eval(x).0) / (2.0 * h)) <= 1e-5);
            }
        }
    }

    #[test]
    fn pole_is_clamped_and_flagged() {
        // Q(x) = x vanishes at 0
        let a = RationalActivation::new(vec![1.0, 1.0], vec![0.0, 1.0]).unwrap();
        let (v, pole) = a.eval(0.0);
        assert!(pole);
        assert_eq!(v, 1.0 / POLE_CLAMP);
        let (v, pole) = a.eval(-1e-14);
        assert!(pole && v < 0.0);
        assert!(!a.eval(0.5).1);
    }

    #[test]
    fn relu_init_properties() {
        let a = RationalActivation::init_relu_like(3, 2).unwrap();
        assert!(a.relu_fit_error() <= 0.1);
        assert!(a.eval(0.0).0.abs() <= 0.1);
        assert!(a.min_abs_den(-3.0, 3.0, 60_001) >= 0.1);
        assert_eq!(a.degrees(), (3, 2));
        let b = RationalActivation::init_relu_like(4, 0).unwrap();
        assert_eq!(b.eval(0.7).0, 0.7);
        assert!(RationalActivation::init_relu_like(0, 2).is_err());
    }

    #[test]
    fn constructor_validation() {
        assert!(RationalActivation::new(vec![1.0], vec![1.0]).is_err());
        assert!(RationalActivation::new(vec![0.0, 1.0], vec![]).is_err());
        assert!(RationalActivation::new(vec![0.0, f64::NAN], vec![1.0]).is_err());
    }
}
