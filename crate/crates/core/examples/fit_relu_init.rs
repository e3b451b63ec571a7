//! Fits a degree-(3, 2) rational function to max(0, x) on 1000 uniform
//! points in [-1, 1] and prints the coefficients used by
//! `RationalActivation::relu_like`.
//!
//! Linearized least squares with `q_0 = 1`: each sweep minimizes
//! `sum ((P(x) - y Q(x)) / Q_prev(x))^2`, a linear problem in the
//! coefficients.
//!
//! Run with `cargo run -p greenkit --example fit_relu_init`.

use nalgebra::{DMatrix, DVector};

const RP: usize = 3;
const RQ: usize = 2;

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn main() {
    let xs: Vec<f64> = (0..1000).map(|i| -1.0 + 2.0 * i as f64 / 999.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x.max(0.0)).collect();
    let mut num = vec![0.0; RP + 1];
    let mut den = vec![0.0; RQ + 1];
    den[0] = 1.0;
    for _ in 0..50 {
        let cols = RP + 1 + RQ;
        let mut a = DMatrix::zeros(xs.len(), cols);
        let mut b = DVector::zeros(xs.len());
        for (r, (&x, &y)) in xs.iter().zip(&ys).enumerate() {
            let w = 1.0 / poly(&den, x);
            for i in 0..=RP {
                a[(r, i)] = w * x.powi(i as i32);
            }
            for i in 1..=RQ {
                a[(r, RP + i)] = -w * y * x.powi(i as i32);
            }
            b[r] = w * y;
        }
        let sol = a.svd(true, true).solve(&b, 1e-14).expect("least squares");
        num.copy_from_slice(&sol.as_slice()[..=RP]);
        den[1..].copy_from_slice(&sol.as_slice()[RP + 1..]);
    }
    let worst = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| (poly(&num, x) / poly(&den, x) - y).abs())
        .fold(0.0, f64::max);
    let min_q = (0..=60_000)
        .map(|i| poly(&den, -3.0 + 6.0 * i as f64 / 60_000.0).abs())
        .fold(f64::INFINITY, f64::min);
    println!("num = {:?}", num.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>());
    println!("den = {:?}", den.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>());
    println!("max error on [-1, 1] = {worst:.4e}");
    println!("min |Q| on [-3, 3] = {min_q:.4e}");
}
