use std::sync::Arc;

use proptest::prelude::*;

use greenkit::gp::Grid1D;
use greenkit::hs::IntegralOperator;
use greenkit::io;
use greenkit::linalg::{self, DenseMatrix, Matrix};
use greenkit::pde::{OperatorPreset, OperatorSpec};
use greenkit::rng;
use greenkit::rsvd::{randomized_range_finder, RsvdConfig};

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut g = rng::seeded(seed);
    Matrix::from_fn(rows, cols, |_, _| rng::standard_normal(&mut g))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tail_energy_splits_frobenius_norm(rows in 2usize..20, cols in 2usize..20, k in 0usize..20, seed in any::<u64>()) {
        let a = DenseMatrix::new(gaussian(rows, cols, seed)).unwrap();
        let k = k.min(rows.min(cols));
        let s = linalg::svd(&a).singular_values;
        let head: f64 = s[..k].iter().map(|v| v * v).sum();
        let tail = linalg::tail_energy(&a, k).unwrap();
        let total = a.frobenius_norm().powi(2);
        prop_assert!((tail * tail + head - total).abs() <= 1e-8 * total);
    }

    #[test]
    fn range_finder_is_orthonormal_and_near_optimal(rows in 8usize..30, cols in 8usize..30, k in 1usize..4, p in 1usize..4, seed in any::<u64>()) {
        let a = DenseMatrix::new(gaussian(rows, cols, seed)).unwrap();
        let cfg = RsvdConfig::new(k, p, seed.rotate_left(7));
        let q = randomized_range_finder(&a, &cfg, None).unwrap().q;
        let gram = q.transpose() * &q;
        let eye = Matrix::identity(q.ncols(), q.ncols());
        prop_assert!(linalg::frobenius(&(gram - eye)) <= 1e-10);
        let err = linalg::frobenius(&(a.as_matrix() - &q * (q.transpose() * a.as_matrix())));
        prop_assert!(err >= linalg::tail_energy(&a, k + p).unwrap() * (1.0 - 1e-12));
    }

    #[test]
    fn symmetry_score_extremes(n in 2usize..16, seed in any::<u64>()) {
        let grid = Arc::new(Grid1D::trapezoid(n, 0.0, 1.0).unwrap());
        let m = gaussian(n, n, seed);
        let sym = IntegralOperator::new(grid.clone(), grid.clone(), &m + m.transpose()).unwrap();
        prop_assert_eq!(sym.symmetry_score().unwrap(), 0.0);
        let anti = IntegralOperator::new(grid.clone(), grid, &m - m.transpose()).unwrap();
        prop_assert!((anti.symmetry_score().unwrap() - std::f64::consts::SQRT_2).abs() <= 1e-14);
    }

    #[test]
    fn matrix_csv_round_trips_bits(rows in 1usize..6, cols in 1usize..6, bits in prop::collection::vec(any::<u64>(), 36)) {
        let m = Matrix::from_fn(rows, cols, |i, j| {
            let v = f64::from_bits(bits[i * 6 + j]);
            if v.is_finite() { v } else { 0.5 }
        });
        let back = io::matrix_from_csv(&io::matrix_to_csv(&m)).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn solver_is_linear(alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed in any::<u64>()) {
        let grid = Arc::new(Grid1D::trapezoid(65, 0.0, 1.0).unwrap());
        let solver = OperatorSpec::new(OperatorPreset::AdvectionDiffusion).build().unwrap().discretize(grid).unwrap();
        let f = gaussian(65, 2, seed);
        let (f1, f2): (Vec<f64>, Vec<f64>) = (f.column(0).iter().copied().collect(), f.column(1).iter().copied().collect());
        let comb: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| alpha * a + beta * b).collect();
        let (u1, u2, uc) = (solver.solve_values(&f1).unwrap(), solver.solve_values(&f2).unwrap(), solver.solve_values(&comb).unwrap());
        let scale = uc.iter().chain(&u1).chain(&u2).fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..65 {
            prop_assert!((uc[i] - alpha * u1[i] - beta * u2[i]).abs() <= 1e-10 * scale.max(1e-300));
        }
    }
}
