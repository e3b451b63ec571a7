/// Values `P_0(s) .. P_{n-1}(s)` of the Jacobi polynomials `P_j^{(alpha, beta)}`
/// by the three-term recurrence.
pub fn jacobi_polynomials(n: usize, alpha: f64, beta: f64, s: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(1.0);
    if n == 1 {
        return out;
    }
    out.push(0.5 * (alpha - beta) + 0.5 * (alpha + beta + 2.0) * s);
    let ab = alpha + beta;
    for k in 2..n {
        let kf = k as f64;
        let c = 2.0 * kf + ab;
        let a1 = 2.0 * kf * (kf + ab) * (c - 2.0);
        let a2 = (c - 1.0) * (alpha * alpha - beta * beta);
        let a3 = (c - 2.0) * (c - 1.0) * c;
        let a4 = 2.0 * (kf + alpha - 1.0) * (kf + beta - 1.0) * c;
        let next = ((a2 + a3 * s) * out[k - 1] - a4 * out[k - 2]) / a1;
        out.push(next);
    }
    out
}

/// Boundary weight `(1 - s)^{alpha/2} (1 + s)^{beta/2}`; exactly zero at
/// `s = +-1` for positive exponents.
pub fn boundary_weight(alpha: f64, beta: f64, s: f64) -> f64 {
    (1.0 - s).max(0.0).powf(0.5 * alpha) * (1.0 + s).max(0.0).powf(0.5 * beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn low_degree_closed_forms() {
        // Legendre case
        let p = jacobi_polynomials(4, 0.0, 0.0, 0.3);
        assert!((p[2] - 0.5 * (3.0 * 0.09 - 1.0)).abs() < 1e-15);
        assert!((p[3] - 0.5 * (5.0 * 0.027 - 3.0 * 0.3)).abs() < 1e-15);
        // P_1^{(1,1)}(s) = 2s, P_2^{(1,1)}(s) = (15 s^2 - 3) / 4
        let p = jacobi_polynomials(3, 1.0, 1.0, 0.4);
        assert!((p[1] - 0.8).abs() < 1e-15);
        assert!((p[2] - (15.0 * 0.16 - 3.0) / 4.0).abs() < 1e-14);
    }

    #[test]
    fn endpoint_value() {
        // P_n^{(a,b)}(1) = binom(n + a, n)
        let p = jacobi_polynomials(6, 1.5, 0.5, 1.0);
        let mut expected = 1.0;
        for (n, v) in p.iter().enumerate() {
            if n > 0 {
                expected *= (n as f64 + 1.5) / n as f64;
            }
            assert!((v - expected).abs() < 1e-12 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn weight_vanishes_at_ends() {
        assert_eq!(boundary_weight(1.0, 1.0, 1.0), 0.0);
        assert_eq!(boundary_weight(0.5, 2.0, -1.0), 0.0);
        assert!((boundary_weight(2.0, 2.0, 0.0) - 1.0).abs() < 1e-15);
    }
}
