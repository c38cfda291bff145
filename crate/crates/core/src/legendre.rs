//! Legendre polynomials on [-1, 1]: evaluation, exact combinatorial
//! identities, series algebra and Gauss-type quadrature rules.

use std::ops::{Add, Mul};

use num_bigint::BigInt;
use num_traits::{FromPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{factorial, pow2, ratio, Rational, RationalMatrix};

/// Interval end point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn xi(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

/// ψ_n(ξ) by the Bonnet recurrence.
pub fn eval_legendre(n: usize, xi: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, xi);
    if n == 0 {
        return prev;
    }
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0) * xi * cur - k * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// ψ_0(ξ) … ψ_n(ξ).
pub fn legendre_values(n: usize, xi: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(n + 1);
    v.push(1.0);
    if n >= 1 {
        v.push(xi);
    }
    for k in 1..n {
        let kf = k as f64;
        v.push(((2.0 * kf + 1.0) * xi * v[k] - kf * v[k - 1]) / (kf + 1.0));
    }
    v
}

/// ψ_0'(ξ) … ψ_n'(ξ), using ψ'_{k+1} = ψ'_{k-1} + (2k+1) ψ_k.
pub fn legendre_derivative_values(n: usize, xi: f64) -> Vec<f64> {
    let p = legendre_values(n, xi);
    let mut d = vec![0.0; n + 1];
    if n >= 1 {
        d[1] = 1.0;
    }
    for k in 1..n {
        d[k + 1] = d[k - 1] + (2 * k + 1) as f64 * p[k];
    }
    d
}

/// n-th derivative of ψ_j at ξ = ±1, exactly.
///
/// Zero when j < n.
pub fn endpoint_derivative(n: usize, j: usize, side: Side) -> Rational {
    if j < n {
        return Rational::zero();
    }
    let mag = Rational::new(
        factorial(j + n),
        pow2(n) * factorial(n) * factorial(j - n),
    );
    if side == Side::Left && (j - n) % 2 == 1 {
        -mag
    } else {
        mag
    }
}

/// Monomial coefficient b_i(m, n) of ξ^{n-m-2i} in the m-th derivative of ψ_n.
pub fn legendre_b(i: usize, m: usize, n: usize) -> Result<Rational> {
    if n < m + 2 * i {
        return Err(Error::UndefinedCoefficient { i, m, n });
    }
    let num = factorial(2 * (n - i));
    let den = pow2(n) * factorial(n - m - 2 * i) * factorial(n - i) * factorial(i);
    let v = Rational::new(num, den);
    Ok(if i % 2 == 1 { -v } else { v })
}

/// ∫₋₁¹ ψ_n^{(m)} ψ_k^{(m+1)} dξ from the double sum over b coefficients.
pub fn integral_dm_dm1(m: usize, n: usize, k: usize) -> Rational {
    let mut total = Rational::zero();
    if n < m || k < m + 1 {
        return total;
    }
    let two = Rational::from_integer(BigInt::from(2));
    for i in 0..=(n - m) / 2 {
        let bi = legendre_b(i, m, n).expect("index inside summation range");
        for j in 0..=(k - m - 1) / 2 {
            // d ≥ 1 inside the summation limits
            let d = n + k - 2 * (m + i + j);
            if d % 2 == 1 {
                let bj = legendre_b(j, m + 1, k).expect("index inside summation range");
                total += &bi * &bj * &two / Rational::from_integer(BigInt::from(d));
            }
        }
    }
    total
}

/// Monomial coefficients (index = power) of the a-th derivative of ψ_n.
pub fn monomial_coeffs(a: usize, n: usize) -> Vec<Rational> {
    if n < a {
        return vec![Rational::zero()];
    }
    let mut c = vec![Rational::zero(); n - a + 1];
    for i in 0..=(n - a) / 2 {
        c[n - a - 2 * i] = legendre_b(i, a, n).expect("index inside summation range");
    }
    c
}

/// ∫₋₁¹ ψ_n^{(a)} ψ_k^{(b)} dξ exactly.
pub fn integral_derivative_product(n: usize, a: usize, k: usize, b: usize) -> Rational {
    let u = monomial_coeffs(a, n);
    let v = monomial_coeffs(b, k);
    let mut total = Rational::zero();
    for (pu, cu) in u.iter().enumerate() {
        if cu.is_zero() {
            continue;
        }
        for (pv, cv) in v.iter().enumerate() {
            if cv.is_zero() || (pu + pv) % 2 == 1 {
                continue;
            }
            total += cu * cv * ratio(2, (pu + pv + 1) as i64);
        }
    }
    total
}

/// Legendre mass matrix, diag(2/(2j+1)).
pub fn mass_matrix(p: usize) -> RationalMatrix {
    let mut m = RationalMatrix::zeros(p + 1, p + 1);
    for j in 0..=p {
        m[(j, j)] = ratio(2, 2 * j as i64 + 1);
    }
    m
}

/// Coefficients of the derivative of Σ a_n ψ_n, one order lower.
///
/// Uses ψ_n' = Σ_{k<n, n-k odd} (2k+1) ψ_k.
pub fn derivative_coeffs<T>(a: &[T]) -> Vec<T>
where
    T: Clone + Zero + FromPrimitive + Add<Output = T> + Mul<Output = T>,
{
    if a.len() <= 1 {
        return vec![T::zero()];
    }
    let order = a.len() - 1;
    (0..order)
        .map(|k| {
            let s = (k + 1..=order)
                .step_by(2)
                .fold(T::zero(), |acc, n| acc + a[n].clone());
            T::from_usize(2 * k + 1).expect("small integer") * s
        })
        .collect()
}

/// Polynomial in the Legendre basis; `coeffs[i]` multiplies ψ_i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LegendreSeries {
    pub coeffs: Vec<f64>,
}

impl LegendreSeries {
    pub fn new(coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            return Self { coeffs: vec![0.0] };
        }
        Self { coeffs }
    }

    pub fn from_exact(coeffs: &[Rational]) -> Self {
        Self::new(coeffs.iter().map(crate::exact::to_f64).collect())
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, xi: f64) -> f64 {
        legendre_values(self.order(), xi)
            .iter()
            .zip(&self.coeffs)
            .map(|(p, c)| p * c)
            .sum()
    }

    pub fn derivative(&self) -> LegendreSeries {
        series_derivative(self)
    }
}

pub fn series_derivative(s: &LegendreSeries) -> LegendreSeries {
    LegendreSeries::new(derivative_coeffs(&s.coeffs))
}

/// Gauss–Legendre nodes and weights, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one Gauss point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut xi = -(std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let p = eval_legendre(n, xi);
            let dp = legendre_derivative_values(n, xi)[n];
            let step = p / dp;
            xi -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        let dp = legendre_derivative_values(n, xi)[n];
        x[i] = xi;
        w[i] = 2.0 / ((1.0 - xi * xi) * dp * dp);
    }
    (x, w)
}

/// Gauss–Lobatto–Legendre nodes and weights with n ≥ 2 points, ascending.
pub fn gauss_lobatto(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "Lobatto rules need both end points");
    let q = n - 1;
    let mut x = vec![0.0; n];
    x[0] = -1.0;
    x[q] = 1.0;
    for (i, xv) in x.iter_mut().enumerate().take(q).skip(1) {
        let mut xi = -(std::f64::consts::PI * i as f64 / q as f64).cos();
        for _ in 0..100 {
            let p = eval_legendre(q, xi);
            let dp = legendre_derivative_values(q, xi)[q];
            // (1-ξ²)ψ'' = 2ξψ' - q(q+1)ψ
            let ddp = (2.0 * xi * dp - (q * (q + 1)) as f64 * p) / (1.0 - xi * xi);
            let step = dp / ddp;
            xi -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        *xv = xi;
    }
    let w = x
        .iter()
        .map(|&xi| {
            let p = eval_legendre(q, xi);
            2.0 / ((q * (q + 1)) as f64 * p * p)
        })
        .collect();
    (x, w)
}

/// Σ_i f(ξ_i) w_i with an n-point Gauss rule.
pub fn gauss_integrate(n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gauss_legendre(n);
    x.iter().zip(&w).map(|(&xi, &wi)| wi * f(xi)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{rat, to_f64};
    use proptest::prelude::*;

    fn psi_derivative(n: usize, m: usize) -> LegendreSeries {
        let mut c = vec![0.0; n + 1];
        c[n] = 1.0;
        let mut s = LegendreSeries::new(c);
        for _ in 0..m {
            s = s.derivative();
        }
        s
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(eval_legendre(0, 0.3), 1.0);
        assert_eq!(eval_legendre(1, 0.5), 0.5);
        assert_eq!(eval_legendre(2, 1.0), 1.0);
        let x = 0.37;
        assert!((eval_legendre(3, x) - (5.0 * x * x * x - 3.0 * x) / 2.0).abs() < 1e-15);
        for n in 0..10 {
            assert!((eval_legendre(n, 1.0) - 1.0).abs() < 1e-14);
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert!((eval_legendre(n, -1.0) - sign).abs() < 1e-14);
        }
    }

    #[test]
    fn endpoint_derivative_examples() {
        assert_eq!(endpoint_derivative(0, 3, Side::Right), rat(1));
        assert_eq!(endpoint_derivative(1, 1, Side::Left), rat(1));
        assert_eq!(endpoint_derivative(2, 3, Side::Right), rat(15));
        assert_eq!(endpoint_derivative(2, 3, Side::Left), rat(-15));
        assert_eq!(endpoint_derivative(4, 3, Side::Right), rat(0));
    }

    #[test]
    fn endpoint_derivative_matches_repeated_series_derivative() {
        for j in 0..=8 {
            for n in 0..=j {
                let d = psi_derivative(j, n);
                for side in [Side::Left, Side::Right] {
                    let exact = to_f64(&endpoint_derivative(n, j, side));
                    let num = d.eval(side.xi());
                    assert!(
                        (exact - num).abs() <= 1e-9 * exact.abs().max(1.0),
                        "n={n} j={j} {side:?}: {exact} vs {num}"
                    );
                }
            }
        }
    }

    #[test]
    fn legendre_b_examples() {
        assert_eq!(legendre_b(0, 0, 0).unwrap(), rat(1));
        assert_eq!(legendre_b(0, 0, 1).unwrap(), rat(1));
        assert_eq!(legendre_b(1, 0, 2).unwrap(), ratio(-1, 2));
        assert!(matches!(
            legendre_b(1, 1, 2),
            Err(Error::UndefinedCoefficient { .. })
        ));
    }

    #[test]
    fn miller_integral_examples() {
        assert_eq!(integral_dm_dm1(0, 1, 0), rat(0));
        assert_eq!(integral_dm_dm1(0, 0, 1), rat(2));
        assert_eq!(integral_dm_dm1(1, 2, 3), rat(30));
    }

    #[test]
    fn miller_integral_parity() {
        for m in 0..=6usize {
            for n in 0..=6usize {
                for k in 0..=6usize {
                    // the integrand has parity (-1)^(n+k-1): odd when n + k is even
                    if (n + k) % 2 == 0 {
                        assert!(integral_dm_dm1(m, n, k).is_zero(), "{m} {n} {k}");
                    }
                }
            }
        }
    }

    #[test]
    fn general_product_agrees_with_miller_form() {
        for m in 0..=5 {
            for n in 0..=6 {
                for k in 0..=6 {
                    assert_eq!(
                        integral_derivative_product(n, m, k, m + 1),
                        integral_dm_dm1(m, n, k)
                    );
                }
            }
        }
    }

    #[test]
    fn mass_matrix_examples() {
        let m0 = mass_matrix(0);
        assert_eq!(m0[(0, 0)], rat(2));
        let m2 = mass_matrix(2);
        assert_eq!(
            (0..3).map(|j| m2[(j, j)].clone()).collect::<Vec<_>>(),
            vec![rat(2), ratio(2, 3), ratio(2, 5)]
        );
        assert_eq!(mass_matrix(1)[(0, 1)], rat(0));
    }

    #[test]
    fn orthogonality_against_quadrature() {
        let m = mass_matrix(8);
        for i in 0..=8 {
            for j in 0..=8 {
                let q = gauss_integrate(12, |x| eval_legendre(i, x) * eval_legendre(j, x));
                assert!((q - to_f64(&m[(i, j)])).abs() < 1e-12, "{i} {j}");
                assert_eq!(integral_derivative_product(i, 0, j, 0), m[(i, j)]);
            }
        }
    }

    #[test]
    fn series_derivative_examples() {
        assert_eq!(LegendreSeries::new(vec![0.0, 1.0]).derivative().coeffs, vec![1.0]);
        assert_eq!(
            LegendreSeries::new(vec![0.0, 0.0, 1.0]).derivative().coeffs,
            vec![0.0, 3.0]
        );
        assert_eq!(LegendreSeries::new(vec![4.0]).derivative().coeffs, vec![0.0]);
        assert_eq!(
            LegendreSeries::new(vec![2.5, 0.0, 0.0]).derivative().coeffs,
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn exact_derivative_coeffs() {
        let d = derivative_coeffs(&[rat(0), rat(0), rat(0), rat(1)]);
        assert_eq!(d, vec![rat(1), rat(0), rat(5)]);
    }

    #[test]
    fn quadrature_rules_integrate_polynomials() {
        for n in 1..=10 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            for deg in 0..2 * n {
                let exact = if deg % 2 == 0 { 2.0 / (deg + 1) as f64 } else { 0.0 };
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                assert!((q - exact).abs() < 1e-13, "gauss n={n} deg={deg}");
            }
        }
        for n in 2..=10 {
            let (x, w) = gauss_lobatto(n);
            assert_eq!(x[0], -1.0);
            assert_eq!(x[n - 1], 1.0);
            assert!(x.windows(2).all(|p| p[0] < p[1]));
            for deg in 0..(2 * n - 2) {
                let exact = if deg % 2 == 0 { 2.0 / (deg + 1) as f64 } else { 0.0 };
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                assert!((q - exact).abs() < 1e-13, "lobatto n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn monomial_coefficients_of_psi3() {
        // ψ₃ = (5ξ³ - 3ξ)/2
        assert_eq!(
            monomial_coeffs(0, 3),
            vec![rat(0), ratio(-3, 2), rat(0), ratio(5, 2)]
        );
        assert_eq!(monomial_coeffs(4, 3), vec![rat(0)]);
    }

    proptest! {
        #[test]
        fn series_derivative_matches_finite_difference(
            coeffs in proptest::collection::vec(-2.0f64..2.0, 2..9),
            xi in -0.95f64..0.95,
        ) {
            let s = LegendreSeries::new(coeffs);
            let h = 1e-2;
            let f = |d: f64| s.eval(xi + d * h);
            let fd = (-f(-3.0) + 9.0 * f(-2.0) - 45.0 * f(-1.0) + 45.0 * f(1.0) - 9.0 * f(2.0)
                + f(3.0))
                / (60.0 * h);
            prop_assert!((s.derivative().eval(xi) - fd).abs() < 1e-8);
            prop_assert_eq!(s.derivative().order(), s.order() - 1);
        }

        #[test]
        fn derivative_values_match_series(n in 0usize..9, xi in -1.0f64..1.0) {
            let mut c = vec![0.0; n + 1];
            c[n] = 1.0;
            let d = LegendreSeries::new(c).derivative().eval(xi);
            prop_assert!((legendre_derivative_values(n, xi)[n] - d).abs() < 1e-10);
        }
    }
}
