//! The broken Sobolev norm Σ ι_i ∫ (u^{(i)})² dξ and sufficient conditions on
//! I_p for it to be positive definite.

use num_traits::{Signed, Zero};
use serde::Serialize;

use super::CorrectionParams;
use crate::error::{Error, Result};
use crate::exact::{self, rat, ratio, Rational, RationalMatrix};
use crate::legendre::{integral_derivative_product, LegendreSeries};

/// Gram matrix G[j][k] = Σ_i ι_i ∫ ψ_j^{(i)} ψ_k^{(i)} dξ, exactly.
pub fn sobolev_gram(params: &CorrectionParams) -> RationalMatrix {
    let p = params.p();
    let mut g = RationalMatrix::zeros(p + 1, p + 1);
    for (i, w) in params.iota().iter().enumerate() {
        if w.is_zero() {
            continue;
        }
        for j in 0..=p {
            for k in 0..=p {
                g[(j, k)] += w * integral_derivative_product(j, i, k, i);
            }
        }
    }
    g
}

/// ‖u‖² in the weighted Sobolev norm. The coefficients of `u` are taken at
/// their exact binary values and the form is evaluated in rationals.
pub fn norm_quadratic_form(params: &CorrectionParams, u: &LegendreSeries) -> Result<f64> {
    let p = params.p();
    if u.order() > p {
        return Err(Error::invalid(
            "u",
            format!("series of order {} exceeds p = {p}", u.order()),
        ));
    }
    let mut coeffs = vec![Rational::zero(); p + 1];
    for (c, &x) in coeffs.iter_mut().zip(&u.coeffs) {
        *c = exact::from_f64(x).ok_or_else(|| Error::invalid("u", "non-finite coefficient"))?;
    }
    let g = sobolev_gram(params);
    let gu = g.mul_vec(&coeffs);
    let q = coeffs
        .iter()
        .zip(&gu)
        .fold(Rational::zero(), |acc, (a, b)| acc + a * b);
    Ok(exact::to_f64(&q))
}

/// Lower bound on ι_index: ι_index > -(Σ_j coeffs[j] ι_j) / divisor, or ≥
/// when `strict` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRule {
    pub index: usize,
    pub coeffs: Vec<Rational>,
    pub divisor: Rational,
    pub strict: bool,
}

impl BoundRule {
    fn new(index: usize, coeffs: Vec<Rational>, divisor: i64, strict: bool) -> Self {
        Self {
            index,
            coeffs,
            divisor: rat(divisor),
            strict,
        }
    }

    pub fn lower(&self, iota: &[Rational]) -> Rational {
        let s = self
            .coeffs
            .iter()
            .zip(iota)
            .fold(Rational::zero(), |acc, (c, x)| acc + c * x);
        -s / &self.divisor
    }

    pub fn lower_f64(&self, iota: &[f64]) -> f64 {
        let s: f64 = self
            .coeffs
            .iter()
            .zip(iota)
            .map(|(c, x)| exact::to_f64(c) * x)
            .sum();
        -s / exact::to_f64(&self.divisor)
    }

    pub fn holds(&self, iota: &[Rational]) -> bool {
        let lo = self.lower(iota);
        let x = &iota[self.index];
        if self.strict {
            *x > lo
        } else {
            *x >= lo
        }
    }
}

/// Component-wise sufficient bounds for p ∈ {2, 3, 4}.
///
/// Each bound only involves lower-index weights, so a point can be built
/// inside the region one component at a time.
pub fn bound_rules(p: usize) -> Result<Vec<BoundRule>> {
    let r = |v: &[(i64, i64)]| v.iter().map(|&(n, d)| ratio(n, d)).collect::<Vec<_>>();
    let rules = match p {
        2 => vec![
            BoundRule::new(0, vec![], 1, true),
            BoundRule::new(1, r(&[(2, 3)]), 2, true),
            BoundRule::new(2, r(&[(2, 5), (6, 1)]), 18, true),
        ],
        3 => vec![
            BoundRule::new(0, vec![], 1, true),
            BoundRule::new(1, r(&[(0, 1)]), 1, false),
            BoundRule::new(2, r(&[(2, 5), (6, 1)]), 18, true),
            BoundRule::new(3, r(&[(2, 7), (8, 1), (150, 1)]), 450, true),
        ],
        4 => vec![
            BoundRule::new(0, vec![], 1, true),
            BoundRule::new(1, r(&[(0, 1)]), 1, false),
            BoundRule::new(2, r(&[(0, 1), (0, 1)]), 1, false),
            BoundRule::new(3, r(&[(2, 7), (8, 1), (150, 1)]), 450, true),
            BoundRule::new(4, r(&[(2, 9), (11, 1), (290, 1), (7350, 1)]), 22050, true),
        ],
        _ => return Err(Error::UnsupportedOrder(p)),
    };
    Ok(rules)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityBounds {
    pub lower: Vec<f64>,
    /// Whether each bound is strict.
    pub strict: Vec<bool>,
    pub satisfied: bool,
    /// ι_i minus its lower bound.
    pub margins: Vec<f64>,
    /// Whether the Sobolev Gram matrix itself is positive definite. The
    /// component bounds are sufficient, not necessary, so this can be true
    /// while `satisfied` is false.
    pub positive_definite: bool,
}

pub fn sufficient_bounds(params: &CorrectionParams) -> Result<StabilityBounds> {
    let rules = bound_rules(params.p())?;
    let iota = params.iota();
    let mut lower = Vec::with_capacity(rules.len());
    let mut margins = Vec::with_capacity(rules.len());
    let mut satisfied = true;
    for rule in &rules {
        let lo = rule.lower(iota);
        margins.push(exact::to_f64(&(&iota[rule.index] - &lo)));
        lower.push(exact::to_f64(&lo));
        satisfied &= rule.holds(iota);
    }
    Ok(StabilityBounds {
        lower,
        strict: rules.iter().map(|r| r.strict).collect(),
        satisfied,
        margins,
        positive_definite: leading_minors_positive(&sobolev_gram(params)),
    })
}

/// Exact positive-definiteness test for a symmetric rational matrix
/// (Sylvester's criterion).
pub fn leading_minors_positive(g: &RationalMatrix) -> bool {
    let n = g.rows();
    let mut a: Vec<Vec<Rational>> = (0..n).map(|i| g.row(i).to_vec()).collect();
    // Symmetric Gaussian elimination without pivoting: the pivots are the
    // ratios of consecutive leading minors.
    for k in 0..n {
        if !a[k][k].is_positive() {
            return false;
        }
        for i in k + 1..n {
            let f = &a[i][k] / &a[k][k];
            for j in k..n {
                let t = &f * &a[k][j];
                a[i][j] -= t;
            }
        }
    }
    true
}
