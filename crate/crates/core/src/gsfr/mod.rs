//! GSFR correction functions.
//!
//! The left correction function h_l of degree p+1 is fixed by p Sobolev
//! orthogonality rows plus the two boundary conditions h_l(1) = 0 and
//! h_l(-1) = 1. Every entry of the system matrix is linear in the weights
//! I_p = [ι₀ … ι_p], so the matrix is first built symbolically (one rational
//! coefficient per weight) and then evaluated.

mod norm;
mod recovery;

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{self, factorial, pow2, rat, ratio, Rational, RationalMatrix};
use crate::legendre::{derivative_coeffs, integral_dm_dm1, LegendreSeries};

pub use norm::{
    bound_rules, leading_minors_positive, norm_quadratic_form, sobolev_gram, sufficient_bounds,
    BoundRule, StabilityBounds,
};
pub use recovery::{
    esfr3_gradient, esfr3_membership, h3_matrix_symbolic, osfr_correction, osfr_correction_f64,
    osfr_eta, osfr_iota_from_hl, recover_iota, recover_ip_p3, Membership, RecoverySystem,
    MEMBERSHIP_TOL,
};

/// Orders accepted by [`CorrectionParams`].
pub const MIN_ORDER: usize = 2;
pub const MAX_ORDER: usize = 5;

/// Scheme order and Sobolev weights I_p = [ι₀ … ι_p], held exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionParams {
    p: usize,
    iota: Vec<Rational>,
}

impl CorrectionParams {
    pub fn new(p: usize, iota: Vec<Rational>) -> Result<Self> {
        if !(MIN_ORDER..=MAX_ORDER).contains(&p) {
            return Err(Error::UnsupportedOrder(p));
        }
        if iota.len() != p + 1 {
            return Err(Error::invalid(
                "iota",
                format!("expected {} weights for p = {p}, got {}", p + 1, iota.len()),
            ));
        }
        if !iota[0].is_positive() {
            return Err(Error::invalid("iota", "iota_0 must be positive"));
        }
        Ok(Self { p, iota })
    }

    /// Weights from doubles, taken at their exact binary values.
    pub fn from_f64(p: usize, iota: &[f64]) -> Result<Self> {
        let exact = iota
            .iter()
            .map(|&x| exact::from_f64(x).ok_or_else(|| Error::invalid("iota", "non-finite weight")))
            .collect::<Result<Vec<_>>>()?;
        Self::new(p, exact)
    }

    /// Weights from decimal or fraction literals, e.g. `["1", "2.069e-4", "4/4725"]`.
    pub fn parse(p: usize, iota: &[&str]) -> Result<Self> {
        let exact = iota
            .iter()
            .map(|s| {
                exact::parse_rational(s)
                    .ok_or_else(|| Error::invalid("iota", format!("cannot parse `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(p, exact)
    }

    /// I_p = [1, 0, …, 0]: nodal DG.
    pub fn dg(p: usize) -> Result<Self> {
        let mut iota = vec![Rational::zero(); p + 1];
        iota[0] = Rational::one();
        Self::new(p, iota)
    }

    /// I_p = [1, 0, …, 0, ι]: the embedding of the OSFR family.
    pub fn osfr(p: usize, iota_p: Rational) -> Result<Self> {
        let mut iota = vec![Rational::zero(); p + 1];
        iota[0] = Rational::one();
        iota[p] = iota_p;
        Self::new(p, iota)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn iota(&self) -> &[Rational] {
        &self.iota
    }

    pub fn iota_f64(&self) -> Vec<f64> {
        self.iota.iter().map(exact::to_f64).collect()
    }
}

/// A linear form Σ_i c_i ι_i in the Sobolev weights plus a constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearForm {
    pub iota: Vec<Rational>,
    pub constant: Rational,
}

impl LinearForm {
    pub fn zero(p: usize) -> Self {
        Self {
            iota: vec![Rational::zero(); p + 1],
            constant: Rational::zero(),
        }
    }

    pub fn constant(p: usize, c: Rational) -> Self {
        Self {
            constant: c,
            ..Self::zero(p)
        }
    }

    /// Builds a form from integer coefficients, handy for golden tables.
    pub fn from_ints(coeffs: &[i64]) -> Self {
        Self {
            iota: coeffs.iter().map(|&c| rat(c)).collect(),
            constant: Rational::zero(),
        }
    }

    pub fn eval(&self, iota: &[Rational]) -> Rational {
        self.iota
            .iter()
            .zip(iota)
            .fold(self.constant.clone(), |acc, (c, x)| acc + c * x)
    }

    pub fn eval_f64(&self, iota: &[f64]) -> f64 {
        self.iota
            .iter()
            .zip(iota)
            .map(|(c, x)| exact::to_f64(c) * x)
            .sum::<f64>()
            + exact::to_f64(&self.constant)
    }
}

impl fmt::Display for LinearForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        if !self.constant.is_zero() {
            terms.push(self.constant.to_string());
        }
        for (i, c) in self.iota.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let coef = if c.is_one() {
                String::new()
            } else if *c == -Rational::one() {
                "-".to_string()
            } else {
                format!("{c}*")
            };
            terms.push(format!("{coef}i{i}"));
        }
        if terms.is_empty() {
            return write!(f, "0");
        }
        write!(f, "{}", terms.join(" + ").replace("+ -", "- "))
    }
}

/// Scale applied to the Sobolev rows so that the leading ι₀ entries read
/// -ι₀, the normalisation in which these matrices are usually tabulated.
/// The rows are homogeneous, so the scale does not change h_l.
pub fn row_scale() -> Rational {
    ratio(-1, 2)
}

/// (d^i ψ_n/dξ^i · d^i ψ_m/dξ^i) evaluated between -1 and 1, written as the
/// closed factorial ratio. Terms with i > n or i > m vanish.
pub fn boundary_term(i: usize, m: usize, n: usize) -> Rational {
    if i > n || i > m {
        return Rational::zero();
    }
    if (n + m) % 2 == 0 {
        return Rational::zero();
    }
    let num = factorial(n + i) * factorial(m + i) * 2u32;
    let den = pow2(2 * i) * factorial(i) * factorial(i) * factorial(n - i) * factorial(m - i);
    Rational::new(num, den)
}

/// Unscaled Sobolev row entry for test index m and coefficient index n.
fn sobolev_entry(p: usize, m: usize, n: usize) -> LinearForm {
    let mut form = LinearForm::zero(p);
    for i in 0..=p {
        let mut c = integral_dm_dm1(i, n, m);
        if i >= 1 {
            c -= boundary_term(i, m, n);
        }
        form.iota[i] = c;
    }
    form
}

/// The (p+2)×(p+2) system as linear forms in I_p.
///
/// Rows 0..p-1 are the Sobolev conditions for m = 1..p; row p is h_l(1) = 0
/// and row p+1 is h_l(-1) = 1.
pub fn assemble_lp_symbolic(p: usize) -> Vec<Vec<LinearForm>> {
    let n_cols = p + 2;
    let scale = row_scale();
    let mut rows = Vec::with_capacity(n_cols);
    for m in 1..=p {
        rows.push(
            (0..n_cols)
                .map(|n| {
                    let mut f = sobolev_entry(p, m, n);
                    for c in &mut f.iota {
                        *c *= &scale;
                    }
                    f
                })
                .collect(),
        );
    }
    rows.push((0..n_cols).map(|_| LinearForm::constant(p, Rational::one())).collect());
    rows.push(
        (0..n_cols)
            .map(|n| LinearForm::constant(p, if n % 2 == 0 { rat(1) } else { rat(-1) }))
            .collect(),
    );
    rows
}

pub fn assemble_lp(params: &CorrectionParams) -> RationalMatrix {
    let forms = assemble_lp_symbolic(params.p);
    RationalMatrix::from_rows(
        forms
            .iter()
            .map(|row| row.iter().map(|f| f.eval(&params.iota)).collect())
            .collect(),
    )
}

/// Right-hand side b_l = [0, …, 0, 1].
pub fn rhs_left(p: usize) -> Vec<Rational> {
    let mut b = vec![Rational::zero(); p + 2];
    b[p + 1] = Rational::one();
    b
}

/// Left/right correction functions and their gradients.
///
/// `h_l_exact` keeps the exact Legendre coefficients; the float series are
/// derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionPair {
    pub p: usize,
    pub h_l_exact: Vec<Rational>,
    pub h_l: LegendreSeries,
    pub h_r: LegendreSeries,
    pub g_l: LegendreSeries,
    pub g_r: LegendreSeries,
}

impl CorrectionPair {
    /// Completes a pair from the exact left function using h̃_r = Λ h̃_l.
    pub fn from_left(p: usize, h_l_exact: Vec<Rational>) -> Self {
        assert_eq!(h_l_exact.len(), p + 2, "h_l must have order p+1");
        let h_r_exact = reflect(&h_l_exact);
        let g_l_exact = derivative_coeffs(&h_l_exact);
        let g_r_exact = derivative_coeffs(&h_r_exact);
        Self {
            p,
            h_l: LegendreSeries::from_exact(&h_l_exact),
            h_r: LegendreSeries::from_exact(&h_r_exact),
            g_l: LegendreSeries::from_exact(&g_l_exact),
            g_r: LegendreSeries::from_exact(&g_r_exact),
            h_l_exact,
        }
    }

    pub fn h_r_exact(&self) -> Vec<Rational> {
        reflect(&self.h_l_exact)
    }

    pub fn g_l_exact(&self) -> Vec<Rational> {
        derivative_coeffs(&self.h_l_exact)
    }

    pub fn g_r_exact(&self) -> Vec<Rational> {
        derivative_coeffs(&self.h_r_exact())
    }
}

/// Λ = diag(1, -1, 1, …): coefficient map of ξ → -ξ.
pub fn reflect(c: &[Rational]) -> Vec<Rational> {
    c.iter()
        .enumerate()
        .map(|(i, x)| if i % 2 == 1 { -x.clone() } else { x.clone() })
        .collect()
}

/// Solves L_p h̃_l = b_l exactly.
pub fn solve_correction(params: &CorrectionParams) -> Result<CorrectionPair> {
    let l = assemble_lp(params);
    match l.solve(&rhs_left(params.p)) {
        Some(h) => Ok(CorrectionPair::from_left(params.p, h)),
        None => Err(Error::SingularSystem {
            pivot_ratio: exact::lu_pivot_ratio(&l.to_f64()),
        }),
    }
}

/// Exchange format for correction functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionDoc {
    pub p: usize,
    pub iota: Vec<f64>,
    pub h_l: Vec<f64>,
    pub h_r: Vec<f64>,
    pub g_l: Vec<f64>,
    pub g_r: Vec<f64>,
    /// Exact h̃_l as rational literals.
    pub h_l_exact: Vec<String>,
}

impl CorrectionDoc {
    pub fn new(iota: Vec<f64>, pair: &CorrectionPair) -> Self {
        Self {
            p: pair.p,
            iota,
            h_l: pair.h_l.coeffs.clone(),
            h_r: pair.h_r.coeffs.clone(),
            g_l: pair.g_l.coeffs.clone(),
            g_r: pair.g_r.coeffs.clone(),
            h_l_exact: pair.h_l_exact.iter().map(|r| r.to_string()).collect(),
        }
    }

    /// Rebuilds the pair, preferring the exact coefficients when present.
    pub fn to_pair(&self) -> Result<CorrectionPair> {
        let exact = if self.h_l_exact.len() == self.p + 2 {
            self.h_l_exact
                .iter()
                .map(|s| {
                    exact::parse_rational(s)
                        .ok_or_else(|| Error::invalid("h_l_exact", format!("cannot parse `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?
        } else if self.h_l.len() == self.p + 2 {
            self.h_l
                .iter()
                .map(|&x| exact::from_f64(x).ok_or_else(|| Error::invalid("h_l", "non-finite")))
                .collect::<Result<Vec<_>>>()?
        } else {
            return Err(Error::invalid("h_l", "length must be p + 2"));
        };
        Ok(CorrectionPair::from_left(self.p, exact))
    }
}
