//! Conversions between GSFR and the OSFR / ESFR parameterisations, and
//! recovery of I_p from a given left correction function.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use super::{assemble_lp_symbolic, CorrectionPair};
use crate::error::{Error, Result};
use crate::exact::{self, factorial, pow2, Rational};
use crate::legendre::LegendreSeries;

/// Default absolute coefficient tolerance for membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Outcome of testing whether a function belongs to a sub-family.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Membership<T> {
    Member { params: T },
    NotMember { max_deviation: f64 },
}

impl<T> Membership<T> {
    pub fn is_member(&self) -> bool {
        matches!(self, Membership::Member { .. })
    }

    pub fn params(&self) -> Option<&T> {
        match self {
            Membership::Member { params } => Some(params),
            Membership::NotMember { .. } => None,
        }
    }
}

/// (2p+1)(a_p p!)² with a_p = (2p)!/(2^p (p!)²).
fn osfr_scale(p: usize) -> Rational {
    let a_p_pfact = Rational::new(factorial(2 * p), pow2(p) * factorial(p));
    Rational::from_integer(BigInt::from(2 * p + 1)) * &a_p_pfact * &a_p_pfact
}

/// η_p = ι (2p+1)(a_p p!)².
pub fn osfr_eta(p: usize, iota: &Rational) -> Rational {
    iota * osfr_scale(p)
}

/// The one-parameter OSFR correction pair,
/// h_l = ((-1)^p / 2) [ψ_p - (η ψ_{p-1} + ψ_{p+1}) / (1 + η)].
pub fn osfr_correction(p: usize, iota: &Rational) -> Result<CorrectionPair> {
    if p == 0 {
        return Err(Error::UnsupportedOrder(p));
    }
    let eta = osfr_eta(p, iota);
    let denom = Rational::one() + &eta;
    if denom.is_zero() {
        return Err(Error::SingularEta);
    }
    let half = Rational::new(BigInt::from(if p % 2 == 0 { 1 } else { -1 }), BigInt::from(2));
    let mut h = vec![Rational::zero(); p + 2];
    h[p] = half.clone();
    h[p - 1] = -&half * &eta / &denom;
    h[p + 1] = -&half / &denom;
    Ok(CorrectionPair::from_left(p, h))
}

pub fn osfr_correction_f64(p: usize, iota: f64) -> Result<CorrectionPair> {
    let iota = exact::from_f64(iota).ok_or_else(|| Error::invalid("iota", "non-finite"))?;
    osfr_correction(p, &iota)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check_order(name: &str, s: &LegendreSeries, order: usize) -> Result<()> {
    if s.order() != order {
        return Err(Error::invalid(
            name,
            format!("expected a series of order {order}, got {}", s.order()),
        ));
    }
    Ok(())
}

/// Equivalent OSFR ι of an order-(p+1) left correction function, if any.
///
/// ι is read off h̃_{p+1}; the function is a member only if the OSFR pair
/// rebuilt from that ι reproduces every coefficient within `tol`.
pub fn osfr_iota_from_hl(p: usize, h_l: &LegendreSeries, tol: f64) -> Result<Membership<f64>> {
    check_order("h_l", h_l, p + 1)?;
    let top = h_l.coeffs[p + 1];
    if top == 0.0 {
        return Err(Error::DegenerateCoefficient(format!("h_l[{}] = 0", p + 1)));
    }
    let sign = if (p + 1) % 2 == 0 { 1.0 } else { -1.0 };
    let iota = (sign / (2.0 * top) - 1.0) / exact::to_f64(&osfr_scale(p));
    let rebuilt = match osfr_correction_f64(p, iota) {
        Ok(pair) => pair,
        Err(Error::SingularEta) => return Ok(Membership::NotMember { max_deviation: f64::INFINITY }),
        Err(e) => return Err(e),
    };
    let dev = max_abs_diff(&rebuilt.h_l.coeffs, &h_l.coeffs);
    Ok(if dev <= tol {
        Membership::Member { params: iota }
    } else {
        Membership::NotMember { max_deviation: dev }
    })
}

/// ESFR p = 3 correction gradient g̃_l in terms of (κ₀, κ₁):
/// -[1/2, 3(21κ₀+35κ₁+6)/υ, 5/(5κ₁+2), 21(5κ₁+2)/υ] with υ = 175κ₁² - 42κ₀ - 12.
pub fn esfr3_gradient(kappa0: f64, kappa1: f64) -> Result<LegendreSeries> {
    let upsilon = 175.0 * kappa1 * kappa1 - 42.0 * kappa0 - 12.0;
    let upsilon_scale = 175.0 * kappa1 * kappa1 + 42.0 * kappa0.abs() + 12.0;
    if upsilon.abs() <= f64::EPSILON * upsilon_scale {
        return Err(Error::SingularDenominator("175 k1^2 - 42 k0 - 12 = 0"));
    }
    let d = 5.0 * kappa1 + 2.0;
    if d.abs() <= f64::EPSILON * (5.0 * kappa1.abs() + 2.0) {
        return Err(Error::SingularDenominator("5 k1 + 2 = 0"));
    }
    Ok(LegendreSeries::new(vec![
        -0.5,
        -3.0 * (21.0 * kappa0 + 35.0 * kappa1 + 6.0) / upsilon,
        -5.0 / d,
        -21.0 * d / upsilon,
    ]))
}

/// ESFR weights (κ₀, κ₁) reproducing an order-3 gradient, if any.
///
/// κ₁ comes from g̃₂ and κ₀ from g̃₁ (or g̃₃); membership additionally
/// requires the remaining relation, checked by rebuilding the ESFR gradient
/// and comparing all coefficients within `tol`.
pub fn esfr3_membership(g_l: &LegendreSeries, tol: f64) -> Result<Membership<(f64, f64)>> {
    check_order("g_l", g_l, 3)?;
    let g = &g_l.coeffs;
    if g[2] == 0.0 {
        return Err(Error::DegenerateCoefficient("g_l[2] = 0".into()));
    }
    let kappa1 = -(1.0 / g[2] + 0.4);
    // κ₀ follows from either g̃₁ or g̃₃. The g̃₁ route breaks down at g̃₁ = 3/2
    // (the DG gradient), so take whichever denominator is larger.
    let den1 = 42.0 * g[1] - 63.0;
    let den3 = 42.0 * g[3];
    let kappa0 = if den1.abs() >= den3.abs() && den1 != 0.0 {
        (175.0 * kappa1 * kappa1 * g[1] + 105.0 * kappa1 - 12.0 * g[1] + 18.0) / den1
    } else if den3 != 0.0 {
        (175.0 * kappa1 * kappa1 * g[3] + 105.0 * kappa1 + 42.0 - 12.0 * g[3]) / den3
    } else {
        return Err(Error::DegenerateCoefficient("42 g_l[1] - 63 = 0 and g_l[3] = 0".into()));
    };
    let rebuilt = match esfr3_gradient(kappa0, kappa1) {
        Ok(s) => s,
        Err(Error::SingularDenominator(_)) => {
            return Ok(Membership::NotMember { max_deviation: f64::INFINITY })
        }
        Err(e) => return Err(e),
    };
    let dev = max_abs_diff(&rebuilt.coeffs, g);
    Ok(if dev <= tol {
        Membership::Member { params: (kappa0, kappa1) }
    } else {
        Membership::NotMember { max_deviation: dev }
    })
}

/// Linear system for I_p given h_l, with ι₀ = 1.
///
/// Row r reads Σ_i matrix[r][i-1]·h · ι_i = rhs[r]·h, where each entry is a
/// row vector of coefficients multiplying h̃_0 … h̃_{p+1}.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoverySystem {
    pub p: usize,
    pub matrix: Vec<Vec<Vec<Rational>>>,
    pub rhs: Vec<Vec<Rational>>,
}

impl RecoverySystem {
    pub fn new(p: usize) -> Self {
        let rows = assemble_lp_symbolic(p);
        let matrix = rows[..p]
            .iter()
            .map(|row| {
                (1..=p)
                    .map(|i| row.iter().map(|f| f.iota[i].clone()).collect())
                    .collect()
            })
            .collect();
        let rhs = rows[..p]
            .iter()
            .map(|row| row.iter().map(|f| -f.iota[0].clone()).collect())
            .collect();
        Self { p, matrix, rhs }
    }

    fn dot(c: &[Rational], h: &[f64]) -> f64 {
        c.iter().zip(h).map(|(a, b)| exact::to_f64(a) * b).sum()
    }

    pub fn numeric(&self, h: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let a = self
            .matrix
            .iter()
            .map(|row| row.iter().map(|c| Self::dot(c, h)).collect())
            .collect();
        let b = self.rhs.iter().map(|c| Self::dot(c, h)).collect();
        (a, b)
    }
}

/// The H₃ system as exact coefficient rows (see [`RecoverySystem`]).
pub fn h3_matrix_symbolic() -> RecoverySystem {
    RecoverySystem::new(3)
}

/// Full I_p = [1, ι₁, …, ι_p] whose GSFR left correction is `h_l`.
pub fn recover_iota(p: usize, h_l: &LegendreSeries) -> Result<Vec<f64>> {
    check_order("h_l", h_l, p + 1)?;
    let (a, b) = RecoverySystem::new(p).numeric(&h_l.coeffs);
    let x = exact::solve_f64(&a, &b)
        .ok_or_else(|| Error::DegenerateCoefficient("recovery system is singular".into()))?;
    let mut iota = vec![1.0];
    iota.extend(x);
    Ok(iota)
}

/// [ι₁, ι₂, ι₃] for p = 3 by forward substitution in the lower-triangular
/// H₃ system.
pub fn recover_ip_p3(h_l: &LegendreSeries) -> Result<[f64; 3]> {
    check_order("h_l", h_l, 4)?;
    let (a, b) = h3_matrix_symbolic().numeric(&h_l.coeffs);
    let scale = h_l.coeffs.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let mut x = [0.0; 3];
    for r in 0..3 {
        let piv = a[r][r];
        if piv.abs() <= 1e-13 * scale * 1575.0 {
            return Err(Error::DegenerateCoefficient(format!(
                "H3 pivot {r} vanishes (h_l[3] or h_l[4] is zero)"
            )));
        }
        let s: f64 = (0..r).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / piv;
    }
    Ok(x)
}
