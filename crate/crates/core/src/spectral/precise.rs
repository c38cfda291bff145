//! High-precision dispersion of the physical mode at small wavenumbers.
//!
//! At k̂ = 10⁻³ the dispersion error of a fourth-order scheme is ~10⁻²⁷,
//! far below double precision. Here the modal Bloch matrix is built exactly
//! over complex rationals (J = 1, so δ = 2 and e^{ikδ} = (1+it)²/(1+t²) with
//! t = tan k), its characteristic polynomial is formed exactly, and the
//! double-precision physical eigenvalue is refined by Newton iteration on a
//! fine dyadic grid.

use num_bigint::BigInt;
use num_complex::Complex;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::{from_f64, to_f64, Rational};
use crate::fr::{NodeKind, SchemeOperators};
use crate::gsfr::CorrectionPair;

use super::wave_speeds;

type C = Complex<Rational>;

/// Working precision in bits for the refinement.
const BITS: usize = 240;
/// Bits kept in the tangent of the wavenumber.
const T_BITS: usize = 64;
/// |t| above this makes the arctangent series slow; k̂ beyond it is rejected.
const T_MAX: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreciseWave {
    /// Normalised wavenumber actually used (t is rounded to a dyadic).
    pub k_hat: f64,
    /// Re(c) - 1 of the physical mode.
    pub re_c_minus_one: f64,
    /// Im(c) of the physical mode.
    pub im_c: f64,
}

fn round_dyadic(x: &Rational, bits: usize) -> Rational {
    let scale = BigInt::one() << bits;
    let scaled = x * Rational::from_integer(scale.clone());
    let half = Rational::new(BigInt::one(), BigInt::from(2));
    Rational::new((scaled + half).floor().to_integer(), scale)
}

fn round_c(z: &C) -> C {
    C::new(round_dyadic(&z.re, BITS), round_dyadic(&z.im, BITS))
}

fn re(x: Rational) -> C {
    C::new(x, Rational::zero())
}

/// atan(t) for |t| ≤ 1/2 by its Maclaurin series, accurate to ~2^-BITS.
fn atan_series(t: &Rational) -> Rational {
    let t2 = t * t;
    let eps = Rational::new(BigInt::one(), BigInt::one() << (BITS + 8));
    let mut power = t.clone();
    let mut sum = Rational::zero();
    let mut n: i64 = 0;
    loop {
        let term = &power / Rational::from_integer(BigInt::from(2 * n + 1));
        if term.abs() < eps {
            break;
        }
        if n % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        power = round_dyadic(&(&power * &t2), BITS + 16);
        n += 1;
    }
    sum
}

/// Exact modal Bloch matrix for unit Jacobian and phase z = e^{2ik}.
fn modal_q(pair: &CorrectionPair, alpha: &Rational, z: &C) -> Vec<Vec<C>> {
    let n = pair.p + 1;
    let g_l = pair.g_l_exact();
    let g_r = pair.g_r_exact();
    let l_l: Vec<Rational> = (0..n).map(|j| if j % 2 == 0 { Rational::one() } else { -Rational::one() }).collect();
    let l_r: Vec<Rational> = vec![Rational::one(); n];
    let beta = Rational::one() - alpha;
    let zc = z.conj();
    let mut q = vec![vec![C::zero(); n]; n];
    for (r, row) in q.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            let d = if c > r && (c - r) % 2 == 1 {
                Rational::from_integer(BigInt::from(2 * r + 1))
            } else {
                Rational::zero()
            };
            let c0 = d - alpha * &g_l[r] * &l_l[c] - &beta * &g_r[r] * &l_r[c];
            let cp = re(&beta * &g_r[r] * &l_l[c]) * z;
            let cm = re(alpha * &g_l[r] * &l_r[c]) * &zc;
            *entry = -(re(c0) + cp + cm);
        }
    }
    q
}

/// Monic characteristic polynomial, coefficients in ascending order.
fn char_poly(a: &[Vec<C>]) -> Vec<C> {
    let n = a.len();
    let mul = |x: &[Vec<C>], y: &[Vec<C>]| -> Vec<Vec<C>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).fold(C::zero(), |acc, k| acc + &x[i][k] * &y[k][j]))
                    .collect()
            })
            .collect()
    };
    let mut coeffs = vec![C::zero(); n + 1];
    coeffs[n] = C::one();
    let mut m = vec![vec![C::zero(); n]; n];
    for k in 1..=n {
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = &row[i] + &coeffs[n - k + 1];
        }
        let am = mul(a, &m);
        let trace = (0..n).fold(C::zero(), |acc, i| acc + &am[i][i]);
        coeffs[n - k] = -trace / re(Rational::from_integer(BigInt::from(k)));
        m = am;
    }
    coeffs
}

fn horner(c: &[C], x: &C) -> (C, C) {
    let mut v = C::zero();
    let mut dv = C::zero();
    for ci in c.iter().rev() {
        dv = &dv * x + &v;
        v = &v * x + ci;
    }
    (v, dv)
}

/// Physical-mode wave speed error at normalised wavenumber `k_hat` (J = 1).
pub fn physical_wave_speed(pair: &CorrectionPair, alpha: f64, k_hat: f64) -> Result<PreciseWave> {
    let p = pair.p;
    let half_angle = k_hat * (p + 1) as f64 / 2.0;
    if !(k_hat > 0.0 && half_angle <= T_MAX.atan()) {
        return Err(Error::invalid("k_hat", "precise dispersion needs 0 < tan(k) <= 1/2"));
    }
    let alpha_q = from_f64(alpha).ok_or_else(|| Error::invalid("alpha", "must be finite"))?;
    let t = round_dyadic(&from_f64(half_angle.tan()).expect("finite"), T_BITS);
    let k = atan_series(&t);
    let t2 = &t * &t;
    let den = Rational::one() + &t2;
    let z = C::new((Rational::one() - &t2) / &den, (&t + &t) / &den);

    let poly = char_poly(&modal_q(pair, &alpha_q, &z));
    let poly: Vec<C> = poly.iter().map(round_c).collect();

    // Double-precision start from the nodal operator, which is similar.
    let ops = SchemeOperators::from_correction(pair, NodeKind::Gauss, alpha, 1.0)?;
    let kf = to_f64(&k);
    let w = wave_speeds(&ops, kf)?;
    let c0 = w.physical_c();
    // c = iλ/k  ⇒  λ = -i c k
    let lam0 = num_complex::Complex64::new(c0.im * kf, -c0.re * kf);
    let mut lam = C::new(
        from_f64(lam0.re).ok_or(Error::ConvergenceFailure)?,
        from_f64(lam0.im).ok_or(Error::ConvergenceFailure)?,
    );
    let tol = Rational::new(BigInt::one(), BigInt::one() << (BITS - 8));
    let mut converged = false;
    for _ in 0..40 {
        let (v, dv) = horner(&poly, &lam);
        if dv.is_zero() {
            return Err(Error::ConvergenceFailure);
        }
        let step = round_c(&(v / dv));
        lam = round_c(&(&lam - &step));
        if step.re.abs() < tol && step.im.abs() < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::ConvergenceFailure);
    }
    // Re c - 1 = (-Im λ - k)/k, Im c = Re λ / k.
    let re_err = (-&lam.im - &k) / &k;
    let im_c = &lam.re / &k;
    Ok(PreciseWave {
        k_hat: 2.0 * kf / (p + 1) as f64,
        re_c_minus_one: to_f64(&re_err),
        im_c: to_f64(&im_c),
    })
}
