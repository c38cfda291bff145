//! Von Neumann analysis of the semi-discrete FR operator.
//!
//! A Bloch wave u_{j+m} = e^{i m kδ} v reduces the periodic operator to the
//! (p+1)×(p+1) matrix Q(k) = -J⁻¹(C₊e^{ikδ} + C₀ + C₋e^{-ikδ}). Its
//! eigenvalues give the modified wave speeds c = iλ/k and, through the RK
//! stability polynomial, the fully discrete amplification factors.

pub mod precise;

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fr::{RkScheme, SchemeOperators};

/// Tolerance on ρ - 1 below which a step is considered stable.
pub const RHO_TOL: f64 = 1e-10;

pub fn q_matrix(ops: &SchemeOperators, k: f64) -> DMatrix<Complex64> {
    let delta = 2.0 * ops.jacobian;
    let plus = Complex64::from_polar(1.0, k * delta);
    let minus = plus.conj();
    let scale = Complex64::new(-1.0 / ops.jacobian, 0.0);
    let n = ops.p() + 1;
    DMatrix::from_fn(n, n, |i, j| {
        scale * (plus * ops.c_plus[(i, j)] + ops.c_zero[(i, j)] + minus * ops.c_minus[(i, j)])
    })
}

/// Eigenvalues of a small dense complex matrix via the Schur form.
pub fn eigenvalues(m: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let schur = m
        .clone()
        .try_schur(1e-15, 10_000)
        .ok_or(Error::ConvergenceFailure)?;
    let ev = schur.eigenvalues().ok_or(Error::ConvergenceFailure)?;
    if ev.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ConvergenceFailure);
    }
    Ok(ev.iter().copied().collect())
}

pub fn spectral_radius(m: &DMatrix<Complex64>) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Physical k for a normalised wavenumber k̂ = kδ/(p+1).
pub fn k_from_k_hat(ops: &SchemeOperators, k_hat: f64) -> f64 {
    k_hat * (ops.p() + 1) as f64 / (2.0 * ops.jacobian)
}

pub fn k_hat_from_k(ops: &SchemeOperators, k: f64) -> f64 {
    k * 2.0 * ops.jacobian / (ops.p() + 1) as f64
}

/// Modified wave speeds at one wavenumber.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveResponse {
    pub k_hat: f64,
    pub c_re: Vec<f64>,
    pub c_im: Vec<f64>,
    pub omega_re: Vec<f64>,
    pub omega_im: Vec<f64>,
    pub physical_mode_index: usize,
}

impl WaveResponse {
    fn from_eigenvalues(k: f64, k_hat: f64, lambda: &[Complex64]) -> Self {
        let i = Complex64::new(0.0, 1.0);
        let mut c: Vec<Complex64> = lambda.iter().map(|l| i * l / k).collect();
        c.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
        let physical_mode_index = c
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 1.0).norm().total_cmp(&(b.1 - 1.0).norm()))
            .map(|(idx, _)| idx)
            .unwrap_or(0);
        Self {
            k_hat,
            c_re: c.iter().map(|z| z.re).collect(),
            c_im: c.iter().map(|z| z.im).collect(),
            omega_re: c.iter().map(|z| z.re * k_hat).collect(),
            omega_im: c.iter().map(|z| z.im * k_hat).collect(),
            physical_mode_index,
        }
    }

    pub fn physical_c(&self) -> Complex64 {
        let i = self.physical_mode_index;
        Complex64::new(self.c_re[i], self.c_im[i])
    }
}

pub fn wave_speeds(ops: &SchemeOperators, k: f64) -> Result<WaveResponse> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::invalid("k", "wavenumber must be positive"));
    }
    let lambda = eigenvalues(&q_matrix(ops, k))?;
    Ok(WaveResponse::from_eigenvalues(k, k_hat_from_k(ops, k), &lambda))
}

/// Uniform grid k̂_j = πj/n, j = 1..n.
pub fn k_hat_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|j| PI * j as f64 / n as f64).collect()
}

/// Dispersion curve with the physical mode followed by continuation from
/// the smallest wavenumber: after the first point the physical mode is the
/// one whose ω̂ is closest to the previous physical ω̂.
pub fn dispersion_curve(ops: &SchemeOperators, k_hats: &[f64]) -> Result<Vec<WaveResponse>> {
    let mut out: Vec<WaveResponse> = Vec::with_capacity(k_hats.len());
    for &kh in k_hats {
        let mut w = wave_speeds(ops, k_from_k_hat(ops, kh))?;
        if let Some(prev) = out.last() {
            let target = Complex64::new(
                prev.omega_re[prev.physical_mode_index],
                prev.omega_im[prev.physical_mode_index],
            );
            w.physical_mode_index = (0..w.c_re.len())
                .min_by(|&a, &b| {
                    let da = (Complex64::new(w.omega_re[a], w.omega_im[a]) - target).norm();
                    let db = (Complex64::new(w.omega_re[b], w.omega_im[b]) - target).norm();
                    da.total_cmp(&db)
                })
                .unwrap_or(0);
        }
        out.push(w);
    }
    Ok(out)
}

/// Long-format-free wide CSV: k_hat, physical mode, then every mode.
pub fn write_dispersion_csv(curve: &[WaveResponse], mut w: impl Write) -> Result<()> {
    let modes = curve.first().map_or(0, |r| r.c_re.len());
    let mut header = vec!["k_hat".to_string(), "re_omega_phys".into(), "im_omega_phys".into()];
    for m in 0..modes {
        header.push(format!("re_omega_mode_{m}"));
        header.push(format!("im_omega_mode_{m}"));
    }
    writeln!(w, "{}", header.join(","))?;
    for r in curve {
        let i = r.physical_mode_index;
        let mut row = vec![
            format!("{:.16e}", r.k_hat),
            format!("{:.16e}", r.omega_re[i]),
            format!("{:.16e}", r.omega_im[i]),
        ];
        for m in 0..modes {
            row.push(format!("{:.16e}", r.omega_re[m]));
            row.push(format!("{:.16e}", r.omega_im[m]));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Σ_{n≤s} zⁿ/n!, the stability polynomial of the scheme.
pub fn stability_polynomial(rk: RkScheme, z: Complex64) -> Complex64 {
    let s = rk.order();
    let mut acc = Complex64::new(1.0, 0.0);
    for n in (1..=s).rev() {
        acc = Complex64::new(1.0, 0.0) + z * acc / n as f64;
    }
    acc
}

/// R = Σ_{n≤s} (τQ)ⁿ/n!.
pub fn update_matrix(q: &DMatrix<Complex64>, tau: f64, rk: RkScheme) -> DMatrix<Complex64> {
    let n = q.nrows();
    let id = DMatrix::<Complex64>::identity(n, n);
    let tq = q * Complex64::new(tau, 0.0);
    let mut acc = id.clone();
    for k in (1..=rk.order()).rev() {
        acc = &id + &tq * acc * Complex64::new(1.0 / k as f64, 0.0);
    }
    acc
}

/// Eigenvalues of Q(k) over the sampled k̂ grid.
#[derive(Debug, Clone)]
pub struct SpectrumSamples {
    pub k_hat: Vec<f64>,
    pub lambda: Vec<Vec<Complex64>>,
}

pub fn sample_spectrum(ops: &SchemeOperators, k_samples: usize) -> Result<SpectrumSamples> {
    let k_hat = k_hat_grid(k_samples);
    let lambda = k_hat
        .iter()
        .map(|&kh| eigenvalues(&q_matrix(ops, k_from_k_hat(ops, kh))))
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectrumSamples { k_hat, lambda })
}

impl SpectrumSamples {
    /// (max_k ρ(R(τQ(k))) - 1, argmax k̂), computed through the eigenvalues of Q:
    /// the eigenvalues of a polynomial in Q are the polynomial of its eigenvalues.
    pub fn excess(&self, rk: RkScheme, tau: f64) -> (f64, f64) {
        let mut worst = (f64::NEG_INFINITY, self.k_hat.first().copied().unwrap_or(0.0));
        for (kh, lams) in self.k_hat.iter().zip(&self.lambda) {
            for l in lams {
                let r = stability_polynomial(rk, l * tau).norm() - 1.0;
                if r > worst.0 {
                    worst = (r, *kh);
                }
            }
        }
        worst
    }

    /// Largest real part over all sampled eigenvalues.
    pub fn max_real_part(&self) -> f64 {
        self.lambda.iter().flatten().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Search controls for [`cfl_limit_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflOptions {
    pub k_samples: usize,
    /// Relative width of the final bisection bracket.
    pub rel_tol: f64,
    /// Uniform τ scan points used to locate the upper stability edge.
    pub scan_points: usize,
}

impl Default for CflOptions {
    fn default() -> Self {
        Self {
            k_samples: 256,
            rel_tol: 1e-4,
            scan_points: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityResult {
    pub tau_max: f64,
    /// τ_max divided by the element width.
    pub cfl: f64,
    pub k_samples: usize,
    pub rk: RkScheme,
    /// k̂ at which the amplification first exceeds one just above τ_max.
    pub worst_k: f64,
    /// max_k ρ - 1 at τ_max.
    pub excess_at_tau_max: f64,
    /// Largest Re λ of the semi-discrete operator over the sampled k.
    pub max_semi_discrete_re: f64,
}

pub fn cfl_limit(ops: &SchemeOperators, rk: RkScheme, k_samples: usize) -> Result<StabilityResult> {
    cfl_limit_with(
        ops,
        rk,
        CflOptions {
            k_samples,
            ..CflOptions::default()
        },
    )
}

/// Largest τ with max_k ρ(R(τQ(k))) ≤ 1 + RHO_TOL, i.e. the upper edge of
/// the stable set.
///
/// The stable set is usually an interval [0, τ_max]. When the semi-discrete
/// operator has eigenvalues slightly in the right half plane, tiny steps are
/// unstable and the stable set can be an interior window; taking its upper
/// edge keeps the answer well defined in both cases. The edge is found by
/// doubling until clearly unstable, scanning that range uniformly, then
/// bisecting the last stable-to-unstable transition.
pub fn cfl_limit_with(ops: &SchemeOperators, rk: RkScheme, opts: CflOptions) -> Result<StabilityResult> {
    if opts.k_samples < 1 {
        return Err(Error::invalid("k_samples", "must be positive"));
    }
    let spec = sample_spectrum(ops, opts.k_samples)?;
    let stable = |tau: f64| spec.excess(rk, tau).0 <= RHO_TOL;
    let spectral_scale = spec.lambda.iter().flatten().map(|l| l.norm()).fold(0.0, f64::max);
    if spectral_scale == 0.0 {
        return Err(Error::invalid("scheme", "operator has an empty spectrum"));
    }
    // |P(z)| grows like |z|^s, so this loop terminates quickly.
    let mut blow = 1.0 / spectral_scale;
    while spec.excess(rk, blow).0 <= 0.5 {
        blow *= 2.0;
        if blow * spectral_scale > 1e6 {
            return Err(Error::ConvergenceFailure);
        }
    }
    let h = blow / opts.scan_points as f64;
    let last_stable = (1..=opts.scan_points).rev().map(|i| i as f64 * h).find(|&t| stable(t));
    let (mut lo, mut hi) = match last_stable {
        Some(t) => (t, t + h),
        None => (0.0, h),
    };
    for _ in 0..200 {
        if hi - lo <= opts.rel_tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if stable(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau_max = lo;
    let probe = if tau_max > 0.0 { tau_max * (1.0 + 2.0 * opts.rel_tol) } else { hi };
    let (_, worst_k) = spec.excess(rk, probe);
    Ok(StabilityResult {
        tau_max,
        cfl: tau_max / (2.0 * ops.jacobian),
        k_samples: opts.k_samples,
        rk,
        worst_k,
        excess_at_tau_max: spec.excess(rk, tau_max).0,
        max_semi_discrete_re: spec.max_real_part(),
    })
}

/// max_k ρ(R(τQ(k))) by forming R and extracting its eigenvalues directly.
pub fn max_amplification_direct(ops: &SchemeOperators, rk: RkScheme, tau: f64, k_samples: usize) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for kh in k_hat_grid(k_samples) {
        let q = q_matrix(ops, k_from_k_hat(ops, kh));
        worst = worst.max(spectral_radius(&update_matrix(&q, tau, rk))?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fr::{linear_advection_rhs, MeshState, NodeKind};
    use crate::gsfr::{osfr_correction_f64, solve_correction, CorrectionParams, CorrectionPair};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cmax<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<Complex64, R, C>>(
        m: &nalgebra::Matrix<Complex64, R, C, S>,
    ) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn gsfr(p: usize, iota: &[&str]) -> CorrectionPair {
        solve_correction(&CorrectionParams::parse(p, iota).unwrap()).unwrap()
    }

    fn ops(pair: &CorrectionPair, alpha: f64) -> SchemeOperators {
        SchemeOperators::from_correction(pair, NodeKind::Gauss, alpha, 1.0).unwrap()
    }

    #[test]
    fn q_at_zero_annihilates_constants() {
        let o = ops(&gsfr(3, &["1", "0.01", "0.01", "0.1"]), 1.0);
        let q = q_matrix(&o, 0.0);
        let ones = DVector::from_element(4, Complex64::new(1.0, 0.0));
        assert!(cmax(&(q * ones)) < 1e-12);
        let q_nyq = q_matrix(&o, k_from_k_hat(&o, PI));
        assert!(q_nyq.iter().all(|z| z.re.is_finite() && z.im.is_finite()));
    }

    #[test]
    fn spectral_radius_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-2.0, 0.0),
            Complex64::new(0.0, 3.0),
        ]));
        assert!((spectral_radius(&d).unwrap() - 3.0).abs() < 1e-12);
        let th: f64 = 0.7;
        let rot = DMatrix::from_row_slice(
            2,
            2,
            &[th.cos(), -th.sin(), th.sin(), th.cos()].map(|x| Complex64::new(x, 0.0)),
        );
        assert!((spectral_radius(&rot).unwrap() - 1.0).abs() < 1e-12);
    }

    /// Companion matrix of the characteristic polynomial, solved by
    /// Durand–Kerner iteration, as an independent eigenvalue oracle.
    fn durand_kerner(m: &DMatrix<Complex64>) -> Vec<Complex64> {
        let n = m.nrows();
        // Faddeev–LeVerrier characteristic polynomial
        let mut c = vec![Complex64::new(0.0, 0.0); n + 1];
        c[n] = Complex64::new(1.0, 0.0);
        let id = DMatrix::<Complex64>::identity(n, n);
        let mut mk = DMatrix::<Complex64>::zeros(n, n);
        for k in 1..=n {
            mk = m * &mk + &id * c[n - k + 1];
            c[n - k] = -(m * &mk).trace() / k as f64;
        }
        let eval = |z: Complex64| c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, ci| acc * z + ci);
        let mut roots: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(1.0, 0.4 + i as f64)).collect();
        for _ in 0..2000 {
            for i in 0..n {
                let mut den = Complex64::new(1.0, 0.0);
                for j in 0..n {
                    if i != j {
                        den *= roots[i] - roots[j];
                    }
                }
                let step = eval(roots[i]) / den;
                roots[i] -= step;
            }
        }
        roots
    }

    #[test]
    fn eigenvalues_match_independent_root_finder() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let m = DMatrix::from_fn(6, 6, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let a = spectral_radius(&m).unwrap();
            let b = durand_kerner(&m).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn update_matrix_examples() {
        let q = DMatrix::from_fn(3, 3, |i, j| Complex64::new((i + 2 * j) as f64 * 0.1, 0.05));
        assert_eq!(update_matrix(&q, 0.0, RkScheme::Rk44), DMatrix::identity(3, 3));
        // Strictly upper-triangular 5×5 Q is nilpotent with Q⁵ = 0.
        let n = DMatrix::from_fn(5, 5, |i, j| if j > i { Complex64::new(1.0 + (i * j) as f64, 0.0) } else { Complex64::new(0.0, 0.0) });
        let r = update_matrix(&n, 0.3, RkScheme::Rk44);
        let tn = &n * Complex64::new(0.3, 0.0);
        let mut expm = DMatrix::<Complex64>::identity(5, 5);
        let mut term = expm.clone();
        for k in 1..=4 {
            term = &term * &tn / Complex64::new(k as f64, 0.0);
            expm += &term;
        }
        assert!(cmax(&(r - expm)) < 1e-12);
    }

    #[test]
    fn bloch_matrix_matches_circulant_blocks() {
        let n = 64;
        let pair = gsfr(3, &["1", "2.069e-4", "2.336e-3", "2.336e-3"]);
        for alpha in [1.0, 0.5] {
            let o = SchemeOperators::from_correction(&pair, NodeKind::Gauss, alpha, 0.5 * 2.0 / n as f64).unwrap();
            let np = 4;
            let proto = MeshState::zeros(n, -1.0, 1.0, np).unwrap();
            let mut a = DMatrix::<f64>::zeros(n * np, n * np);
            for col in 0..n * np {
                let mut u = vec![0.0; n * np];
                u[col] = 1.0;
                for (row, v) in linear_advection_rhs(&o, &proto.with_values(u)).into_iter().enumerate() {
                    a[(row, col)] = v;
                }
            }
            let delta = 2.0 / n as f64;
            for m in [1usize, 3, 7, 12, 20, 31, 40, 63] {
                let k = 2.0 * PI * m as f64 / 2.0; // wavelength 2/m on [-1, 1]
                // Block-diagonalise with the Bloch vector e^{i k x_j}.
                let mut block = DMatrix::<Complex64>::zeros(np, np);
                for jj in 0..n {
                    let phase = Complex64::from_polar(1.0, k * delta * (jj as f64));
                    for r in 0..np {
                        for c in 0..np {
                            block[(r, c)] += a[(r, jj * np + c)] * phase;
                        }
                    }
                }
                let q = q_matrix(&o, k);
                assert!(cmax(&(&block - &q)) < 1e-9, "sign convention mismatch at m={m}");
            }
        }
    }

    #[test]
    fn upwind_dg_physical_mode_is_consistent() {
        let o = ops(&osfr_correction_f64(3, 0.0).unwrap(), 1.0);
        let w = wave_speeds(&o, k_from_k_hat(&o, 1e-2)).unwrap();
        assert!((w.physical_c() - 1.0).norm() < 1e-10);
        assert!(wave_speeds(&o, 0.0).is_err());
    }

    #[test]
    fn central_fluxes_are_dissipation_free() {
        for pair in [osfr_correction_f64(3, 0.0).unwrap(), gsfr(3, &["1", "0.01", "0.01", "0.1"])] {
            let o = ops(&pair, 0.5);
            for kh in k_hat_grid(64) {
                let w = wave_speeds(&o, k_from_k_hat(&o, kh)).unwrap();
                assert!(w.c_im.iter().all(|x| x.abs() < 1e-10), "{:?}", w.c_im);
            }
        }
    }

    #[test]
    fn upwind_physical_mode_is_not_amplified() {
        for pair in [osfr_correction_f64(3, 0.0).unwrap(), osfr_correction_f64(3, 4.0 / 4725.0).unwrap()] {
            let o = ops(&pair, 1.0);
            let curve = dispersion_curve(&o, &k_hat_grid(128)).unwrap();
            for r in &curve {
                assert!(r.omega_im[r.physical_mode_index] <= 1e-12);
            }
        }
    }

    #[test]
    fn cfl_agrees_with_direct_route_and_is_resolution_stable() {
        let o = ops(&osfr_correction_f64(3, 0.0).unwrap(), 1.0);
        for rk in RkScheme::ALL {
            let r = cfl_limit(&o, rk, 256).unwrap();
            assert!(r.tau_max > 0.1);
            let below = max_amplification_direct(&o, rk, r.tau_max, 256).unwrap();
            let above = max_amplification_direct(&o, rk, r.tau_max * (1.0 + 2e-4), 256).unwrap();
            assert!(below <= 1.0 + 1e-9, "{rk:?} {below}");
            assert!(above > 1.0 + RHO_TOL, "{rk:?} {above}");
            let fine = cfl_limit(&o, rk, 1024).unwrap();
            assert!((fine.tau_max - r.tau_max).abs() <= 0.01 * r.tau_max);
        }
    }

    #[test]
    fn dg_rk44_limit_matches_known_value() {
        // Upwind DG p = 3 with classic RK4: CFL ≈ 0.145 per element width.
        let o = ops(&osfr_correction_f64(3, 0.0).unwrap(), 1.0);
        let r = cfl_limit(&o, RkScheme::Rk44, 256).unwrap();
        assert!((r.cfl - 0.145).abs() < 0.002, "{}", r.cfl);
    }

    #[test]
    fn stability_predicate_changes_sign_once() {
        for (pair, rk) in [
            (osfr_correction_f64(3, 0.0).unwrap(), RkScheme::Rk33),
            (osfr_correction_f64(3, 4.0 / 4725.0).unwrap(), RkScheme::Rk44),
            (osfr_correction_f64(4, 0.0).unwrap(), RkScheme::Rk55),
        ] {
            let o = ops(&pair, 1.0);
            let spec = sample_spectrum(&o, 256).unwrap();
            let r = cfl_limit(&o, rk, 256).unwrap();
            let mut changes = 0;
            let mut prev = spec.excess(rk, 1e-4).0 <= RHO_TOL;
            for i in 1..=600 {
                let tau = 2.0 * r.tau_max * i as f64 / 600.0;
                let s = spec.excess(rk, tau).0 <= RHO_TOL;
                if s != prev {
                    changes += 1;
                }
                prev = s;
            }
            assert_eq!(changes, 1, "{rk:?}");
        }
    }

    #[test]
    fn dispersion_csv_layout() {
        let o = ops(&osfr_correction_f64(2, 0.0).unwrap(), 1.0);
        let curve = dispersion_curve(&o, &k_hat_grid(4)).unwrap();
        let mut buf = Vec::new();
        write_dispersion_csv(&curve, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "k_hat,re_omega_phys,im_omega_phys,re_omega_mode_0,im_omega_mode_0,re_omega_mode_1,im_omega_mode_1,re_omega_mode_2,im_omega_mode_2"
        );
        assert_eq!(lines.count(), 4);
    }
}
