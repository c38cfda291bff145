//! Numerical studies: order of accuracy, heterogeneous-advection energy and
//! the order-preserving CFL search.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fr::{heterogeneous_rhs, linear_advection_rhs, rk_advance, MeshState, NodeKind, RkScheme, SchemeOperators};
use crate::gsfr::{solve_correction, sufficient_bounds, CorrectionPair, CorrectionParams};
use crate::spectral::{cfl_limit, cfl_limit_with, CflOptions};

/// Order-recovering correction parameters with their peak RK time step τ
/// (unit Jacobian): (p, scheme, ι, τ).
pub const PEAK_CFL_REFERENCE: [(usize, RkScheme, &[&str], f64); 6] = [
    (3, RkScheme::Rk33, &["1", "1.274e-3", "1.438e-2", "7.848e-3"], 0.385),
    (3, RkScheme::Rk44, &["1", "2.069e-4", "2.336e-3", "2.336e-3"], 0.390),
    (3, RkScheme::Rk55, &["1", "6.952e-4", "-6.158e-5", "2.336e-3"], 0.443),
    (4, RkScheme::Rk33, &["1", "4.833e-4", "2.336e-5", "-1.438e-4", "2.637e-4"], 0.431),
    (4, RkScheme::Rk44, &["1", "1.624e-3", "2.637e-4", "-2.637e-4", "2.637e-4"], 0.430),
    (4, RkScheme::Rk55, &["1", "1.624e-3", "1.274e-5", "-2.637e-4", "8.859e-4"], 0.354),
];

/// Energy above which a run is declared to have blown up.
pub const BLOWUP_ENERGY: f64 = 1e3;
/// Error above which an OOA run is declared unstable.
pub const UNSTABLE_ERROR: f64 = 1e3;
pub const DEFAULT_ELEMENT_COUNTS: [usize; 6] = [50, 55, 60, 65, 70, 75];

/// Period of the heterogeneous problem, ∫₋₁¹ dx / (2 + sin πx).
pub fn hetero_period() -> f64 {
    2.0 / 3f64.sqrt()
}

/// Uniform steps of size ≤ `dt_max` that land exactly on `t_end`.
fn step_plan(t_end: f64, dt_max: f64) -> (usize, f64) {
    let n = (t_end / dt_max).ceil().max(1.0) as usize;
    (n, t_end / n as f64)
}

fn l1_mean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OoaReport {
    pub element_counts: Vec<usize>,
    /// Mean absolute nodal error ε₂ at t_end for each mesh.
    pub errors: Vec<f64>,
    /// -slope of log ε₂ against log(number of solution points).
    pub fitted_order: f64,
    pub r_squared: f64,
    /// Time step as a fraction of the element width.
    pub dt_over_dx: f64,
    pub rk: RkScheme,
}

/// Least-squares line y = a + b x; returns (b, R²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, r2)
}

/// Step size used by [`ooa_study`] relative to the element width.
///
/// Temporal error must stay below the spatial error, so τ is the smaller of
/// 10% of the element width and 20% of the scheme's RK44 stability limit.
pub fn ooa_dt_over_dx(pair: &CorrectionPair, alpha: f64) -> Result<f64> {
    let ops = SchemeOperators::from_correction(pair, NodeKind::Gauss, alpha, 1.0)?;
    let cfl = cfl_limit_with(
        &ops,
        RkScheme::Rk44,
        CflOptions {
            k_samples: 64,
            ..CflOptions::default()
        },
    )?
    .cfl;
    Ok((0.2 * cfl).min(0.1))
}

/// Convergence study for u_t + u_x = 0 on [0, 2π] with u₀ = cos x, advanced
/// to `t_end` with classic RK4.
pub fn ooa_study(params: &CorrectionParams, alpha: f64, element_counts: &[usize], t_end: f64) -> Result<OoaReport> {
    if element_counts.len() < 4 {
        return Err(Error::invalid("element_counts", "need at least four meshes"));
    }
    if element_counts.iter().any(|&n| n == 0) {
        return Err(Error::invalid("element_counts", "must be positive"));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::invalid("t_end", "must be positive"));
    }
    let pair = solve_correction(params)?;
    let ratio = ooa_dt_over_dx(&pair, alpha)?;
    let rk = RkScheme::Rk44;
    let length = 2.0 * PI;
    let errors = element_counts
        .par_iter()
        .map(|&n| -> Result<f64> {
            let dx = length / n as f64;
            let ops = SchemeOperators::from_correction(&pair, NodeKind::Gauss, alpha, 0.5 * dx)?;
            let mut state = MeshState::from_fn(&ops.element, n, 0.0, length, f64::cos)?;
            let (steps, tau) = step_plan(t_end, ratio * dx);
            for _ in 0..steps {
                state = rk_advance(|s| linear_advection_rhs(&ops, s), &state, tau, rk);
            }
            let exact: Vec<f64> = state.node_positions(&ops.element).iter().map(|x| (x - t_end).cos()).collect();
            let err = l1_mean(&state.u, &exact);
            if !(err <= UNSTABLE_ERROR) {
                return Err(Error::UnstableRun {
                    time: t_end,
                    detail: format!("N = {n}: error {err:e}"),
                });
            }
            Ok(err)
        })
        .collect::<Result<Vec<_>>>()?;
    let p1 = (params.p() + 1) as f64;
    let x: Vec<f64> = element_counts.iter().map(|&n| (n as f64 * p1).ln()).collect();
    let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (slope, r_squared) = linear_fit(&x, &y);
    Ok(OoaReport {
        element_counts: element_counts.to_vec(),
        errors,
        fitted_order: -slope,
        r_squared,
        dt_over_dx: ratio,
        rk,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyReport {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// |E(nT) - 1| for each completed period n = 1, 2, ….
    pub error_at_periods: Vec<f64>,
    /// Time at which E first exceeded the blow-up threshold.
    pub blowup_time: Option<f64>,
    pub dt: f64,
}

impl EnergyReport {
    pub fn blew_up(&self) -> bool {
        self.blowup_time.is_some()
    }
}

/// Courant number max|a| τ / Δx of the heterogeneous study.
pub const HETERO_CFL: f64 = 0.06;
/// max |sin πx + 2|.
const HETERO_MAX_SPEED: f64 = 3.0;
/// Energy samples recorded per period.
const SAMPLES_PER_PERIOD: usize = 20;

/// u_t + ((sin πx + 2) u)_x = 0 on [-1, 1], u₀ = sin 4πx, RK4 with Gauss
/// solution points, run for `n_periods` periods or until blow-up.
pub fn hetero_energy_study(params: &CorrectionParams, alpha: f64, n_elements: usize, n_periods: usize) -> Result<EnergyReport> {
    let pair = solve_correction(params)?;
    let dx = 2.0 / n_elements.max(1) as f64;
    let ops = SchemeOperators::from_correction(&pair, NodeKind::Gauss, alpha, 0.5 * dx)?;
    let mut state = MeshState::from_fn(&ops.element, n_elements, -1.0, 1.0, |x| (4.0 * PI * x).sin())?;
    let period = hetero_period();
    let per = SAMPLES_PER_PERIOD;
    let (sub, tau) = step_plan(period / per as f64, HETERO_CFL * dx / HETERO_MAX_SPEED);
    let mut report = EnergyReport {
        times: vec![0.0],
        energy: vec![state.energy(&ops.element)],
        error_at_periods: Vec::new(),
        blowup_time: None,
        dt: tau,
    };
    'outer: for sample in 1..=n_periods * per {
        for s in 0..sub {
            state = rk_advance(|st| heterogeneous_rhs(&ops, st), &state, tau, RkScheme::Rk44);
            // Blow-up is checked cheaply every step on the nodal values.
            if state.u.iter().any(|u| !u.is_finite() || u.abs() > 1e6) {
                report.blowup_time = Some(((sample - 1) * sub + s + 1) as f64 * tau);
                break 'outer;
            }
        }
        let t = (sample * sub) as f64 * tau;
        let e = state.energy(&ops.element);
        report.times.push(t);
        report.energy.push(e);
        if !(e <= BLOWUP_ENERGY) {
            report.blowup_time = Some(t);
            break;
        }
        if sample % per == 0 {
            report.error_at_periods.push((e - 1.0).abs());
        }
    }
    Ok(report)
}

/// Advances the heterogeneous problem one period with upwind DG and
/// returns ε₂ between u(·, T) and u(·, 0).
pub fn period_check(p: usize, n_elements: usize) -> Result<f64> {
    let pair = solve_correction(&CorrectionParams::dg(p)?)?;
    let dx = 2.0 / n_elements as f64;
    let ops = SchemeOperators::from_correction(&pair, NodeKind::Gauss, 1.0, 0.5 * dx)?;
    let init = MeshState::from_fn(&ops.element, n_elements, -1.0, 1.0, |x| (4.0 * PI * x).sin())?;
    let (steps, tau) = step_plan(hetero_period(), HETERO_CFL * dx / HETERO_MAX_SPEED);
    let mut state = init.clone();
    for _ in 0..steps {
        state = rk_advance(|s| heterogeneous_rhs(&ops, s), &state, tau, RkScheme::Rk44);
    }
    Ok(l1_mean(&state.u, &init.u))
}

/// Candidate values for each free ι component.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchGrid {
    pub values: Vec<f64>,
}

impl Default for SearchGrid {
    /// {0, ±10⁻⁵, …, ±10⁻¹}.
    fn default() -> Self {
        let mut values = vec![0.0];
        for e in -5..=-1 {
            let v = 10f64.powi(e);
            values.push(v);
            values.push(-v);
        }
        Self { values }
    }
}

impl SearchGrid {
    pub fn describe(&self, p: usize) -> String {
        format!(
            "iota_0 = 1; iota_1..iota_{p} each in {:?} ({} points)",
            self.values,
            self.values.len().pow(p as u32)
        )
    }

    /// Every ι vector [1, v₁, …, v_p].
    pub fn points(&self, p: usize) -> Vec<Vec<f64>> {
        let mut out = vec![vec![1.0]];
        for _ in 0..p {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    self.values.iter().map(move |&v| {
                        let mut next = prefix.clone();
                        next.push(v);
                        next
                    })
                })
                .collect();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchReport {
    pub best_iota: Vec<f64>,
    pub best_tau: f64,
    pub ooa_at_best: f64,
    pub grid_spec: String,
    /// Grid points inside the sufficient bounds.
    pub admissible: usize,
    /// OOA studies run before the optimum was confirmed.
    pub ooa_evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub k_samples: usize,
    pub t_end: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            k_samples: 128,
            t_end: PI,
        }
    }
}

/// Largest upwind CFL limit over the grid among points whose OOA reaches
/// `ooa_threshold`.
///
/// Points outside the sufficient stability bounds are discarded. The rest
/// are ranked by τ (cheap), then OOA studies run in decreasing τ order until
/// one passes; that point is the constrained maximum.
pub fn cfl_search(p: usize, rk: RkScheme, grid: &SearchGrid, ooa_threshold: f64, opts: SearchOptions) -> Result<SearchReport> {
    let points = grid.points(p);
    let tested = points.len();
    let mut ranked: Vec<(Vec<f64>, f64)> = points
        .into_par_iter()
        .filter_map(|iota| {
            let params = CorrectionParams::from_f64(p, &iota).ok()?;
            if !sufficient_bounds(&params).ok()?.satisfied {
                return None;
            }
            let pair = solve_correction(&params).ok()?;
            let ops = SchemeOperators::from_correction(&pair, NodeKind::Gauss, 1.0, 1.0).ok()?;
            let tau = cfl_limit(&ops, rk, opts.k_samples).ok()?.tau_max;
            Some((iota, tau))
        })
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.partial_cmp(&b.0).unwrap()));
    let admissible = ranked.len();
    for (evaluated, (iota, tau)) in ranked.into_iter().enumerate() {
        let params = CorrectionParams::from_f64(p, &iota)?;
        let ooa = match ooa_study(&params, 1.0, &DEFAULT_ELEMENT_COUNTS, opts.t_end) {
            Ok(r) => r.fitted_order,
            Err(e) if e.is_numerical() => continue,
            Err(e) => return Err(e),
        };
        if ooa >= ooa_threshold {
            return Ok(SearchReport {
                best_iota: iota,
                best_tau: tau,
                ooa_at_best: ooa,
                grid_spec: grid.describe(p),
                admissible,
                ooa_evaluations: evaluated + 1,
            });
        }
    }
    Err(Error::EmptyFeasibleSet { tested })
}
