//! 1D flux reconstruction on a uniform periodic mesh.
//!
//! Each element carries p+1 nodal values. The semi-discrete update for
//! element j is
//!
//! ```text
//! du_j/dt = -J⁻¹ (C₊ u_{j+1} + C₀ u_j + C₋ u_{j-1})
//! ```
//!
//! with C₊ = (1-α) g_r l_lᵀ, C₋ = α g_l l_rᵀ and
//! C₀ = D - α g_l l_lᵀ - (1-α) g_r l_rᵀ, where g_{l,r} are the correction
//! gradients at the nodes and l_{l,r} interpolate to ξ = ∓1.

use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gsfr::CorrectionPair;
use crate::legendre::{gauss_legendre, gauss_lobatto};

/// Solution point family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    #[default]
    Gauss,
    Lobatto,
}

impl FromStr for NodeKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gauss" => Ok(NodeKind::Gauss),
            "lobatto" => Ok(NodeKind::Lobatto),
            other => Err(Error::invalid("nodes", format!("unknown node kind `{other}`"))),
        }
    }
}

fn barycentric_weights(x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            1.0 / (0..x.len())
                .filter(|&k| k != j)
                .map(|k| x[j] - x[k])
                .product::<f64>()
        })
        .collect()
}

/// Lagrange basis values l_j(xi) for the nodes `x`.
pub fn lagrange_row(x: &[f64], w: &[f64], xi: f64) -> Vec<f64> {
    if let Some(j) = x.iter().position(|&xj| xj == xi) {
        let mut row = vec![0.0; x.len()];
        row[j] = 1.0;
        return row;
    }
    let terms: Vec<f64> = x.iter().zip(w).map(|(&xj, &wj)| wj / (xi - xj)).collect();
    let s: f64 = terms.iter().sum();
    terms.iter().map(|t| t / s).collect()
}

/// Nodes, differentiation and interface operators of the reference element.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub p: usize,
    pub node_kind: NodeKind,
    pub nodes: Vec<f64>,
    pub d: DMatrix<f64>,
    pub l_left: DVector<f64>,
    pub l_right: DVector<f64>,
    pub g_left: DVector<f64>,
    pub g_right: DVector<f64>,
    /// Interpolation from the nodes to p+1 Gauss points, for exact ∫u².
    pub to_gauss: DMatrix<f64>,
    pub gauss_weights: Vec<f64>,
}

pub fn build_reference_element(correction: &CorrectionPair, node_kind: NodeKind) -> Result<ReferenceElement> {
    let p = correction.p;
    if p < 1 {
        return Err(Error::UnsupportedOrder(p));
    }
    let n = p + 1;
    let nodes = match node_kind {
        NodeKind::Gauss => gauss_legendre(n).0,
        NodeKind::Lobatto => gauss_lobatto(n).0,
    };
    let w = barycentric_weights(&nodes);
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                let v = (w[j] / w[i]) / (nodes[i] - nodes[j]);
                d[(i, j)] = v;
                diag -= v;
            }
        }
        d[(i, i)] = diag;
    }
    let l_left = DVector::from_vec(lagrange_row(&nodes, &w, -1.0));
    let l_right = DVector::from_vec(lagrange_row(&nodes, &w, 1.0));
    let g_left = DVector::from_iterator(n, nodes.iter().map(|&x| correction.g_l.eval(x)));
    let g_right = DVector::from_iterator(n, nodes.iter().map(|&x| correction.g_r.eval(x)));
    let (gx, gw) = gauss_legendre(n);
    let mut to_gauss = DMatrix::zeros(n, n);
    for (q, &xq) in gx.iter().enumerate() {
        for (j, v) in lagrange_row(&nodes, &w, xq).into_iter().enumerate() {
            to_gauss[(q, j)] = v;
        }
    }
    Ok(ReferenceElement {
        p,
        node_kind,
        nodes,
        d,
        l_left,
        l_right,
        g_left,
        g_right,
        to_gauss,
        gauss_weights: gw,
    })
}

/// The three neighbour-coupling matrices of the scheme.
#[derive(Debug, Clone)]
pub struct SchemeOperators {
    pub element: ReferenceElement,
    /// Upwinding ratio: 1 is fully upwind, 0.5 central.
    pub alpha: f64,
    pub c_plus: DMatrix<f64>,
    pub c_zero: DMatrix<f64>,
    pub c_minus: DMatrix<f64>,
    pub jacobian: f64,
}

impl SchemeOperators {
    pub fn new(element: ReferenceElement, alpha: f64, jacobian: f64) -> Result<Self> {
        if !(0.5..=1.0).contains(&alpha) {
            return Err(Error::invalid("alpha", "must lie in [0.5, 1]"));
        }
        if !(jacobian > 0.0 && jacobian.is_finite()) {
            return Err(Error::invalid("jacobian", "must be positive"));
        }
        let e = &element;
        let c_plus = (1.0 - alpha) * &e.g_right * e.l_left.transpose();
        let c_minus = alpha * &e.g_left * e.l_right.transpose();
        let c_zero = &e.d
            - alpha * &e.g_left * e.l_left.transpose()
            - (1.0 - alpha) * &e.g_right * e.l_right.transpose();
        Ok(Self {
            element,
            alpha,
            c_plus,
            c_zero,
            c_minus,
            jacobian,
        })
    }

    pub fn p(&self) -> usize {
        self.element.p
    }

    /// Convenience constructor from a correction pair.
    pub fn from_correction(correction: &CorrectionPair, node_kind: NodeKind, alpha: f64, jacobian: f64) -> Result<Self> {
        Self::new(build_reference_element(correction, node_kind)?, alpha, jacobian)
    }
}

/// Nodal solution on a periodic uniform mesh, element-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshState {
    pub n_elements: usize,
    pub x_left: f64,
    pub x_right: f64,
    pub n_nodes: usize,
    pub u: Vec<f64>,
}

impl MeshState {
    pub fn zeros(n_elements: usize, x_left: f64, x_right: f64, n_nodes: usize) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::invalid("n_elements", "must be positive"));
        }
        if !(x_right > x_left) {
            return Err(Error::invalid("domain", "x_right must exceed x_left"));
        }
        Ok(Self {
            n_elements,
            x_left,
            x_right,
            n_nodes,
            u: vec![0.0; n_elements * n_nodes],
        })
    }

    /// Samples `f` at the mapped solution points.
    pub fn from_fn(
        element: &ReferenceElement,
        n_elements: usize,
        x_left: f64,
        x_right: f64,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let mut s = Self::zeros(n_elements, x_left, x_right, element.p + 1)?;
        let x = s.node_positions(element);
        for (u, x) in s.u.iter_mut().zip(x) {
            *u = f(x);
        }
        Ok(s)
    }

    pub fn with_values(&self, u: Vec<f64>) -> Self {
        assert_eq!(u.len(), self.u.len());
        Self { u, ..self.clone() }
    }

    pub fn element_width(&self) -> f64 {
        (self.x_right - self.x_left) / self.n_elements as f64
    }

    pub fn jacobian(&self) -> f64 {
        0.5 * self.element_width()
    }

    pub fn element(&self, j: usize) -> &[f64] {
        &self.u[j * self.n_nodes..(j + 1) * self.n_nodes]
    }

    /// Global coordinates of every solution point, element-major.
    pub fn node_positions(&self, element: &ReferenceElement) -> Vec<f64> {
        let dx = self.element_width();
        (0..self.n_elements)
            .flat_map(|j| {
                let centre = self.x_left + (j as f64 + 0.5) * dx;
                element.nodes.iter().map(move |&xi| centre + 0.5 * dx * xi)
            })
            .collect()
    }

    /// ∫ u² over the domain, exact for the nodal polynomials.
    pub fn energy(&self, element: &ReferenceElement) -> f64 {
        let jac = self.jacobian();
        (0..self.n_elements)
            .map(|j| {
                let uq = &element.to_gauss * DVector::from_column_slice(self.element(j));
                uq.iter()
                    .zip(&element.gauss_weights)
                    .map(|(u, w)| w * u * u)
                    .sum::<f64>()
            })
            .sum::<f64>()
            * jac
    }

    /// Writes `x,u` rows, one per global solution point.
    pub fn write_csv(&self, element: &ReferenceElement, mut w: impl Write) -> Result<()> {
        writeln!(w, "x,u")?;
        for (x, u) in self.node_positions(element).iter().zip(&self.u) {
            writeln!(w, "{x:.16e},{u:.16e}")?;
        }
        Ok(())
    }
}

fn check_mesh(ops: &SchemeOperators, state: &MeshState) {
    assert_eq!(state.n_nodes, ops.p() + 1, "mesh and scheme orders differ");
    debug_assert!(
        (state.jacobian() - ops.jacobian).abs() <= 1e-12 * ops.jacobian,
        "scheme Jacobian {} does not match mesh Jacobian {}",
        ops.jacobian,
        state.jacobian()
    );
}

/// du/dt for u_t + u_x = 0 in operator form.
pub fn linear_advection_rhs(ops: &SchemeOperators, state: &MeshState) -> Vec<f64> {
    check_mesh(ops, state);
    let n = state.n_elements;
    let inv_j = 1.0 / state.jacobian();
    let mut out = vec![0.0; state.u.len()];
    let v = |j: usize| DVector::from_column_slice(state.element(j));
    for j in 0..n {
        let r = &ops.c_plus * v((j + 1) % n) + &ops.c_zero * v(j) + &ops.c_minus * v((j + n - 1) % n);
        for (o, r) in out[j * state.n_nodes..(j + 1) * state.n_nodes].iter_mut().zip(r.iter()) {
            *o = -inv_j * r;
        }
    }
    out
}

/// du/dt for u_t + (a(x) u)_x = 0 with a collocated flux f_i = a(x_i) u_i and
/// a common interface flux a(x_f)(α u⁻ + (1-α) u⁺). Requires a > 0.
pub fn flux_form_rhs(ops: &SchemeOperators, state: &MeshState, speed: impl Fn(f64) -> f64) -> Vec<f64> {
    check_mesh(ops, state);
    let e = &ops.element;
    let n = state.n_elements;
    let np = state.n_nodes;
    let dx = state.element_width();
    let inv_j = 1.0 / state.jacobian();
    let x = state.node_positions(e);
    let flux: Vec<f64> = state.u.iter().zip(&x).map(|(u, &x)| speed(x) * u).collect();
    // Common flux at the left face of each element.
    let face: Vec<f64> = (0..n)
        .map(|j| {
            let xf = state.x_left + j as f64 * dx;
            let upwind = e.l_right.dot(&DVector::from_column_slice(state.element((j + n - 1) % n)));
            let downwind = e.l_left.dot(&DVector::from_column_slice(state.element(j)));
            speed(xf) * (ops.alpha * upwind + (1.0 - ops.alpha) * downwind)
        })
        .collect();
    let mut out = vec![0.0; state.u.len()];
    for j in 0..n {
        let f = DVector::from_column_slice(&flux[j * np..(j + 1) * np]);
        let jump_l = face[j] - e.l_left.dot(&f);
        let jump_r = face[(j + 1) % n] - e.l_right.dot(&f);
        let div = &e.d * &f + &e.g_left * jump_l + &e.g_right * jump_r;
        for (o, r) in out[j * np..(j + 1) * np].iter_mut().zip(div.iter()) {
            *o = -inv_j * r;
        }
    }
    out
}

/// Wave speed sin(πx) + 2 of the heterogeneous test problem.
pub fn hetero_speed(x: f64) -> f64 {
    (std::f64::consts::PI * x).sin() + 2.0
}

pub fn heterogeneous_rhs(ops: &SchemeOperators, state: &MeshState) -> Vec<f64> {
    flux_form_rhs(ops, state, hetero_speed)
}

/// Explicit Runge–Kutta schemes.
///
/// For a linear right-hand side each is exactly the truncated exponential
/// Σ_{n≤s} (τL)ⁿ/n! with s = 3, 4, 5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RkScheme {
    /// Three-stage strong-stability-preserving RK3.
    Rk33,
    /// Classic four-stage RK4.
    Rk44,
    /// Five-stage Taylor scheme in Horner form (linear operators only).
    Rk55,
}

impl RkScheme {
    pub const ALL: [RkScheme; 3] = [RkScheme::Rk33, RkScheme::Rk44, RkScheme::Rk55];

    pub fn order(self) -> usize {
        match self {
            RkScheme::Rk33 => 3,
            RkScheme::Rk44 => 4,
            RkScheme::Rk55 => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RkScheme::Rk33 => "rk33",
            RkScheme::Rk44 => "rk44",
            RkScheme::Rk55 => "rk55",
        }
    }
}

impl FromStr for RkScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rk33" => Ok(RkScheme::Rk33),
            "rk44" | "rk44_ls" => Ok(RkScheme::Rk44),
            "rk55" => Ok(RkScheme::Rk55),
            other => Err(Error::invalid("rk", format!("unknown scheme `{other}`"))),
        }
    }
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(x, y)| a * x + y).collect()
}

/// One explicit step of size `tau`.
pub fn rk_advance(
    rhs: impl Fn(&MeshState) -> Vec<f64>,
    state: &MeshState,
    tau: f64,
    scheme: RkScheme,
) -> MeshState {
    let u0 = &state.u;
    let eval = |u: &[f64]| rhs(&state.with_values(u.to_vec()));
    let u = match scheme {
        RkScheme::Rk33 => {
            let u1 = axpy(tau, &eval(u0), u0);
            let u1b = axpy(tau, &eval(&u1), &u1);
            let u2: Vec<f64> = u0.iter().zip(&u1b).map(|(a, b)| 0.75 * a + 0.25 * b).collect();
            let u2b = axpy(tau, &eval(&u2), &u2);
            u0.iter().zip(&u2b).map(|(a, b)| a / 3.0 + 2.0 * b / 3.0).collect()
        }
        RkScheme::Rk44 => {
            let k1 = eval(u0);
            let k2 = eval(&axpy(0.5 * tau, &k1, u0));
            let k3 = eval(&axpy(0.5 * tau, &k2, u0));
            let k4 = eval(&axpy(tau, &k3, u0));
            (0..u0.len())
                .map(|i| u0[i] + tau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect()
        }
        RkScheme::Rk55 => {
            // v ← u + (τ/n) L v for n = 5, 4, …, 1
            let mut v = u0.clone();
            for n in (1..=5).rev() {
                v = axpy(tau / n as f64, &eval(&v), u0);
            }
            v
        }
    };
    state.with_values(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gsfr::{osfr_correction_f64, solve_correction, CorrectionParams};
    use crate::legendre::eval_legendre;
    use std::f64::consts::PI;

    fn dg(p: usize) -> CorrectionPair {
        osfr_correction_f64(p, 0.0).unwrap()
    }

    fn ops_for(pair: &CorrectionPair, kind: NodeKind, alpha: f64, n: usize, len: f64) -> SchemeOperators {
        SchemeOperators::from_correction(pair, kind, alpha, 0.5 * len / n as f64).unwrap()
    }

    fn global_matrix(ops: &SchemeOperators, n: usize, len: f64) -> DMatrix<f64> {
        let np = ops.p() + 1;
        let mut m = DMatrix::zeros(n * np, n * np);
        let proto = MeshState::zeros(n, 0.0, len, np).unwrap();
        for col in 0..n * np {
            let mut u = vec![0.0; n * np];
            u[col] = 1.0;
            let r = linear_advection_rhs(ops, &proto.with_values(u));
            for (row, v) in r.into_iter().enumerate() {
                m[(row, col)] = v;
            }
        }
        m
    }

    #[test]
    fn linear_p1_derivative() {
        let e = build_reference_element(&dg(1), NodeKind::Gauss).unwrap();
        let du = &e.d * DVector::from_vec(e.nodes.clone());
        assert!(du.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn element_invariants() {
        for p in 1..=5 {
            for kind in [NodeKind::Gauss, NodeKind::Lobatto] {
                let pair = dg(p);
                let e = build_reference_element(&pair, kind).unwrap();
                for i in 0..=p {
                    assert!(e.d.row(i).sum().abs() < 1e-12);
                }
                assert!((e.l_left.sum() - 1.0).abs() < 1e-14);
                let psi1 = DVector::from_iterator(p + 1, e.nodes.iter().map(|&x| eval_legendre(1, x)));
                assert!((e.l_left.dot(&psi1) + 1.0).abs() < 1e-14);
                for (g, &x) in e.g_left.iter().zip(&e.nodes) {
                    assert!((g - pair.h_l.derivative().eval(x)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn operator_structure() {
        let pair = solve_correction(&CorrectionParams::parse(3, &["1", "0.01", "0.01", "0.1"]).unwrap()).unwrap();
        for alpha in [0.5, 0.8, 1.0] {
            let ops = ops_for(&pair, NodeKind::Gauss, alpha, 4, 2.0);
            let ones = DVector::from_element(4, 1.0);
            let total = (&ops.c_plus + &ops.c_zero + &ops.c_minus) * &ones;
            assert!(total.amax() < 1e-11);
            let expect_zero = &ops.c_zero - (&ops.element.d
                - alpha * &ops.element.g_left * ops.element.l_left.transpose()
                - (1.0 - alpha) * &ops.element.g_right * ops.element.l_right.transpose());
            assert!(expect_zero.amax() < 1e-15);
        }
        assert!(SchemeOperators::from_correction(&pair, NodeKind::Gauss, 0.3, 1.0).is_err());
        assert!(SchemeOperators::from_correction(&pair, NodeKind::Gauss, 1.0, 0.0).is_err());
    }

    #[test]
    fn constant_state_is_steady() {
        let pair = solve_correction(&CorrectionParams::parse(3, &["1", "0.01", "0.01", "0.1"]).unwrap()).unwrap();
        for alpha in [0.5, 1.0] {
            let ops = ops_for(&pair, NodeKind::Gauss, alpha, 7, 2.0);
            let s = MeshState::from_fn(&ops.element, 7, -1.0, 1.0, |_| 3.7).unwrap();
            assert!(linear_advection_rhs(&ops, &s).iter().all(|v| v.abs() < 1e-11));
            assert!(flux_form_rhs(&ops, &s, |_| 1.0).iter().all(|v| v.abs() < 1e-11));
            let zero = MeshState::zeros(7, -1.0, 1.0, 4).unwrap();
            assert!(heterogeneous_rhs(&ops, &zero).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn smooth_field_is_differentiated_accurately() {
        let n = 40;
        let pair = dg(4);
        let ops = ops_for(&pair, NodeKind::Gauss, 1.0, n, 2.0 * PI);
        let s = MeshState::from_fn(&ops.element, n, 0.0, 2.0 * PI, f64::sin).unwrap();
        let r = linear_advection_rhs(&ops, &s);
        let x = s.node_positions(&ops.element);
        let err = r.iter().zip(&x).map(|(r, x)| (r + x.cos()).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn continuous_field_gives_alpha_independent_rhs() {
        // A smooth non-periodic field is continuous across every interior
        // face; only the wrap-around face jumps, so compare interior elements.
        let n = 6;
        let pair = dg(3);
        let ops_up = ops_for(&pair, NodeKind::Gauss, 1.0, n, 2.0 * PI);
        let ops_c = ops_for(&pair, NodeKind::Gauss, 0.5, n, 2.0 * PI);
        let s = MeshState::from_fn(&ops_up.element, n, 0.0, 2.0 * PI, |x| (x - PI).powi(2) * 0.1 + x).unwrap();
        let a = linear_advection_rhs(&ops_up, &s);
        let b = linear_advection_rhs(&ops_c, &s);
        for j in 1..n - 1 {
            for i in 0..4 {
                assert!((a[j * 4 + i] - b[j * 4 + i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn flux_form_with_unit_speed_matches_operator_form() {
        let n = 9;
        let pair = solve_correction(&CorrectionParams::parse(4, &["1", "1e-3", "0", "1e-4", "1e-6"]).unwrap()).unwrap();
        for alpha in [0.5, 0.75, 1.0] {
            let ops = ops_for(&pair, NodeKind::Gauss, alpha, n, 2.0);
            let s = MeshState::from_fn(&ops.element, n, -1.0, 1.0, |x| (3.0 * x).sin() + x * x).unwrap();
            let a = linear_advection_rhs(&ops, &s);
            let b = flux_form_rhs(&ops, &s, |_| 1.0);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gauss_and_lobatto_give_the_same_semi_discretisation() {
        // The two operators act on different nodal bases; compare after
        // mapping both to Legendre modal coefficients.
        let n = 5;
        let pair = solve_correction(&CorrectionParams::parse(3, &["1", "0.01", "0.01", "0.1"]).unwrap()).unwrap();
        let f = |x: f64| (2.0 * x).cos() + 0.3 * x;
        let mut modal = Vec::new();
        for kind in [NodeKind::Gauss, NodeKind::Lobatto] {
            let ops = ops_for(&pair, kind, 1.0, n, 2.0 * PI);
            // project f onto degree-3 polynomials per element via Gauss points, then sample
            let (gx, gw) = gauss_legendre(8);
            let dx = 2.0 * PI / n as f64;
            let mut s = MeshState::zeros(n, 0.0, 2.0 * PI, 4).unwrap();
            let mut coeffs = vec![[0.0; 4]; n];
            for j in 0..n {
                for (k, c) in coeffs[j].iter_mut().enumerate() {
                    *c = (2 * k + 1) as f64 / 2.0
                        * gx.iter()
                            .zip(&gw)
                            .map(|(&xi, &w)| w * f(j as f64 * dx + 0.5 * dx * (xi + 1.0)) * eval_legendre(k, xi))
                            .sum::<f64>();
                }
                for (i, &xi) in ops.element.nodes.iter().enumerate() {
                    s.u[j * 4 + i] = (0..4).map(|k| coeffs[j][k] * eval_legendre(k, xi)).sum();
                }
            }
            let r = linear_advection_rhs(&ops, &s);
            // nodal -> modal through the Vandermonde matrix
            let v = DMatrix::from_fn(4, 4, |i, k| eval_legendre(k, ops.element.nodes[i]));
            let inv = v.try_inverse().unwrap();
            let mut out = Vec::new();
            for j in 0..n {
                out.extend((&inv * DVector::from_column_slice(&r[j * 4..(j + 1) * 4])).iter().copied());
            }
            modal.push(out);
        }
        for (a, b) in modal[0].iter().zip(&modal[1]) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn linear_rhs_conserves_the_mean() {
        let n = 8;
        let pair = solve_correction(&CorrectionParams::parse(3, &["1", "2.069e-4", "2.336e-3", "2.336e-3"]).unwrap()).unwrap();
        for alpha in [0.5, 0.9, 1.0] {
            let ops = ops_for(&pair, NodeKind::Gauss, alpha, n, 2.0);
            let s = MeshState::from_fn(&ops.element, n, -1.0, 1.0, |x| (5.0 * x).sin() + (x * 7.0).cos().powi(3))
                .unwrap();
            let r = linear_advection_rhs(&ops, &s);
            let w = &ops.element.gauss_weights;
            let total: f64 = (0..n).map(|j| (0..4).map(|i| w[i] * r[j * 4 + i]).sum::<f64>()).sum();
            assert!(total.abs() < 1e-10, "{total}");
        }
    }

    #[test]
    fn rk_steps_equal_truncated_exponential() {
        let n = 5;
        let pair = dg(3);
        let ops = ops_for(&pair, NodeKind::Gauss, 1.0, n, 2.0);
        let a = global_matrix(&ops, n, 2.0);
        let s = MeshState::from_fn(&ops.element, n, 0.0, 2.0, |x| (PI * x).sin() + 0.2).unwrap();
        let tau = 0.05;
        for scheme in RkScheme::ALL {
            let stepped = rk_advance(|st| linear_advection_rhs(&ops, st), &s, tau, scheme);
            let mut term = DVector::from_vec(s.u.clone());
            let mut sum = term.clone();
            for k in 1..=scheme.order() {
                term = &a * term * (tau / k as f64);
                sum += &term;
            }
            let err = (DVector::from_vec(stepped.u.clone()) - sum).amax();
            assert!(err < 1e-12, "{scheme:?}: {err}");
            let same = rk_advance(|st| linear_advection_rhs(&ops, st), &s, 0.0, scheme);
            assert_eq!(same, s);
        }
    }

    #[test]
    fn one_period_is_accurate() {
        let n = 50;
        let pair = dg(3);
        let ops = ops_for(&pair, NodeKind::Gauss, 1.0, n, 2.0 * PI);
        let mut s = MeshState::from_fn(&ops.element, n, 0.0, 2.0 * PI, f64::cos).unwrap();
        let steps = 1000;
        let tau = 2.0 * PI / steps as f64;
        for _ in 0..steps {
            s = rk_advance(|st| linear_advection_rhs(&ops, st), &s, tau, RkScheme::Rk44);
        }
        let x = s.node_positions(&ops.element);
        let e2 = s.u.iter().zip(&x).map(|(u, x)| (u - x.cos()).abs()).sum::<f64>() / s.u.len() as f64;
        assert!(e2 < 1e-5, "{e2}");
    }

    #[test]
    fn energy_and_csv() {
        let pair = dg(3);
        let ops = ops_for(&pair, NodeKind::Lobatto, 1.0, 10, 2.0);
        let s = MeshState::from_fn(&ops.element, 10, -1.0, 1.0, |x| x).unwrap();
        assert!((s.energy(&ops.element) - 2.0 / 3.0).abs() < 1e-13);
        let mut buf = Vec::new();
        s.write_csv(&ops.element, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 41);
        assert!(text.starts_with("x,u\n-1.0000000000000000e0,-1.0000000000000000e0"));
    }

    #[test]
    fn scheme_names() {
        assert_eq!("RK44_LS".parse::<RkScheme>().unwrap(), RkScheme::Rk44);
        assert!("rk22".parse::<RkScheme>().is_err());
        assert_eq!("lobatto".parse::<NodeKind>().unwrap(), NodeKind::Lobatto);
        for s in RkScheme::ALL {
            assert_eq!(s.name().parse::<RkScheme>().unwrap(), s);
        }
    }

    #[test]
    fn hetero_speed_range() {
        for i in 0..=100 {
            let v = hetero_speed(-1.0 + i as f64 / 50.0);
            assert!((1.0..=3.0).contains(&v));
        }
    }
}
