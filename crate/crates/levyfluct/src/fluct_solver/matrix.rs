//! The 2×2 matrix `M_q(x, λ)`, its jump across the imaginary axis and the
//! residual of the differential form of the system on a solved grid.

use super::march::{Side, M2};
use super::solution::FluctuationGrid;
use crate::error::{invalid, FluctError, Result};
use crate::levy_model::{wiener_hopf_factors, LevyModel};
use crate::values::FluctValues;
use num_complex::Complex64;
use serde::Serialize;

fn need(v: Option<Complex64>) -> Result<Complex64> {
    v.ok_or_else(|| FluctError::InvalidInput("missing half-plane data for the matrix".into()))
}

/// `M` from the values of one half-plane: `[[A, -C], [Ā, B]]` above,
/// `[[B̄, A], [-C̄, Ā]]` below.
pub fn matrix_from_values(v: &FluctValues, side: Side) -> Result<M2> {
    Ok(match side {
        Side::Upper => [[v.a, -need(v.c)?], [v.a_bar, need(v.b)?]],
        Side::Lower => [[need(v.b_bar)?, v.a], [-need(v.c_bar)?, v.a_bar]],
    })
}

/// `M_q(x_k, λ)` at every grid node `1..=N`.
pub fn assemble_matrix(fg: &FluctuationGrid) -> Result<Vec<M2>> {
    (1..=fg.len())
        .map(|k| matrix_from_values(&fg.values(k), fg.side()))
        .collect()
}

pub fn det(m: &M2) -> Complex64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn mul(a: &M2, b: &M2) -> M2 {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            *e = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn max_abs_diff(a: &M2, b: &M2) -> f64 {
    (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| (a[i][j] - b[i][j]).norm())
        .fold(0.0, f64::max)
}

/// The jump matrix `[[0, -1], [1, φ(iu) + q]]`.
pub fn jump_matrix(model: &LevyModel, q: f64, u: f64) -> M2 {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    [[zero, -one], [one, model.phi(Complex64::new(0.0, u)) + q]]
}

/// One row of the jump check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct JumpResidual {
    pub u: f64,
    /// `‖M⁺ - M⁻S(iu)‖_∞`.
    pub jump: f64,
    /// Largest `|det M - 1|` at the off-axis evaluation points.
    pub det: f64,
}

/// Limit onto the axis from the side `sign = ±1`, by Richardson
/// extrapolation between `ε` and `ε/2`. Also returns the largest
/// `|det M - 1|` seen at the two off-axis points.
fn axis_limit<F>(matrix_at: &F, u: f64, sign: f64, eps: f64) -> Result<(M2, f64)>
where
    F: Fn(Complex64) -> Result<M2>,
{
    let m1 = matrix_at(Complex64::new(sign * eps, u))?;
    let m2 = matrix_at(Complex64::new(sign * eps / 2.0, u))?;
    let mut out = m2;
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = m2[i][j] * 2.0 - m1[i][j];
        }
    }
    let det_err = (det(&m1) - 1.0).norm().max((det(&m2) - 1.0).norm());
    Ok((out, det_err))
}

/// Checks `M⁺ = M⁻S(iu)` at each `u`, with `matrix_at(λ)` returning
/// `M_q(x, λ)` for the fixed `x` of interest off the axis.
pub fn check_rh_jump<F>(
    matrix_at: F,
    model: &LevyModel,
    q: f64,
    us: &[f64],
    eps: f64,
) -> Result<Vec<JumpResidual>>
where
    F: Fn(Complex64) -> Result<M2>,
{
    if !(eps > 0.0) {
        return invalid("extrapolation step must be positive");
    }
    us.iter()
        .map(|&u| {
            let (plus, det_plus) = axis_limit(&matrix_at, u, 1.0, eps)?;
            let (minus, det_minus) = axis_limit(&matrix_at, u, -1.0, eps)?;
            let rhs = mul(&minus, &jump_matrix(model, q, u));
            Ok(JumpResidual {
                u,
                jump: max_abs_diff(&plus, &rhs),
                det: det_plus.max(det_minus),
            })
        })
        .collect()
}

/// Behaviour of `M` as `Re λ → -∞` and the decaying corners.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AsymptoticDiagnostic {
    pub lambda: f64,
    /// `M₁₁/ψ̄₀(λ)`, tends to 1.
    pub m11_ratio: Complex64,
    /// `ψ̄₀(λ)·M₂₂`, tends to 1.
    pub m22_product: Complex64,
    /// `|e^{λx}M₁₂|`, tends to 0.
    pub corner_upper: f64,
    /// `|e^{-λx}M₂₁|`, tends to 0 when the negative half-line is irregular.
    pub corner_lower: f64,
}

/// Evaluates the large-`|λ|` diagnostics at negative real `λ`s.
pub fn asymptotic_diagnostics<F>(
    matrix_at: F,
    model: &LevyModel,
    x: f64,
    lambdas: &[f64],
) -> Result<Vec<AsymptoticDiagnostic>>
where
    F: Fn(Complex64) -> Result<M2>,
{
    let wh0 = wiener_hopf_factors(model, 0.0)?;
    lambdas
        .iter()
        .map(|&l| {
            if !(l < 0.0) {
                return invalid("diagnostics need Re λ < 0");
            }
            let lambda = Complex64::new(l, 0.0);
            let m = matrix_at(lambda)?;
            let pb = wh0.psi_bar(lambda)?;
            Ok(AsymptoticDiagnostic {
                lambda: l,
                m11_ratio: m[0][0] / pb,
                m22_product: pb * m[1][1],
                corner_upper: ((lambda * x).exp() * m[0][1]).norm(),
                corner_lower: ((-lambda * x).exp() * m[1][0]).norm(),
            })
        })
        .collect()
}

/// Per-cell residual of `ΔM = P·M_mid`, where `P` carries the potential
/// masses `e^{∓λξ}ΔH/H̄`, `e^{±λξ}ΔH̄/H` at the cell midpoint `ξ`.
///
/// Each entry is measured relative to its size on the cell, which keeps
/// rows that grow like `e^{±λx}` comparable. The first cell is skipped
/// because the potential masses are singular there.
pub fn sc_residual(fg: &FluctuationGrid) -> Result<Vec<f64>> {
    let ms = assemble_matrix(fg)?;
    let rp = fg.renewal();
    let (h, hb) = (rp.h(), rp.hbar());
    let lambda = fg.lambda();
    let n = fg.len();
    Ok((2..=n)
        .map(|k| {
            let (x0, x1) = (fg.x(k - 1), fg.x(k));
            let xi = 0.5 * (x0 + x1);
            let h_mid = 0.5 * (h[k - 1] + h[k]);
            let hb_mid = 0.5 * (hb[k - 1] + hb[k]);
            let p12 = (-lambda * xi).exp() * ((h[k] - h[k - 1]) / hb_mid);
            let p21 = (lambda * xi).exp() * ((hb[k] - hb[k - 1]) / h_mid);
            let (m0, m1) = (&ms[k - 2], &ms[k - 1]);
            let mut r = [[Complex64::new(0.0, 0.0); 2]; 2];
            let mut size = [[0.0; 2]; 2];
            for j in 0..2 {
                let mid = [(m0[0][j] + m1[0][j]) * 0.5, (m0[1][j] + m1[1][j]) * 0.5];
                r[0][j] = m1[0][j] - m0[0][j] - p12 * mid[1];
                r[1][j] = m1[1][j] - m0[1][j] - p21 * mid[0];
                size[0][j] = m0[0][j].norm().max(m1[0][j].norm());
                size[1][j] = m0[1][j].norm().max(m1[1][j].norm());
            }
            (0..2)
                .flat_map(|i| (0..2).map(move |j| (i, j)))
                .map(|(i, j)| r[i][j].norm() / size[i][j].max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max)
        })
        .collect())
}
