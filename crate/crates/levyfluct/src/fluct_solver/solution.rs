//! Forward and backward solutions of the integral system for one `(q, λ)`.

use super::march::{apply, apply_transpose, expm2, first_node_state, generator, Cell, Side, V2};
use super::renewal::RenewalPair;
use crate::error::{invalid, Result};
use crate::levy_model::WienerHopfPair;
use num_complex::Complex64;

/// The backward march continues past `X_max` on a geometric tail up to this
/// multiple of `X_max`, with power-law extrapolated renewal functions.
const TAIL_FACTOR: f64 = 1e4;
const TAIL_CELLS: usize = 400;

/// Truncation ratios above this put the result in warning status.
pub const TRUNCATION_WARNING: f64 = 1e-5;

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const NAN: Complex64 = Complex64::new(f64::NAN, f64::NAN);

fn cells(rp: &RenewalPair) -> Vec<Cell> {
    let g = rp.grid();
    let (h, hb) = (rp.h(), rp.hbar());
    (1..=g.len())
        .map(|k| Cell {
            p: (h[k] / h[k - 1]).ln(),
            pbar: (hb[k] / hb[k - 1]).ln(),
            h: g.node(k) - g.node(k - 1),
        })
        .collect()
}

fn log_slope(rp: &RenewalPair, values: &[f64], k: usize) -> f64 {
    let g = rp.grid();
    (values[k] / values[k - 1]).ln() / (g.node(k) / g.node(k - 1)).ln()
}

/// Forward ratios at nodes `0..=N`.
///
/// Upper side: `(A/H, e^{-λx}Ā/H̄)`; lower side: `(e^{λx}A/H, Ā/H̄)`.
#[derive(Debug, Clone)]
pub struct ForwardSolution {
    pub lambda: Complex64,
    pub side: Side,
    pub states: Vec<V2>,
}

pub fn solve_forward(rp: &RenewalPair, lambda: Complex64, side: Side) -> ForwardSolution {
    let n = rp.grid().len();
    let cells = cells(rp);
    let mut states = Vec::with_capacity(n + 1);
    states.push([ONE, ONE]);
    let start = if rp.h0() > 0.0 && rp.hbar0() > 0.0 {
        1
    } else {
        let kappa = if rp.h0() > 0.0 || n < 2 {
            0.0
        } else {
            log_slope(rp, rp.h(), 2)
        };
        let kappa_bar = if rp.hbar0() > 0.0 || n < 2 {
            0.0
        } else {
            log_slope(rp, rp.hbar(), 2)
        };
        states.push(first_node_state(
            kappa,
            kappa_bar,
            rp.grid().node(1),
            lambda,
            side,
        ));
        2
    };
    for cell in &cells[start - 1..] {
        let e = expm2(generator(*cell, lambda, side));
        let prev = *states.last().expect("nonempty");
        states.push(apply(&e, prev));
    }
    ForwardSolution {
        lambda,
        side,
        states,
    }
}

/// Backward states at nodes `1..=N` (node 0 is `NaN`).
///
/// Upper side: `(H·B, H̄·e^{λx}C)`; lower side: `(H·e^{-λx}C̄, H̄·B̄)`. Paired
/// with the forward states their dot product is `AB + ĀC` resp. `ĀB̄ + AC̄`.
#[derive(Debug, Clone)]
pub struct BackwardSolution {
    pub lambda: Complex64,
    pub side: Side,
    pub states: Vec<V2>,
    /// `|C̃|` at `¾X_max` relative to its largest value on the grid.
    pub truncation: f64,
}

fn check_validity(wh: &WienerHopfPair, lambda: Complex64, side: Side) -> Result<()> {
    let ok = match side {
        Side::Upper => lambda.re > 0.0 || (lambda.re == 0.0 && (wh.q() > 0.0 || drifts(wh, -1.0))),
        Side::Lower => lambda.re < 0.0 || (lambda.re == 0.0 && (wh.q() > 0.0 || drifts(wh, 1.0))),
    };
    if ok {
        Ok(())
    } else {
        invalid(format!("λ = {lambda} is outside the validity region of the {side:?} backward functions at q = {}", wh.q()))
    }
}

// q = 0 on the axis needs X → -∞ (sign -1) for B, C and X → +∞ for B̄, C̄.
fn drifts(wh: &WienerHopfPair, sign: f64) -> bool {
    wh.model().mean().is_some_and(|m| m * sign > 0.0)
}

pub fn solve_backward(
    rp: &RenewalPair,
    lambda: Complex64,
    side: Side,
    wh: &WienerHopfPair,
) -> Result<BackwardSolution> {
    check_validity(wh, lambda, side)?;
    let g = rp.grid();
    let n = g.len();
    let (h, hb) = (rp.h(), rp.hbar());
    let x_max = g.x_max();
    let (kappa, kappa_bar) = if n >= 2 {
        (log_slope(rp, h, n), log_slope(rp, hb, n))
    } else {
        (0.0, 0.0)
    };
    let step = TAIL_FACTOR.ln() / TAIL_CELLS as f64;
    let far = x_max * TAIL_FACTOR;
    let (h_far, hb_far) = (
        h[n] * TAIL_FACTOR.powf(kappa),
        hb[n] * TAIL_FACTOR.powf(kappa_bar),
    );
    let mut v = match side {
        Side::Upper => [h_far * wh.psi(lambda)?, Complex64::new(0.0, 0.0)],
        Side::Lower => [Complex64::new(0.0, 0.0), hb_far * wh.psi_bar(lambda)?],
    };
    for j in (1..=TAIL_CELLS).rev() {
        let (a, b) = (
            x_max * (step * (j - 1) as f64).exp(),
            if j == TAIL_CELLS {
                far
            } else {
                x_max * (step * j as f64).exp()
            },
        );
        let cell = Cell {
            p: kappa * step,
            pbar: kappa_bar * step,
            h: b - a,
        };
        v = apply_transpose(&expm2(generator(cell, lambda, side)), v);
    }
    let cells = cells(rp);
    let mut states = vec![[NAN, NAN]; n + 1];
    states[n] = v;
    for k in (2..=n).rev() {
        v = apply_transpose(&expm2(generator(cells[k - 1], lambda, side)), v);
        states[k - 1] = v;
    }
    let c_scaled = |k: usize| match side {
        Side::Upper => states[k][1].norm() / hb[k],
        Side::Lower => states[k][0].norm() / h[k],
    };
    let peak = (1..=n).map(c_scaled).fold(0.0, f64::max);
    let k34 = g.cell_of(0.75 * x_max);
    let truncation = if peak > 0.0 {
        c_scaled(k34) / peak
    } else {
        0.0
    };
    Ok(BackwardSolution {
        lambda,
        side,
        states,
        truncation,
    })
}

/// The six fluctuation functions of one half-plane family on a grid.
///
/// Values are carried as bounded ratios; the accessors rebuild the raw
/// functions, which may overflow for large `|λ|x`.
#[derive(Debug, Clone)]
pub struct FluctuationGrid {
    q: f64,
    lambda: Complex64,
    side: Side,
    rp: RenewalPair,
    forward: Vec<V2>,
    backward: Option<Vec<V2>>,
    truncation: Option<f64>,
}

impl FluctuationGrid {
    /// Forward part only.
    pub fn forward(rp: &RenewalPair, q: f64, lambda: Complex64, side: Side) -> Self {
        let f = solve_forward(rp, lambda, side);
        Self {
            q,
            lambda,
            side,
            rp: rp.clone(),
            forward: f.states,
            backward: None,
            truncation: None,
        }
    }

    /// Forward and backward parts on the half-plane of `λ` (upper on the axis).
    pub fn solve(rp: &RenewalPair, lambda: Complex64, wh: &WienerHopfPair) -> Result<Self> {
        Self::solve_side(rp, lambda, Side::for_lambda(lambda), wh)
    }

    pub fn solve_side(
        rp: &RenewalPair,
        lambda: Complex64,
        side: Side,
        wh: &WienerHopfPair,
    ) -> Result<Self> {
        let b = solve_backward(rp, lambda, side, wh)?;
        let mut fg = Self::forward(rp, wh.q(), lambda, side);
        fg.backward = Some(b.states);
        fg.truncation = Some(b.truncation);
        Ok(fg)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn lambda(&self) -> Complex64 {
        self.lambda
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn renewal(&self) -> &RenewalPair {
        &self.rp
    }

    pub fn len(&self) -> usize {
        self.rp.grid().len()
    }

    pub fn is_empty(&self) -> bool {
        self.rp.grid().is_empty()
    }

    pub fn x(&self, k: usize) -> f64 {
        self.rp.grid().node(k)
    }

    pub fn truncation(&self) -> Option<f64> {
        self.truncation
    }

    pub fn truncation_warning(&self) -> bool {
        self.truncation.is_some_and(|t| t > TRUNCATION_WARNING)
    }

    fn ex(&self, k: usize, sign: f64) -> Complex64 {
        (self.lambda * (sign * self.x(k))).exp()
    }

    /// `A(x_k⁻, λ)`.
    pub fn a(&self, k: usize) -> Complex64 {
        let u = self.forward[k][0] * self.rp.h()[k];
        match self.side {
            Side::Upper => u,
            Side::Lower => u * self.ex(k, -1.0),
        }
    }

    /// `Ā(x_k, λ)`.
    pub fn a_bar(&self, k: usize) -> Complex64 {
        let u = self.forward[k][1] * self.rp.hbar()[k];
        match self.side {
            Side::Upper => u * self.ex(k, 1.0),
            Side::Lower => u,
        }
    }

    /// `e^{-λx}Ā(x_k, λ)`.
    pub fn a_bar_scaled(&self, k: usize) -> Complex64 {
        let u = self.forward[k][1] * self.rp.hbar()[k];
        match self.side {
            Side::Upper => u,
            Side::Lower => u * self.ex(k, -1.0),
        }
    }

    fn back(&self, k: usize, side: Side) -> Option<V2> {
        match &self.backward {
            Some(v) if self.side == side && k >= 1 => Some(v[k]),
            _ => None,
        }
    }

    /// `B(x_k, λ)` (upper side).
    pub fn b(&self, k: usize) -> Option<Complex64> {
        self.back(k, Side::Upper).map(|v| v[0] / self.rp.h()[k])
    }

    /// `e^{λx}C(x_k⁻, λ)` (upper side).
    pub fn c_scaled(&self, k: usize) -> Option<Complex64> {
        self.back(k, Side::Upper).map(|v| v[1] / self.rp.hbar()[k])
    }

    pub fn c(&self, k: usize) -> Option<Complex64> {
        self.c_scaled(k).map(|c| c * self.ex(k, -1.0))
    }

    /// `B̄(x_k⁻, λ)` (lower side).
    pub fn b_bar(&self, k: usize) -> Option<Complex64> {
        self.back(k, Side::Lower).map(|v| v[1] / self.rp.hbar()[k])
    }

    /// `e^{-λx}C̄(x_k, λ)` (lower side).
    pub fn c_bar_scaled(&self, k: usize) -> Option<Complex64> {
        self.back(k, Side::Lower).map(|v| v[0] / self.rp.h()[k])
    }

    pub fn c_bar(&self, k: usize) -> Option<Complex64> {
        self.c_bar_scaled(k).map(|c| c * self.ex(k, 1.0))
    }

    /// `|AB + ĀC - 1|` (upper) or `|ĀB̄ + AC̄ - 1|` (lower) at node `k`,
    /// computed from the bounded ratios.
    pub fn identity_residual(&self, k: usize) -> Option<f64> {
        let v = self.back(k, self.side)?;
        let u = self.forward[k];
        Some((u[0] * v[0] + u[1] * v[1] - 1.0).norm())
    }

    pub fn max_identity_residual(&self) -> Option<f64> {
        (1..=self.len())
            .map(|k| self.identity_residual(k))
            .try_fold(0.0, |m, r| r.map(|r| f64::max(m, r)))
    }

    /// Node values `A`, `Ā`, `B`, `C` or `A`, `Ā`, `B̄`, `C̄` at `x_k`.
    pub fn values(&self, k: usize) -> crate::FluctValues {
        let mut out = crate::FluctValues {
            a: self.a(k),
            a_bar: self.a_bar(k),
            b: None,
            c: None,
            b_bar: None,
            c_bar: None,
        };
        match self.side {
            Side::Upper => {
                out.b = self.b(k);
                out.c = self.c(k);
            }
            Side::Lower => {
                out.b_bar = self.b_bar(k);
                out.c_bar = self.c_bar(k);
            }
        }
        out
    }

    /// Index of the grid node closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let k = self.rp.grid().cell_of(x);
        if (x - self.x(k - 1)).abs() < (self.x(k) - x).abs() && k > 1 {
            k - 1
        } else {
            k
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluct_solver::Grid;
    use crate::levy_model::{wiener_hopf_factors, LevyModel};
    use crate::scale_forms::{
        derive_renewal_from_scale, invert_scale_function, spectrally_negative_functions,
    };

    fn brownian_rp(n: usize, x_max: f64) -> RenewalPair {
        let g = Grid::nested(n, x_max).unwrap();
        RenewalPair::from_fn(g, 0.0, 0.0, |x| (x / 2.0, x / 2.0)).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_lambda_reproduces_renewal_functions() {
        let rp = brownian_rp(256, 10.0);
        let fg = FluctuationGrid::forward(&rp, 0.0, c(0.0, 0.0), Side::Upper);
        for k in 1..=fg.len() {
            assert!((fg.a(k) - rp.h()[k]).norm() <= 1e-14 * rp.h()[k]);
            assert!((fg.a_bar(k) - rp.hbar()[k]).norm() <= 1e-14 * rp.hbar()[k]);
        }
    }

    #[test]
    fn brownian_values_at_one() {
        let model = LevyModel::brownian(1.0, 0.0).unwrap();
        let wh = wiener_hopf_factors(&model, 0.0).unwrap();
        let rp = brownian_rp(4096, 50.0);
        let fg = FluctuationGrid::solve(&rp, c(1.0, 0.0), &wh).unwrap();
        let k = fg.nearest(1.0);
        assert_eq!(fg.x(k), 1.0);
        let e = (-1.0f64).exp();
        assert!(
            (fg.b(k).unwrap() - 2.0).norm() < 1e-3,
            "B = {}",
            fg.b(k).unwrap()
        );
        assert!(
            (fg.c(k).unwrap() - e).norm() < 1e-3,
            "C = {}",
            fg.c(k).unwrap()
        );
        let sf = invert_scale_function(&model, 0.0, &Grid::nested(64, 2.0).unwrap()).unwrap();
        let exact = spectrally_negative_functions(&sf, 1.0, c(1.0, 0.0)).unwrap();
        assert!(
            (fg.a(k) - exact.a).norm() < 1e-3,
            "A = {} vs {}",
            fg.a(k),
            exact.a
        );
        assert!((fg.a_bar(k) - exact.a_bar).norm() < 1e-3);
        let r = fg.max_identity_residual().unwrap();
        assert!(r < 1e-4, "identity {r}");
    }

    #[test]
    fn brownian_lower_half_plane() {
        let model = LevyModel::brownian(1.0, 0.0).unwrap();
        let wh = wiener_hopf_factors(&model, 1.0).unwrap();
        let g = Grid::nested(4096, 40.0).unwrap();
        let sf = invert_scale_function(&model, 1.0, &g).unwrap();
        let rp = derive_renewal_from_scale(&sf).unwrap();
        for lambda in [c(-1.0, 0.5), c(-3.0, 0.0), c(0.0, 1.0)] {
            let fg = FluctuationGrid::solve_side(&rp, lambda, Side::Lower, &wh).unwrap();
            let k = fg.nearest(1.0);
            let exact = spectrally_negative_functions(&sf, fg.x(k), lambda).unwrap();
            let tol = 1e-3;
            assert!(
                (fg.a(k) - exact.a).norm() < tol * (1.0 + exact.a.norm()),
                "{lambda}: A {} vs {}",
                fg.a(k),
                exact.a
            );
            assert!((fg.a_bar(k) - exact.a_bar).norm() < tol * (1.0 + exact.a_bar.norm()));
            let bb = exact.b_bar.unwrap();
            let cb = exact.c_bar.unwrap();
            assert!(
                (fg.b_bar(k).unwrap() - bb).norm() < tol * (1.0 + bb.norm()),
                "{lambda}: B̄ {} vs {bb}",
                fg.b_bar(k).unwrap()
            );
            assert!(
                (fg.c_bar(k).unwrap() - cb).norm() < tol * (1.0 + cb.norm()),
                "{lambda}: C̄ {} vs {cb}",
                fg.c_bar(k).unwrap()
            );
            let r = fg.max_identity_residual().unwrap();
            assert!(r < 1e-4, "{lambda}: identity {r}");
        }
    }

    #[test]
    fn q_zero_imaginary_axis_is_rejected_without_drift() {
        let model = LevyModel::brownian(1.0, 0.0).unwrap();
        let wh = wiener_hopf_factors(&model, 0.0).unwrap();
        let rp = brownian_rp(64, 10.0);
        assert!(solve_backward(&rp, c(0.0, 1.0), Side::Upper, &wh).is_err());
        assert!(solve_backward(&rp, c(-1.0, 0.0), Side::Upper, &wh).is_err());
    }

    #[test]
    fn march_is_deterministic() {
        let model = LevyModel::brownian(1.0, 0.0).unwrap();
        let wh = wiener_hopf_factors(&model, 0.0).unwrap();
        let rp = brownian_rp(512, 20.0);
        let a = FluctuationGrid::solve(&rp, c(0.7, 0.3), &wh).unwrap();
        let b = FluctuationGrid::solve(&rp, c(0.7, 0.3), &wh).unwrap();
        for k in 1..=a.len() {
            assert_eq!(a.a(k).to_string(), b.a(k).to_string());
            assert_eq!(a.b(k).unwrap().to_string(), b.b(k).unwrap().to_string());
        }
    }
}
