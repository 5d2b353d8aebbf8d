//! Cell propagators for the forward and backward marches.
//!
//! Forward unknowns are ratios to the renewal functions, e.g. `α = A/H`
//! and `ᾱ̃ = e^{-λx}Ā/H̄`. On a cell where `ln H`, `ln H̄` and `x` move in
//! proportion they obey a constant-coefficient 2×2 system, solved exactly
//! with a matrix exponential. The backward unknowns use the transposed
//! propagator, which makes `A·B + Ā·C` an exact invariant of the march.

use crate::numerics::cmath::exprel;
use num_complex::Complex64;

pub type V2 = [Complex64; 2];
pub type M2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Which half-plane family is carried: `(B, C)` above, `(B̄, C̄)` below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Upper,
    Lower,
}

impl Side {
    /// `Upper` for `Re λ ≥ 0`.
    pub fn for_lambda(lambda: Complex64) -> Self {
        if lambda.re >= 0.0 {
            Side::Upper
        } else {
            Side::Lower
        }
    }
}

/// `exp(m)` for a 2×2 matrix, exact when an eigenvalue is exactly 0.
pub fn expm2(m: M2) -> M2 {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let half = tr * 0.5;
    let disc = (half * half - det).sqrt();
    let (r1, r2) = (half + disc, half - disc);
    let big = if r1.norm() >= r2.norm() { r1 } else { r2 };
    let small = if big.norm() == 0.0 { ZERO } else { det / big };
    // expand about the eigenvalue with the larger real part so nothing overflows
    let (top, other) = if small.re >= big.re {
        (small, big)
    } else {
        (big, small)
    };
    let f = exprel(other - top);
    let e = top.exp();
    [
        [e * (ONE + f * (m[0][0] - top)), e * f * m[0][1]],
        [e * f * m[1][0], e * (ONE + f * (m[1][1] - top))],
    ]
}

/// Cell data: `p = Δln H`, `p̄ = Δln H̄`, `h = Δx`.
#[derive(Debug, Clone, Copy)]
pub struct Cell {
    pub p: f64,
    pub pbar: f64,
    pub h: f64,
}

/// Generator of the forward system on one cell.
pub fn generator(c: Cell, lambda: Complex64, side: Side) -> M2 {
    let (s1, s2) = match side {
        Side::Upper => (ZERO, -lambda * c.h),
        Side::Lower => (lambda * c.h, ZERO),
    };
    [
        [s1 - c.p, Complex64::new(c.p, 0.0)],
        [Complex64::new(c.pbar, 0.0), s2 - c.pbar],
    ]
}

pub fn apply(e: &M2, u: V2) -> V2 {
    [
        e[0][0] * u[0] + e[0][1] * u[1],
        e[1][0] * u[0] + e[1][1] * u[1],
    ]
}

pub fn apply_transpose(e: &M2, v: V2) -> V2 {
    [
        e[0][0] * v[0] + e[1][0] * v[1],
        e[0][1] * v[0] + e[1][1] * v[1],
    ]
}

/// Forward state at the first node when the march cannot start at 0.
///
/// With `H ~ x^κ`, `H̄ ~ x^κ̄` near 0, `A/H = 1 + aλx` and `Ā/H̄ = 1 + bλx`
/// to first order, where `a = -κ/(1+κ+κ̄)` and `b = κ̄/(1+κ+κ̄)`.
pub fn first_node_state(kappa: f64, kappa_bar: f64, x1: f64, lambda: Complex64, side: Side) -> V2 {
    let d = 1.0 + kappa + kappa_bar;
    let (a, b) = (-kappa / d, kappa_bar / d);
    let lx = lambda * x1;
    match side {
        Side::Upper => [ONE + lx * a, ONE + lx * (b - 1.0)],
        Side::Lower => [ONE + lx * (a + 1.0), ONE + lx * b],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn expm_matches_series() {
        let m = [[c(-0.3, 0.1), c(0.2, 0.0)], [c(0.5, 0.0), c(-0.9, -0.4)]];
        let mut term = [[ONE, ZERO], [ZERO, ONE]];
        let mut sum = term;
        for k in 1..30 {
            let mut next = [[ZERO; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    next[i][j] = (term[i][0] * m[0][j] + term[i][1] * m[1][j]) / k as f64;
                }
            }
            term = next;
            for i in 0..2 {
                for j in 0..2 {
                    sum[i][j] += term[i][j];
                }
            }
        }
        let e = expm2(m);
        for i in 0..2 {
            for j in 0..2 {
                assert!((e[i][j] - sum[i][j]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn expm_keeps_stochastic_rows_exact() {
        let g = generator(
            Cell {
                p: 0.37,
                pbar: 1.3e-3,
                h: 0.1,
            },
            c(0.0, 0.0),
            Side::Upper,
        );
        let e = expm2(g);
        let u = apply(&e, [ONE, ONE]);
        assert_eq!(u, [ONE, ONE]);
    }

    #[test]
    fn expm_handles_stiff_cells() {
        let g = generator(
            Cell {
                p: 1e-3,
                pbar: 1e-3,
                h: 1e4,
            },
            c(2.0, 1.0),
            Side::Upper,
        );
        let e = expm2(g);
        assert!(e
            .iter()
            .flatten()
            .all(|z| z.re.is_finite() && z.im.is_finite()));
        assert!((e[0][0] - (-1e-3f64).exp()).norm() < 1e-6);
    }
}
