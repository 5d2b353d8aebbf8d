//! Closed forms for unkilled strictly stable processes, with `γ = αρ` and
//! `δ = α(1-ρ)`.
//!
//! `ψ_0(λ) = λ^γ`, `ψ̄_0(λ) = (-λ)^δ`, `H_0(x) = k₊x^γ`, `H̄_0(x) = k₋x^δ`.
//! The barred functions follow by swapping `γ, δ` and negating `λ`.
//!
//! For complex `λ` the half-line integrals are taken along the ray
//! `arg y = -arg λ`, on which `e^{-λy}` decays without oscillating.

use crate::error::{invalid, FluctError, Result};
use crate::fluct_solver::{Grid, RenewalPair};
use crate::levy_model::StableParams;
use crate::numerics::cmath::cpow;
use crate::numerics::quadrature::{exp_sinh, tanh_sinh};
use crate::values::FluctValues;
use num_complex::Complex64;
use statrs::function::gamma::gamma;

const TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableClosedForm {
    pub params: StableParams,
    pub k_plus: f64,
    pub k_minus: f64,
}

impl StableClosedForm {
    pub fn new(params: StableParams) -> Self {
        let g1 = gamma(params.alpha + 1.0);
        Self {
            params,
            k_plus: gamma(params.delta + 1.0) / g1,
            k_minus: gamma(params.gamma + 1.0) / g1,
        }
    }

    pub fn h(&self, x: f64) -> f64 {
        self.k_plus * x.powf(self.params.gamma)
    }

    pub fn hbar(&self, x: f64) -> f64 {
        self.k_minus * x.powf(self.params.delta)
    }
}

fn is_one(v: f64) -> bool {
    (v - 1.0).abs() < 1e-12
}

fn check_x(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        invalid(format!("x = {x} must be positive and finite"))
    }
}

/// `A_0(x, λ) = Γ(γ)^{-1} ∫_0^x e^{-λy} y^{γ-1} (1 - y/x)^δ dy`.
pub fn stable_a(p: &StableParams, x: f64, lambda: Complex64) -> Result<Complex64> {
    check_x(x)?;
    let (g, d) = (p.gamma, p.delta);
    let f = |y: f64, left: f64, right: f64| {
        (-lambda * y).exp() * (left.powf(g - 1.0) * (right / x).powf(d))
    };
    // split where e^{-λy} has decayed when x is long on that scale
    let m = if lambda.re > 0.0 {
        (40.0 / lambda.re).min(0.5 * x)
    } else {
        0.5 * x
    };
    let head = tanh_sinh(0.0, m, TOL, |y, da, db| f(y, da, db + (x - m)));
    let tail = tanh_sinh(m, x, TOL, |y, _, db| f(y, y, db));
    Ok((head + tail) / gamma(g))
}

/// `C_0(x, λ)` for `Re λ ≥ 0`.
pub fn stable_c(p: &StableParams, x: f64, lambda: Complex64) -> Result<Complex64> {
    check_x(x)?;
    if lambda.re < 0.0 {
        return invalid("C_0 needs Re λ ≥ 0");
    }
    let (g, d) = (p.gamma, p.delta);
    if is_one(g) {
        return Ok((-lambda * x).exp() * gamma(p.alpha) * x.powf(-d));
    }
    c_integral(g, d, x, lambda)
}

/// `Γ(δ+1)/(Γ(1-γ)Γ(γ)) ∫_x^∞ e^{-λy} (y/x - 1)^{-γ} y^{-δ-1} dy`, with
/// `y = x + t` and `t` on the ray `τ e^{-iθ}`, `θ = arg λ`.
fn c_integral(g: f64, d: f64, x: f64, lambda: Complex64) -> Result<Complex64> {
    if is_one(g) {
        return Err(FluctError::Numerical(
            "γ = 1 must use the closed display".into(),
        ));
    }
    let theta = if lambda.norm() == 0.0 {
        0.0
    } else {
        lambda.arg()
    };
    let r = lambda.norm();
    let dir = Complex64::from_polar(1.0, -theta);
    let integral = exp_sinh(0.0, TOL, |tau, _| {
        cpow(Complex64::new(x, 0.0) + dir * tau, -d - 1.0) * ((-r * tau).exp() * tau.powf(-g))
    });
    let pref = gamma(d + 1.0) / (gamma(1.0 - g) * gamma(g));
    // (t/x)^{-γ} = (τ/x)^{-γ} e^{iγθ}, dt = e^{-iθ} dτ
    let rot = Complex64::from_polar(x.powf(g), (g - 1.0) * theta);
    Ok((-lambda * x).exp() * rot * integral * pref)
}

/// `B_0(x, λ)` for `Re λ ≥ 0`:
/// `γ/Γ(1-γ) ∫_0^∞ (1 - e^{-λy})(y/x + 1)^{-δ} y^{-γ-1} dy + Γ(α)/Γ(δ) x^{-γ}`.
pub fn stable_b(p: &StableParams, x: f64, lambda: Complex64) -> Result<Complex64> {
    check_x(x)?;
    if lambda.re < 0.0 {
        return invalid("B_0 needs Re λ ≥ 0");
    }
    let (g, d) = (p.gamma, p.delta);
    if is_one(g) {
        return Ok(lambda + d / x);
    }
    let base = Complex64::new(gamma(p.alpha) / gamma(d) * x.powf(-g), 0.0);
    let r = lambda.norm();
    if r == 0.0 {
        return Ok(base);
    }
    let theta = lambda.arg();
    let dir = Complex64::from_polar(1.0, -theta);
    let integral = exp_sinh(0.0, TOL, |tau, _| {
        let one_minus = -(-r * tau).exp_m1();
        cpow(dir * (tau / x) + 1.0, -d) * (one_minus * tau.powf(-g - 1.0))
    });
    // y^{-γ-1} dy = τ^{-γ-1} e^{i(γ+1)θ} e^{-iθ} dτ
    let rot = Complex64::from_polar(1.0, g * theta);
    Ok(rot * integral * (g / gamma(1.0 - g)) + base)
}

/// All six functions at `(x, λ)`: `B, C` when `Re λ ≥ 0`, `B̄, C̄` when `Re λ ≤ 0`.
pub fn stable_functions(p: &StableParams, x: f64, lambda: Complex64) -> Result<FluctValues> {
    let dual = p.dual();
    let a = stable_a(p, x, lambda)?;
    let a_bar = stable_a(&dual, x, -lambda)?;
    let (b, c) = if lambda.re >= 0.0 {
        (Some(stable_b(p, x, lambda)?), Some(stable_c(p, x, lambda)?))
    } else {
        (None, None)
    };
    let (b_bar, c_bar) = if lambda.re <= 0.0 {
        (
            Some(stable_b(&dual, x, -lambda)?),
            Some(stable_c(&dual, x, -lambda)?),
        )
    } else {
        (None, None)
    };
    Ok(FluctValues {
        a,
        a_bar,
        b,
        c,
        b_bar,
        c_bar,
    })
}

/// `H_0`, `H̄_0` on `grid`; both atoms vanish.
pub fn stable_renewal(p: &StableParams, grid: &Grid) -> Result<RenewalPair> {
    let cf = StableClosedForm::new(*p);
    RenewalPair::from_fn(grid.clone(), 0.0, 0.0, |x| (cf.h(x), cf.hbar(x)))
}
