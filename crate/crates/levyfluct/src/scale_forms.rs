//! Scale functions of spectrally negative models and the fluctuation
//! functions they determine.
//!
//! `W_q` is recovered from `∫e^{-λx}W_q(x)dx = 1/(ψ(λ) - q)` by contour
//! inversion, with the contour shifted by `Ψ(q)` so the inverted function
//! stays bounded.

use crate::error::{invalid, FluctError, Result};
use crate::fluct_solver::{Grid, RenewalPair};
use crate::levy_model::{wiener_hopf_factors, LevyModel};
use crate::numerics::laplace::{invert, DEFAULT_NODES};
use crate::numerics::quadrature::GaussLegendre;
use crate::values::FluctValues;
use num_complex::Complex64;

const GL_NODES: usize = 32;

#[derive(Debug, Clone)]
pub struct ScaleFunction {
    model: LevyModel,
    q: f64,
    big_psi: f64,
    /// `1/ψ'(Ψ)`, the weight of `e^{Ψx}` in `W_q`.
    kappa: f64,
    w0: f64,
    grid: Grid,
    values: Vec<f64>,
    densities: Vec<f64>,
    integrals: Vec<f64>,
}

impl ScaleFunction {
    pub fn q(&self) -> f64 {
        self.q
    }
    pub fn model(&self) -> &LevyModel {
        &self.model
    }
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    /// `Ψ(q)`, the exponential growth rate of `W_q`.
    pub fn big_psi(&self) -> f64 {
        self.big_psi
    }
    /// `W_q(0)`.
    pub fn w0(&self) -> f64 {
        self.w0
    }
    /// `W_q` at the grid nodes.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    /// Right derivative `w_q` at the grid nodes.
    pub fn densities(&self) -> &[f64] {
        &self.densities
    }
    /// `∫_0^x W_q` at the grid nodes.
    pub fn integrals(&self) -> &[f64] {
        &self.integrals
    }

    fn transform(&self, s: Complex64) -> Complex64 {
        let v = Complex64::new(1.0, 0.0) / (-self.model.phi(-s) - self.q);
        if v.re.is_finite() && v.im.is_finite() {
            v
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// `W_q(x)` by direct inversion.
    pub fn scale(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return if x == 0.0 { self.w0 } else { 0.0 };
        }
        invert(|s| self.transform(s), x, self.big_psi, DEFAULT_NODES)
    }

    /// `w_q(x)` by inversion of `λ·transform - W_q(0)`.
    pub fn density(&self, x: f64) -> f64 {
        invert(
            |s| s * self.transform(s) - self.w0,
            x,
            self.big_psi,
            DEFAULT_NODES,
        )
    }

    /// `∫_0^x W_q` by inversion of `transform/λ`.
    pub fn scale_integral(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        invert(|s| self.transform(s) / s, x, self.big_psi, DEFAULT_NODES)
    }

    fn remainder(&self, s: Complex64) -> Complex64 {
        self.transform(s) - self.kappa / (s - self.big_psi)
    }

    /// `H̄_q(x) = W - (w/W)∫W`. When `Ψx` is large the leading `e^{2Ψx}` terms of
    /// `W² - w∫W` are cancelled analytically: with `E = κe^{Ψx}` and the
    /// remainders `g, g₁, Γ` of `W, w, ∫W`,
    /// `W² - w∫W = E(2g + κ - ΨΓ - g₁/Ψ) + g² + g₁(κ/Ψ - Γ)`.
    pub fn hbar(&self, x: f64) -> f64 {
        let (p, k) = (self.big_psi, self.kappa);
        if p * x <= 2.0 {
            let w = self.scale(x);
            return w - self.density(x) / w * self.scale_integral(x);
        }
        let n = DEFAULT_NODES;
        let g = invert(|s| self.remainder(s), x, 0.0, n);
        let g1 = invert(|s| s * self.remainder(s) - (self.w0 - k), x, 0.0, n);
        let gam = invert(|s| self.remainder(s) / s, x, 0.0, n);
        let e = k * (p * x).exp();
        let num = e * (2.0 * g + k - p * gam - g1 / p) + g * g + g1 * (k / p - gam);
        num / (e + g)
    }

    /// Largest relative gap between `W_q(x_k) - W_q(x_1)` and the integral of
    /// the sampled density (Simpson on cell pairs, trapezoid for an odd tail).
    pub fn reconstruction_error(&self) -> f64 {
        let x = self.grid.nodes();
        let (w, d) = (&self.values, &self.densities);
        let mut acc = 0.0;
        let mut worst: f64 = 0.0;
        let mut k = 0;
        while k + 1 < x.len() {
            if k + 2 < x.len() {
                acc += simpson(x[k], x[k + 1], x[k + 2], d[k], d[k + 1], d[k + 2]);
                k += 2;
            } else {
                acc += 0.5 * (x[k + 1] - x[k]) * (d[k] + d[k + 1]);
                k += 1;
            }
            worst = worst.max(((w[k] - w[0]) - acc).abs() / w[k]);
        }
        worst
    }
}

fn simpson(a: f64, m: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    let (h0, h1) = (m - a, b - m);
    let s = h0 + h1;
    s / 6.0 * ((2.0 - h1 / h0) * fa + s * s / (h0 * h1) * fm + (2.0 - h0 / h1) * fb)
}

/// Inverts the scale-function transform of a spectrally negative model on `grid`.
pub fn invert_scale_function(model: &LevyModel, q: f64, grid: &Grid) -> Result<ScaleFunction> {
    if !model.is_spectrally_negative() {
        return invalid("scale functions need a spectrally negative model");
    }
    let wh = wiener_hopf_factors(model, q)?;
    let big_psi = wh.psi_of_q().unwrap_or(0.0);
    let mut sf = ScaleFunction {
        model: model.clone(),
        q,
        big_psi,
        kappa: kappa(model, big_psi),
        w0: model.scale_at_zero(),
        grid: grid.clone(),
        values: Vec::new(),
        densities: Vec::new(),
        integrals: Vec::new(),
    };
    let x = grid.nodes();
    sf.values = x.iter().map(|&t| sf.scale(t)).collect();
    sf.densities = x.iter().map(|&t| sf.density(t)).collect();
    sf.integrals = x.iter().map(|&t| sf.scale_integral(t)).collect();
    if let Some(k) = sf.values.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(FluctError::Numerical(format!(
            "inverted scale function is not positive at x = {} (value {})",
            x[k], sf.values[k]
        )));
    }
    // nondecreasing up to the inversion noise level
    if let Some(k) = sf
        .values
        .windows(2)
        .position(|w| w[1] < w[0] * (1.0 - 1e-9))
    {
        return Err(FluctError::Numerical(format!(
            "inverted scale function decreases near x = {}",
            x[k]
        )));
    }
    Ok(sf)
}

/// Builds a scale function from tabulated `W_q` and `w_q` on `grid`, as read
/// back from an exported table; `∫W` comes from the trapezoid rule.
pub fn scale_function_from_table(
    model: &LevyModel,
    q: f64,
    grid: &Grid,
    values: Vec<f64>,
    densities: Vec<f64>,
) -> Result<ScaleFunction> {
    if values.len() != grid.len() || densities.len() != grid.len() {
        return invalid("scale table length does not match the grid");
    }
    let wh = wiener_hopf_factors(model, q)?;
    let big_psi = wh.psi_of_q().unwrap_or(0.0);
    let w0 = model.scale_at_zero();
    let mut integrals = Vec::with_capacity(values.len());
    let (mut acc, mut prev_x, mut prev_w) = (0.0, 0.0, w0);
    for (&x, &w) in grid.nodes().iter().zip(&values) {
        acc += 0.5 * (x - prev_x) * (w + prev_w);
        integrals.push(acc);
        prev_x = x;
        prev_w = w;
    }
    Ok(ScaleFunction {
        model: model.clone(),
        q,
        big_psi,
        kappa: kappa(model, big_psi),
        w0,
        grid: grid.clone(),
        values,
        densities,
        integrals,
    })
}

fn kappa(model: &LevyModel, big_psi: f64) -> f64 {
    if big_psi > 0.0 {
        1.0 / model.phi_derivative(Complex64::new(-big_psi, 0.0)).re
    } else {
        0.0
    }
}

fn panels(x: f64) -> Vec<f64> {
    let n = (x.ceil() as usize).max(2);
    (0..=n).map(|k| x * k as f64 / n as f64).collect()
}

/// The six functions at `(x, λ)` from the scale function. `B̄` and `C̄` are
/// returned only for `Re λ ≤ 0`.
pub fn spectrally_negative_functions(
    sf: &ScaleFunction,
    x: f64,
    lambda: Complex64,
) -> Result<FluctValues> {
    if !(x > 0.0 && x <= sf.grid.x_max() * (1.0 + 1e-12)) {
        return invalid(format!("x = {x} outside (0, {}]", sf.grid.x_max()));
    }
    let gl = GaussLegendre::new(GL_NODES);
    let breaks = panels(x);
    let wx = sf.scale(x);
    let dx = sf.density(x);
    let a = gl.integrate_panels(&breaks, |y| (-lambda * y).exp() * sf.scale(x - y)) / wx;
    let a_bar = gl.integrate_panels(&breaks, |z| {
        (lambda * z).exp() * (sf.density(z) - dx / wx * sf.scale(z))
    }) + sf.w0;
    let c = (-lambda * x).exp() / wx;
    let b = lambda + dx / wx;
    let (b_bar, c_bar) = if lambda.re <= 0.0 {
        let pq = sf.model.phi(lambda) + sf.q;
        (Some(pq * a + c), Some(b - pq * a_bar))
    } else {
        (None, None)
    };
    Ok(FluctValues {
        a,
        a_bar,
        b: Some(b),
        c: Some(c),
        b_bar,
        c_bar,
    })
}

/// `H_q = ∫_0^x W / W(x)` and `H̄_q = W - (w/W)∫_0^x W` on the scale grid.
/// Both are monotone; where they flatten out, inversion noise is removed by
/// taking the running maximum.
pub fn derive_renewal_from_scale(sf: &ScaleFunction) -> Result<RenewalPair> {
    let h: Vec<f64> = sf
        .integrals
        .iter()
        .zip(&sf.values)
        .map(|(i, w)| i / w)
        .collect();
    let hbar: Vec<f64> = sf
        .grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            if sf.big_psi * x > 2.0 {
                sf.hbar(x)
            } else {
                let w = sf.values[k];
                w - sf.densities[k] / w * sf.integrals[k]
            }
        })
        .collect();
    RenewalPair::new(
        sf.grid.clone(),
        0.0,
        &running_max(h),
        sf.w0,
        &running_max(hbar),
    )
}

fn running_max(mut v: Vec<f64>) -> Vec<f64> {
    for k in 1..v.len() {
        v[k] = v[k].max(v[k - 1]);
    }
    v
}
