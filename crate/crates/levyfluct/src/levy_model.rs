//! Lévy exponent models and their Wiener-Hopf factors.
//!
//! The exponent is defined by `E[exp(-iuX_t)] = exp(-t φ(iu))` with the
//! Gaussian part written `σ²u²`, so `X_1` has Gaussian variance `2σ²`.
//! Analytically continued, `φ(z) = -σ²z² + a z + r (1 - E[exp(-zJ)])`.

use crate::error::{invalid, FluctError, Result};
use crate::numerics::cmath::cpow;
use crate::numerics::roots::brent;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Brownian,
    CompoundPoissonDrift,
    Stable,
    SpectrallyNegativeJump,
}

/// Law of a single jump. Signs are explicit: an exponential jump with
/// negative mean is a downward jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum JumpDist {
    Point { value: f64 },
    Exponential { mean: f64 },
    Uniform { low: f64, high: f64 },
}

impl JumpDist {
    fn validate(&self) -> Result<()> {
        match *self {
            JumpDist::Point { value } if value != 0.0 && value.is_finite() => Ok(()),
            JumpDist::Exponential { mean } if mean != 0.0 && mean.is_finite() => Ok(()),
            JumpDist::Uniform { low, high }
                if low < high && low.is_finite() && high.is_finite() =>
            {
                if low < 0.0 && high > 0.0 {
                    invalid("uniform jump support must not straddle 0")
                } else {
                    Ok(())
                }
            }
            _ => invalid(format!("degenerate jump distribution {self:?}")),
        }
    }

    /// Every jump is strictly negative.
    pub fn is_negative(&self) -> bool {
        match *self {
            JumpDist::Point { value } => value < 0.0,
            JumpDist::Exponential { mean } => mean < 0.0,
            JumpDist::Uniform { high, .. } => high <= 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            JumpDist::Point { value } => value,
            JumpDist::Exponential { mean } => mean,
            JumpDist::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    /// `E[exp(wJ)]` where it converges.
    pub fn mgf(&self, w: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        match *self {
            JumpDist::Point { value } => (w * value).exp(),
            JumpDist::Exponential { mean } => one / (one - w * mean),
            JumpDist::Uniform { low, high } => {
                let z = w * (high - low);
                if z.norm() < 1e-4 {
                    (w * low).exp() * (one + z / 2.0 + z * z / 6.0 + z * z * z / 24.0)
                } else {
                    ((w * high).exp() - (w * low).exp()) / z
                }
            }
        }
    }

    /// Derivative of [`JumpDist::mgf`] in `w`.
    pub fn mgf_derivative(&self, w: Complex64) -> Complex64 {
        let one = Complex64::new(1.0, 0.0);
        match *self {
            JumpDist::Point { value } => (w * value).exp() * value,
            JumpDist::Exponential { mean } => {
                let d = one - w * mean;
                mean / (d * d)
            }
            JumpDist::Uniform { low, high } => {
                let z = w * (high - low);
                if z.norm() < 1e-4 {
                    let m = 0.5 * (low + high);
                    let v = (high - low).powi(2) / 12.0 + m * m;
                    Complex64::new(m, 0.0) + w * v
                } else {
                    let (eh, el) = ((w * high).exp(), (w * low).exp());
                    (eh * high - el * low) / z - (eh - el) * (high - low) / (z * z)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpSpec {
    pub rate: f64,
    pub dist: JumpDist,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableParams {
    pub alpha: f64,
    pub rho: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl StableParams {
    pub fn new(alpha: f64, rho: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return invalid(format!("stable index alpha={alpha} outside (0,2]"));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return invalid(format!("positivity parameter rho={rho} outside (0,1)"));
        }
        let gamma = alpha * rho;
        let delta = alpha - gamma;
        let eps = 1e-12;
        if gamma > 1.0 + eps || delta > 1.0 + eps {
            return invalid(format!(
                "alpha*rho={gamma} and alpha*(1-rho)={delta} must both lie in (0,1]"
            ));
        }
        Ok(Self {
            alpha,
            rho,
            gamma: gamma.min(1.0),
            delta: delta.min(1.0),
        })
    }

    pub fn cauchy() -> Self {
        Self::new(1.0, 0.5).expect("valid")
    }

    /// Parameters of the dual process `-X`.
    pub fn dual(&self) -> Self {
        Self {
            alpha: self.alpha,
            rho: 1.0 - self.rho,
            gamma: self.delta,
            delta: self.gamma,
        }
    }
}

/// JSON form of a model, as read from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump_dist: Option<JumpDist>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    kind: ModelKind,
    sigma2: f64,
    drift: f64,
    jumps: Option<JumpSpec>,
    stable: Option<StableParams>,
}

impl LevyModel {
    pub fn brownian(sigma2: f64, drift: f64) -> Result<Self> {
        Self::from_spec(&ModelSpec {
            kind: ModelKind::Brownian,
            sigma2: Some(sigma2),
            drift: Some(drift),
            jump_rate: None,
            jump_dist: None,
            alpha: None,
            rho: None,
        })
    }

    pub fn stable(alpha: f64, rho: f64) -> Result<Self> {
        Self::from_spec(&ModelSpec {
            kind: ModelKind::Stable,
            sigma2: None,
            drift: None,
            jump_rate: None,
            jump_dist: None,
            alpha: Some(alpha),
            rho: Some(rho),
        })
    }

    pub fn compound_poisson_drift(drift: f64, rate: f64, dist: JumpDist) -> Result<Self> {
        Self::from_spec(&ModelSpec {
            kind: ModelKind::CompoundPoissonDrift,
            sigma2: None,
            drift: Some(drift),
            jump_rate: Some(rate),
            jump_dist: Some(dist),
            alpha: None,
            rho: None,
        })
    }

    pub fn spectrally_negative_jump(
        sigma2: f64,
        drift: f64,
        rate: f64,
        dist: JumpDist,
    ) -> Result<Self> {
        Self::from_spec(&ModelSpec {
            kind: ModelKind::SpectrallyNegativeJump,
            sigma2: Some(sigma2),
            drift: Some(drift),
            jump_rate: Some(rate),
            jump_dist: Some(dist),
            alpha: None,
            rho: None,
        })
    }

    /// Premium rate `c`, unit-rate claims with exponential sizes of mean `claim_mean`.
    pub fn cramer_lundberg(c: f64, rate: f64, claim_mean: f64) -> Result<Self> {
        Self::compound_poisson_drift(c, rate, JumpDist::Exponential { mean: -claim_mean })
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let sigma2 = spec.sigma2.unwrap_or(0.0);
        let drift = spec.drift.unwrap_or(0.0);
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return invalid("sigma2 must be finite and nonnegative");
        }
        if !drift.is_finite() {
            return invalid("drift must be finite");
        }
        let jumps = match (spec.jump_rate, spec.jump_dist) {
            (Some(rate), Some(dist)) => {
                if !(rate > 0.0 && rate.is_finite()) {
                    return invalid("jump_rate must be positive and finite");
                }
                dist.validate()?;
                Some(JumpSpec { rate, dist })
            }
            (None, None) => None,
            _ => return invalid("jump_rate and jump_dist must be given together"),
        };
        let model = match spec.kind {
            ModelKind::Brownian => {
                if sigma2 <= 0.0 {
                    return invalid("brownian model needs sigma2 > 0");
                }
                if jumps.is_some() || spec.alpha.is_some() {
                    return invalid("brownian model takes only sigma2 and drift");
                }
                Self {
                    kind: spec.kind,
                    sigma2,
                    drift,
                    jumps: None,
                    stable: None,
                }
            }
            ModelKind::Stable => {
                let (Some(alpha), Some(rho)) = (spec.alpha, spec.rho) else {
                    return invalid("stable model needs alpha and rho");
                };
                if jumps.is_some() || sigma2 != 0.0 || drift != 0.0 {
                    return invalid("stable model takes only alpha and rho");
                }
                let p = StableParams::new(alpha, rho)?;
                Self {
                    kind: spec.kind,
                    sigma2: 0.0,
                    drift: 0.0,
                    jumps: None,
                    stable: Some(p),
                }
            }
            ModelKind::CompoundPoissonDrift => {
                if jumps.is_none() {
                    return invalid("compound_poisson_drift needs jump_rate and jump_dist");
                }
                if sigma2 != 0.0 || spec.alpha.is_some() {
                    return invalid("compound_poisson_drift has no Gaussian or stable part");
                }
                Self {
                    kind: spec.kind,
                    sigma2: 0.0,
                    drift,
                    jumps,
                    stable: None,
                }
            }
            ModelKind::SpectrallyNegativeJump => {
                let Some(j) = jumps else {
                    return invalid("spectrally_negative_jump needs jump_rate and jump_dist");
                };
                if !j.dist.is_negative() {
                    return invalid("spectrally_negative_jump needs strictly negative jumps");
                }
                if sigma2 == 0.0 && drift <= 0.0 {
                    return invalid("without a Gaussian part the drift must be positive");
                }
                Self {
                    kind: spec.kind,
                    sigma2,
                    drift,
                    jumps,
                    stable: None,
                }
            }
        };
        Ok(model)
    }

    pub fn to_spec(&self) -> ModelSpec {
        let is_stable = self.kind == ModelKind::Stable;
        ModelSpec {
            kind: self.kind,
            sigma2: (!is_stable).then_some(self.sigma2),
            drift: (!is_stable).then_some(self.drift),
            jump_rate: self.jumps.map(|j| j.rate),
            jump_dist: self.jumps.map(|j| j.dist),
            alpha: self.stable.map(|s| s.alpha),
            rho: self.stable.map(|s| s.rho),
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
    pub fn drift(&self) -> f64 {
        self.drift
    }
    pub fn jumps(&self) -> Option<JumpSpec> {
        self.jumps
    }
    pub fn stable_params(&self) -> Option<StableParams> {
        self.stable
    }

    /// No positive jumps and not a stable model.
    pub fn is_spectrally_negative(&self) -> bool {
        match self.kind {
            ModelKind::Stable => false,
            _ => self.jumps.is_none_or(|j| j.dist.is_negative()),
        }
    }

    /// `E[X_1]` when finite and defined by the drift and jumps.
    pub fn mean(&self) -> Option<f64> {
        match self.kind {
            ModelKind::Stable => None,
            _ => Some(self.drift + self.jumps.map_or(0.0, |j| j.rate * j.dist.mean())),
        }
    }

    /// `W_q(0)` for spectrally negative models: `1/c` with bounded variation, else 0.
    pub fn scale_at_zero(&self) -> f64 {
        if self.sigma2 == 0.0 && self.jumps.is_some() && self.drift > 0.0 {
            1.0 / self.drift
        } else {
            0.0
        }
    }

    /// φ(z) without domain checks; callers must stay where it converges.
    pub fn phi(&self, z: Complex64) -> Complex64 {
        if let Some(p) = self.stable {
            return cpow(-z, p.delta) * cpow(z, p.gamma);
        }
        let mut v = -z * z * self.sigma2 + z * self.drift;
        if let Some(j) = self.jumps {
            v += (Complex64::new(1.0, 0.0) - j.dist.mgf(-z)) * j.rate;
        }
        v
    }

    /// φ'(z) for non-stable models.
    pub fn phi_derivative(&self, z: Complex64) -> Complex64 {
        let mut v = -z * 2.0 * self.sigma2 + self.drift;
        if let Some(j) = self.jumps {
            v += j.dist.mgf_derivative(-z) * j.rate;
        }
        v
    }

    /// Laplace exponent `ψ(λ) = -φ(-λ) = log E[exp(λX_1)]` for spectrally negative models, λ ≥ 0.
    pub fn laplace_exponent(&self, lambda: f64) -> f64 {
        -self.phi(Complex64::new(-lambda, 0.0)).re
    }

    fn admits(&self, z: Complex64) -> bool {
        let on_axis = z.re == 0.0;
        on_axis || (self.is_spectrally_negative() && z.re < 0.0)
    }

    /// φ(z) on the admissible set: the imaginary axis, plus `Re z ≤ 0` for
    /// spectrally negative models.
    pub fn evaluate_exponent(&self, z: Complex64) -> Result<Complex64> {
        if !z.re.is_finite() || !z.im.is_finite() {
            return invalid("non-finite argument");
        }
        if !self.admits(z) {
            return invalid(format!(
                "z = {z} outside the domain of the exponent for {:?}",
                self.kind
            ));
        }
        Ok(self.phi(z))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum FactorForm {
    /// ψ(λ) = λ + Ψ, ψ̄ = (φ + q)/(λ + Ψ).
    SpectrallyNegative,
    /// ψ̄(λ) = σ²(r - λ), both roots explicit.
    Brownian {
        other_root: f64,
    },
    Stable {
        gamma: f64,
        delta: f64,
    },
}

/// The pair ψ_q, ψ̄_q with `ψ̄_q(iu)ψ_q(iu) = φ(iu) + q`.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerHopfPair {
    q: f64,
    big_psi: Option<f64>,
    form: FactorForm,
    model: LevyModel,
    /// ψ is multiplied by this, ψ̄ divided by it.
    scale: f64,
}

impl WienerHopfPair {
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Ψ(q) for spectrally negative models.
    pub fn psi_of_q(&self) -> Option<f64> {
        self.big_psi
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    /// Ladder normalization factor applied to ψ (1 unless rescaled).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Same factorization with ψ multiplied by `k` and ψ̄ divided by `k`.
    /// Local times are only defined up to such a constant; `k = c` maps the
    /// `λ + Ψ` normalization of a compound Poisson model with drift `c` to
    /// the one where the ascending clock is Lebesgue time at the maximum.
    pub fn rescaled(&self, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return invalid("rescaling factor must be positive");
        }
        Ok(Self {
            scale: self.scale * k,
            ..self.clone()
        })
    }

    pub(crate) fn psi_raw(&self, lambda: Complex64) -> Complex64 {
        let v = match self.form {
            FactorForm::SpectrallyNegative | FactorForm::Brownian { .. } => {
                lambda + self.big_psi.unwrap_or(0.0)
            }
            FactorForm::Stable { gamma, .. } => cpow(lambda, gamma),
        };
        v * self.scale
    }

    pub(crate) fn psi_bar_raw(&self, lambda: Complex64) -> Complex64 {
        let v = match self.form {
            FactorForm::Brownian { other_root } => (other_root - lambda) * self.model.sigma2,
            FactorForm::Stable { delta, .. } => cpow(-lambda, delta),
            FactorForm::SpectrallyNegative => {
                let bp = self.big_psi.unwrap_or(0.0);
                let den = lambda + bp;
                if den.norm() < 1e-7 * (1.0 + bp) {
                    // removable point λ = -Ψ
                    self.model.phi_derivative(lambda)
                } else {
                    (self.model.phi(lambda) + self.q) / den
                }
            }
        };
        v / self.scale
    }

    /// ψ_q(λ) for `Re λ ≥ 0`.
    pub fn psi(&self, lambda: Complex64) -> Result<Complex64> {
        if lambda.re < 0.0 {
            return invalid(format!("ψ_q evaluated at Re λ = {} < 0", lambda.re));
        }
        Ok(self.psi_raw(lambda))
    }

    /// ψ̄_q(λ) for `Re λ ≤ 0`.
    pub fn psi_bar(&self, lambda: Complex64) -> Result<Complex64> {
        if lambda.re > 0.0 {
            return invalid(format!("ψ̄_q evaluated at Re λ = {} > 0", lambda.re));
        }
        Ok(self.psi_bar_raw(lambda))
    }
}

/// Wiener-Hopf factors of `model` killed at rate `q`.
pub fn wiener_hopf_factors(model: &LevyModel, q: f64) -> Result<WienerHopfPair> {
    if !(q >= 0.0 && q.is_finite()) {
        return invalid(format!("killing rate q={q} must be finite and nonnegative"));
    }
    let base = |big_psi, form| WienerHopfPair {
        q,
        big_psi,
        form,
        model: model.clone(),
        scale: 1.0,
    };
    if let Some(p) = model.stable {
        if q > 0.0 {
            return Err(FluctError::Unsupported(
                "stable factors are available for q = 0 only".into(),
            ));
        }
        return Ok(base(
            None,
            FactorForm::Stable {
                gamma: p.gamma,
                delta: p.delta,
            },
        ));
    }
    if model.kind == ModelKind::Brownian {
        let (s2, a) = (model.sigma2, model.drift);
        let disc = (a * a + 4.0 * s2 * q).sqrt();
        // Ψ = (-a + disc)/(2σ²), written to avoid cancellation
        let big_psi = if a > 0.0 {
            2.0 * q / (a + disc)
        } else {
            (disc - a) / (2.0 * s2)
        };
        let other_root = if a < 0.0 {
            2.0 * q / (disc - a)
        } else {
            (a + disc) / (2.0 * s2)
        };
        return Ok(base(Some(big_psi), FactorForm::Brownian { other_root }));
    }
    if !model.is_spectrally_negative() {
        return Err(FluctError::Unsupported(
            "factors for two-sided jump models are not available".into(),
        ));
    }
    let big_psi = largest_root(model, q)?;
    Ok(base(Some(big_psi), FactorForm::SpectrallyNegative))
}

/// Largest root of `ψ(λ) = q` on `[0, ∞)`.
fn largest_root(model: &LevyModel, q: f64) -> Result<f64> {
    let g = |l: f64| model.laplace_exponent(l) - q;
    let mean = model.mean().unwrap_or(0.0);
    if q == 0.0 && mean >= 0.0 {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    if q == 0.0 {
        // g(0) = 0 with negative slope: step right until g < 0
        lo = 1.0;
        let mut tries = 0;
        while g(lo) >= 0.0 {
            lo *= 0.5;
            tries += 1;
            if tries > 200 {
                return Err(FluctError::Numerical(
                    "no negative value of ψ near 0".into(),
                ));
            }
        }
    }
    let mut hi = lo.max(1.0);
    let mut tries = 0;
    while g(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        tries += 1;
        if tries > 200 || !hi.is_finite() {
            return Err(FluctError::Numerical(format!(
                "root bracket for Ψ({q}) not found up to λ = {hi}"
            )));
        }
    }
    brent(g, lo, hi, 1e-14).ok_or_else(|| {
        FluctError::Numerical(format!("root finder failed for Ψ({q}) on [{lo}, {hi}]"))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn i(u: f64) -> Complex64 {
        Complex64::new(0.0, u)
    }

    fn factor_residual(model: &LevyModel, q: f64) -> f64 {
        let wh = wiener_hopf_factors(model, q).unwrap();
        (0..101)
            .map(|k| -10.0 + 0.2 * k as f64)
            .map(|u| {
                let z = i(u);
                (wh.psi_bar(z).unwrap() * wh.psi(z).unwrap()
                    - model.evaluate_exponent(z).unwrap()
                    - q)
                    .norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn brownian_exponent_at_one() {
        let m = LevyModel::brownian(1.0, 0.0).unwrap();
        assert!((m.evaluate_exponent(i(1.0)).unwrap() - 1.0).norm() < 1e-15);
        assert_eq!(
            m.evaluate_exponent(i(0.0)).unwrap(),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn cauchy_exponent_at_i() {
        let m = LevyModel::stable(1.0, 0.5).unwrap();
        assert!((m.evaluate_exponent(i(1.0)).unwrap() - 1.0).norm() < 1e-15);
        assert_eq!(m.evaluate_exponent(i(0.0)).unwrap().norm(), 0.0);
    }

    #[test]
    fn stable_modulus_and_phase() {
        let m = LevyModel::stable(1.5, 0.6).unwrap();
        let p = m.stable_params().unwrap();
        for &u in &[-3.0, -0.5, 0.7, 4.0] {
            let v = m.evaluate_exponent(i(u)).unwrap();
            let f64_sign: f64 = if u > 0.0 { 1.0 } else { -1.0 };
            assert!((v.norm() - f64::abs(u).powf(1.5)).abs() < 1e-12);
            let phase = std::f64::consts::FRAC_PI_2 * (p.gamma - p.delta) * f64_sign;
            assert!((v.arg() - phase).abs() < 1e-12);
        }
    }

    #[test]
    fn domain_is_enforced() {
        let cauchy = LevyModel::stable(1.0, 0.5).unwrap();
        assert!(cauchy.evaluate_exponent(Complex64::new(-1.0, 0.0)).is_err());
        let cl = LevyModel::cramer_lundberg(2.0, 1.0, 1.0).unwrap();
        assert!(cl.evaluate_exponent(Complex64::new(-1.0, 2.0)).is_ok());
        assert!(cl.evaluate_exponent(Complex64::new(1.0, 0.0)).is_err());
        let two_sided = LevyModel::compound_poisson_drift(
            0.0,
            1.0,
            JumpDist::Uniform {
                low: 0.5,
                high: 1.0,
            },
        )
        .unwrap();
        assert!(two_sided
            .evaluate_exponent(Complex64::new(-0.5, 0.0))
            .is_err());
    }

    #[test]
    fn brownian_unit_killing_factors() {
        let m = LevyModel::brownian(1.0, 0.0).unwrap();
        let wh = wiener_hopf_factors(&m, 1.0).unwrap();
        assert_eq!(wh.psi_of_q(), Some(1.0));
        let l = Complex64::new(0.3, 0.8);
        assert!((wh.psi(l).unwrap() - (l + 1.0)).norm() < 1e-15);
        assert!((wh.psi_bar(-l).unwrap() - (1.0 + l)).norm() < 1e-15);
    }

    #[test]
    fn factorization_identity_on_grid() {
        let models = [
            (LevyModel::brownian(1.0, 0.0).unwrap(), vec![0.0, 1.0]),
            (LevyModel::brownian(0.5, -0.3).unwrap(), vec![0.0, 0.7]),
            (LevyModel::stable(1.0, 0.5).unwrap(), vec![0.0]),
            (LevyModel::stable(1.4, 0.5).unwrap(), vec![0.0]),
            (
                LevyModel::cramer_lundberg(2.0, 1.0, 1.0).unwrap(),
                vec![0.0, 1.0],
            ),
            (
                LevyModel::spectrally_negative_jump(
                    0.5,
                    0.2,
                    2.0,
                    JumpDist::Uniform {
                        low: -1.0,
                        high: -0.5,
                    },
                )
                .unwrap(),
                vec![0.0, 0.1, 10.0],
            ),
        ];
        for (m, qs) in &models {
            for &q in qs {
                let r = factor_residual(m, q);
                assert!(r < 1e-10, "{m:?} q={q} residual {r}");
            }
        }
    }

    #[test]
    fn big_psi_is_a_root() {
        let models = [
            LevyModel::cramer_lundberg(2.0, 1.0, 1.0).unwrap(),
            LevyModel::cramer_lundberg(0.5, 1.0, 1.0).unwrap(),
            LevyModel::spectrally_negative_jump(1.0, -1.0, 1.0, JumpDist::Point { value: -0.5 })
                .unwrap(),
        ];
        for m in &models {
            for &q in &[0.0, 0.1, 1.0, 10.0] {
                let wh = wiener_hopf_factors(m, q).unwrap();
                let bp = wh.psi_of_q().unwrap();
                let r = m.phi(Complex64::new(-bp, 0.0)).re + q;
                assert!(r.abs() < 1e-10, "{m:?} q={q} Ψ={bp} residual {r}");
            }
        }
        // drift c = 0.5 below claim rate: Ψ(0) = 1 - rate/c... root of 0.5λ - λ/(1+λ) = 0 → λ = 1
        let wh = wiener_hopf_factors(&models[1], 0.0).unwrap();
        assert!((wh.psi_of_q().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stable_with_killing_is_unsupported() {
        let m = LevyModel::stable(1.0, 0.5).unwrap();
        assert!(matches!(
            wiener_hopf_factors(&m, 1.0),
            Err(FluctError::Unsupported(_))
        ));
    }

    #[test]
    fn product_at_zero_is_q() {
        let m = LevyModel::cramer_lundberg(2.0, 1.0, 1.0).unwrap();
        for &q in &[0.0, 0.5, 3.0] {
            let wh = wiener_hopf_factors(&m, q).unwrap();
            let z = Complex64::new(0.0, 0.0);
            assert!((wh.psi(z).unwrap() * wh.psi_bar(z).unwrap() - q).norm() < 1e-12);
        }
    }

    #[test]
    fn rescaling_preserves_the_product() {
        let m = LevyModel::cramer_lundberg(2.0, 1.0, 1.0).unwrap();
        let wh = wiener_hopf_factors(&m, 1.0).unwrap().rescaled(2.0).unwrap();
        let z = i(1.3);
        assert!((wh.psi(z).unwrap() * wh.psi_bar(z).unwrap() - m.phi(z) - 1.0).norm() < 1e-12);
    }

    #[test]
    fn spec_round_trip() {
        let json = r#"{"kind":"compound_poisson_drift","drift":2.0,"jump_rate":1.0,"jump_dist":{"kind":"exponential","mean":-1.0}}"#;
        let spec: ModelSpec = serde_json::from_str(json).unwrap();
        let m = LevyModel::from_spec(&spec).unwrap();
        assert!(m.is_spectrally_negative());
        assert_eq!(m.scale_at_zero(), 0.5);
        let back = LevyModel::from_spec(&m.to_spec()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(LevyModel::stable(1.5, 0.9).is_err());
        assert!(LevyModel::brownian(0.0, 1.0).is_err());
        assert!(LevyModel::spectrally_negative_jump(
            0.0,
            -1.0,
            1.0,
            JumpDist::Point { value: -1.0 }
        )
        .is_err());
        assert!(
            LevyModel::spectrally_negative_jump(1.0, 0.0, 1.0, JumpDist::Point { value: 1.0 })
                .is_err()
        );
    }
}
