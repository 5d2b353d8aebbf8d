//! Path generation as a stream of pieces.
//!
//! A piece is the path on `[t0, t1]`: a straight segment for models without
//! a Gaussian part, a Brownian bridge otherwise, followed by the jumps that
//! occur at `t1`. Compound Poisson paths with drift are built event by
//! event and are exact. Gaussian and stable paths live on a `dt` grid;
//! jumps of a jump-diffusion are moved to the end of their step.

use crate::error::{invalid, Result};
use crate::levy_model::{JumpDist, LevyModel, ModelKind, StableParams};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Discretisation and stopping settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Step for Gaussian and stable models; ignored for exact models.
    pub dt: Option<f64>,
    /// Time at which paths are cut; required when `q = 0`.
    pub horizon: Option<f64>,
    /// Sample Brownian-bridge extrema inside each step.
    pub bridge: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: None,
            horizon: None,
            bridge: true,
        }
    }
}

impl SimConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt: Some(dt),
            ..Self::default()
        }
    }

    pub fn horizon(mut self, h: f64) -> Self {
        self.horizon = Some(h);
        self
    }
}

/// Whether paths are built exactly, event by event.
pub fn is_exact(model: &LevyModel) -> bool {
    model.jumps().is_some() && model.sigma2() == 0.0 && model.kind() != ModelKind::Stable
}

pub(crate) fn validate(model: &LevyModel, cfg: &SimConfig) -> Result<()> {
    if !is_exact(model) {
        match cfg.dt {
            Some(dt) if dt > 0.0 && dt.is_finite() => {}
            Some(dt) => return invalid(format!("time step {dt} must be positive")),
            None => return invalid("a time step dt is required for grid models"),
        }
    }
    if let Some(h) = cfg.horizon {
        if !(h > 0.0) {
            return invalid("horizon must be positive");
        }
    }
    Ok(())
}

/// `Z·X` with `E[exp(-iuX)] = exp(-|u|^α e^{iπ(γ-δ)/2 sgn u})`, sampled by
/// Chambers–Mallows–Stuck.
#[derive(Debug, Clone, Copy)]
pub struct StableSampler {
    alpha: f64,
    beta: f64,
    scale: f64,
    shift: f64,
}

impl StableSampler {
    pub fn new(p: StableParams) -> Self {
        let (alpha, theta) = (p.alpha, p.gamma - p.delta);
        if (alpha - 1.0).abs() < 1e-12 {
            // symmetric Cauchy of scale cos(πθ/2) plus a drift
            let a = FRAC_PI_2 * theta;
            return Self {
                alpha: 1.0,
                beta: 0.0,
                scale: a.cos(),
                shift: a.sin(),
            };
        }
        let t = (FRAC_PI_2 * theta).tan();
        let beta = t / (FRAC_PI_2 * alpha).tan();
        Self {
            alpha,
            beta,
            scale: (FRAC_PI_2 * theta).cos().powf(1.0 / alpha),
            shift: 0.0,
        }
    }

    /// Value at time 1.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let v = (rng.random::<f64>() - 0.5) * std::f64::consts::PI;
        let w: f64 = rng.sample(Exp1);
        let a = self.alpha;
        if self.alpha == 1.0 {
            return self.scale * v.tan() + self.shift;
        }
        let t = self.beta * (FRAC_PI_2 * a).tan();
        let b = t.atan() / a;
        let s = (1.0 + t * t).powf(0.5 / a);
        let x = s * (a * (v + b)).sin() / v.cos().powf(1.0 / a)
            * ((v - a * (v + b)).cos() / w).powf((1.0 - a) / a);
        self.scale * x
    }

    /// Increment over `dt`.
    pub fn increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> f64 {
        let v = self.sample(rng);
        if self.alpha == 1.0 {
            dt * v
        } else {
            dt.powf(1.0 / self.alpha) * v
        }
    }
}

pub(crate) fn sample_jump<R: Rng + ?Sized>(d: &JumpDist, rng: &mut R) -> f64 {
    match *d {
        JumpDist::Point { value } => value,
        JumpDist::Exponential { mean } => mean * rng.sample::<f64, _>(Exp1),
        JumpDist::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
    }
}

/// The path on `[t0, t1]` and its value `after` at `t1` once jumps at `t1`
/// are applied.
pub struct Piece<'r> {
    pub t0: f64,
    pub t1: f64,
    pub x0: f64,
    /// Left limit at `t1`.
    pub x1: f64,
    pub after: f64,
    /// Exactly straight between `t0` and `t1` (event-driven models).
    pub straight: bool,
    /// Bridge variance `2σ²(t1 - t0)`; 0 for straight pieces.
    var: f64,
    rng: &'r mut ChaCha8Rng,
    hi: Option<f64>,
    lo: Option<f64>,
}

/// Crossing probabilities below this are treated as no crossing, so
/// uniforms are only drawn near a level.
const NEGLIGIBLE: f64 = 1e-16;

impl<'r> Piece<'r> {
    pub fn has_jump(&self) -> bool {
        self.after != self.x1
    }

    /// Log-probability that the bridge reaches a level beyond both ends.
    fn bridge_log_prob(&self, level: f64) -> f64 {
        -2.0 * (level - self.x0) * (level - self.x1) / self.var
    }

    /// Maximum over the piece (before the jump), bridge-sampled if needed.
    pub fn hi(&mut self) -> f64 {
        let top = self.x0.max(self.x1);
        if self.var == 0.0 {
            return top;
        }
        if let Some(h) = self.hi {
            return h;
        }
        let u = 1.0 - self.rng.random::<f64>();
        let d = self.x1 - self.x0;
        let h = (0.5 * (self.x0 + self.x1 + (d * d - 2.0 * self.var * u.ln()).sqrt())).max(top);
        self.hi = Some(h);
        h
    }

    /// Minimum over the piece (before the jump).
    pub fn lo(&mut self) -> f64 {
        let bottom = self.x0.min(self.x1);
        if self.var == 0.0 {
            return bottom;
        }
        if let Some(l) = self.lo {
            return l;
        }
        let u = 1.0 - self.rng.random::<f64>();
        let d = self.x1 - self.x0;
        let l = (0.5 * (self.x0 + self.x1 - (d * d - 2.0 * self.var * u.ln()).sqrt())).min(bottom);
        self.lo = Some(l);
        l
    }

    /// The piece maximum if it reaches `level`.
    pub fn max_reaching(&mut self, level: f64) -> Option<f64> {
        let top = self.x0.max(self.x1);
        if top >= level {
            return Some(self.hi());
        }
        if self.var == 0.0 || (self.hi.is_none() && self.bridge_log_prob(level) < NEGLIGIBLE.ln()) {
            return None;
        }
        let h = self.hi();
        (h >= level).then_some(h)
    }

    /// The piece minimum if it reaches `level`.
    pub fn min_reaching(&mut self, level: f64) -> Option<f64> {
        let bottom = self.x0.min(self.x1);
        if bottom <= level {
            return Some(self.lo());
        }
        if self.var == 0.0 || (self.lo.is_none() && self.bridge_log_prob(level) < NEGLIGIBLE.ln()) {
            return None;
        }
        let l = self.lo();
        (l <= level).then_some(l)
    }

    /// First time the piece reaches `level` from below, if it does.
    pub fn time_reaching_above(&mut self, level: f64) -> Option<f64> {
        if self.x0 >= level {
            return Some(self.t0);
        }
        self.max_reaching(level)?;
        Some(self.crossing_time(level))
    }

    /// First time the piece reaches `level` from above, if it does.
    pub fn time_reaching_below(&mut self, level: f64) -> Option<f64> {
        if self.x0 <= level {
            return Some(self.t0);
        }
        self.min_reaching(level)?;
        Some(self.crossing_time(level))
    }

    fn crossing_time(&self, level: f64) -> f64 {
        let (lo, hi) = (self.x0.min(self.x1), self.x0.max(self.x1));
        if self.var == 0.0 || (level >= lo && level <= hi) {
            // straight segment, or a bridge crossing between its ends
            let d = self.x1 - self.x0;
            if d == 0.0 {
                return self.t0;
            }
            return self.t0 + (self.t1 - self.t0) * ((level - self.x0) / d).clamp(0.0, 1.0);
        }
        0.5 * (self.t0 + self.t1)
    }

    /// Value at `t` on a straight piece; bridges are interpolated.
    pub fn at(&self, t: f64) -> f64 {
        let h = self.t1 - self.t0;
        if h == 0.0 {
            return self.x0;
        }
        self.x0 + (self.x1 - self.x0) * (t - self.t0) / h
    }
}

/// Visitor verdict after each piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// How a walk ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkEnd {
    pub t: f64,
    pub x: f64,
    /// Ended by the exponential clock rather than the horizon or the visitor.
    pub killed: bool,
    pub stopped: bool,
}

/// Feeds the pieces of one path to `visit` until the kill time `kill`, the
/// horizon, or a [`Flow::Stop`].
pub(crate) fn walk<F>(
    model: &LevyModel,
    cfg: &SimConfig,
    kill: f64,
    rng: &mut ChaCha8Rng,
    mut visit: F,
) -> WalkEnd
where
    F: FnMut(&mut Piece) -> Flow,
{
    let horizon = cfg.horizon.unwrap_or(f64::INFINITY);
    let end = kill.min(horizon);
    let killed = kill <= horizon;
    let drift = model.drift();
    let jumps = model.jumps();
    let next_jump = |t: f64, rng: &mut ChaCha8Rng| match jumps {
        Some(j) => t + rng.sample::<f64, _>(Exp1) / j.rate,
        None => f64::INFINITY,
    };
    let (mut t, mut x) = (0.0, 0.0);
    let mut tj = next_jump(0.0, rng);

    if is_exact(model) {
        let dist = jumps.expect("exact models have jumps").dist;
        loop {
            let last = tj >= end;
            let t1 = if last { end } else { tj };
            let x1 = x + drift * (t1 - t);
            let after = if last {
                x1
            } else {
                x1 + sample_jump(&dist, rng)
            };
            let mut p = Piece {
                t0: t,
                t1,
                x0: x,
                x1,
                after,
                straight: true,
                var: 0.0,
                rng,
                hi: None,
                lo: None,
            };
            let flow = visit(&mut p);
            (t, x) = (t1, after);
            if flow == Flow::Stop {
                return WalkEnd {
                    t,
                    x,
                    killed: false,
                    stopped: true,
                };
            }
            if last {
                return WalkEnd {
                    t,
                    x: x1,
                    killed,
                    stopped: false,
                };
            }
            tj = next_jump(t, rng);
        }
    }

    let dt = cfg.dt.expect("validated");
    let stable = model.stable_params().map(StableSampler::new);
    let s2 = model.sigma2();
    loop {
        let t1 = (t + dt).min(end);
        let h = t1 - t;
        let x1 = match stable {
            Some(s) => x + s.increment(h, rng),
            None => x + drift * h + (2.0 * s2 * h).sqrt() * rng.sample::<f64, _>(StandardNormal),
        };
        let mut after = x1;
        if let Some(j) = jumps {
            while tj <= t1 && tj < end {
                after += sample_jump(&j.dist, rng);
                tj = next_jump(tj, rng);
            }
        }
        let var = if stable.is_none() && cfg.bridge {
            2.0 * s2 * h
        } else {
            0.0
        };
        let mut p = Piece {
            t0: t,
            t1,
            x0: x,
            x1,
            after,
            straight: false,
            var,
            rng,
            hi: None,
            lo: None,
        };
        let flow = visit(&mut p);
        let last = t1 >= end;
        (t, x) = (t1, after);
        if flow == Flow::Stop {
            return WalkEnd {
                t,
                x,
                killed: false,
                stopped: true,
            };
        }
        if last {
            return WalkEnd {
                t,
                x: x1,
                killed,
                stopped: false,
            };
        }
    }
}

/// `Exp(q)` kill time, or `+∞` at `q = 0` (the horizon must then be set).
pub(crate) fn kill_time(q: f64, cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<f64> {
    if !(q >= 0.0 && q.is_finite()) {
        return invalid("killing rate must be finite and nonnegative");
    }
    if q == 0.0 {
        if cfg.horizon.is_none() {
            return invalid("q = 0 needs a finite horizon");
        }
        return Ok(f64::INFINITY);
    }
    Ok(rng.sample::<f64, _>(Exp1) / q)
}

/// Running supremum and infimum with attainment times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Running {
    pub s: f64,
    pub i: f64,
}

impl Running {
    pub fn new() -> Self {
        Self { s: 0.0, i: 0.0 }
    }

    /// Moves through the piece and its terminal jump.
    pub fn update(&mut self, p: &mut Piece) {
        self.update_without_jump(p);
        self.apply_jump(p.after);
    }

    /// Moves through the piece up to its left limit at `t1`.
    pub fn update_without_jump(&mut self, p: &mut Piece) {
        if let Some(h) = p.max_reaching(self.s) {
            self.s = self.s.max(h);
        }
        if let Some(l) = p.min_reaching(self.i) {
            self.i = self.i.min(l);
        }
    }

    pub fn apply_jump(&mut self, after: f64) {
        self.s = self.s.max(after);
        self.i = self.i.min(after);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::run_ensemble;
    use num_complex::Complex64;

    #[test]
    fn cms_matches_the_exponent() {
        for &(alpha, rho) in &[(1.5, 0.4), (0.7, 0.6), (1.0, 0.5), (1.0, 0.3), (1.8, 0.5)] {
            let model = LevyModel::stable(alpha, rho).unwrap();
            let s = StableSampler::new(model.stable_params().unwrap());
            for &u in &[0.5, 1.0, -2.0] {
                let est = run_ensemble(200_000, 2, 17, |rng, o| {
                    let x = s.sample(rng);
                    o[0] = (u * x).cos();
                    o[1] = -(u * x).sin();
                });
                let target = (-model.phi(Complex64::new(0.0, u))).exp();
                assert!(
                    est[0].within_sigmas(target.re, 4.5),
                    "α={alpha} ρ={rho} u={u} {est:?} {target}"
                );
                assert!(
                    est[1].within_sigmas(target.im, 4.5),
                    "α={alpha} ρ={rho} u={u} {est:?} {target}"
                );
            }
        }
    }

    #[test]
    fn bridge_max_has_the_reflection_law() {
        // driftless Brownian motion with variance 2 from 0 over [0, 1]: P(max ≥ 1) = 2 P(X_1 ≥ 1)
        let model = LevyModel::brownian(1.0, 0.0).unwrap();
        let cfg = SimConfig::with_dt(0.25).horizon(1.0);
        let est = run_ensemble(100_000, 1, 3, |rng, o| {
            let mut run = Running::new();
            walk(&model, &cfg, f64::INFINITY, rng, |p| {
                run.update(p);
                Flow::Continue
            });
            o[0] = f64::from(run.s >= 1.0);
        });
        let target = statrs::function::erf::erfc(0.5);
        assert!(est[0].within_sigmas(target, 4.0), "{est:?} {target}");
    }

    #[test]
    fn exact_walk_reaches_the_horizon() {
        let model = LevyModel::cramer_lundberg(2.0, 1.0, 1.0).unwrap();
        let cfg = SimConfig::default().horizon(5.0);
        let mut rng = crate::ensemble::chunk_rng(1, 0);
        let mut last = 0.0;
        let mut n = 0;
        let end = walk(&model, &cfg, f64::INFINITY, &mut rng, |p| {
            assert_eq!(p.t0, last);
            assert!((p.x1 - p.x0 - 2.0 * (p.t1 - p.t0)).abs() < 1e-12);
            assert!(p.after <= p.x1);
            last = p.t1;
            n += 1;
            Flow::Continue
        });
        assert_eq!(end.t, 5.0);
        assert!(!end.killed && n >= 1);
        assert!(validate(&LevyModel::brownian(1.0, 0.0).unwrap(), &cfg).is_err());
    }
}
