//! Path-average estimators, each with a standard error.
//!
//! Functionals carrying `e^{-qT}` are weighted on unkilled paths rather
//! than killed at an exponential time, which lowers their variance. Paths
//! stop as soon as the functional is determined.

use super::path::{kill_time, validate, walk, Flow, Piece, Running, SimConfig};
use crate::ensemble::{run_ensemble, Estimate};
use crate::error::{invalid, FluctError, Result};
use crate::fluct_solver::{Grid, RenewalPair};
use crate::levy_model::LevyModel;
use crate::numerics::cmath::exprel;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Ensemble size, seed and path settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub n_paths: usize,
    pub seed: u64,
    pub sim: SimConfig,
}

impl McSettings {
    pub fn new(n_paths: usize, seed: u64, sim: SimConfig) -> Self {
        Self { n_paths, seed, sim }
    }
}

/// Real and imaginary parts estimated jointly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexEstimate {
    pub re: Estimate,
    pub im: Estimate,
}

impl ComplexEstimate {
    fn from_pair(e: &[Estimate]) -> Self {
        Self { re: e[0], im: e[1] }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.mean, self.im.mean)
    }

    /// Both parts lie within `k` standard errors of `target`.
    pub fn within_sigmas(&self, target: Complex64, k: f64) -> bool {
        self.re.within_sigmas(target.re, k) && self.im.within_sigmas(target.im, k)
    }
}

/// Exponents of the exit functionals: `λ` on the extremum opposite to the
/// exit, `μ₁` (`Re ≥ 0`) on the overshoot above, `μ₂` (`Re ≤ 0`) below.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Exponents {
    pub lambda: Complex64,
    pub mu1: Complex64,
    pub mu2: Complex64,
}

impl Exponents {
    pub fn zero() -> Self {
        Self::default()
    }

    fn check(&self) -> Result<()> {
        if self.mu1.re < 0.0 || self.mu2.re > 0.0 {
            return invalid("exit exponents need Re μ₁ ≥ 0 and Re μ₂ ≤ 0");
        }
        Ok(())
    }
}

fn put(o: &mut [f64], at: usize, z: Complex64) {
    o[at] = z.re;
    o[at + 1] = z.im;
}

fn weight(ex: Complex64, q: f64, t: f64) -> Complex64 {
    (-ex - q * t).exp()
}

/// Path settings for an estimator that weights by `e^{-qt}`: paths are cut
/// where the weight is below `e^{-50}` unless a horizon is given.
fn weighted_sim(q: f64, sim: &SimConfig) -> Result<SimConfig> {
    if !(q >= 0.0 && q.is_finite()) {
        return invalid("killing rate must be finite and nonnegative");
    }
    let mut s = sim.clone();
    if s.horizon.is_none() {
        if q == 0.0 {
            return invalid("q = 0 needs a finite horizon");
        }
        s.horizon = Some(50.0 / q);
    }
    Ok(s)
}

fn check_model(model: &LevyModel, s: &McSettings) -> Result<()> {
    validate(model, &s.sim)?;
    if s.n_paths < 2 {
        return invalid("at least two paths are needed for a standard error");
    }
    Ok(())
}

/// `P(I_t < -level for some t ≤ horizon)` for the unkilled process.
pub fn estimate_ruin_probability(
    model: &LevyModel,
    level: f64,
    s: &McSettings,
) -> Result<Estimate> {
    check_model(model, s)?;
    if s.sim.horizon.is_none() || !(level >= 0.0) {
        return invalid("ruin needs a horizon and a nonnegative level");
    }
    Ok(run_ensemble(s.n_paths, 1, s.seed, |rng, o| {
        let end = walk(model, &s.sim, f64::INFINITY, rng, |p| {
            if p.min_reaching(-level).is_some() || p.after < -level {
                Flow::Stop
            } else {
                Flow::Continue
            }
        });
        o[0] = f64::from(end.stopped);
    })[0])
}

/// `E[e^{-λM}]` for the maximum `M` of the path killed at rate `q`.
pub fn estimate_max_transform(
    model: &LevyModel,
    q: f64,
    lambda: f64,
    s: &McSettings,
) -> Result<Estimate> {
    check_model(model, s)?;
    let mut probe = crate::ensemble::chunk_rng(s.seed, u64::MAX);
    kill_time(q, &s.sim, &mut probe)?;
    Ok(run_ensemble(s.n_paths, 1, s.seed, |rng, o| {
        let kill = kill_time(q, &s.sim, rng).expect("checked");
        let mut run = Running::new();
        walk(model, &s.sim, kill, rng, |p| {
            run.update(p);
            Flow::Continue
        });
        o[0] = (-lambda * run.s).exp();
    })[0])
}

/// Exit from `[-b, a]` split by side.
#[derive(Debug, Clone, Serialize)]
pub struct ExitEstimate {
    /// `E[e^{-λI_T - μ₁(X_T - I_T) - qT}; X_T > a]`.
    pub top: ComplexEstimate,
    /// `E[e^{-λS_T - μ₂(X_T - S_T) - qT}; X_T < -b]`.
    pub bottom: ComplexEstimate,
    pub p_top: Estimate,
    pub p_bottom: Estimate,
    /// Fraction of paths still inside at the horizon.
    pub unresolved: Estimate,
}

/// Where the piece leaves `[lo_level, hi_level]`: `Some((t, x, above))`.
/// `s`, `i` are the running extrema before the exit time on return.
fn first_exit(
    p: &mut Piece,
    run: &mut Running,
    hi_level: f64,
    lo_level: f64,
) -> Option<(f64, f64, bool)> {
    let up = p.time_reaching_above(hi_level);
    let down = p.time_reaching_below(lo_level);
    let pick_up = match (up, down) {
        (Some(tu), Some(td)) => tu < td || (tu == td && p.x1 >= hi_level),
        (Some(_), None) => true,
        (None, Some(_)) => false,
        (None, None) => {
            run.update_without_jump(p);
            if p.after > hi_level {
                return Some((p.t1, p.after, true));
            }
            if p.after < lo_level {
                return Some((p.t1, p.after, false));
            }
            run.apply_jump(p.after);
            return None;
        }
    };
    // extrema before a continuous crossing are those at the piece start
    run.s = run.s.max(p.x0);
    run.i = run.i.min(p.x0);
    if pick_up {
        Some((up.expect("picked"), hi_level, true))
    } else {
        Some((down.expect("picked"), lo_level, false))
    }
}

/// Joint exit law from `[-b, a]` (the `q₁ = q₂ = q` case).
pub fn estimate_exit_interval(
    model: &LevyModel,
    q: f64,
    a: f64,
    b: f64,
    ex: Exponents,
    s: &McSettings,
) -> Result<ExitEstimate> {
    check_model(model, s)?;
    ex.check()?;
    if !(a > 0.0 && b > 0.0) {
        return invalid("interval ends must be positive");
    }
    let sim = weighted_sim(q, &s.sim)?;
    let e = run_ensemble(s.n_paths, 7, s.seed, |rng, o| {
        let mut run = Running::new();
        let mut hit = None;
        walk(model, &sim, f64::INFINITY, rng, |p| {
            hit = first_exit(p, &mut run, a, -b);
            if hit.is_some() {
                Flow::Stop
            } else {
                Flow::Continue
            }
        });
        match hit {
            Some((t, x, true)) => {
                put(o, 0, weight(ex.lambda * run.i + ex.mu1 * (x - run.i), q, t));
                o[4] = 1.0;
            }
            Some((t, x, false)) => {
                put(o, 2, weight(ex.lambda * run.s + ex.mu2 * (x - run.s), q, t));
                o[5] = 1.0;
            }
            None => o[6] = 1.0,
        }
    });
    Ok(ExitEstimate {
        top: ComplexEstimate::from_pair(&e[0..2]),
        bottom: ComplexEstimate::from_pair(&e[2..4]),
        p_top: e[4],
        p_bottom: e[5],
        unresolved: e[6],
    })
}

/// Which reflected process is watched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reflection {
    /// `T = inf{t: X_t - S_t < -x}`; estimates `E[e^{-μ₁S_T - μ₂(X_T - S_T) - qT}]`.
    FromMax,
    /// `T = inf{t: X_t - I_t > x}`; estimates `E[e^{-μ₂I_T - μ₁(X_T - I_T) - qT}]`.
    FromMin,
}

/// Exit of the process reflected at its running extremum from `[0, x]`.
pub fn estimate_reflected_exit(
    model: &LevyModel,
    q: f64,
    x: f64,
    side: Reflection,
    ex: Exponents,
    s: &McSettings,
) -> Result<ComplexEstimate> {
    check_model(model, s)?;
    ex.check()?;
    if !(x > 0.0) {
        return invalid("reflection level must be positive");
    }
    let sim = weighted_sim(q, &s.sim)?;
    let e = run_ensemble(s.n_paths, 2, s.seed, |rng, o| {
        let mut run = Running::new();
        let mut hit = None;
        walk(model, &sim, f64::INFINITY, rng, |p| {
            let (hi, lo) = match side {
                Reflection::FromMax => (f64::INFINITY, run.s - x),
                Reflection::FromMin => (run.i + x, f64::NEG_INFINITY),
            };
            hit = first_exit(p, &mut run, hi, lo);
            if hit.is_some() {
                Flow::Stop
            } else {
                Flow::Continue
            }
        });
        if let Some((t, xt, _)) = hit {
            let z = match side {
                Reflection::FromMax => ex.mu1 * run.s + ex.mu2 * (xt - run.s),
                Reflection::FromMin => ex.mu2 * run.i + ex.mu1 * (xt - run.i),
            };
            put(o, 0, weight(z, q, t));
        }
    });
    Ok(ComplexEstimate::from_pair(&e))
}

/// First time `U^x` the amplitude `S - I` reaches `x`, split by whether it
/// happens at a running maximum (top) or a running minimum (bottom).
#[derive(Debug, Clone, Serialize)]
pub struct AmplitudeEstimate {
    /// `E[e^{-λI_U - μ₁(X_U - I_U) - qU}; S_U = X_U]`.
    pub top: ComplexEstimate,
    /// `E[e^{-λS_U - μ₂(X_U - S_U) - qU}; I_U = X_U]`.
    pub bottom: ComplexEstimate,
    pub p_top: Estimate,
}

pub fn estimate_amplitude_crossing(
    model: &LevyModel,
    q: f64,
    x: f64,
    ex: Exponents,
    s: &McSettings,
) -> Result<AmplitudeEstimate> {
    check_model(model, s)?;
    ex.check()?;
    if !(x > 0.0) {
        return invalid("amplitude level must be positive");
    }
    let sim = weighted_sim(q, &s.sim)?;
    let e = run_ensemble(s.n_paths, 5, s.seed, |rng, o| {
        let mut run = Running::new();
        let mut hit = None;
        walk(model, &sim, f64::INFINITY, rng, |p| {
            let (hi, lo) = (run.i + x, run.s - x);
            hit = first_exit(p, &mut run, hi, lo);
            if hit.is_some() {
                Flow::Stop
            } else {
                Flow::Continue
            }
        });
        match hit {
            Some((t, xt, true)) => {
                put(
                    o,
                    0,
                    weight(ex.lambda * run.i + ex.mu1 * (xt - run.i), q, t),
                );
                o[4] = 1.0;
            }
            Some((t, xt, false)) => put(
                o,
                2,
                weight(ex.lambda * run.s + ex.mu2 * (xt - run.s), q, t),
            ),
            None => {}
        }
    });
    Ok(AmplitudeEstimate {
        top: ComplexEstimate::from_pair(&e[0..2]),
        bottom: ComplexEstimate::from_pair(&e[2..4]),
        p_top: e[4],
    })
}

/// `∫ e^{c + k(t - t0)} dt` over `[t0, t0 + h]`.
fn exp_integral(c: Complex64, k: Complex64, h: f64) -> Complex64 {
    c.exp() * h * exprel(k * h)
}

/// Estimates `Ā_q(x,λ₁)·A_q(x,λ₂)` as the time integral
/// `∫ e^{-qt} 1_{S_t - I_t ≤ x} e^{-λ₁I_t - λ₂(X_t - I_t)} dt`.
///
/// Straight pieces are integrated exactly; grid pieces by the trapezoid
/// rule, with half a step credited on the step where the amplitude passes x.
pub fn estimate_resolvent_product(
    model: &LevyModel,
    q: f64,
    x: f64,
    l1: Complex64,
    l2: Complex64,
    s: &McSettings,
) -> Result<ComplexEstimate> {
    check_model(model, s)?;
    if !(x > 0.0) {
        return invalid("amplitude level must be positive");
    }
    let sim = weighted_sim(q, &s.sim)?;
    // exponent of the integrand as a function of (t, X, I)
    let expo = move |t: f64, xv: f64, i: f64| -l1 * i - l2 * (xv - i) - q * t;
    let e = run_ensemble(s.n_paths, 2, s.seed, |rng, o| {
        let mut run = Running::new();
        let mut total = Complex64::new(0.0, 0.0);
        walk(model, &sim, f64::INFINITY, rng, |p| {
            let h = p.t1 - p.t0;
            if p.straight {
                let d = if h > 0.0 { (p.x1 - p.x0) / h } else { 0.0 };
                let slope = |i_moves: bool| if i_moves { -l1 * d - q } else { -l2 * d - q };
                let (mut t, mut xv) = (p.t0, p.x0);
                let mut done = false;
                if d >= 0.0 {
                    // I is fixed; stop where X passes I + x
                    let cap = run.i + x;
                    let t_end = if p.x1 > cap {
                        p.t0 + (cap - p.x0).max(0.0) / d
                    } else {
                        p.t1
                    };
                    total += exp_integral(expo(t, xv, run.i), slope(false), t_end - t);
                    done = t_end < p.t1;
                } else {
                    // X falls: first with I fixed, then dragging I along
                    let t_i = if p.x1 < run.i {
                        p.t0 + (run.i - p.x0).min(0.0) / d
                    } else {
                        p.t1
                    };
                    total += exp_integral(expo(t, xv, run.i), slope(false), t_i - t);
                    if t_i < p.t1 {
                        (t, xv) = (t_i, p.at(t_i));
                        let floor = run.s - x;
                        let t_end = if p.x1 < floor {
                            t + (floor - xv).min(0.0) / d
                        } else {
                            p.t1
                        };
                        total += exp_integral(-l1 * xv - q * t, slope(true), t_end - t);
                        done = t_end < p.t1;
                    }
                }
                if done {
                    return Flow::Stop;
                }
                run.update(p);
            } else {
                let f0 = expo(p.t0, p.x0, run.i).exp();
                run.update_without_jump(p);
                if run.s - run.i > x {
                    total += f0 * (0.5 * h);
                    return Flow::Stop;
                }
                total += (f0 + expo(p.t1, p.x1, run.i).exp()) * (0.5 * h);
                run.apply_jump(p.after);
            }
            if run.s - run.i > x {
                Flow::Stop
            } else {
                Flow::Continue
            }
        });
        put(o, 0, total);
    });
    Ok(ComplexEstimate::from_pair(&e))
}

/// Renewal functions of a compound Poisson model estimated from paths.
#[derive(Debug, Clone)]
pub struct RenewalEstimate {
    pub grid: Grid,
    /// `H_q` at nodes `0..=N` (node 0 is the atom).
    pub h: Vec<Estimate>,
    pub hbar: Vec<Estimate>,
    /// `E ∫ 1_{S_t ≤ x} e^{-qt} L^s(dt)`, which lies in `[H_q, 4H_q]`.
    pub h_sup: Vec<Estimate>,
}

impl RenewalEstimate {
    /// The point estimates as solver input.
    pub fn renewal(&self) -> Result<RenewalPair> {
        let m = |v: &[Estimate]| v.iter().map(|e| e.mean).collect::<Vec<_>>();
        let (h, hb) = (m(&self.h), m(&self.hbar));
        RenewalPair::new(self.grid.clone(), h[0], &h[1..], hb[0], &hb[1..])
    }
}

/// Adds `∫ e^{-qt} dt` over the time the level `y` rises from `y0` to `y1`
/// at rate `d`, starting at time `t0`, to the grid cells of `y`.
fn add_rising(cells: &mut [f64], grid: &Grid, y0: f64, y1: f64, t0: f64, d: f64, q: f64) {
    let top = y1.min(grid.x_max());
    if top <= y0 {
        return;
    }
    let mut k = grid.cell_of(y0);
    loop {
        let (a, b) = (grid.node(k - 1).max(y0), grid.node(k).min(top));
        if b > a {
            let w = (b - a) / d;
            let z = q * w;
            let g = if z < 1e-8 {
                1.0 - 0.5 * z
            } else {
                -(-z).exp_m1() / z
            };
            cells[k] += (-q * (t0 + (a - y0) / d)).exp() * w * g;
        }
        if grid.node(k) >= top || k == grid.len() {
            break;
        }
        k += 1;
    }
}

fn add_point(cells: &mut [f64], grid: &Grid, y: f64, mass: f64) {
    if y <= 0.0 {
        cells[0] += mass;
    } else if y <= grid.x_max() {
        cells[grid.cell_of(y)] += mass;
    }
}

/// `H_q`, `H̄_q` of a compound Poisson model with drift `d ≥ 0`, with the
/// ascending clock `L^s(dt) = 1_{S_t = X_t} dt` and the descending clock a
/// unit atom at 0 and at every jump to a new strict minimum.
pub fn estimate_renewal_cp(
    model: &LevyModel,
    q: f64,
    grid: &Grid,
    s: &McSettings,
) -> Result<RenewalEstimate> {
    check_model(model, s)?;
    if !super::path::is_exact(model) || model.drift() < 0.0 {
        return Err(FluctError::Unsupported(
            "renewal estimation needs a compound Poisson model with nonnegative drift".into(),
        ));
    }
    let sim = weighted_sim(q, &s.sim)?;
    let n = grid.len() + 1;
    let d = model.drift();
    let e = run_ensemble(s.n_paths, 3 * n, s.seed, |rng, o| {
        let (h, rest) = o.split_at_mut(n);
        let (hb, hs) = rest.split_at_mut(n);
        let mut run = Running::new();
        hb[0] += 1.0;
        walk(model, &sim, f64::INFINITY, rng, |p| {
            if d > 0.0 && p.x1 > run.s {
                let start = run.s.max(p.x0);
                let ta = p.t0 + (start - p.x0) / d;
                add_rising(h, grid, start - run.i, p.x1 - run.i, ta, d, q);
                add_rising(hs, grid, start, p.x1, ta, d, q);
            } else if d == 0.0 && p.x0 >= run.s {
                let mass = ((-q * p.t0).exp() - (-q * p.t1).exp()) / q.max(f64::MIN_POSITIVE);
                let mass = if q == 0.0 { p.t1 - p.t0 } else { mass };
                add_point(h, grid, run.s - run.i, mass);
                add_point(hs, grid, run.s, mass);
            }
            run.s = run.s.max(p.x1).max(p.after);
            if p.after < run.i {
                run.i = p.after;
                add_point(hb, grid, run.s - run.i, (-q * p.t1).exp());
            }
            if run.s > grid.x_max() {
                Flow::Stop
            } else {
                Flow::Continue
            }
        });
        for v in [h, hb, hs] {
            for k in 1..n {
                v[k] += v[k - 1];
            }
        }
    });
    Ok(RenewalEstimate {
        grid: grid.clone(),
        h: e[..n].to_vec(),
        hbar: e[n..2 * n].to_vec(),
        h_sup: e[2 * n..].to_vec(),
    })
}
