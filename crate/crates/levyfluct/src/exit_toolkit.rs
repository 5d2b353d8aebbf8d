//! Exit laws assembled from the fluctuation functions: the reflected exits
//! `T^s_x`, `T^x_i`, the first amplitude crossing `U^x`, exit from `[-b, a]`,
//! and a lattice random-walk check of the `B̄B - C̄C = φ + q` identity.
//!
//! All products use a single killing rate `q`.

use crate::error::{invalid, Result};
use crate::fluct_solver::{FluctuationGrid, Side, SpatialMeasureGrid};
use crate::levy_model::StableParams;
use crate::monte_carlo::Reflection;
use crate::numerics::cmath::exprel;
use crate::scale_forms::{spectrally_negative_functions, ScaleFunction};
use crate::stable_forms::stable_functions;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Values of the six functions at arbitrary `x` for one killing rate.
pub trait FunctionSource {
    fn q(&self) -> f64;
    /// `(A(x⁻, λ), Ā(x, λ))`.
    fn a_pair(&self, x: f64, lambda: Complex64) -> Result<(Complex64, Complex64)>;
    /// `(B(x, μ), C(x⁻, μ))`, `Re μ ≥ 0`.
    fn upper(&self, x: f64, mu: Complex64) -> Result<(Complex64, Complex64)>;
    /// `(B̄(x⁻, μ), C̄(x, μ))`, `Re μ ≤ 0`.
    fn lower(&self, x: f64, mu: Complex64) -> Result<(Complex64, Complex64)>;
}

fn half_plane(mu: Complex64, upper: bool) -> Result<()> {
    if (upper && mu.re < 0.0) || (!upper && mu.re > 0.0) {
        return invalid(format!(
            "exponent {mu} lies outside the required half-plane"
        ));
    }
    Ok(())
}

/// Closed forms of a spectrally negative model.
#[derive(Debug, Clone, Copy)]
pub struct ScaleSource<'a>(pub &'a ScaleFunction);

impl FunctionSource for ScaleSource<'_> {
    fn q(&self) -> f64 {
        self.0.q()
    }

    fn a_pair(&self, x: f64, lambda: Complex64) -> Result<(Complex64, Complex64)> {
        let v = spectrally_negative_functions(self.0, x, lambda)?;
        Ok((v.a, v.a_bar))
    }

    fn upper(&self, x: f64, mu: Complex64) -> Result<(Complex64, Complex64)> {
        half_plane(mu, true)?;
        let v = spectrally_negative_functions(self.0, x, mu)?;
        Ok((v.b()?, v.c()?))
    }

    fn lower(&self, x: f64, mu: Complex64) -> Result<(Complex64, Complex64)> {
        half_plane(mu, false)?;
        let v = spectrally_negative_functions(self.0, x, mu)?;
        Ok((v.b_bar()?, v.c_bar()?))
    }
}

/// Closed forms of a stable model (`q = 0`).
#[derive(Debug, Clone, Copy)]
pub struct StableSource(pub StableParams);

impl FunctionSource for StableSource {
    fn q(&self) -> f64 {
        0.0
    }

    fn a_pair(&self, x: f64, lambda: Complex64) -> Result<(Complex64, Complex64)> {
        let v = stable_functions(&self.0, x, lambda)?;
        Ok((v.a, v.a_bar))
    }

    fn upper(&self, x: f64, mu: Complex64) -> Result<(Complex64, Complex64)> {
        half_plane(mu, true)?;
        let v = stable_functions(&self.0, x, mu)?;
        Ok((v.b()?, v.c()?))
    }

    fn lower(&self, x: f64, mu: Complex64) -> Result<(Complex64, Complex64)> {
        half_plane(mu, false)?;
        let v = stable_functions(&self.0, x, mu)?;
        Ok((v.b_bar()?, v.c_bar()?))
    }
}

/// Solved grids, looked up by `(λ, side)`; values are linear in `x` between
/// nodes and constant below the first node.
#[derive(Debug, Clone)]
pub struct SolvedSource<'a> {
    grids: &'a [FluctuationGrid],
}

impl<'a> SolvedSource<'a> {
    pub fn new(grids: &'a [FluctuationGrid]) -> Result<Self> {
        let Some(first) = grids.first() else {
            return invalid("no solved grids");
        };
        if grids
            .iter()
            .any(|g| g.q() != first.q() || g.renewal() != first.renewal())
        {
            return invalid("solved grids must share q and the renewal pair");
        }
        Ok(Self { grids })
    }

    fn find(&self, lambda: Complex64, side: Option<Side>) -> Result<&FluctuationGrid> {
        self.grids
            .iter()
            .find(|g| g.lambda() == lambda && side.is_none_or(|s| g.side() == s))
            .ok_or_else(|| {
                crate::FluctError::InvalidInput(format!(
                    "no grid solved at λ = {lambda} ({side:?} side)"
                ))
            })
    }

    fn lerp<F: Fn(usize) -> Option<Complex64>>(
        g: &FluctuationGrid,
        x: f64,
        f: F,
    ) -> Result<Complex64> {
        let grid = g.renewal().grid();
        if !(x > 0.0 && x <= grid.x_max() * (1.0 + 1e-12)) {
            return invalid(format!(
                "x = {x} outside the solved grid (0, {}]",
                grid.x_max()
            ));
        }
        let k = grid.cell_of(x);
        let need = |k: usize| {
            f(k).ok_or_else(|| {
                crate::FluctError::InvalidInput("grid lacks the backward solution".into())
            })
        };
        if k == 1 {
            return need(1);
        }
        let (a, b) = (grid.node(k - 1), grid.node(k));
        let t = (x - a) / (b - a);
        Ok(need(k - 1)? * (1.0 - t) + need(k)? * t)
    }
}

impl FunctionSource for SolvedSource<'_> {
    fn q(&self) -> f64 {
        self.grids[0].q()
    }

    fn a_pair(&self, x: f64, lambda: Complex64) -> Result<(Complex64, Complex64)> {
        let g = self.find(lambda, None)?;
        Ok((
            Self::lerp(g, x, |k| Some(g.a(k)))?,
            Self::lerp(g, x, |k| Some(g.a_bar(k)))?,
        ))
    }

    fn upper(&self, x: f64, mu: Complex64) -> Result<(Complex64, Complex64)> {
        half_plane(mu, true)?;
        let g = self.find(mu, Some(Side::Upper))?;
        Ok((Self::lerp(g, x, |k| g.b(k))?, Self::lerp(g, x, |k| g.c(k))?))
    }

    fn lower(&self, x: f64, mu: Complex64) -> Result<(Complex64, Complex64)> {
        half_plane(mu, false)?;
        let g = self.find(mu, Some(Side::Lower))?;
        Ok((
            Self::lerp(g, x, |k| g.b_bar(k))?,
            Self::lerp(g, x, |k| g.c_bar(k))?,
        ))
    }
}

/// Which exit law a query asks for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExitKind {
    /// `T^s_x`, the first drawdown of size `x`.
    ReflectedTop { x: f64 },
    /// `T^x_i`, the first drawup of size `x`.
    ReflectedBottom { x: f64 },
    /// `U^x`.
    AmplitudeFirst { x: f64 },
    /// `T_b^a`, exit from `[-b, a]`.
    Interval { a: f64, b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitQuery {
    #[serde(flatten)]
    pub kind: ExitKind,
    pub q: f64,
    #[serde(default)]
    pub lambda: Complex64,
    #[serde(default)]
    pub mu1: Complex64,
    #[serde(default)]
    pub mu2: Complex64,
}

impl ExitQuery {
    pub fn new(kind: ExitKind, q: f64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            kind,
            q,
            lambda: zero,
            mu1: zero,
            mu2: zero,
        }
    }

    fn check(&self) -> Result<()> {
        half_plane(self.mu1, true)?;
        half_plane(self.mu2, false)?;
        let ok = match self.kind {
            ExitKind::ReflectedTop { x }
            | ExitKind::ReflectedBottom { x }
            | ExitKind::AmplitudeFirst { x } => x > 0.0,
            ExitKind::Interval { a, b } => a > 0.0 && b > 0.0,
        };
        if !ok {
            return invalid("exit levels must be positive");
        }
        Ok(())
    }
}

/// `(top, bottom)` parts of an exit law; reflected exits have only `top`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitValue {
    pub top: Complex64,
    pub bottom: Option<Complex64>,
}

fn same_q(src: &dyn FunctionSource, q: f64) -> Result<()> {
    if src.q() != q {
        return invalid(format!(
            "query q = {q} but the functions were built at q = {}",
            src.q()
        ));
    }
    Ok(())
}

/// `E[e^{-μ₁S_T - μ₂(X_T - S_T) - qT}]` at `T = T^s_x` (`FromMax`), or
/// `E[e^{-μ₂I_T - μ₁(X_T - I_T) - qT}]` at `T = T^x_i` (`FromMin`).
pub fn reflected_exit(
    src: &dyn FunctionSource,
    side: Reflection,
    x: f64,
    mu1: Complex64,
    mu2: Complex64,
) -> Result<Complex64> {
    if !(x > 0.0) {
        return invalid("reflection level must be positive");
    }
    Ok(match side {
        Reflection::FromMax => {
            let (b, _) = src.upper(x, mu1)?;
            let (_, c_bar) = src.lower(x, mu2)?;
            c_bar / b
        }
        Reflection::FromMin => {
            let (b_bar, _) = src.lower(x, mu2)?;
            let (_, c) = src.upper(x, mu1)?;
            c / b_bar
        }
    })
}

/// The two parts of the first amplitude crossing `U^x`: at a running maximum,
/// `Ā(x, λ)C(x⁻, μ₁)`, and at a running minimum, `A(x⁻, λ)C̄(x, μ₂)`.
pub fn amplitude_first_crossing(
    src: &dyn FunctionSource,
    x: f64,
    lambda: Complex64,
    mu1: Complex64,
    mu2: Complex64,
) -> Result<(Complex64, Complex64)> {
    if !(x > 0.0) {
        return invalid("amplitude level must be positive");
    }
    let (a, a_bar) = src.a_pair(x, lambda)?;
    let (_, c) = src.upper(x, mu1)?;
    let (_, c_bar) = src.lower(x, mu2)?;
    Ok((a_bar * c, a * c_bar))
}

/// `Σ_j e^{rate·t} g(base + t) m_j(base + t)` over spatial cells with
/// `t < reach`, the cell family read along `x = base + t`.
fn diagonal<G, M>(
    smg: &SpatialMeasureGrid,
    base: f64,
    reach: f64,
    rate: Complex64,
    g: G,
    mass: M,
) -> Result<Complex64>
where
    G: Fn(f64) -> Result<Complex64>,
    M: Fn(f64, usize) -> Result<f64>,
{
    let mut total = Complex64::new(0.0, 0.0);
    for (j, e) in smg.edges().windows(2).enumerate() {
        if e[0] >= reach {
            break;
        }
        let (lo, hi) = (e[0], e[1].min(reach));
        let mid = 0.5 * (lo + hi);
        let m = mass(base + mid, j)? * (hi - lo) / (e[1] - e[0]);
        if m != 0.0 {
            total += (rate * lo).exp() * exprel(rate * (hi - lo)) * g(base + mid)? * m;
        }
    }
    Ok(total)
}

/// Exit from `[-b, a]`: `(E[…; X_T = S_T], E[…; X_T = I_T])` weighted by
/// `e^{-λ·extremum - μ·overshoot - qT}`, from the spatial measures read
/// along the anti-diagonal and the `C`, `C̄` functions of `src`.
///
/// The spatial solution must reach `a + b`.
pub fn interval_exit_transform(
    smg: &SpatialMeasureGrid,
    src: &dyn FunctionSource,
    a: f64,
    b: f64,
    lambda: Complex64,
    mu1: Complex64,
    mu2: Complex64,
) -> Result<(Complex64, Complex64)> {
    if !(a > 0.0 && b > 0.0) {
        return invalid("interval ends must be positive");
    }
    if smg.x_span() < (a + b) * (1.0 - 1e-12) {
        return invalid(format!(
            "spatial measures reach {}; the interval needs X_max ≥ {}",
            smg.x_span(),
            a + b
        ));
    }
    // y = -t on the Ā side, y = t on the A side
    let top = diagonal(
        smg,
        a,
        b,
        lambda,
        |x| Ok(src.upper(x, mu1)?.1),
        |x, j| smg.a_bar_mass_at(x, j),
    )?;
    let bottom = diagonal(
        smg,
        b,
        a,
        -lambda,
        |x| Ok(src.lower(x, mu2)?.1),
        |x, j| smg.a_mass_at(x, j),
    )?;
    Ok((top, bottom))
}

/// Evaluates one query. Interval queries need the spatial measures.
pub fn evaluate(
    src: &dyn FunctionSource,
    smg: Option<&SpatialMeasureGrid>,
    query: &ExitQuery,
) -> Result<ExitValue> {
    query.check()?;
    same_q(src, query.q)?;
    let (l, m1, m2) = (query.lambda, query.mu1, query.mu2);
    Ok(match query.kind {
        ExitKind::ReflectedTop { x } => ExitValue {
            top: reflected_exit(src, Reflection::FromMax, x, m1, m2)?,
            bottom: None,
        },
        ExitKind::ReflectedBottom { x } => ExitValue {
            top: reflected_exit(src, Reflection::FromMin, x, m1, m2)?,
            bottom: None,
        },
        ExitKind::AmplitudeFirst { x } => {
            let (top, bottom) = amplitude_first_crossing(src, x, l, m1, m2)?;
            ExitValue {
                top,
                bottom: Some(bottom),
            }
        }
        ExitKind::Interval { a, b } => {
            let smg = smg.ok_or_else(|| {
                crate::FluctError::InvalidInput("interval exits need spatial measures".into())
            })?;
            let (top, bottom) = interval_exit_transform(smg, src, a, b, l, m1, m2)?;
            ExitValue {
                top,
                bottom: Some(bottom),
            }
        }
    })
}

/// Integer-valued step law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLaw {
    steps: Vec<(i64, f64)>,
}

impl StepLaw {
    pub fn new(steps: Vec<(i64, f64)>) -> Result<Self> {
        let total: f64 = steps.iter().map(|s| s.1).sum();
        if steps.is_empty() || steps.iter().any(|s| !(s.1 >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return invalid("step probabilities must be nonnegative and sum to 1");
        }
        Ok(Self { steps })
    }

    /// `±1` with up-probability `p`.
    pub fn two_point(p: f64) -> Result<Self> {
        Self::new(vec![(1, p), (-1, 1.0 - p)])
    }

    /// `E[e^{-iuS₁}]`.
    pub fn characteristic(&self, u: f64) -> Complex64 {
        self.steps
            .iter()
            .map(|&(v, p)| Complex64::from_polar(p, -u * v as f64))
            .sum()
    }
}

/// Exit of the walk from `[lo, hi)` by enumeration: for each `u`,
/// `(E[e^{-iuS_V}s^V; S_V < lo], E[e^{-iuS_V}s^V; S_V ≥ hi])`, and the
/// weighted mass `s^{n+1}·P(V > n)` left out at the horizon.
fn exit_transforms(
    law: &StepLaw,
    lo: i64,
    hi: i64,
    s: f64,
    us: &[f64],
    n_max: usize,
) -> (Vec<[Complex64; 2]>, f64) {
    let zero = Complex64::new(0.0, 0.0);
    let mut out = vec![[zero; 2]; us.len()];
    // weighted probability of each inside position
    let mut inside = BTreeMap::from([(0i64, 1.0f64)]);
    let mut weight = 1.0;
    for _ in 0..n_max {
        weight *= s;
        let mut next = BTreeMap::new();
        for (&x, &p) in &inside {
            for &(v, pv) in &law.steps {
                let y = x + v;
                let m = p * pv;
                if y < lo || y >= hi {
                    let side = usize::from(y >= hi);
                    for (o, &u) in out.iter_mut().zip(us) {
                        o[side] += Complex64::from_polar(m * weight, -u * y as f64);
                    }
                } else {
                    *next.entry(y).or_insert(0.0) += m;
                }
            }
        }
        inside = next;
        if inside.is_empty() {
            break;
        }
    }
    let survive: f64 = inside.values().sum();
    (out, survive * weight * s)
}

/// Both sides of the identity and their gap at each `u`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WalkIdentityReport {
    pub x: i64,
    pub s: f64,
    pub n_max: usize,
    pub u: Vec<f64>,
    pub left: Vec<Complex64>,
    pub right: Vec<Complex64>,
    pub max_residual: f64,
    /// Bound on the truncation error of the left side.
    pub truncation_bound: f64,
    pub warnings: Vec<String>,
}

impl WalkIdentityReport {
    pub fn passes(&self) -> bool {
        self.max_residual <= self.truncation_bound.max(1e-13)
    }
}

/// Checks, for the walk with the given steps and `V = V_0^{x-}`,
/// `V' = V_x^{0-}` (first exits from `[0, x)` and `[-x, 0)`),
/// `[1 - E(e^{-iuS_V}s^V; S_V < 0)][1 - E(e^{-iuS_{V'}}s^{V'}; S_{V'} ≥ 0)]
///  - E(e^{-iuS_V}s^V; S_V ≥ x)E(e^{-iuS_{V'}}s^{V'}; S_{V'} < -x) = 1 - sE e^{-iuS₁}`.
///
/// A warning is added when the truncation bound exceeds `tol`.
pub fn random_walk_identity_check(
    law: &StepLaw,
    x: i64,
    s: f64,
    us: &[f64],
    n_max: usize,
    tol: Option<f64>,
) -> Result<WalkIdentityReport> {
    if x <= 0 || !(0.0..=1.0).contains(&s) || us.is_empty() {
        return invalid("need x ≥ 1, s in [0, 1] and at least one u");
    }
    let (up, du) = exit_transforms(law, 0, x, s, us, n_max);
    let (down, dd) = exit_transforms(law, -x, 0, s, us, n_max);
    // each pair of truncated terms moves the left side by at most twice its mass
    let truncation_bound = 2.0 * (du + dd);
    let one = Complex64::new(1.0, 0.0);
    let mut left = Vec::with_capacity(us.len());
    let mut right = Vec::with_capacity(us.len());
    for (k, &u) in us.iter().enumerate() {
        let [v_below, v_above] = up[k];
        let [w_below, w_above] = down[k];
        // S_{V'} < -x is below [-x, 0); S_{V'} ≥ 0 above it
        left.push((one - v_below) * (one - w_above) - v_above * w_below);
        right.push(one - s * law.characteristic(u));
    }
    let max_residual = left
        .iter()
        .zip(&right)
        .map(|(l, r)| (l - r).norm())
        .fold(0.0, f64::max);
    let mut warnings = Vec::new();
    if let Some(t) = tol {
        if truncation_bound > t {
            warnings.push(format!("horizon {n_max} leaves a truncation bound {truncation_bound:e} above the tolerance {t:e}"));
        }
    }
    Ok(WalkIdentityReport {
        x,
        s,
        n_max,
        u: us.to_vec(),
        left,
        right,
        max_residual,
        truncation_bound,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluct_solver::{solve_spatial, Grid, RenewalPair};
    use crate::levy_model::{wiener_hopf_factors, LevyModel};
    use crate::scale_forms::{derive_renewal_from_scale, invert_scale_function};

    const Z: Complex64 = Complex64::new(0.0, 0.0);

    fn brownian_q0() -> ScaleFunction {
        let m = LevyModel::brownian(1.0, 0.0).unwrap();
        invert_scale_function(&m, 0.0, &Grid::nested(256, 4.0).unwrap()).unwrap()
    }

    fn cl_scale(q: f64) -> ScaleFunction {
        let m = LevyModel::cramer_lundberg(2.0, 1.0, 1.0).unwrap();
        invert_scale_function(&m, q, &Grid::nested(512, 20.0).unwrap()).unwrap()
    }

    #[test]
    fn brownian_reflected_exit_is_certain_without_killing() {
        let sf = brownian_q0();
        let v = reflected_exit(&ScaleSource(&sf), Reflection::FromMax, 1.0, Z, Z).unwrap();
        assert!((v - 1.0).norm() < 1e-8, "{v}");
        let m = LevyModel::brownian(1.0, 0.0).unwrap();
        let sf1 = invert_scale_function(&m, 1.0, &Grid::nested(256, 4.0).unwrap()).unwrap();
        let killed = reflected_exit(&ScaleSource(&sf1), Reflection::FromMax, 1.0, Z, Z).unwrap();
        assert!(killed.re < 1.0 - 1e-3 && killed.re > 0.0);
    }

    #[test]
    fn cauchy_amplitude_crossing_splits_evenly() {
        let p = LevyModel::stable(1.0, 0.5)
            .unwrap()
            .stable_params()
            .unwrap();
        for x in [0.3, 1.0, 4.0] {
            let (top, bottom) = amplitude_first_crossing(&StableSource(p), x, Z, Z, Z).unwrap();
            assert!(
                (top - 0.5).norm() < 1e-8 && (bottom - 0.5).norm() < 1e-8,
                "{top} {bottom}"
            );
        }
    }

    #[test]
    fn symmetric_brownian_crossing_is_symmetric() {
        let sf = brownian_q0();
        let (top, bottom) = amplitude_first_crossing(&ScaleSource(&sf), 1.5, Z, Z, Z).unwrap();
        assert!((top - bottom).norm() < 1e-8 && (top + bottom - 1.0).norm() < 1e-8);
    }

    #[test]
    fn brownian_interval_exit_matches_gamblers_ruin() {
        let sf = brownian_q0();
        let rp = RenewalPair::from_fn(Grid::nested(512, 3.0).unwrap(), 0.0, 0.0, |x| {
            (x / 2.0, x / 2.0)
        })
        .unwrap();
        let smg = solve_spatial(&rp, 2048, 3.0).unwrap();
        let (top, bottom) =
            interval_exit_transform(&smg, &ScaleSource(&sf), 1.0, 2.0, Z, Z, Z).unwrap();
        assert!((top.re - 2.0 / 3.0).abs() < 2e-3, "{top}");
        assert!((top.re + bottom.re - 1.0).abs() < 2e-3, "{top} {bottom}");
        let (wide, _) =
            interval_exit_transform(&smg, &ScaleSource(&sf), 1.0, 1.0, Z, Z, Z).unwrap();
        assert!(wide.re < top.re);
        assert!(interval_exit_transform(&smg, &ScaleSource(&sf), 2.0, 2.0, Z, Z, Z).is_err());
    }

    #[test]
    fn cramer_lundberg_interval_exit_matches_the_scale_ratio() {
        let sf = cl_scale(0.0);
        let rp = derive_renewal_from_scale(&sf).unwrap();
        let smg = solve_spatial(&rp, 2048, 2.0).unwrap();
        let (top, bottom) =
            interval_exit_transform(&smg, &ScaleSource(&sf), 1.0, 1.0, Z, Z, Z).unwrap();
        let w = |x: f64| 1.0 - 0.5 * (-0.5 * x).exp();
        assert!((top.re - w(1.0) / w(2.0)).abs() < 2e-3, "{top}");
        assert!((top.re + bottom.re - 1.0).abs() < 2e-3, "{bottom}");
    }

    #[test]
    fn solved_grids_agree_with_closed_forms() {
        let sf = cl_scale(1.0);
        let rp = derive_renewal_from_scale(&sf).unwrap();
        let wh = wiener_hopf_factors(sf.model(), 1.0).unwrap();
        let mu = Complex64::new(0.5, 0.0);
        let grids = vec![
            FluctuationGrid::solve_side(&rp, mu, Side::Upper, &wh).unwrap(),
            FluctuationGrid::solve_side(&rp, -mu, Side::Lower, &wh).unwrap(),
            FluctuationGrid::solve_side(&rp, Z, Side::Upper, &wh).unwrap(),
            FluctuationGrid::solve_side(&rp, Z, Side::Lower, &wh).unwrap(),
        ];
        let solved = SolvedSource::new(&grids).unwrap();
        let exact = ScaleSource(&sf);
        for side in [Reflection::FromMax, Reflection::FromMin] {
            let a = reflected_exit(&solved, side, 1.3, mu, -mu).unwrap();
            let b = reflected_exit(&exact, side, 1.3, mu, -mu).unwrap();
            assert!((a - b).norm() < 1e-3, "{side:?} {a} {b}");
        }
        let (t1, b1) = amplitude_first_crossing(&solved, 1.3, Z, Z, Z).unwrap();
        let (t2, b2) = amplitude_first_crossing(&exact, 1.3, Z, Z, Z).unwrap();
        assert!((t1 - t2).norm() < 1e-3 && (b1 - b2).norm() < 1e-3);
        assert!(solved.upper(1.0, Complex64::new(2.0, 0.0)).is_err());
        assert!(solved.upper(1.0, -mu).is_err());
    }

    #[test]
    fn queries_dispatch_and_check_q() {
        let sf = brownian_q0();
        let q = ExitQuery::new(ExitKind::ReflectedTop { x: 1.0 }, 0.0);
        let v = evaluate(&ScaleSource(&sf), None, &q).unwrap();
        assert!((v.top - 1.0).norm() < 1e-8 && v.bottom.is_none());
        assert!(evaluate(
            &ScaleSource(&sf),
            None,
            &ExitQuery::new(ExitKind::ReflectedTop { x: 1.0 }, 1.0)
        )
        .is_err());
        let interval = ExitQuery::new(ExitKind::Interval { a: 1.0, b: 1.0 }, 0.0);
        assert!(evaluate(&ScaleSource(&sf), None, &interval).is_err());
        let json = serde_json::to_string(&interval).unwrap();
        assert_eq!(serde_json::from_str::<ExitQuery>(&json).unwrap(), interval);
    }

    #[test]
    fn simple_walk_identity() {
        let law = StepLaw::two_point(0.5).unwrap();
        let r = random_walk_identity_check(&law, 2, 0.5, &[0.0], 40, None).unwrap();
        assert!(r.truncation_bound <= 2.0 * 0.5f64.powi(40));
        assert!(r.passes(), "{r:?}");
        let none = random_walk_identity_check(&law, 2, 0.0, &[0.0, 1.0], 5, None).unwrap();
        assert!(none.max_residual < 1e-15 && none.truncation_bound == 0.0);
    }

    #[test]
    fn asymmetric_walk_identity() {
        let law = StepLaw::two_point(0.3).unwrap();
        let r = random_walk_identity_check(&law, 3, 0.9, &[0.0, 1.0], 200, Some(1e-6)).unwrap();
        assert!(r.passes() && r.warnings.is_empty(), "{r:?}");
        let short = random_walk_identity_check(&law, 3, 0.9, &[0.0, 1.0], 10, Some(1e-6)).unwrap();
        assert!(short.passes() && !short.warnings.is_empty());
        // the identity fails if the two exits are swapped
        assert!(short.max_residual > 0.0 || short.truncation_bound > 0.0);
    }
}
