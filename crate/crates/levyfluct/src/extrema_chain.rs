//! Successive running extrema as a Markov chain driven by the renewal pair.
//!
//! From a state `x > 0` the next state has magnitude distributed as
//! `H̄_q(dt)/H̄_q(x)` on `[0, x]` and negative sign; from `x < 0` it is
//! `H_q(dt)/H_q(-x)` on `[0, -x)` with positive sign. Zero is absorbing.
//! Renewal functions are linear between nodes, so sampling and CDF agree
//! exactly at grid resolution.

use crate::ensemble::{chunk_rng, chunks, map_ensemble};
use crate::error::{invalid, Result};
use crate::fluct_solver::RenewalPair;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// Transition kernel of the extrema chain for one renewal pair.
#[derive(Debug, Clone)]
pub struct ExtremaKernel<'a> {
    rp: &'a RenewalPair,
    q: f64,
}

/// Law of the first state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialLaw {
    /// `Z₁ ~ H_q(dy)`, the first maximum.
    Up,
    /// `Y₁ ~ H̄_q(-dy)`, the first minimum.
    Down,
}

impl<'a> ExtremaKernel<'a> {
    pub fn new(rp: &'a RenewalPair, q: f64) -> Result<Self> {
        if !(q >= 0.0 && q.is_finite()) {
            return invalid("killing rate must be finite and nonnegative");
        }
        Ok(Self { rp, q })
    }

    pub fn renewal(&self) -> &RenewalPair {
        self.rp
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    fn x_max(&self) -> f64 {
        self.rp.grid().x_max()
    }

    fn check(&self, x: f64) -> Result<()> {
        if !x.is_finite() || x.abs() > self.x_max() {
            return invalid(format!(
                "state {x} lies outside the grid range ±{}",
                self.x_max()
            ));
        }
        Ok(())
    }

    /// Magnitude `t` where the interpolated renewal function reaches `target`.
    fn inverse(&self, values: &[f64], target: f64) -> f64 {
        if target <= values[0] {
            return 0.0;
        }
        let g = self.rp.grid();
        let k = values
            .partition_point(|&v| v < target)
            .min(values.len() - 1);
        let (a, b) = (g.node(k - 1), g.node(k));
        let (va, vb) = (values[k - 1], values[k]);
        a + (b - a) * ((target - va) / (vb - va)).clamp(0.0, 1.0)
    }

    /// Draws the state following `x`.
    pub fn sample<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> Result<f64> {
        self.check(x)?;
        Ok(self.sample_unchecked(x, rng))
    }

    fn sample_unchecked<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        // u in (0, 1] so a zero atom is never hit
        let u = 1.0 - rng.random::<f64>();
        if x > 0.0 {
            -self.inverse(self.rp.hbar(), u * self.rp.hbar_at(x))
        } else if x < 0.0 {
            self.inverse(self.rp.h(), u * self.rp.h_at(-x))
        } else {
            0.0
        }
    }

    /// `P(x, (-∞, y])`.
    pub fn cdf(&self, x: f64, y: f64) -> Result<f64> {
        self.check(x)?;
        Ok(if x > 0.0 {
            if y < -x {
                0.0
            } else if y >= 0.0 {
                1.0
            } else {
                1.0 - self.rp.hbar_at(-y) / self.rp.hbar_at(x)
            }
        } else if x < 0.0 {
            if y < 0.0 {
                0.0
            } else if y >= -x {
                1.0
            } else {
                self.rp.h_at(y) / self.rp.h_at(-x)
            }
        } else if y < 0.0 {
            0.0
        } else {
            1.0
        })
    }

    /// `P(x, {y : |y| ≤ t})`.
    pub fn magnitude_cdf(&self, x: f64, t: f64) -> Result<f64> {
        self.check(x)?;
        if t < 0.0 {
            return Ok(0.0);
        }
        Ok(if x > 0.0 {
            (self.rp.hbar_at(t) / self.rp.hbar_at(x)).min(1.0)
        } else if x < 0.0 {
            (self.rp.h_at(t) / self.rp.h_at(-x)).min(1.0)
        } else {
            1.0
        })
    }

    /// `P(x, (a, b])`, zero outside the support.
    pub fn mass(&self, x: f64, a: f64, b: f64) -> Result<f64> {
        Ok((self.cdf(x, b)? - self.cdf(x, a)?).max(0.0))
    }

    /// Randomized probability integral transform of a step `x → y`: uniform
    /// on `[0, 1]` when `y` follows the kernel, atoms included (`v` uniform).
    pub fn pit(&self, x: f64, y: f64, v: f64) -> Result<f64> {
        let hi = self.cdf(x, y)?;
        let lo = if y == 0.0 && x > 0.0 {
            1.0 - self.rp.hbar()[0] / self.rp.hbar_at(x)
        } else if y == 0.0 && x < 0.0 {
            0.0
        } else {
            hi
        };
        Ok(lo + v * (hi - lo))
    }

    /// CDF of the first state, capped at `cap` as in [`Self::simulate`].
    pub fn initial_cdf(&self, law: InitialLaw, y: f64, truncation: Option<f64>) -> Result<f64> {
        let cap = self.initial_cap(truncation)?;
        Ok(match law {
            InitialLaw::Up if y <= 0.0 => 0.0,
            InitialLaw::Up => (self.rp.h_at(y.min(cap)) / self.rp.h_at(cap)).min(1.0),
            InitialLaw::Down if y >= 0.0 => 1.0,
            InitialLaw::Down => {
                1.0 - (self.rp.hbar_at((-y).min(cap)) / self.rp.hbar_at(cap)).min(1.0)
            }
        })
    }

    /// Cap on the first state: `truncation` if given, else the grid end when
    /// `q > 0`. At `q = 0` the initial law is infinite and a cap is required.
    fn initial_cap(&self, truncation: Option<f64>) -> Result<f64> {
        match truncation {
            Some(x0) if x0 > 0.0 && x0 <= self.x_max() => Ok(x0),
            Some(x0) => invalid(format!("truncation {x0} must lie in (0, {}]", self.x_max())),
            None if self.q > 0.0 => Ok(self.x_max()),
            None => invalid("at q = 0 the initial law is infinite; give a truncation"),
        }
    }

    fn sample_initial<R: Rng + ?Sized>(&self, law: InitialLaw, cap: f64, rng: &mut R) -> f64 {
        let u = 1.0 - rng.random::<f64>();
        match law {
            InitialLaw::Up => self.inverse(self.rp.h(), u * self.rp.h_at(cap)),
            InitialLaw::Down => -self.inverse(self.rp.hbar(), u * self.rp.hbar_at(cap)),
        }
    }

    /// Simulates up to `n_steps` nonzero states, stopping early on absorption.
    pub fn simulate<R: Rng + ?Sized>(
        &self,
        law: InitialLaw,
        n_steps: usize,
        truncation: Option<f64>,
        rng: &mut R,
    ) -> Result<ChainPath> {
        let cap = self.initial_cap(truncation)?;
        Ok(self.simulate_capped(law, n_steps, cap, rng))
    }

    fn simulate_capped<R: Rng + ?Sized>(
        &self,
        law: InitialLaw,
        n_steps: usize,
        cap: f64,
        rng: &mut R,
    ) -> ChainPath {
        let mut states = Vec::with_capacity(n_steps.min(64));
        if n_steps == 0 {
            return ChainPath {
                states,
                absorbed: false,
            };
        }
        let mut z = self.sample_initial(law, cap, rng);
        while z != 0.0 {
            states.push(z);
            if states.len() == n_steps {
                break;
            }
            z = self.sample_unchecked(z, rng);
        }
        ChainPath {
            absorbed: z == 0.0,
            states,
        }
    }
}

/// One realisation `Z₁, Z₂, …` of the chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainPath {
    pub states: Vec<f64>,
    /// The state after the last one is the absorbing 0.
    pub absorbed: bool,
}

impl ChainPath {
    /// Last (1-based) index `n` with `Z_n ∉ [-x, x)`, or 0 if there is none.
    pub fn tau(&self, x: f64) -> usize {
        self.states
            .iter()
            .rposition(|&z| z < -x || z >= x)
            .map_or(0, |i| i + 1)
    }

    pub fn sum(&self) -> f64 {
        self.states.iter().sum()
    }

    /// Signs alternate and magnitudes do not increase.
    pub fn is_consistent(&self) -> bool {
        self.states.windows(2).all(|w| {
            let sign_ok = (w[0] > 0.0 && w[1] < 0.0) || (w[0] < 0.0 && w[1] > 0.0);
            sign_ok && w[1].abs() <= w[0].abs()
        })
    }
}

/// Convenience wrapper over [`ExtremaKernel::simulate`].
pub fn simulate_chain<R: Rng + ?Sized>(
    k: &ExtremaKernel,
    law: InitialLaw,
    n_steps: usize,
    truncation: Option<f64>,
    rng: &mut R,
) -> Result<ChainPath> {
    k.simulate(law, n_steps, truncation, rng)
}

/// Chains simulated in parallel, reproducible for a given seed.
pub fn simulate_ensemble(
    k: &ExtremaKernel,
    law: InitialLaw,
    n_paths: usize,
    n_steps: usize,
    truncation: Option<f64>,
    seed: u64,
) -> Result<Vec<ChainPath>> {
    let cap = k.initial_cap(truncation)?;
    Ok(map_ensemble(n_paths, seed, |rng| {
        k.simulate_capped(law, n_steps, cap, rng)
    }))
}

/// Writes `path,step,state` rows with 1-based steps.
pub fn write_chains_csv<W: Write>(out: &mut W, paths: &[ChainPath]) -> Result<()> {
    writeln!(out, "path,step,state")?;
    for (i, p) in paths.iter().enumerate() {
        for (n, z) in p.states.iter().enumerate() {
            writeln!(out, "{i},{},{z:e}", n + 1)?;
        }
    }
    Ok(())
}

/// Settings of [`reversal_duality_check`].
#[derive(Debug, Clone, Serialize)]
pub struct DualityConfig {
    pub n_samples: usize,
    pub bins: usize,
    /// Histogram covers `[-range, range)`.
    pub range: f64,
    /// Level `x` of the last exit `τ_x` where the reversed chain starts.
    pub threshold: f64,
    /// States with `|z| < floor` go to a sink that both sides leave out;
    /// without atoms the occupation measure is infinite near 0.
    pub floor: f64,
    pub max_steps: usize,
    pub seed: u64,
}

impl DualityConfig {
    pub fn new(n_samples: usize, range: f64, threshold: f64) -> Self {
        let bins = 20;
        Self {
            n_samples,
            bins,
            range,
            threshold,
            floor: range / (4 * bins) as f64,
            max_steps: 1000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DualityReport {
    pub config: DualityConfig,
    /// Total variation between `U(dz)P(z,dy)` and `R(y,dz)U(dy)` on the
    /// 2-D histogram, relative to the mass of the former.
    pub tv: f64,
    /// Largest gap between the second marginal of `U·P` and the occupation
    /// of steps `n ≥ 2`, relative to the total occupation.
    pub marginal_residual: f64,
    /// Largest per-bin z-score of the reversed chain's initial law.
    pub initial_law_max_z: f64,
    pub initial_law_bins: usize,
    pub warnings: Vec<String>,
}

/// Per-bin sums; merged across chunks in chunk order.
#[derive(Clone)]
struct Tally {
    occupation: Vec<f64>,
    later: Vec<f64>,
    up: Vec<f64>,
    pairs: Vec<f64>,
    start_diff: Vec<f64>,
    start_diff_sq: Vec<f64>,
}

impl Tally {
    fn new(bins: usize) -> Self {
        let z = vec![0.0; bins];
        Self {
            occupation: z.clone(),
            later: z.clone(),
            up: vec![0.0; bins * bins],
            pairs: vec![0.0; bins * bins],
            start_diff: z.clone(),
            start_diff_sq: z,
        }
    }

    fn merge(mut self, o: &Tally) -> Self {
        let add = |a: &mut Vec<f64>, b: &Vec<f64>| a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        add(&mut self.occupation, &o.occupation);
        add(&mut self.later, &o.later);
        add(&mut self.up, &o.up);
        add(&mut self.pairs, &o.pairs);
        add(&mut self.start_diff, &o.start_diff);
        add(&mut self.start_diff_sq, &o.start_diff_sq);
        self
    }
}

/// Monte Carlo test of the time-reversal duality of the chain under the
/// normalised up law, `U(dz)P(z,dy) = R(y,dz)U(dy)`.
///
/// The left side is accumulated per visit from the exact kernel. The right
/// side counts the observed steps `y → z` of the reversed paths, which is
/// `R(y,dz)` times the empirical `U(dy)`. The law of `Z_{τ_x}` is compared
/// per bin with `[1_{y<-x} H(x)/H(-y) + 1_{y≥x} H̄(x)/H̄(y)] U(dy)`.
pub fn reversal_duality_check(k: &ExtremaKernel, cfg: &DualityConfig) -> Result<DualityReport> {
    if k.q() <= 0.0 {
        return invalid("the duality check needs q > 0 for a finite occupation measure");
    }
    if cfg.bins < 2
        || !(cfg.range > 0.0)
        || !(cfg.floor >= 0.0 && cfg.floor < cfg.threshold && cfg.threshold < cfg.range)
    {
        return invalid("duality check needs at least 2 bins and 0 <= floor < threshold < range");
    }
    let cap = k.initial_cap(None)?;
    let nb = cfg.bins;
    let width = 2.0 * cfg.range / nb as f64;
    let edge = |i: usize| -cfg.range + width * i as f64;
    let bin = |z: f64| -> Option<usize> {
        let i = ((z + cfg.range) / width).floor();
        (i >= 0.0 && i < nb as f64 && z.abs() >= cfg.floor && z != 0.0).then_some(i as usize)
    };
    // kernel mass of bin j outside the sink
    let bin_mass = |z: f64, j: usize| -> f64 {
        let (a, b) = (edge(j), edge(j + 1));
        let neg = if a < -cfg.floor {
            k.mass(z, a, b.min(-cfg.floor)).unwrap_or(0.0)
        } else {
            0.0
        };
        let pos = if b > cfg.floor {
            k.mass(z, a.max(cfg.floor), b).unwrap_or(0.0)
        } else {
            0.0
        };
        neg + pos
    };
    let x = cfg.threshold;
    let (h_x, hbar_x) = (k.rp.h_at(x), k.rp.hbar_at(x));
    let start_factor = |y: f64| {
        if y < -x {
            h_x / k.rp.h_at(-y)
        } else if y >= x {
            hbar_x / k.rp.hbar_at(y)
        } else {
            0.0
        }
    };

    let per_chunk = |(c, len): (u64, usize)| -> Tally {
        let mut rng = chunk_rng(cfg.seed, c);
        let mut t = Tally::new(nb);
        let mut local = vec![0.0; nb];
        let mut states = Vec::new();
        for _ in 0..len {
            states.clear();
            let mut z = k.sample_initial(InitialLaw::Up, cap, &mut rng);
            while z != 0.0 && z.abs() >= cfg.floor && states.len() < cfg.max_steps {
                states.push(z);
                z = k.sample_unchecked(z, &mut rng);
            }
            // a path cut at max_steps has an unobserved successor
            let cut = states.len() == cfg.max_steps;
            local.iter_mut().for_each(|v| *v = 0.0);
            let mut prev: Option<usize> = None;
            for (n, &z) in states.iter().enumerate() {
                let iz = bin(z);
                if let Some(iz) = iz {
                    t.occupation[iz] += 1.0;
                    if !(cut && n + 1 == states.len()) {
                        for j in 0..nb {
                            t.up[iz * nb + j] += bin_mass(z, j);
                        }
                    }
                    local[iz] -= start_factor(z);
                    if let Some(ip) = prev {
                        t.later[iz] += 1.0;
                        t.pairs[ip * nb + iz] += 1.0;
                    }
                }
                prev = iz;
            }
            let path = ChainPath {
                states: states.clone(),
                absorbed: false,
            };
            let tau = path.tau(x);
            if tau > 0 {
                if let Some(i) = bin(states[tau - 1]) {
                    local[i] += 1.0;
                }
            }
            for (i, &d) in local.iter().enumerate() {
                t.start_diff[i] += d;
                t.start_diff_sq[i] += d * d;
            }
        }
        t
    };
    let parts: Vec<Tally> = chunks(cfg.n_samples)
        .into_par_iter()
        .map(per_chunk)
        .collect();
    let t = parts.iter().fold(Tally::new(nb), |acc, p| acc.merge(p));

    let n = cfg.n_samples as f64;
    let mut warnings = Vec::new();
    let left_total: f64 = t.up.iter().sum();
    let diff: f64 = t.up.iter().zip(&t.pairs).map(|(l, r)| (l - r).abs()).sum();
    let tv = if left_total > 0.0 {
        0.5 * diff / left_total
    } else {
        f64::NAN
    };

    let total_occ: f64 = t.occupation.iter().sum();
    let marginal_residual = (0..nb)
        .map(|j| ((0..nb).map(|i| t.up[i * nb + j]).sum::<f64>() - t.later[j]).abs())
        .fold(0.0, f64::max)
        / total_occ.max(1.0);

    let mut max_z: f64 = 0.0;
    let mut tested = 0;
    for i in 0..nb {
        let mean = t.start_diff[i] / n;
        let var = (t.start_diff_sq[i] / n - mean * mean).max(0.0) / n;
        if var > 0.0 {
            tested += 1;
            max_z = max_z.max(mean.abs() / var.sqrt());
        }
    }
    let sparse = t
        .occupation
        .iter()
        .filter(|&&o| o > 0.0 && o < 100.0)
        .count();
    if sparse > 0 {
        warnings.push(format!(
            "{sparse} histogram bins hold fewer than 100 visits; use more samples or fewer bins"
        ));
    }
    Ok(DualityReport {
        config: cfg.clone(),
        tv,
        marginal_residual,
        initial_law_max_z: max_z,
        initial_law_bins: tested,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::ks_distance;
    use crate::fluct_solver::Grid;
    use crate::levy_model::StableParams;
    use crate::stable_forms::stable_renewal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brownian_q1() -> RenewalPair {
        let t = |x: f64| (0.5 * x).tanh();
        RenewalPair::from_fn(Grid::nested(4096, 20.0).unwrap(), 0.0, 0.0, |x| {
            (t(x), t(x))
        })
        .unwrap()
    }

    #[test]
    fn zero_is_absorbing() {
        let rp = brownian_q1();
        let k = ExtremaKernel::new(&rp, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(k.sample(0.0, &mut rng).unwrap(), 0.0);
        assert_eq!(k.cdf(0.0, -1e-300).unwrap(), 0.0);
        assert_eq!(k.cdf(0.0, 0.0).unwrap(), 1.0);
        assert!(k.sample(21.0, &mut rng).is_err());
    }

    #[test]
    fn cauchy_magnitude_is_square_root() {
        let g = Grid::nested(4096, 10.0).unwrap();
        let rp = stable_renewal(&StableParams::cauchy(), &g).unwrap();
        let k = ExtremaKernel::new(&rp, 0.0).unwrap();
        for &t in &[0.01, 0.1, 0.3, 0.5, 0.9] {
            let p = k.magnitude_cdf(1.0, t).unwrap();
            assert!((p - t.sqrt()).abs() < 1e-4, "t={t} p={p}");
            assert!((k.cdf(1.0, -t).unwrap() - (1.0 - t.sqrt())).abs() < 1e-4);
        }
    }

    #[test]
    fn rows_are_probabilities() {
        let rp = brownian_q1();
        let k = ExtremaKernel::new(&rp, 1.0).unwrap();
        for &x in rp.grid().nodes().iter().step_by(37) {
            assert!((k.cdf(x, 0.0).unwrap() - 1.0).abs() < 1e-10);
            assert!((k.mass(-x, -1.0, x).unwrap() - 1.0).abs() < 1e-10);
            assert_eq!(k.cdf(x, -x - 1e-12).unwrap(), 0.0);
        }
    }

    #[test]
    fn sampler_matches_cdf() {
        let rp = brownian_q1();
        let k = ExtremaKernel::new(&rp, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &x in &[1.5, -0.7] {
            let mut s: Vec<f64> = (0..100_000)
                .map(|_| k.sample(x, &mut rng).unwrap())
                .collect();
            let ks = ks_distance(&mut s, |y| k.cdf(x, y).unwrap());
            assert!(ks < 0.02, "x={x} ks={ks}");
        }
    }

    #[test]
    fn paths_alternate_and_contract() {
        let g = Grid::nested(1024, 10.0).unwrap();
        let rp = stable_renewal(&StableParams::cauchy(), &g).unwrap();
        let k = ExtremaKernel::new(&rp, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(k.simulate(InitialLaw::Up, 10, None, &mut rng).is_err());
        for law in [InitialLaw::Up, InitialLaw::Down] {
            for _ in 0..200 {
                let p = simulate_chain(&k, law, 40, Some(2.0), &mut rng).unwrap();
                assert!(p.is_consistent());
                assert!(p.states[0].abs() <= 2.0);
                assert_eq!(p.states[0] >= 0.0, law == InitialLaw::Up);
            }
        }
    }

    #[test]
    fn tau_is_last_exit() {
        let p = ChainPath {
            states: vec![3.0, -2.0, 1.0, -0.5],
            absorbed: false,
        };
        assert_eq!(p.tau(1.0), 3);
        assert_eq!(p.tau(1.5), 2);
        assert_eq!(p.tau(2.0), 1);
        assert_eq!(p.tau(5.0), 0);
    }

    #[test]
    fn sum_of_extrema_has_the_right_transform() {
        // Q↑(e^{-F}) / H(∞) = ψ_q(0)/ψ_q(1) = 1/2 for Brownian motion at q = 1
        let rp = brownian_q1();
        let k = ExtremaKernel::new(&rp, 1.0).unwrap();
        let paths = simulate_ensemble(&k, InitialLaw::Up, 100_000, 64, None, 7).unwrap();
        let v: Vec<f64> = paths.iter().map(|p| (-p.sum()).exp()).collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sd, "mean={mean} sd={sd}");
    }

    #[test]
    fn ensembles_are_reproducible() {
        let rp = brownian_q1();
        let k = ExtremaKernel::new(&rp, 1.0).unwrap();
        let a = simulate_ensemble(&k, InitialLaw::Down, 5000, 8, None, 9).unwrap();
        let b = simulate_ensemble(&k, InitialLaw::Down, 5000, 8, None, 9).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        write_chains_csv(&mut buf, &a[..2]).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("path,step,state\n0,1,"));
    }

    #[test]
    fn duality_holds_for_brownian() {
        let rp = brownian_q1();
        let k = ExtremaKernel::new(&rp, 1.0).unwrap();
        let r = reversal_duality_check(&k, &DualityConfig::new(200_000, 6.0, 1.0)).unwrap();
        assert!(r.tv < 0.05, "{r:?}");
        assert!(r.marginal_residual < 0.01, "{r:?}");
        assert!(r.initial_law_max_z < 3.0, "{r:?}");
        assert!(r.initial_law_bins >= 8);
    }
}
