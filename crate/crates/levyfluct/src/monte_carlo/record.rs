//! Single killed paths with their extrema.

use super::path::{kill_time, validate, walk, Flow, Running, SimConfig};
use crate::error::{invalid, Result};
use crate::extrema_chain::ChainPath;
use crate::levy_model::{LevyModel, ModelKind};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::io::Write;

/// Path value around time `t`: `pre = X_{t-}`, `post = X_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Knot {
    pub t: f64,
    pub pre: f64,
    pub post: f64,
}

/// One path observed up to its kill time `ζ` (or the horizon).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub model: ModelKind,
    pub q: f64,
    /// `ζ`; equals the horizon when the path was cut rather than killed.
    pub kill_time: f64,
    pub killed: bool,
    /// Piece ends; straight between knots for exact models.
    pub knots: Vec<Knot>,
    /// `X_{ζ-}`.
    pub final_value: f64,
    pub max: f64,
    pub min: f64,
    /// First time the minimum is attained.
    pub rho: f64,
    /// Last time the maximum is attained.
    pub sigma: f64,
}

impl PathRecord {
    /// Values in time order, left limits before values at each knot.
    fn values(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.knots
            .iter()
            .flat_map(|k| [(k.t, k.pre), (k.t, k.post)])
    }

    /// `(t, S_t)` at every knot.
    pub fn running_max(&self) -> Vec<(f64, f64)> {
        let mut s = f64::NEG_INFINITY;
        self.knots
            .iter()
            .map(|k| {
                s = s.max(k.pre).max(k.post);
                (k.t, s)
            })
            .collect()
    }

    /// `(t, I_t)` at every knot.
    pub fn running_min(&self) -> Vec<(f64, f64)> {
        let mut i = f64::INFINITY;
        self.knots
            .iter()
            .map(|k| {
                i = i.min(k.pre).min(k.post);
                (k.t, i)
            })
            .collect()
    }

    /// `m ≤ F ≤ M` and `ρ, σ ≤ ζ`.
    pub fn is_consistent(&self) -> bool {
        self.min <= self.final_value
            && self.final_value <= self.max
            && self.rho <= self.kill_time
            && self.sigma <= self.kill_time
    }

    /// `path,t,x` rows, one per left limit and value.
    pub fn write_csv<W: Write>(&self, out: &mut W, id: usize) -> Result<()> {
        for (t, x) in self.values() {
            writeln!(out, "{id},{t:e},{x:e}")?;
        }
        Ok(())
    }
}

/// Simulates one path killed at an independent `Exp(q)` time.
pub fn simulate_path(
    model: &LevyModel,
    q: f64,
    cfg: &SimConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PathRecord> {
    validate(model, cfg)?;
    let kill = kill_time(q, cfg, rng)?;
    let mut knots = vec![Knot {
        t: 0.0,
        pre: 0.0,
        post: 0.0,
    }];
    let mut run = Running::new();
    let end = walk(model, cfg, kill, rng, |p| {
        run.update(p);
        knots.push(Knot {
            t: p.t1,
            pre: p.x1,
            post: p.after,
        });
        Flow::Continue
    });
    // the kill removes the jump scheduled at ζ, if any
    let last = knots.last_mut().expect("nonempty");
    last.post = last.pre;
    let f = last.pre;
    let (mut max, mut min) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in &knots {
        max = max.max(k.pre).max(k.post);
        min = min.min(k.pre).min(k.post);
    }
    let sigma = knots
        .iter()
        .rev()
        .find(|k| k.pre == max || k.post == max)
        .map_or(0.0, |k| k.t);
    let rho = knots
        .iter()
        .find(|k| k.pre == min || k.post == min)
        .map_or(0.0, |k| k.t);
    Ok(PathRecord {
        model: model.kind(),
        q,
        kill_time: end.t,
        killed: end.killed,
        knots,
        final_value: f,
        // bridge extrema inside steps only move the values, not the times
        max: max.max(run.s),
        min: min.min(run.i),
        rho,
        sigma,
    })
}

/// Successive extrema `Z₁ = M₁ - m, Z₂ = m₂ - M₁, …` of the path after
/// its first minimum. Grid paths use their knot values only.
///
/// The chain is empty, and flagged absorbed, when the path never moves
/// above its minimum afterwards.
pub fn extract_extrema_chain(pr: &PathRecord) -> Result<ChainPath> {
    if pr.q <= 0.0 {
        return invalid("extrema chains are extracted from killed paths (q > 0)");
    }
    let v: Vec<f64> = pr.values().map(|(_, x)| x).collect();
    let n = v.len();
    let start = (0..n)
        .min_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)))
        .expect("nonempty");
    // suffix argmax (last attainment) and argmin (first attainment)
    let mut arg_max = vec![0; n];
    let mut arg_min = vec![0; n];
    arg_max[n - 1] = n - 1;
    arg_min[n - 1] = n - 1;
    for i in (0..n - 1).rev() {
        let (j, k) = (arg_max[i + 1], arg_min[i + 1]);
        arg_max[i] = if v[i] > v[j] { i } else { j };
        arg_min[i] = if v[i] <= v[k] { i } else { k };
    }
    let mut states = Vec::new();
    let (mut pos, mut level, mut up) = (start, v[start], true);
    loop {
        let next = if up { arg_max[pos] } else { arg_min[pos] };
        let z = v[next] - level;
        if z == 0.0 {
            break;
        }
        states.push(z);
        (pos, level, up) = (next, v[next], !up);
    }
    Ok(ChainPath {
        states,
        absorbed: true,
    })
}
