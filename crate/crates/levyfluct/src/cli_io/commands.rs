//! The subcommands. Each composes library calls and writes its artifacts.

use super::config::RunConfig;
use super::output::{complex_cells, write_json, Cell, Table};
use crate::ensemble::{chunk_rng, Estimate};
use crate::error::{FluctError, Result};
use crate::exit_toolkit::{
    evaluate, ExitKind, ExitQuery, ExitValue, FunctionSource, ScaleSource, StableSource,
};
use crate::fluct_solver::{sc_residual, solve_spatial, FluctuationGrid, Grid, RenewalPair, Side};
use crate::levy_model::{wiener_hopf_factors, LevyModel, StableParams, WienerHopfPair};
use crate::monte_carlo::{
    estimate_amplitude_crossing, estimate_exit_interval, estimate_max_transform,
    estimate_reflected_exit, estimate_renewal_cp, estimate_resolvent_product, is_exact,
    simulate_path, ComplexEstimate, ExitEstimate, Exponents, Reflection,
};
use crate::scale_forms::{
    derive_renewal_from_scale, invert_scale_function, spectrally_negative_functions, ScaleFunction,
};
use crate::stable_forms::{stable_functions, stable_renewal};
use crate::values::FluctValues;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};

/// Files written and failed checks.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub failures: Vec<String>,
}

/// Closed forms available for a model.
pub(crate) enum Closed {
    Scale(ScaleFunction),
    Stable(StableParams),
    None,
}

/// Renewal data, factors and closed forms at one killing rate.
pub(crate) struct Bundle {
    pub q: f64,
    pub rp: RenewalPair,
    pub wh: Option<WienerHopfPair>,
    pub closed: Closed,
}

impl Bundle {
    pub fn build(model: &LevyModel, q: f64, cfg: &RunConfig) -> Result<Self> {
        let grid = cfg.grid()?;
        if let Some(p) = model.stable_params() {
            return Ok(Self {
                q,
                rp: stable_renewal(&p, &grid)?,
                wh: Some(wiener_hopf_factors(model, q)?),
                closed: Closed::Stable(p),
            });
        }
        if model.is_spectrally_negative() {
            let sf = invert_scale_function(model, q, &grid)?;
            return Ok(Self {
                q,
                rp: derive_renewal_from_scale(&sf)?,
                wh: Some(wiener_hopf_factors(model, q)?),
                closed: Closed::Scale(sf),
            });
        }
        if is_exact(model) && model.drift() >= 0.0 {
            let est = estimate_renewal_cp(model, q, &grid, &cfg.mc.settings())?;
            return Ok(Self {
                q,
                rp: est.renewal()?,
                wh: None,
                closed: Closed::None,
            });
        }
        Err(FluctError::Unsupported(format!(
            "no renewal data for a {:?} model",
            model.kind()
        )))
    }

    pub fn source(&self) -> Option<Box<dyn FunctionSource + '_>> {
        match &self.closed {
            Closed::Scale(sf) => Some(Box::new(ScaleSource(sf))),
            Closed::Stable(p) => Some(Box::new(StableSource(*p))),
            Closed::None => None,
        }
    }

    pub fn closed_values(&self, x: f64, lambda: Complex64) -> Result<Option<FluctValues>> {
        self.closed.values(x, lambda)
    }
}

impl Closed {
    pub fn for_model(model: &LevyModel, q: f64, grid: &Grid) -> Result<Self> {
        match model.stable_params() {
            Some(p) => Ok(Closed::Stable(p)),
            None if model.is_spectrally_negative() => {
                Ok(Closed::Scale(invert_scale_function(model, q, grid)?))
            }
            None => Ok(Closed::None),
        }
    }

    pub fn values(&self, x: f64, lambda: Complex64) -> Result<Option<FluctValues>> {
        Ok(match self {
            Closed::Scale(sf) => Some(spectrally_negative_functions(sf, x, lambda)?),
            Closed::Stable(p) => Some(stable_functions(p, x, lambda)?),
            Closed::None => None,
        })
    }
}

fn qtag(i: usize) -> String {
    format!("q{i}")
}

/// The grids of one `(q, λ)`: every side whose backward solution is valid,
/// or the forward part alone when neither is.
pub(crate) fn solve_all(b: &Bundle, lambda: Complex64) -> Vec<FluctuationGrid> {
    let sides: &[Side] = if lambda.re > 0.0 {
        &[Side::Upper]
    } else if lambda.re < 0.0 {
        &[Side::Lower]
    } else {
        &[Side::Upper, Side::Lower]
    };
    let solved: Vec<FluctuationGrid> = match &b.wh {
        Some(wh) => sides
            .iter()
            .filter_map(|&s| FluctuationGrid::solve_side(&b.rp, lambda, s, wh).ok())
            .collect(),
        None => Vec::new(),
    };
    if solved.is_empty() {
        vec![FluctuationGrid::forward(
            &b.rp,
            b.q,
            lambda,
            Side::for_lambda(lambda),
        )]
    } else {
        solved
    }
}

fn merged_values(grids: &[FluctuationGrid], k: usize) -> FluctValues {
    let mut v = grids[0].values(k);
    for g in &grids[1..] {
        let w = g.values(k);
        v.b = v.b.or(w.b);
        v.c = v.c.or(w.c);
        v.b_bar = v.b_bar.or(w.b_bar);
        v.c_bar = v.c_bar.or(w.c_bar);
    }
    v
}

const SIX: [&str; 12] = [
    "re_a", "im_a", "re_a_bar", "im_a_bar", "re_b", "im_b", "re_c", "im_c", "re_b_bar", "im_b_bar",
    "re_c_bar", "im_c_bar",
];

fn six_cells(v: &FluctValues) -> Vec<Cell> {
    [Some(v.a), Some(v.a_bar), v.b, v.c, v.b_bar, v.c_bar]
        .into_iter()
        .flat_map(complex_cells)
        .collect()
}

pub fn cmd_factors(model: &LevyModel, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let mut t = Table::new(&[
        "q",
        "u",
        "re_phi",
        "im_phi",
        "re_psi_bar",
        "im_psi_bar",
        "re_psi",
        "im_psi",
        "residual",
    ]);
    for &q in &cfg.q {
        let wh = wiener_hopf_factors(model, q)?;
        for k in 0..=100 {
            let u = -10.0 + 0.2 * k as f64;
            let z = Complex64::new(0.0, u);
            let (phi, pb, p) = (model.evaluate_exponent(z)?, wh.psi_bar(z)?, wh.psi(z)?);
            let r = (pb * p - phi - q).norm();
            let mut row = vec![Cell::Real(q), Cell::Real(u)];
            row.extend(
                [phi, pb, p]
                    .into_iter()
                    .flat_map(|z| complex_cells(Some(z))),
            );
            row.push(Cell::Real(r));
            t.push(row);
        }
    }
    Ok(Outcome {
        files: vec![t.write(out, "factors.csv", "factors", cfg)?],
        failures: vec![],
    })
}

pub fn cmd_scale(model: &LevyModel, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    if !model.is_spectrally_negative() {
        return Err(FluctError::Unsupported(
            "scale functions exist for spectrally negative models only".into(),
        ));
    }
    let grid = cfg.grid()?;
    let mut files = Vec::new();
    for (i, &q) in cfg.q.iter().enumerate() {
        let sf = invert_scale_function(model, q, &grid)?;
        let mut t = Table::new(&["x", "w_scale", "w_density"]);
        for (k, &x) in grid.nodes().iter().enumerate() {
            t.push(vec![
                Cell::Real(x),
                Cell::Real(sf.values()[k]),
                Cell::Real(sf.densities()[k]),
            ]);
        }
        files.push(t.write(out, &format!("scale_{}.csv", qtag(i)), "scale", cfg)?);
    }
    Ok(Outcome {
        files,
        failures: vec![],
    })
}

pub fn cmd_closed_forms(model: &LevyModel, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let grid = cfg.grid()?;
    let n = cfg.grid.table_points;
    let xs: Vec<f64> = (1..=n)
        .map(|k| cfg.grid.x_max * k as f64 / n as f64)
        .collect();
    let mut files = Vec::new();
    for (i, &q) in cfg.q.iter().enumerate() {
        let closed = Closed::for_model(model, q, &grid)?;
        if matches!(closed, Closed::None) {
            return Err(FluctError::Unsupported(
                "closed forms exist for stable and spectrally negative models".into(),
            ));
        }
        for (j, &lambda) in cfg.lambdas().iter().enumerate() {
            let rows: Vec<Result<Vec<Cell>>> = xs
                .par_iter()
                .map(|&x| {
                    let v = closed.values(x, lambda)?.expect("closed forms");
                    let mut row = vec![Cell::Real(x)];
                    row.extend(six_cells(&v));
                    Ok(row)
                })
                .collect();
            let mut t = Table::new(&std::iter::once("x").chain(SIX).collect::<Vec<_>>());
            for r in rows {
                t.push(r?);
            }
            files.push(t.write(
                out,
                &format!("closed_forms_{}_l{j}.csv", qtag(i)),
                "closed-forms",
                cfg,
            )?);
        }
    }
    Ok(Outcome {
        files,
        failures: vec![],
    })
}

#[derive(Debug, Clone, Serialize)]
struct SolveReportRow {
    q: f64,
    lambda: Complex64,
    sides: Vec<Side>,
    max_identity_residual: Option<f64>,
    max_sc_residual: Option<f64>,
    truncation: Option<f64>,
    truncation_warning: bool,
}

pub fn cmd_solve(model: &LevyModel, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let mut files = Vec::new();
    let mut report = Vec::new();
    for (i, &q) in cfg.q.iter().enumerate() {
        let b = Bundle::build(model, q, cfg)?;
        let lambdas = cfg.lambdas();
        let solved: Vec<Vec<FluctuationGrid>> =
            lambdas.par_iter().map(|&l| solve_all(&b, l)).collect();
        for (j, grids) in solved.iter().enumerate() {
            let mut cols = vec!["x", "h", "h_bar"];
            cols.extend(SIX);
            let mut t = Table::new(&cols);
            let (h, hb) = (b.rp.h(), b.rp.hbar());
            for k in 1..=grids[0].len() {
                let mut row = vec![
                    Cell::Real(grids[0].x(k)),
                    Cell::Real(h[k]),
                    Cell::Real(hb[k]),
                ];
                row.extend(six_cells(&merged_values(grids, k)));
                t.push(row);
            }
            files.push(t.write(out, &format!("solve_{}_l{j}.csv", qtag(i)), "solve", cfg)?);
            let backward: Vec<&FluctuationGrid> =
                grids.iter().filter(|g| g.truncation().is_some()).collect();
            let fold = |v: Vec<Option<f64>>| {
                v.into_iter().try_fold(None::<f64>, |m, r| {
                    r.map(|r| Some(m.map_or(r, |m| m.max(r))))
                })
            };
            let sc: Vec<Option<f64>> = backward
                .iter()
                .map(|g| {
                    sc_residual(g)
                        .ok()
                        .map(|r| r.into_iter().fold(0.0, f64::max))
                })
                .collect();
            report.push(SolveReportRow {
                q,
                lambda: lambdas[j],
                sides: backward.iter().map(|g| g.side()).collect(),
                max_identity_residual: fold(
                    backward.iter().map(|g| g.max_identity_residual()).collect(),
                )
                .flatten(),
                max_sc_residual: fold(sc).flatten(),
                truncation: backward
                    .iter()
                    .filter_map(|g| g.truncation())
                    .reduce(f64::max),
                truncation_warning: backward.iter().any(|g| g.truncation_warning()),
            });
        }
    }
    files.push(write_json(out, "solve_report.json", "solve", cfg, &report)?);
    Ok(Outcome {
        files,
        failures: vec![],
    })
}

#[derive(Debug, Clone, Serialize)]
struct McRow {
    q: f64,
    /// `E[e^{-M}]`.
    max_transform: Option<Estimate>,
    ruin: Option<Estimate>,
    exit: Option<ExitEstimate>,
    resolvent: Option<ComplexEstimate>,
}

pub fn cmd_mc(model: &LevyModel, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let s = cfg.mc.settings();
    let z = Complex64::new(0.0, 0.0);
    let mut files = Vec::new();
    let mut rows = Vec::new();
    for (i, &q) in cfg.q.iter().enumerate() {
        let killed = q > 0.0 || s.sim.horizon.is_some();
        let max_transform = if killed {
            Some(estimate_max_transform(model, q, 1.0, &s)?)
        } else {
            None
        };
        let ruin = match cfg.mc.ruin_level {
            Some(level) if q == 0.0 => Some(crate::monte_carlo::estimate_ruin_probability(
                model, level, &s,
            )?),
            _ => None,
        };
        let exit = match cfg.mc.interval {
            Some([a, b]) => Some(estimate_exit_interval(
                model,
                q,
                a,
                b,
                Exponents::zero(),
                &s,
            )?),
            None => None,
        };
        let resolvent = match cfg.mc.resolvent_x {
            Some(x) => Some(estimate_resolvent_product(model, q, x, z, z, &s)?),
            None => None,
        };
        rows.push(McRow {
            q,
            max_transform,
            ruin,
            exit,
            resolvent,
        });
        if is_exact(model) && model.drift() >= 0.0 && killed {
            let grid = cfg.grid()?;
            let est = estimate_renewal_cp(model, q, &grid, &s)?;
            let mut t = Table::new(&["x", "h", "h_se", "h_bar", "h_bar_se", "h_sup", "h_sup_se"]);
            for k in 0..=grid.len() {
                let e = [est.h[k], est.hbar[k], est.h_sup[k]];
                let mut row = vec![Cell::Real(grid.node(k))];
                row.extend(
                    e.iter()
                        .flat_map(|e| [Cell::Real(e.mean), Cell::Real(e.std_err)]),
                );
                t.push(row);
            }
            files.push(t.write(out, &format!("mc_renewal_{}.csv", qtag(i)), "mc", cfg)?);
        }
        if cfg.mc.export_paths > 0 && killed {
            let mut rng = chunk_rng(s.seed, 0);
            let mut t = Table::new(&["path", "t", "x"]);
            for id in 0..cfg.mc.export_paths {
                let pr = simulate_path(model, q, &s.sim, &mut rng)?;
                for k in &pr.knots {
                    if k.pre != k.post {
                        t.push(vec![
                            Cell::Int(id as i64),
                            Cell::Real(k.t),
                            Cell::Real(k.pre),
                        ]);
                    }
                    t.push(vec![
                        Cell::Int(id as i64),
                        Cell::Real(k.t),
                        Cell::Real(k.post),
                    ]);
                }
            }
            files.push(t.write(out, &format!("mc_paths_{}.csv", qtag(i)), "mc", cfg)?);
        }
    }
    files.push(write_json(out, "mc_summary.json", "mc", cfg, &rows)?);
    Ok(Outcome {
        files,
        failures: vec![],
    })
}

#[derive(Debug, Clone, Serialize)]
struct McExit {
    top: ComplexEstimate,
    bottom: Option<ComplexEstimate>,
}

#[derive(Debug, Clone, Serialize)]
struct ExitRow {
    query: ExitQuery,
    value: ExitValue,
    /// Closed-form probability where one is known.
    oracle: Option<f64>,
    mc: Option<McExit>,
}

fn default_queries(q: f64) -> Vec<ExitQuery> {
    [
        ExitKind::ReflectedTop { x: 1.0 },
        ExitKind::ReflectedBottom { x: 1.0 },
        ExitKind::AmplitudeFirst { x: 1.0 },
        ExitKind::Interval { a: 1.0, b: 1.0 },
    ]
    .into_iter()
    .map(|k| ExitQuery::new(k, q))
    .collect()
}

fn mc_exit(model: &LevyModel, cfg: &RunConfig, query: &ExitQuery) -> Result<McExit> {
    let s = cfg.mc.settings();
    let ex = Exponents {
        lambda: query.lambda,
        mu1: query.mu1,
        mu2: query.mu2,
    };
    let q = query.q;
    Ok(match query.kind {
        ExitKind::ReflectedTop { x } => McExit {
            top: estimate_reflected_exit(model, q, x, Reflection::FromMax, ex, &s)?,
            bottom: None,
        },
        ExitKind::ReflectedBottom { x } => McExit {
            top: estimate_reflected_exit(model, q, x, Reflection::FromMin, ex, &s)?,
            bottom: None,
        },
        ExitKind::AmplitudeFirst { x } => {
            let e = estimate_amplitude_crossing(model, q, x, ex, &s)?;
            McExit {
                top: e.top,
                bottom: Some(e.bottom),
            }
        }
        ExitKind::Interval { a, b } => {
            let e = estimate_exit_interval(model, q, a, b, ex, &s)?;
            McExit {
                top: e.top,
                bottom: Some(e.bottom),
            }
        }
    })
}

pub fn cmd_exit(model: &LevyModel, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let queries = if cfg.exit.is_empty() {
        default_queries(cfg.q[0])
    } else {
        cfg.exit.clone()
    };
    let mut rows = Vec::new();
    let mut bundles: Vec<(f64, Bundle)> = Vec::new();
    for query in &queries {
        if !bundles.iter().any(|(q, _)| *q == query.q) {
            bundles.push((query.q, Bundle::build(model, query.q, cfg)?));
        }
        let b = &bundles
            .iter()
            .find(|(q, _)| *q == query.q)
            .expect("built")
            .1;
        let src = b.source().ok_or_else(|| {
            FluctError::Unsupported(
                "exit laws need closed forms (stable or spectrally negative)".into(),
            )
        })?;
        let smg = match query.kind {
            ExitKind::Interval { a, b: bb } => {
                Some(solve_spatial(&b.rp, cfg.grid.spatial_cells, a + bb)?)
            }
            _ => None,
        };
        let value = evaluate(src.as_ref(), smg.as_ref(), query)?;
        let zero = Complex64::new(0.0, 0.0);
        let plain =
            query.lambda == zero && query.mu1 == zero && query.mu2 == zero && query.q == 0.0;
        let oracle = match (&b.closed, query.kind) {
            (Closed::Scale(sf), ExitKind::Interval { a, b }) if plain => {
                Some(sf.scale(b) / sf.scale(a + b))
            }
            _ => None,
        };
        let mc = if cfg.mc.enabled {
            Some(mc_exit(model, cfg, query)?)
        } else {
            None
        };
        rows.push(ExitRow {
            query: *query,
            value,
            oracle,
            mc,
        });
    }
    let files = vec![write_json(out, "exit_law.json", "exit-law", cfg, &rows)?];
    Ok(Outcome {
        files,
        failures: vec![],
    })
}
