//! The `validate` command: every available consistency check against its
//! tolerance, with a deterministic report.

use super::commands::{solve_all, Bundle, Outcome};
use super::config::RunConfig;
use super::output::write_json;
use crate::error::Result;
use crate::exit_toolkit::{interval_exit_transform, FunctionSource};
use crate::fluct_solver::matrix::matrix_from_values;
use crate::fluct_solver::{check_rh_jump, sc_residual, solve_spatial, FluctuationGrid, Side};
use crate::levy_model::LevyModel;
use crate::monte_carlo::{estimate_exit_interval, estimate_max_transform, Exponents};
use crate::values::FluctValues;
use num_complex::Complex64;
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub check: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidateReport {
    pub checks: Vec<Check>,
    pub passed: bool,
}

const XS: [f64; 3] = [0.5, 1.0, 2.0];
const US: [f64; 3] = [0.5, 1.0, 2.0];

/// `B̄B - CC̄ - (φ + q)` on the imaginary axis.
fn wronskian_gap(v: &FluctValues, phi_q: Complex64) -> Result<f64> {
    Ok((v.b_bar()? * v.b()? - v.c()? * v.c_bar()? - phi_q).norm())
}

fn push(out: &mut Vec<Check>, name: String, value: f64, tolerance: f64) {
    // NaN never passes
    let pass = value <= tolerance;
    out.push(Check {
        check: name,
        value,
        tolerance,
        pass,
    });
}

fn max_of(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |m, v| {
        if v.is_nan() || m.is_nan() {
            f64::NAN
        } else {
            m.max(v)
        }
    })
}

fn relative(a: Option<Complex64>, b: Option<Complex64>) -> f64 {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).norm() / b.norm().max(1.0),
        _ => 0.0,
    }
}

fn checks_at(model: &LevyModel, cfg: &RunConfig, i: usize, b: &Bundle) -> Result<Vec<Check>> {
    let tol = &cfg.tolerances;
    let mut out = Vec::new();
    let tag = |name: &str| format!("{name}[q{i}]");
    let xs: Vec<f64> = XS.iter().copied().filter(|&x| x < cfg.grid.x_max).collect();

    if let Some(wh) = &b.wh {
        let r = (0..=100).map(|k| {
            let z = Complex64::new(0.0, -10.0 + 0.2 * k as f64);
            Ok((wh.psi_bar(z)? * wh.psi(z)? - model.evaluate_exponent(z)? - b.q).norm())
        });
        push(
            &mut out,
            tag("wiener_hopf_identity"),
            max_of(r.collect::<Result<Vec<_>>>()?),
            tol.wiener_hopf,
        );
    }

    let lambdas = cfg.lambdas();
    if b.source().is_some() {
        let mut worst = 0.0f64;
        for &x in &xs {
            for &l in &lambdas {
                let v = b.closed_values(x, l)?.expect("closed forms");
                worst = max_of([
                    worst,
                    v.identity_residual().unwrap_or(0.0),
                    v.dual_identity_residual().unwrap_or(0.0),
                ]);
            }
        }
        push(
            &mut out,
            tag("closed_form_identity"),
            worst,
            tol.closed_form,
        );
        if cfg.grid.x_max > 1.0 {
            let at = |l: Complex64| {
                matrix_from_values(
                    &b.closed_values(1.0, l)?.expect("closed forms"),
                    Side::for_lambda(l),
                )
            };
            let r = check_rh_jump(at, model, b.q, &US, 1e-2)?;
            push(
                &mut out,
                tag("closed_form_rh_jump"),
                max_of(r.iter().map(|r| r.jump)),
                tol.jump_closed,
            );
            let w = US
                .iter()
                .map(|&u| {
                    let l = Complex64::new(0.0, u);
                    wronskian_gap(
                        &b.closed_values(1.0, l)?.expect("closed forms"),
                        model.phi(l) + b.q,
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            push(
                &mut out,
                tag("closed_form_wronskian"),
                max_of(w),
                tol.wronskian,
            );
        }
    }

    let solved: Vec<Vec<FluctuationGrid>> = lambdas.iter().map(|&l| solve_all(b, l)).collect();
    let backward: Vec<&FluctuationGrid> = solved
        .iter()
        .flatten()
        .filter(|g| g.truncation().is_some())
        .collect();
    if !backward.is_empty() {
        let r = max_of(
            backward
                .iter()
                .map(|g| g.max_identity_residual().unwrap_or(f64::NAN)),
        );
        push(&mut out, tag("solver_identity"), r, tol.solver);
        let sc = backward
            .iter()
            .map(|g| Ok(max_of(sc_residual(g)?)))
            .collect::<Result<Vec<_>>>()?;
        push(&mut out, tag("sc_residual"), max_of(sc), tol.solver);
    }
    if b.source().is_some() {
        let mut worst = 0.0f64;
        for g in solved.iter().flatten() {
            for &x in &xs {
                let k = g.nearest(x);
                let (s, c) = (
                    g.values(k),
                    b.closed_values(g.x(k), g.lambda())?.expect("closed forms"),
                );
                worst = max_of([
                    worst,
                    relative(Some(s.a), Some(c.a)),
                    relative(Some(s.a_bar), Some(c.a_bar)),
                    relative(s.b, c.b),
                    relative(s.c, c.c),
                    relative(s.b_bar, c.b_bar),
                    relative(s.c_bar, c.c_bar),
                ]);
            }
        }
        push(&mut out, tag("solver_vs_closed"), worst, tol.solver);
    }
    if let (Some(wh), true) = (&b.wh, b.q > 0.0 && cfg.grid.x_max > 1.0) {
        let k = b.rp.grid().cell_of(1.0);
        let at = |l: Complex64| {
            let fg = FluctuationGrid::solve(&b.rp, l, wh)?;
            matrix_from_values(&fg.values(k), fg.side())
        };
        let r = check_rh_jump(at, model, b.q, &US, 1e-2)?;
        push(
            &mut out,
            tag("solved_rh_jump"),
            max_of(r.iter().map(|r| r.jump)),
            tol.jump_solved,
        );
        let w = US
            .iter()
            .map(|&u| {
                let l = Complex64::new(0.0, u);
                let up = FluctuationGrid::solve_side(&b.rp, l, Side::Upper, wh)?.values(k);
                let lo = FluctuationGrid::solve_side(&b.rp, l, Side::Lower, wh)?.values(k);
                let v = FluctValues {
                    b_bar: lo.b_bar,
                    c_bar: lo.c_bar,
                    ..up
                };
                wronskian_gap(&v, model.phi(l) + b.q)
            })
            .collect::<Result<Vec<_>>>()?;
        push(&mut out, tag("solved_wronskian"), max_of(w), tol.solver);
    }

    if cfg.mc.enabled {
        let s = cfg.mc.settings();
        if let (Some(wh), true) = (&b.wh, b.q > 0.0) {
            let one = Complex64::new(1.0, 0.0);
            let exact = (wh.psi(Complex64::new(0.0, 0.0))? / wh.psi(one)?).re;
            let e = estimate_max_transform(model, b.q, 1.0, &s)?;
            push(
                &mut out,
                tag("mc_max_transform_sigmas"),
                e.z_score(exact).abs(),
                tol.mc_sigmas,
            );
        }
        if let (Some([lo, hi]), Some(src)) = (cfg.mc.interval, b.source()) {
            let smg = solve_spatial(&b.rp, cfg.grid.spatial_cells, lo + hi)?;
            let z = Complex64::new(0.0, 0.0);
            let (top, _) = interval_exit_transform(
                &smg,
                src.as_ref() as &dyn FunctionSource,
                lo,
                hi,
                z,
                z,
                z,
            )?;
            let e = estimate_exit_interval(model, b.q, lo, hi, Exponents::zero(), &s)?;
            // the transform's discretisation error is added to the sampling error
            let excess = ((e.top.re.mean - top.re).abs() - tol.solver).max(0.0);
            push(
                &mut out,
                tag("mc_interval_exit_sigmas"),
                excess / e.top.re.std_err.max(f64::MIN_POSITIVE),
                tol.mc_sigmas,
            );
        }
    }
    Ok(out)
}

pub fn cmd_validate(model: &LevyModel, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let mut checks = Vec::new();
    for (i, &q) in cfg.q.iter().enumerate() {
        let b = Bundle::build(model, q, cfg)?;
        checks.extend(checks_at(model, cfg, i, &b)?);
    }
    let failures: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{}: {:e} exceeds {:e}", c.check, c.value, c.tolerance))
        .collect();
    let report = ValidateReport {
        passed: failures.is_empty(),
        checks,
    };
    let files = vec![write_json(out, "validate.json", "validate", cfg, &report)?];
    Ok(Outcome { files, failures })
}
