//! End-to-end acceptance run: one PASS/FAIL line per criterion, each with
//! its measured value and wall time. Exits nonzero if any criterion fails.

use levyfluct::cli_io::config::RunConfig;
use levyfluct::cli_io::validate::cmd_validate;
use levyfluct::ensemble::{ks_distance, map_ensemble};
use levyfluct::exit_toolkit::{
    amplitude_first_crossing, interval_exit_transform, random_walk_identity_check, ScaleSource,
    StableSource, StepLaw,
};
use levyfluct::extrema_chain::{reversal_duality_check, DualityConfig, ExtremaKernel, InitialLaw};
use levyfluct::fluct_solver::matrix::{asymptotic_diagnostics, det, matrix_from_values};
use levyfluct::fluct_solver::{
    check_rh_jump, solve_spatial, FluctuationGrid, Grid, RenewalPair, Side,
};
use levyfluct::levy_model::{wiener_hopf_factors, LevyModel, StableParams};
use levyfluct::monte_carlo::{
    estimate_exit_interval, estimate_renewal_cp, estimate_resolvent_product,
    estimate_ruin_probability, extract_extrema_chain, simulate_path, Exponents, McSettings,
    SimConfig,
};
use levyfluct::scale_forms::{
    derive_renewal_from_scale, invert_scale_function, spectrally_negative_functions,
};
use levyfluct::stable_forms::{stable_functions, stable_renewal};
use levyfluct::{FluctValues, Result};
use num_complex::Complex64;
use rand::Rng;
use std::time::Instant;

type Verdict = Result<(bool, String)>;

const Z: Complex64 = Complex64::new(0.0, 0.0);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn brownian() -> LevyModel {
    LevyModel::brownian(1.0, 0.0).unwrap()
}

fn cramer_lundberg() -> LevyModel {
    // W₀(x) = 1 - e^{-x/2}/2
    LevyModel::cramer_lundberg(2.0, 1.0, 1.0).unwrap()
}

fn cl_scale(x: f64) -> f64 {
    1.0 - 0.5 * (-0.5 * x).exp()
}

fn wiener_hopf() -> Verdict {
    let cases = [
        (brownian(), 0.0),
        (brownian(), 1.0),
        (LevyModel::stable(1.0, 0.5)?, 0.0),
        (cramer_lundberg(), 0.0),
        (cramer_lundberg(), 1.0),
    ];
    let mut worst = 0.0f64;
    for (m, q) in &cases {
        let wh = wiener_hopf_factors(m, *q)?;
        for k in 0..=100 {
            let z = c(0.0, -10.0 + 0.2 * k as f64);
            worst = worst.max((wh.psi_bar(z)? * wh.psi(z)? - m.evaluate_exponent(z)? - q).norm());
        }
    }
    Ok((
        worst < 1e-10,
        format!("max residual {worst:.2e} over 5 models × 101 points"),
    ))
}

fn scale_inversion() -> Verdict {
    let g = Grid::uniform(100, 5.0)?;
    let rel = |v: f64, e: f64| ((v - e) / e).abs();
    let w1 = invert_scale_function(&brownian(), 1.0, &g)?;
    let eb = g
        .nodes()
        .iter()
        .zip(w1.values())
        .map(|(&x, &v)| rel(v, x.sinh()))
        .fold(0.0, f64::max);
    let w0 = invert_scale_function(&cramer_lundberg(), 0.0, &g)?;
    let ec = g
        .nodes()
        .iter()
        .zip(w0.values())
        .map(|(&x, &v)| rel(v, cl_scale(x)))
        .fold(0.0, f64::max);
    Ok((
        eb < 1e-8 && ec < 1e-6,
        format!("Brownian W₁ vs sinh {eb:.2e}, Cramér-Lundberg W₀ {ec:.2e}"),
    ))
}

/// Error scaled by `max(1, |exact|)`, so it is absolute for bounded values
/// and relative where the functions grow.
fn scaled(s: Option<Complex64>, e: Option<Complex64>) -> f64 {
    match (s, e) {
        (Some(s), Some(e)) => (s - e).norm() / e.norm().max(1.0),
        _ => 0.0,
    }
}

fn abcd(v: &FluctValues) -> [Option<Complex64>; 4] {
    [Some(v.a), Some(v.a_bar), v.b, v.c]
}

const CHECK_X_MAX: f64 = 10.0;

type ClosedForms = Box<dyn Fn(f64, Complex64) -> Result<FluctValues>>;

/// `(renewal pair, closed forms)` for the two solver cases.
fn solver_case(cauchy: bool, n: usize) -> Result<(RenewalPair, ClosedForms)> {
    if cauchy {
        let p = StableParams::cauchy();
        Ok((
            stable_renewal(&p, &Grid::nested(n, 20.0)?)?,
            Box::new(move |x, l| stable_functions(&p, x, l)),
        ))
    } else {
        let rp = RenewalPair::from_fn(Grid::nested(n, 50.0)?, 0.0, 0.0, |x| (x / 2.0, x / 2.0))?;
        let sf = invert_scale_function(&brownian(), 0.0, &Grid::nested(64, 2.0 * CHECK_X_MAX)?)?;
        Ok((
            rp,
            Box::new(move |x, l| spectrally_negative_functions(&sf, x, l)),
        ))
    }
}

fn solved(cauchy: bool, n: usize, lambda: Complex64) -> Result<FluctuationGrid> {
    let (rp, _) = solver_case(cauchy, n)?;
    let model = if cauchy {
        LevyModel::stable(1.0, 0.5)?
    } else {
        brownian()
    };
    FluctuationGrid::solve(&rp, lambda, &wiener_hopf_factors(&model, 0.0)?)
}

fn solver_vs_closed() -> Verdict {
    let cases: Vec<(bool, f64)> = vec![(true, 0.5), (true, 1.0), (true, 2.0), (false, 1.0)];
    let mut worst = 0.0f64;
    let mut order = f64::INFINITY;
    for &(cauchy, l) in &cases {
        let (_, exact) = solver_case(cauchy, 4096)?;
        let fg = solved(cauchy, 4096, c(l, 0.0))?;
        for k in (1..=fg.len()).filter(|&k| fg.x(k) <= CHECK_X_MAX) {
            let (s, e) = (fg.values(k), exact(fg.x(k), c(l, 0.0))?);
            for (a, b) in abcd(&s).into_iter().zip(abcd(&e)) {
                worst = worst.max(scaled(a, b));
            }
        }
        // nested grids: node k of size N is node 2k - 1 of size 2N (node 1 is x_min)
        let grids = [
            fg,
            solved(cauchy, 8192, c(l, 0.0))?,
            solved(cauchy, 16384, c(l, 0.0))?,
        ];
        let gap = |a: &FluctuationGrid, b: &FluctuationGrid| {
            (1..=a.len())
                .filter(|&k| a.x(k) <= CHECK_X_MAX)
                .flat_map(|k| {
                    debug_assert_eq!(a.x(k), b.x(2 * k - 1));
                    let (u, v) = (a.values(k), b.values(2 * k - 1));
                    abcd(&u)
                        .into_iter()
                        .zip(abcd(&v))
                        .map(|(p, q)| scaled(p, q))
                        .collect::<Vec<_>>()
                })
                .fold(0.0, f64::max)
        };
        let (g1, g2) = (gap(&grids[0], &grids[1]), gap(&grids[1], &grids[2]));
        order = order.min((g1 / g2).log2());
    }
    Ok((
        worst < 1e-3 && order >= 1.0,
        format!(
            "sup error {worst:.2e} on x ≤ {CHECK_X_MAX} at N=4096, observed order ≥ {order:.2}"
        ),
    ))
}

fn identities() -> Verdict {
    let p = StableParams::cauchy();
    let sf = invert_scale_function(&brownian(), 1.0, &Grid::nested(64, 5.0)?)?;
    let phi_q = |m: &LevyModel, q: f64, l: Complex64| m.phi(l) + q;
    let lambdas = [c(0.5, 0.0), c(1.0, 2.0), c(-1.0, 0.5), c(0.0, 1.5)];
    let mut closed = 0.0f64;
    for &x in &[0.3, 1.0, 4.0] {
        for &l in &lambdas {
            for v in [
                stable_functions(&p, x, l)?,
                spectrally_negative_functions(&sf, x, l)?,
            ] {
                closed = closed
                    .max(v.identity_residual().unwrap_or(0.0))
                    .max(v.dual_identity_residual().unwrap_or(0.0));
                closed =
                    closed.max((det(&matrix_from_values(&v, Side::for_lambda(l))?) - 1.0).norm());
            }
        }
        for &u in &[-2.0, 0.5, 1.0] {
            let l = c(0.0, u);
            let v = stable_functions(&p, x, l)?;
            closed = closed.max(
                (v.b_bar()? * v.b()?
                    - v.c()? * v.c_bar()?
                    - phi_q(&LevyModel::stable(1.0, 0.5)?, 0.0, l))
                .norm(),
            );
            let v = spectrally_negative_functions(&sf, x, l)?;
            closed = closed.max(
                (v.b_bar()? * v.b()? - v.c()? * v.c_bar()? - phi_q(&brownian(), 1.0, l)).norm(),
            );
        }
    }

    let rp = derive_renewal_from_scale(&invert_scale_function(
        &brownian(),
        1.0,
        &Grid::nested(4096, 40.0)?,
    )?)?;
    let wh = wiener_hopf_factors(&brownian(), 1.0)?;
    let mut solved_r = 0.0f64;
    for &l in &lambdas {
        let fg = FluctuationGrid::solve(&rp, l, &wh)?;
        solved_r = solved_r.max(fg.max_identity_residual().unwrap_or(f64::NAN));
        let k = fg.nearest(1.0);
        solved_r = solved_r.max((det(&matrix_from_values(&fg.values(k), fg.side())?) - 1.0).norm());
    }
    for &u in &[0.5, 1.0, 2.0] {
        let l = c(0.0, u);
        let up = FluctuationGrid::solve_side(&rp, l, Side::Upper, &wh)?;
        let lo = FluctuationGrid::solve_side(&rp, l, Side::Lower, &wh)?;
        let k = up.nearest(1.0);
        let w = lo.b_bar(k).unwrap() * up.b(k).unwrap() - up.c(k).unwrap() * lo.c_bar(k).unwrap();
        solved_r = solved_r.max((w - phi_q(&brownian(), 1.0, l)).norm());
    }

    let (top, bottom) = amplitude_first_crossing(&StableSource(p), 1.7, Z, Z, Z)?;
    let split = (top - 0.5).norm().max((bottom - 0.5).norm());
    let pass = closed < 1e-8 && solved_r < 1e-3 && split < 1e-8;
    Ok((
        pass,
        format!(
            "closed {closed:.2e}, solved {solved_r:.2e}, Cauchy split {:.6}+{:.6}",
            top.re, bottom.re
        ),
    ))
}

fn riemann_hilbert() -> Verdict {
    let model = brownian();
    let sf = invert_scale_function(&model, 1.0, &Grid::nested(4096, 40.0)?)?;
    let at = |l: Complex64| {
        matrix_from_values(
            &spectrally_negative_functions(&sf, 1.0, l)?,
            Side::for_lambda(l),
        )
    };
    let closed = check_rh_jump(at, &model, 1.0, &[0.5, 1.0, 2.0], 1e-2)?
        .iter()
        .map(|r| r.jump)
        .fold(0.0, f64::max);
    let rp = derive_renewal_from_scale(&sf)?;
    let wh = wiener_hopf_factors(&model, 1.0)?;
    let k = rp.grid().cell_of(1.0);
    let at = |l: Complex64| {
        let fg = FluctuationGrid::solve(&rp, l, &wh)?;
        matrix_from_values(&fg.values(k), fg.side())
    };
    let solved = check_rh_jump(at, &model, 1.0, &[0.5, 1.0, 2.0], 1e-2)?
        .iter()
        .map(|r| r.jump)
        .fold(0.0, f64::max);
    let lower = |l: Complex64| {
        matrix_from_values(&spectrally_negative_functions(&sf, 1.0, l)?, Side::Lower)
    };
    let d = asymptotic_diagnostics(lower, &model, 1.0, &[-5.0, -10.0, -20.0])?;
    let monotone = d.windows(2).all(|w| {
        (w[1].m11_ratio - 1.0).norm() < (w[0].m11_ratio - 1.0).norm()
            && (w[1].m22_product - 1.0).norm() < (w[0].m22_product - 1.0).norm()
            && w[1].corner_upper < w[0].corner_upper
    });
    let pass = closed < 1e-4 && solved < 5e-3 && monotone;
    Ok((
        pass,
        format!("jump closed {closed:.2e}, solved {solved:.2e}, diagnostics monotone: {monotone}"),
    ))
}

fn exit_laws() -> Verdict {
    let s = McSettings::new(100_000, 11, SimConfig::with_dt(1e-4).horizon(100.0));
    let e = estimate_exit_interval(&brownian(), 0.0, 1.0, 2.0, Exponents::zero(), &s)?;
    let mc = e.p_top.mean;

    let sf = invert_scale_function(&brownian(), 0.0, &Grid::nested(512, 3.0)?)?;
    let smg = solve_spatial(&derive_renewal_from_scale(&sf)?, 2048, 3.0)?;
    let (top, bottom) = interval_exit_transform(&smg, &ScaleSource(&sf), 1.0, 2.0, Z, Z, Z)?;

    let cl = estimate_exit_interval(
        &cramer_lundberg(),
        0.0,
        1.0,
        1.0,
        Exponents::zero(),
        &McSettings::new(100_000, 12, SimConfig::default().horizon(1e3)),
    )?;
    let target = cl_scale(1.0) / cl_scale(2.0);
    let pass = (mc - 2.0 / 3.0).abs() < 0.01
        && (top.re - 2.0 / 3.0).abs() < 2e-3
        && (top.re + bottom.re - 1.0).abs() < 2e-3
        && cl.p_top.within_sigmas(target, 3.0);
    Ok((
        pass,
        format!(
            "Brownian MC {mc:.4} ± {:.4}, transform {:.5}; Cramér-Lundberg {:.5} ± {:.5} vs {target:.5}",
            e.p_top.std_err, top.re, cl.p_top.mean, cl.p_top.std_err
        ),
    ))
}

fn ruin() -> Verdict {
    let e = estimate_ruin_probability(
        &cramer_lundberg(),
        1.0,
        &McSettings::new(100_000, 13, SimConfig::default().horizon(1e3)),
    )?;
    let target = 0.5 * (-0.5f64).exp();
    Ok((
        e.within_sigmas(target, 3.0),
        format!("{:.5} ± {:.5} vs {target:.5}", e.mean, e.std_err),
    ))
}

fn extrema_chains() -> Verdict {
    let model = cramer_lundberg();
    let grid = Grid::nested(512, 30.0)?;
    let rp = estimate_renewal_cp(
        &model,
        1.0,
        &grid,
        &McSettings::new(100_000, 14, SimConfig::default()),
    )?
    .renewal()?;
    let k = ExtremaKernel::new(&rp, 1.0)?;
    let chains = map_ensemble(100_000, 15, |rng| {
        let pr = simulate_path(&model, 1.0, &SimConfig::default(), rng).expect("exact model");
        (
            extract_extrema_chain(&pr).expect("killed path"),
            rng.random::<f64>(),
        )
    });
    let mut z1: Vec<f64> = chains
        .iter()
        .filter_map(|(ch, _)| ch.states.first().copied())
        .collect();
    let ks_z1 = ks_distance(&mut z1, |y| {
        k.initial_cdf(InitialLaw::Up, y, None).unwrap_or(f64::NAN)
    });
    let mut u: Vec<f64> = chains
        .iter()
        .filter(|(ch, _)| ch.states.first().is_some_and(|&z| z <= grid.x_max()))
        .map(|(ch, v)| {
            k.pit(ch.states[0], ch.states.get(1).copied().unwrap_or(0.0), *v)
                .unwrap_or(f64::NAN)
        })
        .collect();
    let ks_step = ks_distance(&mut u, |p| p.clamp(0.0, 1.0));

    let b = derive_renewal_from_scale(&invert_scale_function(
        &brownian(),
        1.0,
        &Grid::nested(4096, 20.0)?,
    )?)?;
    let r = reversal_duality_check(
        &ExtremaKernel::new(&b, 1.0)?,
        &DualityConfig::new(1_000_000, 6.0, 1.0),
    )?;
    let pass = ks_z1 < 0.05 && ks_step < 0.05 && r.tv < 0.05;
    Ok((
        pass,
        format!(
            "KS Z₁ {ks_z1:.4}, KS step {ks_step:.4}, duality TV {:.4}",
            r.tv
        ),
    ))
}

fn resolvent() -> Verdict {
    let s = McSettings::new(100_000, 16, SimConfig::with_dt(1e-4));
    let e = estimate_resolvent_product(&brownian(), 1.0, 1.0, Z, Z, &s)?;
    let target = 0.5f64.tanh().powi(2);
    Ok((
        e.re.within_sigmas(target, 3.0),
        format!("{:.5} ± {:.5} vs {target:.5}", e.re.mean, e.re.std_err),
    ))
}

fn random_walk() -> Verdict {
    let simple = random_walk_identity_check(&StepLaw::two_point(0.5)?, 2, 0.5, &[0.0], 40, None)?;
    let asym =
        random_walk_identity_check(&StepLaw::two_point(0.3)?, 3, 0.9, &[0.0, 1.0], 200, None)?;
    let pass = simple.passes() && simple.max_residual < 2.0 * 0.5f64.powi(40) && asym.passes();
    Ok((
        pass,
        format!(
            "simple {:.1e} (bound {:.1e}), asymmetric {:.1e} (bound {:.1e})",
            simple.max_residual, simple.truncation_bound, asym.max_residual, asym.truncation_bound
        ),
    ))
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(levyfluct::FluctError::Io)?;
    let mut cfg = RunConfig {
        q: vec![1.0],
        ..RunConfig::default()
    };
    cfg.grid.n = 1024;
    cfg.mc.enabled = true;
    cfg.mc.paths = 2000;
    cfg.mc.seed = 7;
    cfg.mc.interval = Some([1.0, 1.0]);
    let model = cfg.validate()?;
    let read = |name: &str| -> Result<Vec<u8>> {
        let o = cmd_validate(&model, &cfg, &dir.path().join(name))?;
        Ok(std::fs::read(&o.files[0])?)
    };
    let (a, b) = (read("a")?, read("b")?);
    Ok((a == b, format!("{} bytes, identical: {}", a.len(), a == b)))
}

type Criterion = (&'static str, f64, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 11] = [
        ("Wiener-Hopf identity", 1.0, wiener_hopf),
        ("scale function inversion", 5.0, scale_inversion),
        ("solver vs closed forms", 30.0, solver_vs_closed),
        ("algebraic identities", 5.0, identities),
        ("Riemann-Hilbert jump", 10.0, riemann_hilbert),
        ("exit laws", 120.0, exit_laws),
        ("Cramér-Lundberg ruin", 60.0, ruin),
        ("extrema chains", 180.0, extrema_chains),
        ("resolvent functional", 120.0, resolvent),
        ("random-walk identity", 30.0, random_walk),
        ("determinism", f64::INFINITY, determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let verdict = f();
        let secs = t.elapsed().as_secs_f64();
        let (pass, detail) = match verdict {
            Ok((p, d)) => (p && secs <= *budget, d),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget = if budget.is_finite() {
            format!(" (budget {budget} s)")
        } else {
            String::new()
        };
        println!(
            "{} {:>2} {name}: {detail}; {secs:.2} s{budget}",
            if pass { "PASS" } else { "FAIL" },
            i + 1
        );
        failed += usize::from(!pass);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
