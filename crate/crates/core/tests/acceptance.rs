//! Acceptance criteria 1–10, one PASS/FAIL line each.

use std::f64::consts::{E, FRAC_PI_8, PI};
use std::time::{Duration, Instant};

use cusplab::angular_model::{integral_residual, transport_table, AngularDensity};
use cusplab::bounds_lab::{
    choose_parameters, closed_form, decay_f, iterate_f, stirling_bound, BoundParams, GridFunction,
};
use cusplab::diagnostics::{
    corner_angle, decomposition_residual, f_of, yudovich_bounds, FlowField, HalfAngle,
};
use cusplab::effective_ode::{
    decay_order, default_delta_window, estimate_delta, integrate, model_time, q_of, ModelParams,
    Trajectory,
};
use cusplab::euler_patch::{
    make_corner_patch, make_disc, make_ellipse, simulate, CDConfig, EulerRun, PatchState,
};
use cusplab::Result;

const B0S: [f64; 4] = [PI / 16.0, FRAC_PI_8, PI / 6.0, 0.24 * PI];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn c1_q_identity() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for b0 in B0S {
        let traj = integrate(&ModelParams::new(b0, 1e4))?;
        for s in traj.samples() {
            worst = worst.max((PI * s.bisector_rate + (4.0 * s.half_angle).sin()).abs());
        }
    }
    outcome(
        worst < 1e-7,
        format!("max |πA′ + sin 4B| = {worst:.3e} (< 1e-7)"),
    )
}

fn c2_monotonicity() -> Result<Outcome> {
    let mut bad = Vec::new();
    let mut steps = 0;
    for b0 in B0S {
        let traj = integrate(&ModelParams::new(b0, 1e6))?;
        let (lo, hi) = ((4.0 * b0).sin() / (PI * b0), 4.0 / PI);
        let mut prev: Option<(f64, f64)> = None;
        for s in traj.samples() {
            steps += 1;
            let i = decay_order(s)?;
            if let Some((pb, pi)) = prev {
                if s.half_angle > pb + 1e-10 || i < pi - 1e-10 {
                    bad.push(format!("B0={b0:.4} τ={:.3e} monotonicity", s.tau));
                }
            }
            if s.tau > 0.0 {
                let q = q_of(s)? / s.tau;
                if q < lo - 1e-10 || q > hi + 1e-10 {
                    bad.push(format!("B0={b0:.4} τ={:.3e} Q/τ={q:.6}", s.tau));
                }
            }
            prev = Some((s.half_angle, i));
        }
    }
    let detail = if bad.is_empty() {
        format!("{steps} accepted steps checked")
    } else {
        format!("{} violations, first: {}", bad.len(), bad[0])
    };
    outcome(bad.is_empty(), detail)
}

fn c3_decay() -> Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    for b0 in [PI / 16.0, FRAC_PI_8, PI / 6.0] {
        let traj = integrate(&ModelParams::new(b0, 1e6))?;
        let fit = estimate_delta(&traj, default_delta_window(traj.tau_max()))?;
        let crossing = traj
            .samples()
            .iter()
            .find(|s| decay_order(s).map(|i| i > 1.0).unwrap_or(false))
            .map(|s| s.tau);
        let ok = fit.delta > 0.0 && fit.rate_slope <= -2.0 - fit.delta + 0.1 && crossing.is_some();
        pass &= ok;
        parts.push(format!(
            "B0={b0:.4}: δ̂={:.4} |B′| slope={:.4} I>1 at τ={:.3e}",
            fit.delta,
            fit.rate_slope,
            crossing.unwrap_or(f64::NAN)
        ));
    }
    outcome(pass, parts.join("; "))
}

fn c4_oracles() -> Result<Outcome> {
    let mut res = 0.0f64;
    let mut ends = 0.0f64;
    for b0 in [PI / 16.0, FRAC_PI_8, PI / 6.0] {
        let traj = integrate(&ModelParams::new(b0, 10.0))?;
        res = res.max(integral_residual(&traj)?.max());
        let rows = transport_table(&AngularDensity::patch(0.0, b0), &traj, &[5.0])?;
        let s = traj.state_at(5.0)?;
        let e = &rows[0].endpoints;
        let wrap = |x: f64| {
            let d = x.rem_euclid(2.0 * PI);
            d.min(2.0 * PI - d)
        };
        ends = ends
            .max(wrap(e[0] - (s.bisector - s.half_angle)))
            .max(wrap(e[1] - (s.bisector + s.half_angle)));
    }
    outcome(
        res < 1e-6 && ends < 1e-6,
        format!("integral residual {res:.3e}, endpoint error at τ=5 {ends:.3e} (< 1e-6)"),
    )
}

fn c5_benchmarks() -> Result<Outcome> {
    let disc = make_disc(1.0, 256);
    let period = 4.0 * PI;
    let run = simulate(&disc, &CDConfig::fixed(256, period / 1000.0), period, 1000)?;
    let last = run.snapshots.last().unwrap();
    let drift = last.contours[0]
        .nodes
        .iter()
        .fold(0.0f64, |m, p| m.max((p.norm() - 1.0).abs()));

    let ell = make_ellipse(1.0, 0.5, 512);
    let run = simulate(&ell, &CDConfig::fixed(512, 0.01), 2.0, 10)?;
    let mut total = 0.0;
    let mut prev = run.snapshots[0].contours[0].principal_axis_angle();
    for s in &run.snapshots[1..] {
        let a = s.contours[0].principal_axis_angle();
        let mut d = (a - prev).rem_euclid(PI);
        if d > PI / 2.0 {
            d -= PI;
        }
        total += d;
        prev = a;
    }
    let rate = total / run.snapshots.last().unwrap().t;
    let rel = (rate - 2.0 / 9.0).abs() / (2.0 / 9.0);
    outcome(
        drift < 1e-4 && rel < 0.01,
        format!("disc node drift {drift:.3e} (< 1e-4); ellipse rate {rate:.6} vs 2/9, rel {rel:.2e} (< 1e-2)"),
    )
}

fn corner_run() -> Result<(EulerRun, Trajectory)> {
    let n = 1024;
    let dt = 1e-3;
    let s0 = make_corner_patch(FRAC_PI_8, 0.9, n)?;
    let run = simulate(&s0, &CDConfig::corner(FRAC_PI_8, 0.9, n, dt)?, 0.5, 10)?;
    let traj = integrate(&ModelParams::new(FRAC_PI_8, 1e3))?;
    Ok((run, traj))
}

fn interp_time(curve: &[(f64, f64)], tau: f64) -> Option<f64> {
    curve
        .windows(2)
        .find(|w| w[0].0 <= tau && tau <= w[1].0)
        .map(|w| {
            let s = (tau - w[0].0) / (w[1].0 - w[0].0);
            w[0].1 + s * (w[1].1 - w[0].1)
        })
}

fn c6_corner(run: &EulerRun, traj: &Trajectory) -> Result<Outcome> {
    let radii = [1e-2, 1e-3];
    let mut curves: Vec<Vec<(f64, f64)>> = Vec::new();
    let (mut decreasing, mut model_err, mut bis_neg) = (true, 0.0f64, true);
    for &r in &radii {
        let mut c = Vec::new();
        let mut prev = f64::INFINITY;
        for s in &run.snapshots {
            let (h, b) = corner_angle(s, r)?;
            if s.t > 0.0 {
                decreasing &= h < prev;
                bis_neg &= b < 0.0;
            }
            prev = h;
            let m = traj.state_at(model_time(s.t, r))?.half_angle;
            model_err = model_err.max((h - m).abs() / m);
            c.push((s.t * r.ln().abs(), h));
        }
        curves.push(c);
    }
    let mut overlay = 0.0f64;
    for &(tau, h) in curves[1].iter().filter(|p| p.0 <= 2.0) {
        if let Some(h2) = interp_time(&curves[0], tau) {
            overlay = overlay.max((h - h2).abs() / h2);
        }
    }
    outcome(
        decreasing && overlay < 0.15 && model_err < 0.2 && bis_neg,
        format!(
            "half-angle strictly decreasing: {decreasing}; overlay τ≤2 {overlay:.3e} (< 0.15); \
             vs model B {model_err:.3e} (< 0.2); bisector negative: {bis_neg}; \
             area drift {:.2e}",
            run.max_area_drift
        ),
    )
}

fn c7_perturbation(run: &EulerRun, traj: &Trajectory) -> Result<Outcome> {
    let probes: Vec<&PatchState> = run
        .snapshots
        .iter()
        .filter(|s| ((s.t * 10.0).round() - s.t * 10.0).abs() < 1e-9)
        .collect();
    let mut c_fit = 0.0f64;
    for r in [1e-1, 1e-2, 1e-3] {
        let f0 = f_of(probes[0], traj, r)?;
        for s in &probes[1..] {
            let f = f_of(s, traj, r)?;
            c_fit = c_fit.max((f - f0) / (s.t * r.ln().abs()));
        }
    }
    outcome(c_fit < 50.0, format!("fitted C = {c_fit:.4} (< 50)"))
}

fn c8_flow_map() -> Result<Outcome> {
    let b0 = FRAC_PI_8;
    let cstar = 1.0;
    let constant = FlowField::new(cstar, HalfAngle::Constant(b0))?;
    let traj = integrate(&ModelParams::new(b0, 1e3))?;
    let flow = FlowField::new(cstar, HalfAngle::Trajectory(&traj))?;
    let (mut closed, mut sandwich) = (0.0f64, true);
    for r in [1e-1f64, 1e-2, 1e-4, 1e-8] {
        for t in [0.1, 0.5, 1.0, 2.0] {
            let want = r.powf((cstar * b0 * t).exp());
            closed = closed.max((constant.radius_at(r, t)? - want).abs() / want);
            let phi = flow.radius_at(r, t)?;
            let (lo, hi) = yudovich_bounds(cstar, b0, r, t);
            sandwich &= phi >= lo * (1.0 - 1e-12) && phi <= hi;
        }
    }
    outcome(
        closed < 1e-8 && sandwich,
        format!("closed-form rel error {closed:.3e} (< 1e-8); Yudovich sandwich holds: {sandwich}"),
    )
}

fn c9_bounds() -> Result<Outcome> {
    let p = BoundParams::default();
    let grid = GridFunction::log_spaced(0.5, 257, 1.0, 20.0, 40)?;
    let (mut total, mut literal_fail, mut stirling_fail) = (0usize, 0usize, 0usize);
    let mut first = None;
    for m in 1..=32 {
        let it = iterate_f(&p, m, &grid)?;
        for (i, &t) in grid.t.iter().enumerate() {
            for (k, &l) in grid.ell.iter().enumerate() {
                let v = it.values[i][k];
                total += 1;
                if v > closed_form(&p, m, t, l) {
                    literal_fail += 1;
                    first.get_or_insert((m, t, l, v, closed_form(&p, m, t, l)));
                }
                if v > stirling_bound(&p, m, t, l) {
                    stirling_fail += 1;
                }
            }
        }
    }
    let mut est_m = true;
    for j in 0..=4900 {
        let xi = 1.0 + j as f64 * 0.01;
        let m = (E * xi).ceil();
        est_m &= m <= 4.0 * xi && (xi / m).powf(m) <= (-xi).exp();
    }
    let mut scaling = true;
    let mut prev = (0.0, f64::INFINITY);
    for k in 1..=6 {
        let ell = 10f64.powi(k);
        let q = choose_parameters(&p, ell)?;
        let (x, f) = (q.eta * ell, decay_f(&p, ell));
        scaling &= x > prev.0 && f < prev.1 && q.eta < 1.0 / ell.sqrt();
        prev = (x, f);
    }
    scaling &= prev.1 < 0.05;
    let a = literal_fail == 0;
    let first = first
        .map(|(m, t, l, v, c)| format!(", first at m={m} t={t:.4} |ln r|={l:.3}: {v:.4} > {c:.4}"))
        .unwrap_or_default();
    outcome(
        a && est_m && scaling,
        format!(
            "(a) iterate ≤ closed form: {} of {total} points violate{first}; \
             e^m-corrected bound violated at {stirling_fail}; \
             (b) (ξ/m)^m ≤ e^(−ξ) on ξ∈[1,50]: {est_m}; \
             (c) η|ln r| increasing and decay_F → 0 (last {:.3e}): {scaling}",
            literal_fail, prev.1
        ),
    )
}

fn c10_decomposition(run: &EulerRun) -> Result<Outcome> {
    let states = [
        make_corner_patch(FRAC_PI_8, 0.9, 1024)?,
        run.snapshots.last().unwrap().clone(),
    ];
    let mut parts = Vec::new();
    let mut pass = true;
    for s in &states {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for j in 0..=8 {
            let r = 10f64.powf(-3.0 + 0.25 * j as f64);
            for k in 0..8 {
                let th = 0.05 + k as f64 * PI / 4.0;
                let v = decomposition_residual(s, r, th)?.residual_over_r;
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        pass &= hi / lo < 10.0;
        parts.push(format!(
            "t={:.1}: [{lo:.3e}, {hi:.3e}] spread {:.2}",
            s.t,
            hi / lo
        ));
    }
    outcome(pass, format!("residual/r {} (< 10×)", parts.join("; ")))
}

fn report(id: &str, name: &str, limit: Duration, start: Instant, r: Result<Outcome>) -> bool {
    let elapsed = start.elapsed();
    let (pass, detail) = match r {
        Ok(o) => (o.pass && elapsed <= limit, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "{} [{id}] {name}: {detail} ({:.1} s, limit {} s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    pass
}

fn main() {
    let secs = Duration::from_secs;
    let mut all = true;
    let t = Instant::now();
    all &= report("1", "exact Q-identity", secs(10), t, c1_q_identity());
    let t = Instant::now();
    all &= report("2", "monotonicity suite", secs(10), t, c2_monotonicity());
    let t = Instant::now();
    all &= report("3", "decay", secs(60), t, c3_decay());
    let t = Instant::now();
    all &= report("4", "oracle equivalence", secs(30), t, c4_oracles());
    let t = Instant::now();
    all &= report(
        "5",
        "contour-dynamics benchmarks",
        secs(300),
        t,
        c5_benchmarks(),
    );
    let t = Instant::now();
    let corner = corner_run();
    let run_time = t.elapsed();
    match corner {
        Ok((run, traj)) => {
            let t6 = Instant::now() - run_time;
            all &= report(
                "6",
                "corner physics",
                secs(1800),
                t6,
                c6_corner(&run, &traj),
            );
            let t = Instant::now();
            all &= report(
                "7",
                "perturbation bound",
                secs(1800),
                t,
                c7_perturbation(&run, &traj),
            );
            let t = Instant::now();
            all &= report("8", "flow map", secs(5), t, c8_flow_map());
            let t = Instant::now();
            all &= report("9", "bounds lab", secs(5), t, c9_bounds());
            let t = Instant::now();
            all &= report(
                "10",
                "velocity decomposition",
                secs(120),
                t,
                c10_decomposition(&run),
            );
        }
        Err(e) => {
            println!("FAIL [6] corner physics: corner run failed: {e}");
            println!("FAIL [7] perturbation bound: no corner run");
            let t = Instant::now();
            report("8", "flow map", secs(5), t, c8_flow_map());
            let t = Instant::now();
            report("9", "bounds lab", secs(5), t, c9_bounds());
            println!("FAIL [10] velocity decomposition: no corner run");
            all = false;
        }
    }
    if !all {
        std::process::exit(1);
    }
}
