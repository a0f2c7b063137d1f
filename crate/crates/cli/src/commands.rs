//! Subcommand bodies. Each returns the files it wrote (relative to the
//! output directory) plus a JSON summary for the manifest.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use cusplab::angular_model::{transport_table, write_transport_csv, AngularDensity};
use cusplab::bounds_lab::{bounds_table, write_bounds_csv};
use cusplab::diagnostics::{
    collapse_row, decomposition_residual, diagnostics_row, write_collapse_csv,
    write_decomposition_csv, write_diagnostics_csv,
};
use cusplab::effective_ode::{
    default_delta_window, estimate_delta, integrate, limit_a, Trajectory,
};
use cusplab::euler_patch::{make_corner_patch, simulate, write_snapshots_csv, EulerRun};
use cusplab::Error;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};
use crate::error::CliError;

/// Largest |πA′ + sin 4B| accepted along a trajectory.
pub const IDENTITY_TOLERANCE: f64 = 1e-6;

pub struct Outcome {
    pub outputs: Vec<String>,
    pub summary: Value,
}

fn write_file<F>(dir: &Path, name: &str, outputs: &mut Vec<String>, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> cusplab::Result<()>,
{
    let mut w = BufWriter::new(File::create(dir.join(name))?);
    body(&mut w)?;
    w.flush()?;
    outputs.push(name.to_string());
    Ok(())
}

pub fn run(cmd: Command, cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    match cmd {
        Command::Effective => effective(cfg, dir),
        Command::Euler => euler(cfg, dir),
        Command::Compare => compare(cfg, dir),
        Command::Decomp => decomp(cfg, dir),
        Command::Bounds => bounds(cfg, dir),
        Command::Collapse => collapse(cfg, dir),
    }
}

/// Largest |πA′ + sin 4B| over the samples, with the τ where it occurs.
pub fn identity_defect(traj: &Trajectory) -> (f64, f64) {
    traj.samples()
        .iter()
        .map(|s| {
            let d = (PI * s.bisector_rate + (4.0 * s.half_angle).sin()).abs();
            (d, s.tau)
        })
        .fold((0.0, 0.0), |m, x| if x.0 > m.0 { x } else { m })
}

fn solve_model(cfg: &RunConfig) -> Result<Trajectory, CliError> {
    let traj = integrate(&cfg.model.params())?;
    let (defect, at) = identity_defect(&traj);
    if !(defect <= IDENTITY_TOLERANCE) {
        return Err(Error::InvariantViolation {
            invariant: "pi*A' + sin(4B) = 0",
            at,
            value: defect,
        }
        .into());
    }
    Ok(traj)
}

fn effective(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let traj = solve_model(cfg)?;
    let mut outputs = Vec::new();
    write_file(dir, "trajectory.csv", &mut outputs, |w| traj.write_csv(w))?;

    let m = &cfg.model;
    let tau_end = m.transport_tau_max.min(traj.tau_max());
    let n = m.transport_points;
    let taus: Vec<f64> = (0..n)
        .map(|i| tau_end * i as f64 / (n - 1) as f64)
        .collect();
    let rows = transport_table(&AngularDensity::patch(0.0, m.b0), &traj, &taus)?;
    write_file(dir, "j_integrals.csv", &mut outputs, |w| {
        write_transport_csv(&rows, w)
    })?;

    let (defect, _) = identity_defect(&traj);
    let fit = estimate_delta(&traj, default_delta_window(traj.tau_max())).ok();
    let limit = limit_a(&traj, 1e-3).ok();
    let last = traj.samples().last().expect("trajectory is non-empty");
    Ok(Outcome {
        outputs,
        summary: json!({
            "samples": traj.len(),
            "tau_end": traj.tau_max(),
            "cusped": traj.is_cusped(),
            "final_half_angle": last.half_angle,
            "final_bisector": last.bisector,
            "identity_defect": defect,
            "delta_estimate": fit.map(|f| f.delta),
            "a_infinity": limit.map(|l| l.value),
            "a_tail_variation": limit.map(|l| l.tail_variation),
        }),
    })
}

fn corner_run(cfg: &RunConfig) -> Result<EulerRun, CliError> {
    let e = &cfg.euler;
    let initial = make_corner_patch(cfg.model.b0, e.r_outer, e.n_nodes)?;
    Ok(simulate(
        &initial,
        &cfg.corner_config()?,
        e.t_end,
        e.snapshot_every,
    )?)
}

fn run_summary(cfg: &RunConfig, run: &EulerRun) -> Value {
    let e = &cfg.euler;
    let symmetrize = cfg.corner_config().map(|c| c.symmetrize).unwrap_or(false);
    json!({
        "b0": cfg.model.b0,
        "n_nodes": e.n_nodes,
        "dt": e.dt,
        "t_end": e.t_end,
        "quad_order": e.quad_order,
        "symmetrize": symmetrize,
        "snapshot_every": e.snapshot_every,
        "steps": run.steps,
        "snapshots": run.snapshots.len(),
        "initial_area": run.initial_area,
        "max_area_drift": run.max_area_drift,
        "max_cfl": run.max_cfl,
        "max_symmetry_error": run.max_symmetry_error,
    })
}

fn euler(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let run = corner_run(cfg)?;
    let mut outputs = Vec::new();
    write_file(dir, "snapshots.csv", &mut outputs, |w| {
        write_snapshots_csv(&run.snapshots, w)
    })?;
    Ok(Outcome {
        outputs,
        summary: run_summary(cfg, &run),
    })
}

fn compare(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let traj = solve_model(cfg)?;
    let run = corner_run(cfg)?;
    let radii = &cfg.diagnostics.radii;
    let rows = run
        .snapshots
        .par_iter()
        .map(|s| {
            radii
                .iter()
                .map(|&r| diagnostics_row(s, &traj, r))
                .collect::<cusplab::Result<Vec<_>>>()
        })
        .collect::<cusplab::Result<Vec<_>>>()?
        .concat();
    let mut outputs = Vec::new();
    write_file(dir, "diagnostics.csv", &mut outputs, |w| {
        write_diagnostics_csv(&rows, w)
    })?;
    Ok(Outcome {
        outputs,
        summary: run_summary(cfg, &run),
    })
}

fn decomp(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let e = &cfg.euler;
    let d = &cfg.diagnostics;
    let state = if e.t_end > 0.0 {
        corner_run(cfg)?
            .snapshots
            .pop()
            .expect("run keeps its last state")
    } else {
        make_corner_patch(cfg.model.b0, e.r_outer, e.n_nodes)?
    };
    let ratio = (d.decomp_r_max / d.decomp_r_min).ln();
    let probes: Vec<(f64, f64)> = (0..d.decomp_points)
        .flat_map(|i| {
            let r = d.decomp_r_min * (ratio * i as f64 / (d.decomp_points - 1) as f64).exp();
            (0..d.decomp_angles).map(move |j| (r, 2.0 * PI * j as f64 / d.decomp_angles as f64))
        })
        .collect();
    let rows = probes
        .par_iter()
        .map(|&(r, theta)| decomposition_residual(&state, r, theta))
        .collect::<cusplab::Result<Vec<_>>>()?;
    let worst = rows.iter().map(|r| r.residual_over_r).fold(0.0, f64::max);
    let mut outputs = Vec::new();
    write_file(dir, "decomposition.csv", &mut outputs, |w| {
        write_decomposition_csv(&rows, w)
    })?;
    Ok(Outcome {
        outputs,
        summary: json!({ "t": state.t, "rows": rows.len(), "max_residual_over_r": worst }),
    })
}

fn bounds(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let b = &cfg.bounds;
    let rows = bounds_table(&b.params()?, &b.log_radii()?, b.delta)?;
    let mut outputs = Vec::new();
    write_file(dir, "bounds.csv", &mut outputs, |w| {
        write_bounds_csv(&rows, w)
    })?;
    Ok(Outcome {
        outputs,
        summary: json!({ "rows": rows.len() }),
    })
}

fn collapse(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let traj = solve_model(cfg)?;
    let run = corner_run(cfg)?;
    let radii = &cfg.diagnostics.radii;
    let rows: Vec<_> = run
        .snapshots
        .par_iter()
        .map(|s| {
            radii
                .iter()
                .map(|&r| collapse_row(s, &traj, r))
                .collect::<cusplab::Result<Vec<_>>>()
        })
        .collect::<cusplab::Result<Vec<_>>>()?
        .concat();
    let mut outputs = Vec::new();
    write_file(dir, "collapse.csv", &mut outputs, |w| {
        write_collapse_csv(&rows, w)
    })?;
    Ok(Outcome {
        outputs,
        summary: run_summary(cfg, &run),
    })
}
