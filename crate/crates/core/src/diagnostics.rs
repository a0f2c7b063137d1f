//! Quantities comparing a contour-dynamics run with the effective model:
//! ball fractions G, symmetric-difference measures F and θ̄, the velocity
//! decomposition residual, the model flow map Φ and measured corner angles.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use crate::angular_model::AngularDensity;
use crate::effective_ode::{
    model_time, model_time_from_log, CumulativeIntegral, EffectiveState, Trajectory,
    LOG_TIME_PER_MODEL_TIME,
};
use crate::error::{Error, Result};
use crate::euler_patch::{velocity_at, Contour, Kernel, PatchState};
use crate::geometry::{point_in_polygon, polygon_disc_area, segment_circle_crossings, Vec2};
use crate::ode::{dopri5, StepControl};
use crate::quadrature::GaussLegendre;
use crate::table;

/// Values of one diagnostic on a set of radii at a fixed time.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub t: f64,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("radius must be positive, got {r}")))
    }
}

fn check_contours(state: &PatchState) -> Result<()> {
    if state.contours.is_empty() || state.contours.iter().any(|c| c.len() < 3) {
        return Err(Error::Geometry(
            "patch needs contours with at least three nodes".into(),
        ));
    }
    Ok(())
}

/// G(t, r) = |B_r ∩ Ω| / |B_r|, exact for polygons.
pub fn g_of(state: &PatchState, r: f64) -> Result<f64> {
    check_radius(r)?;
    check_contours(state)?;
    let area: f64 = state
        .contours
        .iter()
        .map(|c| polygon_disc_area(&c.nodes, r))
        .sum();
    Ok(area / (PI * r * r))
}

fn contour_crossings(c: &Contour, r: f64) -> Vec<f64> {
    let n = c.len();
    let mut out = Vec::new();
    for i in 0..n {
        let (a, b) = (c.nodes[i], c.nodes[(i + 1) % n]);
        for s in segment_circle_crossings(a, b, r) {
            out.push((a + (b - a) * s).angle());
        }
    }
    out
}

fn inside_patch(state: &PatchState, p: Vec2) -> bool {
    state.contours.iter().any(|c| point_in_polygon(&c.nodes, p))
}

/// Ω ∩ {|x| = r} as a set of angles.
pub fn angular_slice(state: &PatchState, r: f64) -> Result<AngularDensity> {
    check_radius(r)?;
    check_contours(state)?;
    let mut angles = Vec::new();
    for c in &state.contours {
        let a = contour_crossings(c, r);
        if a.len() % 2 != 0 {
            return Err(Error::Geometry(format!(
                "odd number of circle crossings at r = {r:.3e}"
            )));
        }
        angles.extend(a);
    }
    if angles.is_empty() {
        return Ok(if inside_patch(state, Vec2::new(r, 0.0)) {
            AngularDensity::full()
        } else {
            AngularDensity::empty()
        });
    }
    angles.sort_by(f64::total_cmp);
    let n = angles.len();
    let mut arcs = Vec::new();
    for k in 0..n {
        let lo = angles[k];
        let hi = if k + 1 < n {
            angles[k + 1]
        } else {
            angles[0] + TAU
        };
        if hi <= lo {
            continue;
        }
        if inside_patch(state, Vec2::polar(r, 0.5 * (lo + hi))) {
            arcs.push((lo, hi));
        }
    }
    Ok(AngularDensity::from_arcs(&arcs, false))
}

/// Slice at r, nudging the radius off a tangency if needed.
fn robust_slice(state: &PatchState, r: f64) -> Result<AngularDensity> {
    let mut rr = r;
    for _ in 0..8 {
        match angular_slice(state, rr) {
            Err(Error::Geometry(_)) => rr *= 1.0 + 1e-9,
            other => return other,
        }
    }
    angular_slice(state, rr)
}

/// The effective model's angular density at radius `r` and time `t`.
pub fn effective_density(traj: &Trajectory, t: f64, r: f64) -> Result<AngularDensity> {
    check_radius(r)?;
    let s = traj.state_at(model_time(t, r))?;
    Ok(AngularDensity::patch(s.bisector, s.half_angle))
}

/// ω_g(t, r, θ): membership of θ in the effective arcs at model time τ(t, r).
pub fn effective_indicator(traj: &Trajectory, t: f64, r: f64, theta: f64) -> Result<bool> {
    Ok(effective_density(traj, t, r)?.contains(theta))
}

/// θ̄(t, r): angular measure of the symmetric difference between the patch
/// slice and the effective arcs at radius r.
pub fn theta_bar(state: &PatchState, traj: &Trajectory, r: f64) -> Result<f64> {
    let slice = robust_slice(state, r)?;
    Ok(slice.symmetric_difference(&effective_density(traj, state.t, r)?))
}

/// Relative size below which dyadic rings are no longer added.
const RING_CUTOFF: f64 = 1e-7;

fn ring_average(r: f64, gl: &GaussLegendre, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    // (1/πr²) ∫₀^r s f(s) ds over dyadic rings [r/2^{k+1}, r/2^k].
    let mut acc = 0.0;
    let mut hi = r;
    while hi > RING_CUTOFF * r {
        let lo = 0.5 * hi;
        let (half, mid) = (0.5 * (hi - lo), 0.5 * (hi + lo));
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            let s = mid + half * x;
            acc += w * half * s * f(s)?;
        }
        hi = lo;
    }
    Ok(acc / (PI * r * r))
}

/// F(t, r) = (1/πr²) ∫₀^r s θ̄(t, s) ds, by 64-point Gauss–Legendre per dyadic ring.
pub fn f_of(state: &PatchState, traj: &Trajectory, r: f64) -> Result<f64> {
    check_radius(r)?;
    check_contours(state)?;
    let gl = GaussLegendre::new(64);
    ring_average(r, &gl, |s| theta_bar(state, traj, s))
}

/// Area fraction of B_r covered by the effective arcs: (1/πr²) ∫₀^r s·4B ds.
pub fn effective_g(traj: &Trajectory, t: f64, r: f64) -> Result<f64> {
    check_radius(r)?;
    let gl = GaussLegendre::new(64);
    ring_average(r, &gl, |s| {
        Ok(4.0 * traj.state_at(model_time(t, s))?.half_angle)
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionResidual {
    pub r: f64,
    pub theta: f64,
    pub u_full: Vec2,
    pub u_leading: Vec2,
    pub residual_over_r: f64,
    /// ∫_{|y|>r} sin 2φ /|y|² ω dy.
    pub i_s: f64,
    /// ∫_{|y|>r} cos 2φ /|y|² ω dy.
    pub i_c: f64,
}

/// (I^s, I^c) over Ω ∩ {|y| > r}, exactly, from
/// ∫∫ ȳ^{-2} dA = (i/2) ∮ dy/ȳ around the region's boundary.
pub fn far_field_integrals(state: &PatchState, r: f64) -> Result<(f64, f64)> {
    check_radius(r)?;
    check_contours(state)?;
    let r2 = r * r;
    let (mut zx, mut zy) = (0.0, 0.0);
    for c in &state.contours {
        let n = c.len();
        for i in 0..n {
            let (a, b) = (c.nodes[i], c.nodes[(i + 1) % n]);
            let mut pts = vec![a];
            for s in segment_circle_crossings(a, b, r) {
                pts.push(a + (b - a) * s);
            }
            pts.push(b);
            for w in pts.windows(2) {
                let (p, q) = (w[0], w[1]);
                if ((p + q) * 0.5).norm_sq() <= r2 {
                    continue;
                }
                let e = q - p;
                let e2 = e.norm_sq();
                if e2 == 0.0 {
                    continue;
                }
                // e/ē = e²/|e|²; Log(q̄/p̄) = ln(|q|/|p|) − i arg(q/p).
                let (ex, ey) = ((e.x * e.x - e.y * e.y) / e2, 2.0 * e.x * e.y / e2);
                let lr = 0.5 * (q.norm_sq() / p.norm_sq()).ln();
                let li = -p.cross(q).atan2(p.dot(q));
                zx += ex * lr - ey * li;
                zy += ex * li + ey * lr;
            }
        }
    }
    // Inner circle, clockwise along the arcs inside Ω: (w_lo² − w_hi²)/(2r²).
    let slice = robust_slice(state, r)?;
    if !slice.is_full() {
        for &(lo, hi) in slice.arcs() {
            zx += 0.5 * ((2.0 * lo).cos() - (2.0 * hi).cos());
            zy += 0.5 * ((2.0 * lo).sin() - (2.0 * hi).sin());
        }
    }
    // I^c + i I^s = (i/2) Z.
    Ok((0.5 * zx, -0.5 * zy))
}

/// Leading-order velocity (r/2π)[(cos θ, −sin θ) I^s − (sin θ, cos θ) I^c].
pub fn leading_velocity(r: f64, theta: f64, i_s: f64, i_c: f64) -> Vec2 {
    let (s, c) = theta.sin_cos();
    Vec2::new(c * i_s - s * i_c, -s * i_s - c * i_c) * (r / (2.0 * PI))
}

/// Difference between the full velocity at r e^{iθ} and its leading-order
/// part built from the far-field integrals, divided by r.
pub fn decomposition_residual(
    state: &PatchState,
    r: f64,
    theta: f64,
) -> Result<DecompositionResidual> {
    if r == 0.0 {
        return Err(Error::Domain("decomposition residual needs r > 0".into()));
    }
    let (i_s, i_c) = far_field_integrals(state, r)?;
    let x = Vec2::polar(r, theta);
    let u_full = velocity_at(state, x, &Kernel::default())?;
    let u_leading = leading_velocity(r, theta, i_s, i_c);
    Ok(DecompositionResidual {
        r,
        theta,
        u_full,
        u_leading,
        residual_over_r: (u_full - u_leading).norm() / r,
        i_s,
        i_c,
    })
}

/// Half-angle history driving the model flow map.
pub enum HalfAngle<'a> {
    Constant(f64),
    Trajectory(&'a Trajectory),
}

type HalfAngleFn = fn(&EffectiveState) -> f64;

fn half_angle_of(s: &EffectiveState) -> f64 {
    s.half_angle
}

enum Primitive<'a> {
    Constant(f64),
    Trajectory(&'a Trajectory, CumulativeIntegral<'a, HalfAngleFn>),
}

/// Radial flow v = −C* r ∫_r^1 B(τ(t, s))/s ds of the model, in log-radius
/// coordinates ℓ = |ln r|: dℓ/dt = C* (κ/t) ∫₀^{tℓ/κ} B(τ) dτ with κ the
/// log-time per model time.
pub struct FlowField<'a> {
    cstar: f64,
    b: Primitive<'a>,
}

impl<'a> FlowField<'a> {
    pub fn new(cstar: f64, half_angle: HalfAngle<'a>) -> Result<Self> {
        if !(cstar > 0.0) {
            return Err(Error::Domain(format!("C* must be positive, got {cstar}")));
        }
        let b = match half_angle {
            HalfAngle::Constant(b0) => Primitive::Constant(b0),
            HalfAngle::Trajectory(traj) => {
                Primitive::Trajectory(traj, traj.cumulative(half_angle_of as HalfAngleFn))
            }
        };
        Ok(Self { cstar, b })
    }

    pub fn cstar(&self) -> f64 {
        self.cstar
    }

    /// Largest half-angle of the history.
    pub fn b_max(&self) -> f64 {
        match &self.b {
            Primitive::Constant(b0) => *b0,
            Primitive::Trajectory(traj, _) => traj.b0(),
        }
    }

    fn primitive(&self, tau: f64) -> Result<f64> {
        match &self.b {
            Primitive::Constant(b0) => Ok(b0 * tau),
            Primitive::Trajectory(_, cum) => cum.at(tau),
        }
    }

    /// dℓ/dt at (t, ℓ).
    pub fn log_speed(&self, t: f64, ell: f64) -> Result<f64> {
        if ell <= 0.0 {
            return Ok(0.0);
        }
        if t == 0.0 {
            let b0 = match &self.b {
                Primitive::Constant(b0) => *b0,
                Primitive::Trajectory(traj, _) => traj.state_at(0.0)?.half_angle,
            };
            return Ok(self.cstar * b0 * ell);
        }
        let tau = model_time_from_log(t.abs(), ell);
        Ok(self.cstar * LOG_TIME_PER_MODEL_TIME / t.abs() * self.primitive(tau)?)
    }

    /// Log-radius at time `to` of the particle with log-radius `ell` at time `from`.
    pub fn transport_log(&self, ell: f64, from: f64, to: f64) -> Result<f64> {
        if ell <= 0.0 || from == to {
            return Ok(ell.max(0.0));
        }
        let mut err = None;
        let ctl = StepControl::new(1e-13, 1e-300);
        let (_, y) = dopri5(
            |t, y: &[f64; 1]| match self.log_speed(t, y[0]) {
                Ok(v) => Some([v]),
                Err(e) => {
                    err = Some(e);
                    None
                }
            },
            from,
            [ell],
            to,
            &ctl,
            |_, _, _| true,
        )
        .map_err(|e| err.take().unwrap_or(e))?;
        Ok(y[0])
    }

    /// Φ_t(r0): radius at time t of the particle starting at r0 at time 0.
    pub fn radius_at(&self, r0: f64, t: f64) -> Result<f64> {
        if !(r0 > 0.0 && r0 <= 1.0) {
            return Err(Error::OutOfRange {
                what: "r0",
                value: r0,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok((-self.transport_log(-r0.ln(), 0.0, t)?).exp())
    }
}

/// Φ_t(r0) for the flow driven by the trajectory's half-angle.
pub fn flow_map(cstar: f64, traj: &Trajectory, r0: f64, t: f64) -> Result<f64> {
    FlowField::new(cstar, HalfAngle::Trajectory(traj))?.radius_at(r0, t)
}

/// Yudovich bounds r^{e^{ct}} ≤ Φ_t(r) ≤ r with c = C*·B_max.
pub fn yudovich_bounds(cstar: f64, b_max: f64, r0: f64, t: f64) -> (f64, f64) {
    (r0.powf((cstar * b_max * t).exp()), r0)
}

/// Half-angle and bisector of the right-hand lobe's slice at radius r.
pub fn corner_angle(state: &PatchState, r: f64) -> Result<(f64, f64)> {
    check_radius(r)?;
    check_contours(state)?;
    let total: usize = state
        .contours
        .iter()
        .map(|c| contour_crossings(c, r).len())
        .sum();
    let lobe = &state.contours[0];
    let a = contour_crossings(lobe, r);
    if a.len() != 2 || total != 2 * state.contours.len() {
        return Err(Error::IntersectionCount {
            r,
            expected: 2 * state.contours.len(),
            found: total,
        });
    }
    let (mut lo, mut hi) = (a[0].min(a[1]), a[0].max(a[1]));
    if !point_in_polygon(&lobe.nodes, Vec2::polar(r, 0.5 * (lo + hi))) {
        std::mem::swap(&mut lo, &mut hi);
        hi += TAU;
    }
    let mut mid = 0.5 * (lo + hi);
    if mid > PI {
        mid -= TAU;
    }
    Ok((0.5 * (hi - lo), mid))
}

/// One row of the comparison table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub r: f64,
    pub g: f64,
    pub f: f64,
    pub theta_bar: f64,
    pub half_angle: f64,
    pub bisector: f64,
}

/// All comparison diagnostics of `state` at radius `r`. Corner angles are NaN
/// when the slice is not a pair of arcs.
pub fn diagnostics_row(state: &PatchState, traj: &Trajectory, r: f64) -> Result<DiagnosticsRow> {
    let (half_angle, bisector) = corner_angle(state, r).unwrap_or((f64::NAN, f64::NAN));
    Ok(DiagnosticsRow {
        t: state.t,
        r,
        g: g_of(state, r)?,
        f: f_of(state, traj, r)?,
        theta_bar: theta_bar(state, traj, r)?,
        half_angle,
        bisector,
    })
}

/// CSV `t,r,G,F,theta_bar,half_angle,bisector`.
pub fn write_diagnostics_csv<W: Write>(rows: &[DiagnosticsRow], w: &mut W) -> Result<()> {
    table::write_header(
        w,
        &["t", "r", "G", "F", "theta_bar", "half_angle", "bisector"],
    )?;
    for d in rows {
        table::write_reals(
            w,
            &[d.t, d.r, d.g, d.f, d.theta_bar, d.half_angle, d.bisector],
        )?;
    }
    Ok(())
}

/// CSV `r,theta,residual_over_r`.
pub fn write_decomposition_csv<W: Write>(rows: &[DecompositionResidual], w: &mut W) -> Result<()> {
    table::write_header(w, &["r", "theta", "residual_over_r"])?;
    for d in rows {
        table::write_reals(w, &[d.r, d.theta, d.residual_over_r])?;
    }
    Ok(())
}

/// Measured and modelled corner angles at one (t, r).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseRow {
    pub t: f64,
    pub r: f64,
    /// t|ln r|.
    pub log_time: f64,
    pub half_angle: f64,
    pub bisector: f64,
    pub model_half_angle: f64,
    pub model_bisector: f64,
}

pub fn collapse_row(state: &PatchState, traj: &Trajectory, r: f64) -> Result<CollapseRow> {
    let (half_angle, bisector) = corner_angle(state, r)?;
    let m = traj.state_at(model_time(state.t, r))?;
    Ok(CollapseRow {
        t: state.t,
        r,
        log_time: state.t * r.ln().abs(),
        half_angle,
        bisector,
        model_half_angle: m.half_angle,
        model_bisector: m.bisector,
    })
}

/// CSV `t,r,log_time,half_angle,bisector,model_half_angle,model_bisector`.
pub fn write_collapse_csv<W: Write>(rows: &[CollapseRow], w: &mut W) -> Result<()> {
    table::write_header(
        w,
        &[
            "t",
            "r",
            "log_time",
            "half_angle",
            "bisector",
            "model_half_angle",
            "model_bisector",
        ],
    )?;
    for c in rows {
        table::write_reals(
            w,
            &[
                c.t,
                c.r,
                c.log_time,
                c.half_angle,
                c.bisector,
                c.model_half_angle,
                c.model_bisector,
            ],
        )?;
    }
    Ok(())
}
