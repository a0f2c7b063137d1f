//! Angular transport of a piecewise-constant density g(τ, θ), the J-integrals
//! driving it, and the coupled integral system they imply for (A, B). These
//! are independent routes to the effective ODE.

use std::f64::consts::{PI, TAU};
use std::io::Write;

use crate::effective_ode::{
    CumulativeIntegral, EffectiveState, Trajectory, LOG_TIME_PER_MODEL_TIME,
};
use crate::error::{Error, Result};
use crate::ode::{dopri5, StepControl};
use crate::table;

/// Arcs shorter than this are dropped as collapsed.
pub const COLLAPSE_LENGTH: f64 = 1e-12;

/// Instantaneous J rates (∫ sin 2θ g dθ, ∫ cos 2θ g dθ) of the two-arc patch
/// g = 1 on [A−B, A+B] ∪ [π+A−B, π+A+B].
pub fn j_rates(state: &EffectiveState) -> (f64, f64) {
    let (a2, b2) = (2.0 * state.bisector, 2.0 * state.half_angle);
    (2.0 * a2.sin() * b2.sin(), 2.0 * a2.cos() * b2.sin())
}

/// Cumulative J-integrals in model time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JIntegrals {
    pub js: f64,
    pub jc: f64,
}

type RateFn = fn(&EffectiveState) -> f64;

fn js_rate(s: &EffectiveState) -> f64 {
    j_rates(s).0
}

fn jc_rate(s: &EffectiveState) -> f64 {
    j_rates(s).1
}

/// J^s, J^c accumulated along a trajectory.
///
/// The rates are log-time densities, so each unit of model time contributes
/// [`LOG_TIME_PER_MODEL_TIME`] times the rate.
pub struct JAccumulator<'a> {
    traj: &'a Trajectory,
    js: CumulativeIntegral<'a, RateFn>,
    jc: CumulativeIntegral<'a, RateFn>,
}

impl<'a> JAccumulator<'a> {
    pub fn new(traj: &'a Trajectory) -> Self {
        Self {
            traj,
            js: traj.cumulative(js_rate as RateFn),
            jc: traj.cumulative(jc_rate as RateFn),
        }
    }

    pub fn at(&self, tau: f64) -> Result<JIntegrals> {
        Ok(JIntegrals {
            js: LOG_TIME_PER_MODEL_TIME * self.js.at(tau)?,
            jc: LOG_TIME_PER_MODEL_TIME * self.jc.at(tau)?,
        })
    }

    /// J/τ, continuous at τ = 0 where it equals the scaled rate.
    pub fn mean_rate(&self, tau: f64) -> Result<JIntegrals> {
        if tau == 0.0 {
            let (s, c) = j_rates(&self.traj.state_at(0.0)?);
            return Ok(JIntegrals {
                js: LOG_TIME_PER_MODEL_TIME * s,
                jc: LOG_TIME_PER_MODEL_TIME * c,
            });
        }
        let j = self.at(tau)?;
        Ok(JIntegrals {
            js: j.js / tau,
            jc: j.jc / tau,
        })
    }

    /// Transport speed dθ/dτ at angle `theta`.
    pub fn speed(&self, tau: f64, theta: f64) -> Result<f64> {
        let m = self.mean_rate(tau)?;
        let t2 = 2.0 * theta;
        Ok(-(t2.sin() * m.js + t2.cos() * m.jc) / (2.0 * PI))
    }
}

/// Residuals of the coupled integral system at every trajectory sample.
#[derive(Debug, Clone, Default)]
pub struct IntegralResidual {
    pub tau: Vec<f64>,
    /// Relative residual of the half-angle equation.
    pub half_angle: Vec<f64>,
    /// Relative residual of the bisector equation.
    pub bisector: Vec<f64>,
}

impl IntegralResidual {
    pub fn max(&self) -> f64 {
        self.half_angle
            .iter()
            .chain(&self.bisector)
            .fold(0.0, |m, v| m.max(*v))
    }
}

fn relative(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

/// Largest allowed change of 2A or 2B across one sample step.
const MAX_STEP_ROTATION: f64 = 0.05;

/// Checks the trajectory against
/// τB′ = −(κ/π) sin 2B [cos 2A ∫ sin 2B sin 2A − sin 2A ∫ sin 2B cos 2A],
/// τA′ = −(κ/π) cos 2B [sin 2A ∫ sin 2B sin 2A + cos 2A ∫ sin 2B cos 2A],
/// with κ = [`LOG_TIME_PER_MODEL_TIME`] and the τ′ integrals by Gauss–Legendre
/// on the interpolated trajectory.
pub fn integral_residual(traj: &Trajectory) -> Result<IntegralResidual> {
    for w in traj.samples().windows(2) {
        let rot = (2.0 * (w[1].bisector - w[0].bisector))
            .abs()
            .max((2.0 * (w[1].half_angle - w[0].half_angle)).abs());
        if rot > MAX_STEP_ROTATION {
            return Err(Error::Resolution(format!(
                "angle change {rot:.3e} across [{:.3e}, {:.3e}]",
                w[0].tau, w[1].tau
            )));
        }
    }
    let acc = JAccumulator::new(traj);
    let mut out = IntegralResidual::default();
    for (k, s) in traj.samples().iter().enumerate() {
        if s.tau == 0.0 {
            continue;
        }
        // ∫ sin2B sin2A = Js / (2κ), likewise for Jc.
        let is = acc.js.at_samples()[k] / 2.0;
        let ic = acc.jc.at_samples()[k] / 2.0;
        let (a2, b2) = (2.0 * s.bisector, 2.0 * s.half_angle);
        let k_pi = LOG_TIME_PER_MODEL_TIME / PI;
        let b_rhs = -k_pi * b2.sin() * (a2.cos() * is - a2.sin() * ic);
        let a_rhs = -k_pi * b2.cos() * (a2.sin() * is + a2.cos() * ic);
        out.tau.push(s.tau);
        out.half_angle
            .push(relative(s.tau * s.half_angle_rate, b_rhs));
        out.bisector.push(relative(s.tau * s.bisector_rate, a_rhs));
    }
    Ok(out)
}

/// Indicator of a finite union of arcs on the circle.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularDensity {
    /// Arcs (lo, hi) with lo ∈ [0, 2π), lo < hi ≤ lo + 2π; disjoint.
    arcs: Vec<(f64, f64)>,
    two_fold: bool,
}

fn wrap(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

impl AngularDensity {
    pub fn empty() -> Self {
        Self {
            arcs: Vec::new(),
            two_fold: true,
        }
    }

    pub fn full() -> Self {
        Self {
            arcs: vec![(0.0, TAU)],
            two_fold: true,
        }
    }

    /// g = 1 on [A−B, A+B] ∪ [π+A−B, π+A+B].
    pub fn patch(bisector: f64, half_angle: f64) -> Self {
        if half_angle <= 0.0 {
            return Self::empty();
        }
        let arcs = vec![
            (bisector - half_angle, bisector + half_angle),
            (PI + bisector - half_angle, PI + bisector + half_angle),
        ];
        Self::from_arcs(&arcs, true)
    }

    /// Builds a density from arcs given by unwrapped (lo, hi) pairs. With
    /// `two_fold`, the π-rotated copy of every arc is included.
    pub fn from_arcs(arcs: &[(f64, f64)], two_fold: bool) -> Self {
        let merged = normalize(arcs, two_fold);
        let two_fold_flag = two_fold || is_two_fold(&merged);
        Self {
            arcs: merged,
            two_fold: two_fold_flag,
        }
    }
}

/// Merged arcs with lo ∈ [0, 2π), rejoined across 0.
fn normalize(arcs: &[(f64, f64)], two_fold: bool) -> Vec<(f64, f64)> {
    let mut pieces: Vec<(f64, f64)> = Vec::new();
    let mut push = |lo: f64, hi: f64| {
        let len = hi - lo;
        if len >= TAU {
            pieces.push((0.0, TAU));
        } else if len > COLLAPSE_LENGTH {
            let l = wrap(lo);
            if l + len > TAU {
                pieces.push((l, TAU));
                pieces.push((0.0, l + len - TAU));
            } else {
                pieces.push((l, l + len));
            }
        }
    };
    for &(lo, hi) in arcs {
        push(lo, hi);
        if two_fold {
            push(lo + PI, hi + PI);
        }
    }
    pieces.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for p in pieces {
        match merged.last_mut() {
            Some(last) if p.0 <= last.1 => last.1 = last.1.max(p.1),
            _ => merged.push(p),
        }
    }
    // Rejoin an arc split at 0.
    if merged.len() >= 2 {
        let first = merged[0];
        let last = merged[merged.len() - 1];
        if first.0 == 0.0 && last.1 >= TAU {
            merged.remove(0);
            let n = merged.len();
            merged[n - 1].1 = TAU + first.1;
        }
    }
    merged
}

impl AngularDensity {
    pub fn arcs(&self) -> &[(f64, f64)] {
        &self.arcs
    }

    pub fn is_two_fold(&self) -> bool {
        self.two_fold
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.measure() >= TAU - COLLAPSE_LENGTH
    }

    pub fn measure(&self) -> f64 {
        self.arcs.iter().map(|(lo, hi)| hi - lo).sum()
    }

    pub fn contains(&self, theta: f64) -> bool {
        let t = wrap(theta);
        self.arcs
            .iter()
            .any(|&(lo, hi)| (t >= lo && t <= hi) || (hi > TAU && t + TAU <= hi))
    }

    /// Disjoint sorted intervals inside [0, 2π].
    fn flat(&self) -> Vec<(f64, f64)> {
        let mut v = Vec::new();
        for &(lo, hi) in &self.arcs {
            if hi > TAU {
                v.push((0.0, hi - TAU));
                v.push((lo, TAU));
            } else {
                v.push((lo, hi));
            }
        }
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    }

    pub fn intersection_measure(&self, other: &Self) -> f64 {
        let (a, b) = (self.flat(), other.flat());
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            let lo = a[i].0.max(b[j].0);
            let hi = a[i].1.min(b[j].1);
            if hi > lo {
                acc += hi - lo;
            }
            if a[i].1 < b[j].1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        acc
    }

    /// Measure of the symmetric difference with `other`.
    pub fn symmetric_difference(&self, other: &Self) -> f64 {
        (self.measure() + other.measure() - 2.0 * self.intersection_measure(other)).max(0.0)
    }
}

fn is_two_fold(arcs: &[(f64, f64)]) -> bool {
    if arcs.len() % 2 != 0 {
        return arcs.len() == 1 && arcs[0].1 - arcs[0].0 >= TAU;
    }
    let d = AngularDensity {
        arcs: arcs.to_vec(),
        two_fold: false,
    };
    let shifted: Vec<(f64, f64)> = arcs.iter().map(|&(lo, hi)| (lo + PI, hi + PI)).collect();
    let s = AngularDensity {
        arcs: normalize(&shifted, false),
        two_fold: false,
    };
    d.symmetric_difference(&s) < 1e-12
}

const TRANSPORT_RTOL: f64 = 1e-12;
const TRANSPORT_ATOL: f64 = 1e-14;

fn evolve_endpoint(acc: &JAccumulator, theta0: f64, tau_end: f64) -> Result<f64> {
    let mut err = None;
    let ctl = StepControl::new(TRANSPORT_RTOL, TRANSPORT_ATOL);
    let (_, y) = dopri5(
        |tau, y: &[f64; 1]| match acc.speed(tau, y[0]) {
            Ok(v) => Some([v]),
            Err(e) => {
                err = Some(e);
                None
            }
        },
        0.0,
        [theta0],
        tau_end,
        &ctl,
        |_, _, _| true,
    )
    .map_err(|e| err.take().unwrap_or(e))?;
    Ok(y[0])
}

/// Arc endpoints carried by the transport flow; the π-images of two-fold
/// densities are implied.
fn transported_arcs(
    g0: &AngularDensity,
    acc: &JAccumulator,
    tau_end: f64,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for &(lo, hi) in &g0.arcs {
        if hi - lo >= TAU {
            out.push((lo, hi));
            continue;
        }
        if g0.two_fold {
            // Representatives: arcs whose midpoint lies in [-π/2, π/2).
            let mid = 0.5 * (lo + hi);
            let m = (mid + PI / 2.0).rem_euclid(TAU);
            if m >= PI {
                continue;
            }
        }
        out.push((
            evolve_endpoint(acc, lo, tau_end)?,
            evolve_endpoint(acc, hi, tau_end)?,
        ));
    }
    Ok(out)
}

/// Evolves every arc endpoint by dθ/dτ = −(1/2πτ)[sin 2θ J^s(τ) + cos 2θ J^c(τ)]
/// with the J-integrals accumulated along `traj`.
pub fn transport_evolve(
    g0: &AngularDensity,
    traj: &Trajectory,
    tau_end: f64,
) -> Result<AngularDensity> {
    if !(tau_end >= 0.0 && tau_end <= traj.tau_max()) {
        return Err(Error::OutOfRange {
            what: "tau_end",
            value: tau_end,
            lo: 0.0,
            hi: traj.tau_max(),
        });
    }
    if g0.is_empty() || g0.is_full() {
        return Ok(g0.clone());
    }
    let acc = JAccumulator::new(traj);
    let arcs = transported_arcs(g0, &acc, tau_end)?;
    Ok(AngularDensity::from_arcs(&arcs, g0.two_fold))
}

/// One row of the angular transport table.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportRow {
    pub tau: f64,
    pub j: JIntegrals,
    /// Unwrapped endpoints (lo, hi, lo, hi, ...) of the representative arcs.
    pub endpoints: Vec<f64>,
}

/// J-integrals and transported endpoints of `g0` at each τ in `taus`.
pub fn transport_table(
    g0: &AngularDensity,
    traj: &Trajectory,
    taus: &[f64],
) -> Result<Vec<TransportRow>> {
    let acc = JAccumulator::new(traj);
    taus.iter()
        .map(|&tau| {
            let arcs = transported_arcs(g0, &acc, tau)?;
            Ok(TransportRow {
                tau,
                j: acc.at(tau)?,
                endpoints: arcs.iter().flat_map(|&(lo, hi)| [lo, hi]).collect(),
            })
        })
        .collect()
}

/// CSV export `tau,Js,Jc,endpoint_0,...`.
pub fn write_transport_csv<W: Write>(rows: &[TransportRow], w: &mut W) -> Result<()> {
    let n = rows.first().map_or(0, |r| r.endpoints.len());
    let mut header = vec!["tau".to_string(), "Js".to_string(), "Jc".to_string()];
    header.extend((0..n).map(|i| format!("endpoint_{i}")));
    let refs: Vec<&str> = header.iter().map(String::as_str).collect();
    table::write_header(w, &refs)?;
    for r in rows {
        let mut vals = vec![r.tau, r.j.js, r.j.jc];
        vals.extend(&r.endpoints);
        table::write_reals(w, &vals)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, SQRT_2};

    fn at(a: f64, b: f64) -> EffectiveState {
        EffectiveState {
            tau: 1.0,
            bisector: a,
            half_angle: b,
            bisector_rate: 0.0,
            half_angle_rate: 0.0,
        }
    }

    #[test]
    fn j_rate_values() {
        let (s, c) = j_rates(&at(0.0, FRAC_PI_8));
        assert_eq!(s, 0.0);
        assert_relative_eq!(c, SQRT_2, max_relative = 1e-15);
        let (s, c) = j_rates(&at(FRAC_PI_4, FRAC_PI_8));
        assert_relative_eq!(s, SQRT_2, max_relative = 1e-15);
        assert!(c.abs() < 1e-15);
        assert_eq!(j_rates(&at(0.4, 0.0)), (0.0, 0.0));
    }

    #[test]
    fn j_rates_match_direct_angular_quadrature() {
        for &(a, b) in &[(0.1, 0.2), (-0.7, 0.05), (1.3, 0.6)] {
            let g = AngularDensity::patch(a, b);
            let n = 200_000;
            let (mut s, mut c) = (0.0, 0.0);
            for k in 0..n {
                let th = (k as f64 + 0.5) * TAU / n as f64;
                if g.contains(th) {
                    s += (2.0 * th).sin();
                    c += (2.0 * th).cos();
                }
            }
            let h = TAU / n as f64;
            let (rs, rc) = j_rates(&at(a, b));
            assert!((s * h - rs).abs() < 1e-4 && (c * h - rc).abs() < 1e-4);
        }
    }

    #[test]
    fn density_set_operations() {
        let g = AngularDensity::patch(0.0, 0.3);
        assert_relative_eq!(g.measure(), 1.2, max_relative = 1e-14);
        assert_eq!(g.arcs().len(), 2);
        assert!(g.contains(0.0) && g.contains(PI + 0.29) && !g.contains(0.31));
        let shifted = AngularDensity::patch(0.1, 0.3);
        assert_relative_eq!(g.symmetric_difference(&shifted), 0.4, max_relative = 1e-12);
        assert_eq!(g.symmetric_difference(&g), 0.0);
        assert!(AngularDensity::full().is_full());
        assert_eq!(AngularDensity::empty().measure(), 0.0);
        assert!(g.is_two_fold());
        let one = AngularDensity::from_arcs(&[(0.1, 0.2)], false);
        assert!(!one.is_two_fold());
    }
}
