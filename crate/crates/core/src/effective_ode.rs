//! The effective ODE system for the bisector angle A(τ) and half-angle B(τ)
//! of a corner, its contraction-mapping startup at the singular point τ = 0,
//! and the derived quantities Q, I, δ and A∞.

use std::f64::consts::{FRAC_PI_4, PI};
use std::io::Write;

use crate::error::{Error, Result};
use crate::ode::{dopri5, StepControl};
use crate::quadrature::{ChebyshevGrid, GaussLegendre};
use crate::table;

/// Physical log-time `t|ln r|` per unit of model time τ.
///
/// The angular transport law and its J-integrals are naturally written in
/// log-time s = t|ln r|; the effective system below runs twice as fast, so
/// τ = s / 2.
pub const LOG_TIME_PER_MODEL_TIME: f64 = 2.0;

/// Half-angle below which a trajectory is stopped and marked numerically cusped.
pub const CUSP_FLOOR: f64 = 1e-14;

/// Model time at which the effective system describes radius `r` at time `t`.
pub fn model_time(t: f64, r: f64) -> f64 {
    t * r.ln().abs() / LOG_TIME_PER_MODEL_TIME
}

/// As [`model_time`], for a radius given by its log-distance `ell = |ln r|`.
pub fn model_time_from_log(t: f64, ell: f64) -> f64 {
    t * ell / LOG_TIME_PER_MODEL_TIME
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveState {
    pub tau: f64,
    /// A: bisector angle.
    pub bisector: f64,
    /// B: corner half-angle.
    pub half_angle: f64,
    pub bisector_rate: f64,
    pub half_angle_rate: f64,
}

impl EffectiveState {
    /// The prescribed state at τ = 0 for initial half-angle `b0`.
    pub fn initial(b0: f64) -> Self {
        Self {
            tau: 0.0,
            bisector: 0.0,
            half_angle: b0,
            bisector_rate: -(4.0 * b0).sin() / PI,
            half_angle_rate: 0.0,
        }
    }

    fn to_array(self) -> [f64; 4] {
        [
            self.bisector,
            self.half_angle,
            self.bisector_rate,
            self.half_angle_rate,
        ]
    }

    fn from_array(tau: f64, y: &[f64; 4]) -> Self {
        Self {
            tau,
            bisector: y[0],
            half_angle: y[1],
            bisector_rate: y[2],
            half_angle_rate: y[3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub b0: f64,
    pub startup_eps: f64,
    pub rel_tol: f64,
    /// Absolute floor of the integrator error scale and the Picard stopping
    /// threshold. Kept tiny because B decays algebraically over many decades.
    pub abs_tol: f64,
    pub tau_max: f64,
}

impl ModelParams {
    pub fn new(b0: f64, tau_max: f64) -> Self {
        Self {
            b0,
            startup_eps: 1e-3,
            rel_tol: 1e-10,
            abs_tol: 1e-30,
            tau_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b0 > 0.0 && self.b0 < FRAC_PI_4) {
            return Err(Error::OutOfRange {
                what: "b0",
                value: self.b0,
                lo: 0.0,
                hi: FRAC_PI_4,
            });
        }
        for (what, v) in [
            ("startup_eps", self.startup_eps),
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("tau_max", self.tau_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!(
                    "{what} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Second derivatives (A″, B″) of the effective system.
pub fn rhs(state: &EffectiveState) -> Result<(f64, f64)> {
    let EffectiveState {
        tau,
        half_angle: b,
        bisector_rate: da,
        half_angle_rate: db,
        ..
    } = *state;
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("rhs needs tau > 0, got {tau}")));
    }
    if !(b > 0.0 && b < FRAC_PI_4) {
        return Err(Error::Domain(format!("half-angle {b} outside (0, pi/4)")));
    }
    Ok(accelerations(tau, b, da, db))
}

fn accelerations(tau: f64, b: f64, da: f64, db: f64) -> (f64, f64) {
    let cot = 1.0 / (2.0 * b).tan();
    let tan = (2.0 * b).tan();
    let ddb = -db / tau + 2.0 * cot * db * db - 2.0 * tan * da * da;
    let dda = -da / tau - (4.0 * b).sin() / (PI * tau) + 2.0 * (cot - tan) * da * db;
    (dda, ddb)
}

/// Q = −τA′/B. Equals τ sin(4B)/(πB) along exact solutions.
pub fn q_of(state: &EffectiveState) -> Result<f64> {
    if state.half_angle == 0.0 {
        return Err(Error::Domain("Q undefined at zero half-angle".into()));
    }
    if state.tau == 0.0 {
        return Ok(0.0);
    }
    Ok(-state.tau * state.bisector_rate / state.half_angle)
}

/// Decay order I = −τB′/B.
pub fn decay_order(state: &EffectiveState) -> Result<f64> {
    if state.half_angle == 0.0 {
        return Err(Error::Domain(
            "decay order undefined at zero half-angle".into(),
        ));
    }
    if state.tau == 0.0 {
        return Ok(0.0);
    }
    Ok(-state.tau * state.half_angle_rate / state.half_angle)
}

/// Sampled solution with cubic Hermite interpolation between samples.
#[derive(Debug, Clone)]
pub struct Trajectory {
    b0: f64,
    samples: Vec<EffectiveState>,
    /// (A″, B″) at each sample.
    accel: Vec<(f64, f64)>,
    startup_samples: usize,
    startup_eps: f64,
    contraction: f64,
    cusped: bool,
}

impl Trajectory {
    /// Wraps externally produced samples (strictly increasing τ). Second
    /// derivatives are estimated by finite differences of the rates.
    pub fn from_samples(b0: f64, samples: Vec<EffectiveState>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InsufficientSamples {
                needed: 2,
                got: samples.len(),
            });
        }
        if samples.windows(2).any(|w| !(w[1].tau > w[0].tau)) {
            return Err(Error::Domain(
                "trajectory samples must have strictly increasing tau".into(),
            ));
        }
        let n = samples.len();
        let accel = (0..n)
            .map(|i| {
                let (l, r) = (i.saturating_sub(1), (i + 1).min(n - 1));
                let dt = samples[r].tau - samples[l].tau;
                (
                    (samples[r].bisector_rate - samples[l].bisector_rate) / dt,
                    (samples[r].half_angle_rate - samples[l].half_angle_rate) / dt,
                )
            })
            .collect();
        Ok(Self {
            b0,
            samples,
            accel,
            startup_samples: 0,
            startup_eps: 0.0,
            contraction: 0.0,
            cusped: false,
        })
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn samples(&self) -> &[EffectiveState] {
        &self.samples
    }

    /// Second derivatives (A″, B″) at each sample.
    pub fn accelerations(&self) -> &[(f64, f64)] {
        &self.accel
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn tau_min(&self) -> f64 {
        self.samples[0].tau
    }

    pub fn tau_max(&self) -> f64 {
        self.samples[self.samples.len() - 1].tau
    }

    /// Number of leading samples produced by the Picard startup.
    pub fn startup_samples(&self) -> usize {
        self.startup_samples
    }

    /// Startup window length actually used (after automatic halving).
    pub fn startup_eps(&self) -> f64 {
        self.startup_eps
    }

    /// Measured contraction factor of the startup iteration.
    pub fn contraction_factor(&self) -> f64 {
        self.contraction
    }

    /// True if integration stopped because B fell below [`CUSP_FLOOR`].
    pub fn is_cusped(&self) -> bool {
        self.cusped
    }

    fn locate(&self, tau: f64) -> Result<usize> {
        let (lo, hi) = (self.tau_min(), self.tau_max());
        if !(tau >= lo && tau <= hi) {
            return Err(Error::OutOfRange {
                what: "tau",
                value: tau,
                lo,
                hi,
            });
        }
        let idx = self.samples.partition_point(|s| s.tau <= tau);
        Ok(idx.clamp(1, self.samples.len() - 1) - 1)
    }

    /// Interpolated state at `tau`.
    pub fn state_at(&self, tau: f64) -> Result<EffectiveState> {
        let i = self.locate(tau)?;
        Ok(self.interpolate(i, tau))
    }

    fn interpolate(&self, i: usize, tau: f64) -> EffectiveState {
        let (s0, s1) = (&self.samples[i], &self.samples[i + 1]);
        let (a0, a1) = (self.accel[i], self.accel[i + 1]);
        let h = s1.tau - s0.tau;
        let x = (tau - s0.tau) / h;
        let herm = |y0: f64, d0: f64, y1: f64, d1: f64| {
            let h00 = (1.0 + 2.0 * x) * (1.0 - x) * (1.0 - x);
            let h10 = x * (1.0 - x) * (1.0 - x);
            let h01 = x * x * (3.0 - 2.0 * x);
            let h11 = x * x * (x - 1.0);
            h00 * y0 + h * h10 * d0 + h01 * y1 + h * h11 * d1
        };
        EffectiveState {
            tau,
            bisector: herm(s0.bisector, s0.bisector_rate, s1.bisector, s1.bisector_rate),
            half_angle: herm(
                s0.half_angle,
                s0.half_angle_rate,
                s1.half_angle,
                s1.half_angle_rate,
            ),
            bisector_rate: herm(s0.bisector_rate, a0.0, s1.bisector_rate, a1.0),
            half_angle_rate: herm(s0.half_angle_rate, a0.1, s1.half_angle_rate, a1.1),
        }
    }

    /// Prefix integrals of `f` along the trajectory, by 4-point Gauss–Legendre
    /// on the Hermite interpolant within each step.
    pub fn cumulative<F>(&self, f: F) -> CumulativeIntegral<'_, F>
    where
        F: Fn(&EffectiveState) -> f64,
    {
        let gl = GaussLegendre::new(4);
        let mut prefix = Vec::with_capacity(self.samples.len());
        prefix.push(0.0);
        let mut acc = 0.0;
        for i in 0..self.samples.len() - 1 {
            let (a, b) = (self.samples[i].tau, self.samples[i + 1].tau);
            acc += gl.integrate(a, b, |t| f(&self.interpolate(i, t)));
            prefix.push(acc);
        }
        CumulativeIntegral {
            traj: self,
            f,
            prefix,
            gl,
        }
    }

    /// CSV export: `tau,A,B,dA,dB,Q,I`, one row per sample.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        table::write_header(w, &["tau", "A", "B", "dA", "dB", "Q", "I"])?;
        for s in &self.samples {
            let q = q_of(s).unwrap_or(f64::NAN);
            let i = decay_order(s).unwrap_or(f64::NAN);
            table::write_reals(
                w,
                &[
                    s.tau,
                    s.bisector,
                    s.half_angle,
                    s.bisector_rate,
                    s.half_angle_rate,
                    q,
                    i,
                ],
            )?;
        }
        Ok(())
    }
}

/// Running integral ∫ f(state(τ′)) dτ′ from the trajectory start.
pub struct CumulativeIntegral<'a, F> {
    traj: &'a Trajectory,
    f: F,
    prefix: Vec<f64>,
    gl: GaussLegendre,
}

impl<F> CumulativeIntegral<'_, F>
where
    F: Fn(&EffectiveState) -> f64,
{
    /// Values at the trajectory samples.
    pub fn at_samples(&self) -> &[f64] {
        &self.prefix
    }

    pub fn at(&self, tau: f64) -> Result<f64> {
        let i = self.traj.locate(tau)?;
        let a = self.traj.samples[i].tau;
        let part = self
            .gl
            .integrate(a, tau, |t| (self.f)(&self.traj.interpolate(i, t)));
        Ok(self.prefix[i] + part)
    }
}

const CHEBYSHEV_ORDER: usize = 24;
const MAX_PICARD_ITERATIONS: usize = 200;
const MAX_EPS_HALVINGS: usize = 30;

/// Startup solution on [0, ε] by Picard iteration on (g, f) = (B′, A′ + sin(4B₀)/π).
///
/// ε starts at `params.startup_eps` and is halved until the measured
/// contraction factor drops below 1/2.
pub fn startup(params: &ModelParams) -> Result<Trajectory> {
    params.validate()?;
    let mut eps = params.startup_eps;
    let mut last = None;
    for _ in 0..=MAX_EPS_HALVINGS {
        let (traj, factor) = picard(params, eps)?;
        if factor < 0.5 {
            return Ok(traj);
        }
        last = Some((traj, factor));
        eps *= 0.5;
    }
    match last {
        Some((traj, factor)) if factor < 1.0 => Ok(traj),
        Some((_, factor)) => Err(Error::NonContraction {
            factor,
            eps: eps * 2.0,
        }),
        None => unreachable!(),
    }
}

fn picard(params: &ModelParams, eps: f64) -> Result<(Trajectory, f64)> {
    let b0 = params.b0;
    let c1 = (4.0 * b0).sin() / PI;
    let grid = ChebyshevGrid::new(CHEBYSHEV_ORDER, eps);
    let tau = &grid.points;
    let n = tau.len();
    let mut g = vec![0.0; n];
    let mut f = vec![0.0; n];
    let mut diffs: Vec<f64> = Vec::new();
    let mut converged = false;
    for _ in 0..MAX_PICARD_ITERATIONS {
        let (g_new, f_new) = picard_map(b0, &grid, &g, &f);
        let diff = g
            .iter()
            .zip(&g_new)
            .chain(f.iter().zip(&f_new))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let scale = g_new
            .iter()
            .chain(&f_new)
            .map(|v| v.abs())
            .fold(c1.abs() * eps, f64::max);
        g = g_new;
        f = f_new;
        diffs.push(diff);
        if diff < params.abs_tol.max(32.0 * f64::EPSILON * (1.0 + scale)) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NotConverged(format!(
            "startup iteration on [0, {eps:.3e}] after {MAX_PICARD_ITERATIONS} sweeps"
        )));
    }
    // Contraction factor from successive differences well above roundoff.
    let floor = diffs.last().copied().unwrap_or(0.0) * 1e3;
    let factor = diffs
        .windows(2)
        .skip(1)
        .filter(|w| w[0] > floor && w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max);

    let big_g = grid.integrate_cumulative(&g);
    let da: Vec<f64> = f.iter().map(|v| v - c1).collect();
    let a = grid.integrate_cumulative(&da);
    let mut samples = Vec::with_capacity(n);
    let mut accel = Vec::with_capacity(n);
    for i in 0..n {
        let s = EffectiveState {
            tau: tau[i],
            bisector: a[i],
            half_angle: b0 + big_g[i],
            bisector_rate: da[i],
            half_angle_rate: g[i],
        };
        accel.push(if i == 0 {
            (0.0, -(2.0 * b0).tan() * c1 * c1)
        } else {
            accelerations(s.tau, s.half_angle, s.bisector_rate, s.half_angle_rate)
        });
        samples.push(s);
    }
    let traj = Trajectory {
        b0,
        samples,
        accel,
        startup_samples: n,
        startup_eps: eps,
        contraction: factor,
        cusped: false,
    };
    Ok((traj, factor))
}

/// One sweep of the fixed-point maps for (g, f) = (B′, A′ + sin(4B₀)/π) on a
/// Chebyshev grid starting at τ = 0.
fn picard_map(b0: f64, grid: &ChebyshevGrid, g: &[f64], f: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let c1 = (4.0 * b0).sin() / PI;
    let tau = &grid.points;
    let n = tau.len();
    // (1/τ)∫₀^τ q, with the limit q(0) at τ = 0.
    let average = |q: &[f64]| -> Vec<f64> {
        grid.integrate_cumulative(q)
            .iter()
            .zip(tau)
            .map(|(c, t)| if *t == 0.0 { q[0] } else { c / t })
            .collect()
    };
    let big_g = grid.integrate_cumulative(g);
    let mut h1 = vec![0.0; n];
    let mut h2 = vec![0.0; n];
    let mut h3 = vec![0.0; n];
    for i in 0..n {
        let two_b = 2.0 * (big_g[i] + b0);
        let (cot, tan) = (1.0 / two_b.tan(), two_b.tan());
        let da = f[i] - c1;
        h1[i] = 2.0 * tau[i] * (cot * g[i] * g[i] - tan * da * da);
        h2[i] = 2.0 * tau[i] * da * g[i] * (cot - tan);
        h3[i] = ((2.0 * two_b).sin() - (4.0 * b0).sin()) / PI;
    }
    let g_new = average(&h1);
    let f_new = average(&h2)
        .iter()
        .zip(average(&h3))
        .map(|(a, b)| a - b)
        .collect();
    (g_new, f_new)
}

/// Full solution on [0, tau_max]: Picard startup, then adaptive
/// Dormand–Prince 5(4) from the end of the startup window.
pub fn integrate(params: &ModelParams) -> Result<Trajectory> {
    let mut traj = startup(params)?;
    let start = *traj.samples.last().expect("startup yields samples");
    if params.tau_max <= start.tau {
        return Ok(traj);
    }
    let b0 = params.b0;
    let mut ctl = StepControl::new(params.rel_tol, params.abs_tol);
    ctl.h_init = Some(0.1 * start.tau);
    let mut violation = None;
    let mut cusped = false;
    let samples = &mut traj.samples;
    let accel = &mut traj.accel;
    dopri5(
        |t, y: &[f64; 4]| {
            if !(t > 0.0 && y[1] > 0.0 && y[1] < FRAC_PI_4) {
                return None;
            }
            let (dda, ddb) = accelerations(t, y[1], y[2], y[3]);
            Some([y[2], y[3], dda, ddb])
        },
        start.tau,
        start.to_array(),
        params.tau_max,
        &ctl,
        |t, y, dy| {
            let s = EffectiveState::from_array(t, y);
            samples.push(s);
            accel.push((dy[2], dy[3]));
            if s.half_angle > b0 * (1.0 + 1e-12) || s.half_angle <= 0.0 {
                violation = Some(s);
                return false;
            }
            if s.half_angle < CUSP_FLOOR {
                cusped = true;
                return false;
            }
            true
        },
    )?;
    if let Some(s) = violation {
        return Err(Error::InvariantViolation {
            invariant: "half-angle within (0, B0]",
            at: s.tau,
            value: s.half_angle,
        });
    }
    traj.cusped = cusped;
    Ok(traj)
}

/// Power-law fit of the decay of B and B′ over a τ window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// δ̂ = −s − 1 where s is the log-log slope of B.
    pub delta: f64,
    pub half_angle_slope: f64,
    /// Log-log slope of |B′|; expected ≤ −2 − δ̂.
    pub rate_slope: f64,
    pub samples: usize,
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Least-squares log-log fits of B and |B′| against τ on `window`.
pub fn estimate_delta(traj: &Trajectory, window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Domain(format!("invalid fit window [{lo}, {hi}]")));
    }
    let inside: Vec<&EffectiveState> = traj
        .samples()
        .iter()
        .filter(|s| s.tau >= lo && s.tau <= hi && s.half_angle > 0.0)
        .collect();
    if inside.len() < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: inside.len(),
        });
    }
    let b: Vec<(f64, f64)> = inside
        .iter()
        .map(|s| (s.tau.ln(), s.half_angle.ln()))
        .collect();
    let db: Vec<(f64, f64)> = inside
        .iter()
        .filter(|s| s.half_angle_rate != 0.0)
        .map(|s| (s.tau.ln(), s.half_angle_rate.abs().ln()))
        .collect();
    if db.len() < 3 {
        return Err(Error::InsufficientSamples {
            needed: 3,
            got: db.len(),
        });
    }
    let s = least_squares_slope(&b);
    Ok(DecayFit {
        delta: -s - 1.0,
        half_angle_slope: s,
        rate_slope: least_squares_slope(&db),
        samples: inside.len(),
    })
}

/// Default δ-fit window for a trajectory ending at `tau_max`.
pub fn default_delta_window(tau_max: f64) -> (f64, f64) {
    (1e3, tau_max.min(1e6))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitEstimate {
    /// A at the end of the trajectory, the A∞ estimate.
    pub value: f64,
    /// ∫|A′| over the last decade of τ.
    pub tail_variation: f64,
}

/// Estimate of A∞ with a Cauchy certificate over the last decade of τ.
pub fn limit_a(traj: &Trajectory, tol: f64) -> Result<LimitEstimate> {
    let end = traj.tau_max();
    let start = (end / 10.0).max(traj.tau_min());
    // Start one sample early so the decade is fully covered.
    let first = traj
        .samples()
        .partition_point(|s| s.tau < start)
        .saturating_sub(1);
    let tail: Vec<&EffectiveState> = traj.samples()[first..].iter().collect();
    if tail.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: tail.len(),
        });
    }
    let mut variation = 0.0;
    for w in tail.windows(2) {
        variation +=
            0.5 * (w[1].tau - w[0].tau) * (w[0].bisector_rate.abs() + w[1].bisector_rate.abs());
    }
    let last = tail[tail.len() - 1];
    if variation > tol || last.bisector_rate.abs() * last.tau >= tol * last.bisector.abs() {
        return Err(Error::NotConverged(format!(
            "A tail variation {variation:.3e} over [{start:.3e}, {end:.3e}] exceeds {tol:.1e}"
        )));
    }
    Ok(LimitEstimate {
        value: last.bisector,
        tail_variation: variation,
    })
}
