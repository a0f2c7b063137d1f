//! Adaptive Dormand–Prince 5(4) stepping for small fixed-size systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl StepControl {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            h_init: None,
            h_min: 0.0,
            h_max: f64::INFINITY,
            max_steps: 10_000_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combo<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        *o += h * s;
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end` (either direction).
///
/// `f` returns `None` when the state leaves its domain; the step is then
/// rejected and retried with a smaller size. `on_accept(t, y, y')` is called
/// after every accepted step and may return `false` to stop early.
/// Returns the final time and state.
pub(crate) fn dopri5<const N: usize, F, S>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    ctl: &StepControl,
    mut on_accept: S,
) -> Result<(f64, [f64; N])>
where
    F: FnMut(f64, &[f64; N]) -> Option<[f64; N]>,
    S: FnMut(f64, &[f64; N], &[f64; N]) -> bool,
{
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let span = (t_end - t0).abs();
    if span == 0.0 {
        return Ok((t0, y0));
    }
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y)
        .ok_or_else(|| Error::Domain(format!("initial state outside domain at t = {t0}")))?;

    let scale =
        |y: &[f64; N], z: &[f64; N], i: usize| ctl.atol + ctl.rtol * y[i].abs().max(z[i].abs());
    let mut h = match ctl.h_init {
        Some(h) => h.min(span),
        None => {
            let mut d0: f64 = 0.0;
            let mut d1: f64 = 0.0;
            for i in 0..N {
                let sc = scale(&y, &y, i);
                d0 = d0.max(y[i].abs() / sc);
                d1 = d1.max(k1[i].abs() / sc);
            }
            let h0 = if d0 < 1e-5 || d1 < 1e-5 {
                1e-6
            } else {
                0.01 * d0 / d1
            };
            h0.min(span)
        }
    }
    .min(ctl.h_max);

    let mut steps = 0usize;
    let mut last_rejected = false;
    while (t_end - t) * dir > 0.0 {
        if steps >= ctl.max_steps {
            return Err(Error::StepFailure { t, step: h });
        }
        let remaining = (t_end - t).abs();
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        if h < ctl.h_min || h <= f64::EPSILON * t.abs().max(1e-300) {
            return Err(Error::StepFailure { t, step: h });
        }
        let hs = h * dir;
        let stages = (|| {
            let k2 = f(t + C2 * hs, &combo(&y, hs, &[(A21, &k1)]))?;
            let k3 = f(t + C3 * hs, &combo(&y, hs, &[(A31, &k1), (A32, &k2)]))?;
            let k4 = f(
                t + C4 * hs,
                &combo(&y, hs, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            )?;
            let k5 = f(
                t + C5 * hs,
                &combo(&y, hs, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            )?;
            let k6 = f(
                t + hs,
                &combo(
                    &y,
                    hs,
                    &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
                ),
            )?;
            let y_new = combo(
                &y,
                hs,
                &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
            );
            let k7 = f(if last { t_end } else { t + hs }, &y_new)?;
            Some((k3, k4, k5, k6, k7, y_new))
        })();
        let Some((k3, k4, k5, k6, k7, y_new)) = stages else {
            h *= 0.25;
            last_rejected = true;
            continue;
        };
        let mut err: f64 = 0.0;
        for i in 0..N {
            let e =
                hs * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            err = err.max(e.abs() / scale(&y, &y_new, i));
        }
        if !err.is_finite() {
            h *= 0.25;
            last_rejected = true;
            continue;
        }
        if err <= 1.0 {
            t = if last { t_end } else { t + hs };
            y = y_new;
            k1 = k7;
            steps += 1;
            if !on_accept(t, &y, &k1) {
                return Ok((t, y));
            }
            let mut fac = if err == 0.0 {
                5.0
            } else {
                0.9 * err.powf(-0.2)
            };
            fac = fac.clamp(0.2, 5.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = (h * fac).min(ctl.h_max);
            last_rejected = false;
        } else {
            let fac = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            h *= fac;
            last_rejected = true;
        }
    }
    Ok((t, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_period() {
        let ctl = StepControl::new(1e-11, 1e-13);
        let (t, y) = dopri5(
            |_, y: &[f64; 2]| Some([y[1], -y[0]]),
            0.0,
            [1.0, 0.0],
            2.0 * std::f64::consts::PI,
            &ctl,
            |_, _, _| true,
        )
        .unwrap();
        assert_eq!(t, 2.0 * std::f64::consts::PI);
        assert!((y[0] - 1.0).abs() < 1e-9 && y[1].abs() < 1e-9);
    }

    #[test]
    fn backward_integration_of_exponential() {
        let ctl = StepControl::new(1e-12, 1e-14);
        let (_, y) = dopri5(
            |_, y: &[f64; 1]| Some([y[0]]),
            1.0,
            [1.0f64.exp()],
            0.0,
            &ctl,
            |_, _, _| true,
        )
        .unwrap();
        assert!((y[0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn domain_failures_shrink_the_step() {
        // sqrt(1 - t) blows up past t = 1; stop there is not requested, so the
        // integrator must never evaluate beyond the domain and finally fails.
        let ctl = StepControl::new(1e-10, 1e-12);
        let res = dopri5(
            |t, _: &[f64; 1]| {
                if t <= 1.0 {
                    Some([-0.5 / (1.0 - t).max(1e-300).sqrt()])
                } else {
                    None
                }
            },
            0.0,
            [1.0],
            2.0,
            &ctl,
            |_, _, _| true,
        );
        assert!(matches!(res, Err(Error::StepFailure { .. })));
    }
}
