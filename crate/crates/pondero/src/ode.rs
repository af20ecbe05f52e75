//! Embedded Dormand–Prince 5(4) integrator with a PI step controller, plus a
//! fixed-step classical Runge–Kutta fallback.
//!
//! The adaptive driver is generic over the state dimension so the same code
//! serves scalar convergence tests and the six-dimensional phase space of the
//! particle tracer. Error control is per component: each entry is normalized
//! by `abs_tol[i] + rel_tol · max(|y_i|, |y_next_i|)` and the step is accepted
//! when the RMS of the normalized errors is at most one.

use crate::error::{Error, Result};

/// Tolerances and budget for one adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions<const D: usize> {
    /// Relative tolerance applied against the larger of the old and new
    /// state magnitudes, per component.
    pub rel_tol: f64,
    /// Absolute error floor per component; keeps the control meaningful when
    /// a component oscillates through zero.
    pub abs_tol: [f64; D],
    /// Hard cap on accepted-plus-rejected steps.
    pub max_steps: u64,
}

impl<const D: usize> AdaptiveOptions<D> {
    pub fn new(rel_tol: f64, abs_tol: [f64; D]) -> Self {
        Self { rel_tol, abs_tol, max_steps: 200_000_000 }
    }
}

/// Step bookkeeping returned alongside the final state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: u64,
    pub rejected: u64,
}

/// Final state of an adaptive run plus the controller's step suggestion,
/// which callers can feed into a follow-up segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integration<const D: usize> {
    pub y: [f64; D],
    pub h_next: f64,
    pub stats: StepStats,
}

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
const ALPHA: f64 = 0.17;
const BETA: f64 = 0.04;

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1` (either direction).
///
/// `h0` seeds the controller; it is clamped to the span and its sign is
/// fixed internally. Fails with [`Error::Stiffness`] when the accepted step
/// collapses below the floating-point resolution of the current time, and
/// with [`Error::Truncation`] when the step budget is exhausted.
pub fn integrate_adaptive<const D: usize, F>(
    f: &F,
    t0: f64,
    y0: [f64; D],
    t1: f64,
    h0: f64,
    opt: &AdaptiveOptions<D>,
) -> Result<Integration<D>>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    if !(t0.is_finite() && t1.is_finite() && h0.is_finite() && h0 != 0.0) {
        return Err(Error::Domain("integration span and initial step must be finite"));
    }
    if !(opt.rel_tol > 0.0) || opt.abs_tol.iter().any(|&a| !(a >= 0.0)) {
        return Err(Error::Domain("tolerances must be positive"));
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(Integration { y: y0, h_next: h0, stats: StepStats::default() });
    }
    let dir = if span > 0.0 { 1.0 } else { -1.0 };
    let mut h = (h0.abs().min(span.abs())) * dir;
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut err_prev: f64 = 1.0;
    let mut stats = StepStats::default();

    while (t1 - t) * dir > 0.0 {
        if stats.accepted + stats.rejected >= opt.max_steps {
            return Err(Error::Truncation { limit: opt.max_steps as usize });
        }
        if (t1 - t) * dir < h.abs() {
            h = t1 - t;
        }
        if h.abs() <= t.abs() * (f64::EPSILON * 16.0) {
            return Err(Error::Stiffness { t });
        }

        let (y_new, err_vec) = dp54_stage(f, t, &y, h, &k1);
        let mut sum = 0.0;
        for i in 0..D {
            let sc = opt.abs_tol[i] + opt.rel_tol * y[i].abs().max(y_new[i].abs());
            let r = err_vec[i] / sc;
            sum += r * r;
        }
        let err = (sum / D as f64).sqrt();

        if err <= 1.0 && err.is_finite() {
            t += h;
            y = y_new;
            k1 = f(t, &y);
            stats.accepted += 1;
            let fac = SAFETY * err.max(1e-30).powf(-ALPHA) * err_prev.powf(BETA);
            h *= fac.clamp(FAC_MIN, FAC_MAX);
            err_prev = err.max(1e-4);
        } else {
            stats.rejected += 1;
            let fac = if err.is_finite() {
                (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0)
            } else {
                FAC_MIN
            };
            h *= fac;
        }
    }
    Ok(Integration { y, h_next: h, stats })
}

/// One Dormand–Prince 5(4) stage: returns the fifth-order update and the
/// embedded error estimate. `k1 = f(t, y)` is passed in so accepted steps
/// reuse the first-same-as-last evaluation.
fn dp54_stage<const D: usize, F>(
    f: &F,
    t: f64,
    y: &[f64; D],
    h: f64,
    k1: &[f64; D],
) -> ([f64; D], [f64; D])
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let stage = |c: f64, coeffs: &[(f64, &[f64; D])]| {
        let mut arg = *y;
        for i in 0..D {
            for &(a, k) in coeffs {
                arg[i] += h * a * k[i];
            }
        }
        f(t + c * h, &arg)
    };

    let k2 = stage(1.0 / 5.0, &[(1.0 / 5.0, k1)]);
    let k3 = stage(3.0 / 10.0, &[(3.0 / 40.0, k1), (9.0 / 40.0, &k2)]);
    let k4 = stage(4.0 / 5.0, &[(44.0 / 45.0, k1), (-56.0 / 15.0, &k2), (32.0 / 9.0, &k3)]);
    let k5 = stage(
        8.0 / 9.0,
        &[
            (19372.0 / 6561.0, k1),
            (-25360.0 / 2187.0, &k2),
            (64448.0 / 6561.0, &k3),
            (-212.0 / 729.0, &k4),
        ],
    );
    let k6 = stage(
        1.0,
        &[
            (9017.0 / 3168.0, k1),
            (-355.0 / 33.0, &k2),
            (46732.0 / 5247.0, &k3),
            (49.0 / 176.0, &k4),
            (-5103.0 / 18656.0, &k5),
        ],
    );

    let mut y_new = *y;
    for i in 0..D {
        y_new[i] += h
            * (35.0 / 384.0 * k1[i] + 500.0 / 1113.0 * k3[i] + 125.0 / 192.0 * k4[i]
                - 2187.0 / 6784.0 * k5[i]
                + 11.0 / 84.0 * k6[i]);
    }
    let k7 = f(t + h, &y_new);

    let mut err = [0.0; D];
    for i in 0..D {
        err[i] = h
            * (71.0 / 57600.0 * k1[i] - 71.0 / 16695.0 * k3[i] + 71.0 / 1920.0 * k4[i]
                - 17253.0 / 339200.0 * k5[i]
                + 22.0 / 525.0 * k6[i]
                - 1.0 / 40.0 * k7[i]);
    }
    (y_new, err)
}

/// Fixed-step fourth-order Runge–Kutta over `n_steps` equal steps; the
/// deterministic-regression companion to the adaptive driver.
#[allow(dead_code)]
pub fn integrate_rk4<const D: usize, F>(
    f: &F,
    t0: f64,
    y0: [f64; D],
    t1: f64,
    n_steps: u64,
) -> Result<[f64; D]>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    if n_steps == 0 {
        return Err(Error::Domain("step count must be >= 1"));
    }
    if !(t0.is_finite() && t1.is_finite()) {
        return Err(Error::Domain("integration span must be finite"));
    }
    let h = (t1 - t0) / n_steps as f64;
    let mut y = y0;
    for s in 0..n_steps {
        let t = t0 + s as f64 * h;
        let k1 = f(t, &y);
        let mut a = y;
        for i in 0..D {
            a[i] += 0.5 * h * k1[i];
        }
        let k2 = f(t + 0.5 * h, &a);
        let mut b = y;
        for i in 0..D {
            b[i] += 0.5 * h * k2[i];
        }
        let k3 = f(t + 0.5 * h, &b);
        let mut c = y;
        for i in 0..D {
            c[i] += h * k3[i];
        }
        let k4 = f(t + h, &c);
        for i in 0..D {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    Ok(y)
}
