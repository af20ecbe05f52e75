//! Shared test oracle: an adaptive Dormand–Prince 5(4) integrator kept
//! deliberately independent of the library's own numerics, plus the pendulum
//! right-hand side used by the trajectory equivalence tests.
#![allow(dead_code)]

use core::f64::consts::PI;

/// Integrates `y' = f(t, y)` from `t0` to `t1` with an embedded 5(4) pair
/// and a standard step controller. Panics if the step count explodes — this
/// is a test oracle, not production code.
pub fn integrate<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    t0: f64,
    y0: [f64; N],
    t1: f64,
    rtol: f64,
    atol: [f64; N],
) -> [f64; N] {
    assert!(t1 >= t0);
    if t1 == t0 {
        return y0;
    }
    let mut t = t0;
    let mut y = y0;
    let mut h = ((t1 - t0) * 1e-6).max(1e-18);
    let mut steps = 0u64;
    while t < t1 {
        h = h.min(t1 - t);
        let (y_next, err) = dp54_step(&f, t, &y, h);
        let mut norm = 0.0;
        for i in 0..N {
            let sc = atol[i] + rtol * y[i].abs().max(y_next[i].abs());
            norm += (err[i] / sc) * (err[i] / sc);
        }
        norm = (norm / N as f64).sqrt();
        if norm <= 1.0 {
            t += h;
            y = y_next;
        }
        let factor = if norm == 0.0 {
            5.0
        } else {
            (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        h *= factor;
        steps += 1;
        assert!(steps < 50_000_000, "oracle integrator failed to converge");
    }
    y
}

fn dp54_step<const N: usize>(
    f: &impl Fn(f64, &[f64; N]) -> [f64; N],
    t: f64,
    y: &[f64; N],
    h: f64,
) -> ([f64; N], [f64; N]) {
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    // b − b̂: difference between the 5th- and 4th-order weights.
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let mut k = [[0.0; N]; 7];
    k[0] = f(t, y);
    for s in 1..7 {
        let mut ys = *y;
        for i in 0..N {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(s) {
                acc += A[s][j] * kj[i];
            }
            ys[i] += h * acc;
        }
        k[s] = f(t + C[s] * h, &ys);
    }
    // The 7th stage already evaluates at the 5th-order solution (FSAL), so
    // the A[6] row doubles as the solution weights.
    let mut y_next = *y;
    let mut err = [0.0; N];
    for i in 0..N {
        let mut acc = 0.0;
        let mut e = 0.0;
        for s in 0..7 {
            if s < 6 {
                acc += A[6][s] * k[s][i];
            }
            e += E[s] * k[s][i];
        }
        y_next[i] += h * acc;
        err[i] = h * e;
    }
    (y_next, err)
}

/// Pendulum equation in the potential rest frame:
/// `q̈ = −(πA/(mλ))·sin(2πq/λ)`, state `[q, q̇]`.
pub fn pendulum_rhs(a: f64, lambda: f64, m_e: f64) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
    let coeff = -PI * a / (m_e * lambda);
    move |_t, y| [y[1], coeff * (2.0 * PI * y[0] / lambda).sin()]
}
