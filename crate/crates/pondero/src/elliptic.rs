//! Elliptic integrals and Jacobi elliptic functions in the *parameter*
//! convention.
//!
//! Every routine here takes the parameter `m = k²`, not the modulus `k`.
//! This matches the convention used throughout the trajectory formulas in
//! [`crate::classical`], where the bound and unbound branches pass `1/κ²`
//! and `κ²` respectively, both of which land in `[0, 1]`. Arguments outside
//! `[0, 1]` are rejected rather than transformed.
//!
//! The complete integral `K(m)` is evaluated with the arithmetic–geometric
//! mean; the incomplete integral `F(φ, m)` and the amplitude `am(x, m)` use
//! the ascending/descending Landen (AGM phase) recurrences. All of them
//! converge quadratically and reach a few ulps of `f64` for `m` up to
//! `1 − 1e-9`.

use crate::{Error, Result};
use core::f64::consts::{FRAC_PI_2, PI};

#[allow(unused_imports)]
use num_traits::Float;

/// Iteration cap for the AGM loops. The mean converges quadratically, so
/// well-conditioned inputs finish in under ten rounds; the cap only guards
/// against NaN poisoning.
const MAX_ITER: usize = 32;

fn check_parameter(m: f64, allow_one: bool) -> Result<()> {
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::Domain("elliptic parameter m outside [0, 1]"));
    }
    if !allow_one && m == 1.0 {
        return Err(Error::Domain("elliptic parameter m = 1"));
    }
    Ok(())
}

/// Complete elliptic integral of the first kind, `K(m) = F(π/2, m)`.
///
/// `K(0) = π/2` and `K(m)` diverges logarithmically as `m → 1`; `m = 1` is
/// rejected. Computed as `π / (2·agm(1, √(1−m)))`.
pub fn complete_k(m: f64) -> Result<f64> {
    check_parameter(m, false)?;
    let mut a = 1.0_f64;
    let mut b = (1.0 - m).sqrt();
    for _ in 0..MAX_ITER {
        if (a - b).abs() <= f64::EPSILON * a {
            break;
        }
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    Ok(PI / (2.0 * a))
}

/// Incomplete elliptic integral of the first kind `F(φ, m)`, extended to all
/// real `φ` through the quasi-addition rule `F(φ + kπ, m) = F(φ, m) + 2kK(m)`.
///
/// For `m = 1` the integral closes to `artanh(sin φ)`, which diverges at
/// `|φ| = π/2`; such arguments are rejected.
pub fn incomplete_f(phi: f64, m: f64) -> Result<f64> {
    check_parameter(m, true)?;
    if m == 0.0 {
        return Ok(phi);
    }
    if m == 1.0 {
        if phi.abs() >= FRAC_PI_2 {
            return Err(Error::Domain("F(phi, 1) diverges for |phi| >= pi/2"));
        }
        return Ok(phi.sin().atanh());
    }
    // Reduce to a half-period: phi = n*pi + r with r in [-pi/2, pi/2].
    let n = (phi / PI).round_ties_even();
    let r = phi - n * PI;
    let f = if r < 0.0 {
        -half_period_f(-r, m)
    } else {
        half_period_f(r, m)
    };
    if n == 0.0 {
        Ok(f)
    } else {
        Ok(f + 2.0 * n * complete_k(m)?)
    }
}

/// `F(r, m)` for `r` in `[0, π/2]` and `m` in `(0, 1)`, by the ascending
/// Landen phase recurrence: the amplitude roughly doubles each round,
/// `tan(φ_{n+1} − φ_n) = (b_n/a_n)·tan φ_n`, while `(a, b)` walk the AGM.
/// The winding term keeps the arctangent on the right branch.
fn half_period_f(r: f64, m: f64) -> f64 {
    debug_assert!((0.0..=FRAC_PI_2 + 1e-9).contains(&r));
    let mut a = 1.0_f64;
    let mut b = (1.0 - m).sqrt();
    let mut phi = r;
    let mut scale = 1.0_f64;
    for _ in 0..MAX_ITER {
        let winding = (phi / PI).round_ties_even();
        phi += (b / a * phi.tan()).atan() + winding * PI;
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        scale *= 2.0;
        if (a - b).abs() <= f64::EPSILON * a {
            break;
        }
    }
    phi / (scale * a)
}

/// Jacobi amplitude `am(x, m)`, the inverse of `F`: `F(am(x, m), m) = x`.
///
/// Extended to all real `x` through the pseudo-periodicity
/// `am(x + 2K, m) = am(x, m) + π`. `m = 1` is rejected here because the
/// amplitude degenerates into the Gudermannian; use [`separatrix_am`] for
/// that limit.
pub fn am(x: f64, m: f64) -> Result<f64> {
    check_parameter(m, false)?;
    if m == 0.0 {
        return Ok(x);
    }
    let k = complete_k(m)?;
    let n = (x / (2.0 * k)).round_ties_even();
    let xr = x - n * 2.0 * k;
    Ok(reduced_am(xr, m) + n * PI)
}

/// `am(x, m)` for `x` in `[-K, K]`, by the descending Landen (Gauss) phase
/// recurrence of the AGM: run the mean upward recording `c_i = (a−b)/2`,
/// seed `φ_N = 2^N a_N x`, then unwind
/// `φ_{i−1} = (φ_i + asin((c_i/a_i)·sin φ_i)) / 2`.
fn reduced_am(x: f64, m: f64) -> f64 {
    let mut a = [0.0_f64; MAX_ITER];
    let mut c = [0.0_f64; MAX_ITER];
    let mut an = 1.0_f64;
    let mut bn = (1.0 - m).sqrt();
    let mut levels = 0;
    for i in 0..MAX_ITER {
        let next_a = 0.5 * (an + bn);
        c[i] = 0.5 * (an - bn);
        bn = (an * bn).sqrt();
        an = next_a;
        a[i] = an;
        levels = i + 1;
        if c[i].abs() <= f64::EPSILON * an {
            break;
        }
    }
    let mut phi = libm_exp2(levels as i32) * an * x;
    for i in (0..levels).rev() {
        phi = 0.5 * (phi + (c[i] / a[i] * phi.sin()).asin());
    }
    phi
}

/// `2^n` as an `f64` without touching the float environment.
fn libm_exp2(n: i32) -> f64 {
    f64::from_bits(((1023 + n) as u64) << 52)
}

/// The three Jacobi elliptic functions evaluated together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiElliptic {
    pub sn: f64,
    pub cn: f64,
    pub dn: f64,
}

/// Evaluates `sn`, `cn` and `dn` at `(x, m)` in one pass via the amplitude:
/// `sn = sin am`, `cn = cos am`, `dn = √(1 − m·sn²)`.
///
/// `dn` is formed as `√((1−m) + m·cn²)`, which is the same identity without
/// the cancellation near `sn² → 1` for `m` close to one.
pub fn jacobi_sncndn(x: f64, m: f64) -> Result<JacobiElliptic> {
    let phi = am(x, m)?;
    let (sn, cn) = phi.sin_cos();
    let dn = ((1.0 - m) + m * cn * cn).sqrt();
    Ok(JacobiElliptic { sn, cn, dn })
}

/// Jacobi `sn(x, m)`.
pub fn jacobi_sn(x: f64, m: f64) -> Result<f64> {
    Ok(jacobi_sncndn(x, m)?.sn)
}

/// Jacobi `cn(x, m)`.
pub fn jacobi_cn(x: f64, m: f64) -> Result<f64> {
    Ok(jacobi_sncndn(x, m)?.cn)
}

/// Jacobi `dn(x, m)`.
pub fn jacobi_dn(x: f64, m: f64) -> Result<f64> {
    Ok(jacobi_sncndn(x, m)?.dn)
}

/// The `m → 1` limit of the Jacobi amplitude: the Gudermannian function
/// `gd(x) = 2·arctan(eˣ) − π/2`.
///
/// Strictly increasing, odd, and saturating at `±π/2`; this is the amplitude
/// along the separatrix, where the period has already diverged.
pub fn separatrix_am(x: f64) -> f64 {
    2.0 * x.exp().atan() - FRAC_PI_2
}
