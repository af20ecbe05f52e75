//! Closed-form classical dynamics in the rest frame of the travelling
//! potential.
//!
//! With `q = z − v_g·t` the equation of motion reduces to a pendulum,
//! `q̈ + (πA/(mλ))·sin(2πq/λ) = 0`, and every orbit is classified by the
//! single parameter
//!
//! ```text
//! κ² = 1 / (m·δv₀²/(2A) + sin²(πz₀/λ))
//! ```
//!
//! `κ > 1` — trapped within one spatial period (bound); `κ < 1` — drifting
//! across periods (unbound); `κ = 1` — the separatrix. Trajectories are
//! expressed through Jacobi elliptic functions with parameter `κ²` or `1/κ²`,
//! so all elliptic calls stay inside the `[0, 1]` parameter domain.

use crate::beatwave::{PhysicalConstants, PotentialParams};
use crate::elliptic;
use crate::{Error, Result};
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

/// Relative half-width of the band around `κ = 1` treated as the separatrix.
pub const SEPARATRIX_TOL: f64 = 1e-12;

/// Initial state in the potential's rest frame at `t = 0`.
///
/// `z0` is stored canonically wrapped into `[−λ/2, λ/2)`; `delta_v0` is the
/// velocity relative to the frame. `sgn(δv₀ = 0)` is taken as `+1`
/// everywhere; for orbits launched at a turning point the two signs describe
/// the same motion, so the convention is immaterial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialCondition {
    pub z0: f64,
    pub delta_v0: f64,
}

impl InitialCondition {
    /// Wraps `z0` into `[−λ/2, λ/2)` and validates finiteness.
    pub fn new(z0: f64, delta_v0: f64, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Domain("lambda must be > 0"));
        }
        if !z0.is_finite() || !delta_v0.is_finite() {
            return Err(Error::Domain("initial condition must be finite"));
        }
        let wrapped = z0 - lambda * (z0 / lambda + 0.5).floor();
        Ok(Self { z0: wrapped, delta_v0 })
    }

    fn sign(&self) -> f64 {
        if self.delta_v0 < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

/// Orbit classification relative to the separatrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryClass {
    Bound,
    Unbound,
    Separatrix,
}

/// The classification parameter `κ`; `+∞` marks the rest-at-minimum state
/// `z₀ = 0`, `δv₀ = 0`, for which Eq.-style formulas would hit `0/0`.
pub fn kappa(ic: &InitialCondition, pot: &PotentialParams) -> Result<f64> {
    if !(pot.a > 0.0) {
        return Err(Error::Domain("kappa requires amplitude A > 0"));
    }
    let m_e = PhysicalConstants::DEFAULT.m_e;
    let s = (PI * ic.z0 / pot.lambda).sin();
    let denom = m_e * ic.delta_v0 * ic.delta_v0 / (2.0 * pot.a) + s * s;
    if denom == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / denom.sqrt())
}

/// Classifies an orbit by comparing `κ` against `1` with a relative
/// tolerance band (default [`SEPARATRIX_TOL`]).
pub fn classify(kappa: f64, tol: f64) -> TrajectoryClass {
    if kappa > 1.0 + tol {
        TrajectoryClass::Bound
    } else if kappa < 1.0 - tol {
        TrajectoryClass::Unbound
    } else {
        TrajectoryClass::Separatrix
    }
}

/// Rest-frame velocity for a lab-frame kinetic-energy offset `ΔE₀`:
/// `δv₀ = −v_g + √(v_g² + 2ΔE₀/m)`. Only the `+` root keeps electrons
/// co-propagating with the wave; `δv₀` then shares the sign of `ΔE₀`.
pub fn delta_v_from_energy_offset(
    de0: f64,
    v_g: f64,
    constants: &PhysicalConstants,
) -> Result<f64> {
    let radicand = v_g * v_g + 2.0 * de0 / constants.m_e;
    if radicand < 0.0 {
        return Err(Error::Domain("energy offset exceeds total kinetic energy"));
    }
    Ok(-v_g + radicand.sqrt())
}

/// Lab-frame kinetic-energy offset of a particle moving at `v_g + q̇`:
/// `ΔE = (m/2)[(v_g + q̇)² − v_g²]`.
pub fn energy_offset(qdot: f64, v_g: f64, constants: &PhysicalConstants) -> f64 {
    0.5 * constants.m_e * ((v_g + qdot) * (v_g + qdot) - v_g * v_g)
}

/// A fully precomputed closed-form trajectory. Evaluation at any `t` is a
/// couple of elliptic calls; the struct is immutable and thread-safe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticTrajectory {
    pub params: PotentialParams,
    pub ic: InitialCondition,
    pub kappa: f64,
    pub class: TrajectoryClass,
    /// The constant `F(⋯)` phase entering the elliptic argument.
    pub phase0: f64,
    /// `sgn(δv₀)` with `sgn(0) := +1`.
    pub sign: f64,
    /// d(elliptic argument)/dt [1/s].
    rate: f64,
    /// Elliptic parameter passed to the Jacobi routines: `κ²` (unbound) or
    /// `1/κ²` (bound); unused on the separatrix and for the rest sentinel.
    m_ell: f64,
}

/// Builds the closed-form trajectory for an initial condition, selecting the
/// bound, unbound, separatrix or rest-at-minimum branch.
pub fn build_trajectory(
    ic: &InitialCondition,
    pot: &PotentialParams,
) -> Result<AnalyticTrajectory> {
    let m_e = PhysicalConstants::DEFAULT.m_e;
    let k = kappa(ic, pot)?;
    let class = classify(k, SEPARATRIX_TOL);
    let sign = ic.sign();
    let v_scale = (2.0 * pot.a / m_e).sqrt();
    let theta0 = PI * ic.z0 / pot.lambda;

    let (phase0, rate, m_ell) = if k.is_infinite() {
        // Rest at the co-moving minimum: q(t) ≡ 0.
        (0.0, 0.0, 0.0)
    } else {
        match class {
            TrajectoryClass::Unbound => {
                let m = k * k;
                let rate = sign * PI / pot.lambda * v_scale / k;
                (elliptic::incomplete_f(theta0, m)?, rate, m)
            }
            TrajectoryClass::Bound => {
                let m = 1.0 / (k * k);
                let rate = sign * PI / pot.lambda * v_scale;
                // |κ·sin θ₀| ≤ 1 is guaranteed by the definition of κ;
                // clamp only shaves the last-ulp overshoot.
                let arg = (k * theta0.sin()).clamp(-1.0, 1.0);
                (elliptic::incomplete_f(arg.asin(), m)?, rate, m)
            }
            TrajectoryClass::Separatrix => {
                let rate = sign * PI / pot.lambda * v_scale;
                // gd⁻¹(θ₀) = artanh(sin θ₀); ±∞ at the potential maxima,
                // which correctly freezes the orbit there.
                (theta0.sin().atanh(), rate, 1.0)
            }
        }
    };

    Ok(AnalyticTrajectory {
        params: *pot,
        ic: *ic,
        kappa: k,
        class,
        phase0,
        sign,
        rate,
        m_ell,
    })
}

/// Rest-frame position `q(t)`.
pub fn eval_q(traj: &AnalyticTrajectory, t: f64) -> Result<f64> {
    if traj.kappa.is_infinite() {
        return Ok(0.0);
    }
    let u = traj.rate * t + traj.phase0;
    let lam_over_pi = traj.params.lambda / PI;
    match traj.class {
        TrajectoryClass::Unbound => Ok(lam_over_pi * elliptic::am(u, traj.m_ell)?),
        TrajectoryClass::Bound => {
            let sn = elliptic::jacobi_sn(u, traj.m_ell)?;
            Ok(lam_over_pi * (sn / traj.kappa).clamp(-1.0, 1.0).asin())
        }
        TrajectoryClass::Separatrix => Ok(lam_over_pi * elliptic::separatrix_am(u)),
    }
}

/// Rest-frame velocity `q̇(t)`, from the analytic derivatives of the
/// closed forms: `dn` on the unbound branch, `cn` on the bound branch and
/// `sech` on the separatrix. No square-root sign tracking is involved.
pub fn eval_qdot(traj: &AnalyticTrajectory, t: f64) -> Result<f64> {
    if traj.kappa.is_infinite() {
        return Ok(0.0);
    }
    let m_e = PhysicalConstants::DEFAULT.m_e;
    let v_scale = (2.0 * traj.params.a / m_e).sqrt();
    let u = traj.rate * t + traj.phase0;
    match traj.class {
        TrajectoryClass::Unbound => {
            Ok(traj.sign * v_scale / traj.kappa * elliptic::jacobi_dn(u, traj.m_ell)?)
        }
        TrajectoryClass::Bound => {
            Ok(traj.sign * v_scale / traj.kappa * elliptic::jacobi_cn(u, traj.m_ell)?)
        }
        TrajectoryClass::Separatrix => {
            // sech(u) → 0 as |u| → ∞, including the frozen-at-maximum case.
            Ok(traj.sign * v_scale / u.cosh())
        }
    }
}

/// Largest rest-frame excursion of a trapped orbit,
/// `q_max = (λ/π)·arcsin(1/κ)`; on the separatrix this is `λ/2`, and the
/// rest-at-minimum sentinel gives `0`.
pub fn turning_point(ic: &InitialCondition, pot: &PotentialParams) -> Result<f64> {
    let k = kappa(ic, pot)?;
    match classify(k, SEPARATRIX_TOL) {
        TrajectoryClass::Unbound => Err(Error::Domain("unbound orbit has no turning point")),
        TrajectoryClass::Separatrix => Ok(0.5 * pot.lambda),
        TrajectoryClass::Bound => Ok(pot.lambda / PI * (1.0 / k).asin()),
    }
}

/// Oscillation (or lattice-crossing) period:
/// `T = (λκ/π)·√(2m/A)·K(κ²)` for unbound and `T = (2λ/π)·√(2m/A)·K(1/κ²)`
/// for bound orbits. Bound orbits return to `q`; unbound orbits advance by
/// one period, `q(t+T) = q(t) ± λ`. Diverges on the separatrix.
pub fn period(ic: &InitialCondition, pot: &PotentialParams) -> Result<f64> {
    let k = kappa(ic, pot)?;
    let m_e = PhysicalConstants::DEFAULT.m_e;
    let t_scale = pot.lambda / PI * (2.0 * m_e / pot.a).sqrt();
    match classify(k, SEPARATRIX_TOL) {
        TrajectoryClass::Separatrix => Err(Error::InfinitePeriod),
        TrajectoryClass::Unbound => Ok(t_scale * k * elliptic::complete_k(k * k)?),
        TrajectoryClass::Bound => {
            // 1/κ² underflows to exactly 0 at the κ = ∞ sentinel, where
            // K(0) = π/2 recovers the linearized period λ√(2m/A).
            Ok(2.0 * t_scale * elliptic::complete_k(1.0 / (k * k))?)
        }
    }
}

/// Period of the linearized pendulum, `T_lin = λ·√(2m/A)`; the `κ → ∞`
/// limit of [`period`] and the natural time unit of the lattice.
pub fn linearized_period(pot: &PotentialParams) -> f64 {
    pot.lambda * (2.0 * PhysicalConstants::DEFAULT.m_e / pot.a).sqrt()
}

/// Smallest amplitude that traps an electron released at `z0` with
/// lab-frame energy offset `dE0`:
/// `A_crit = m/(2cos²(πz₀/λ)) · (√(v_g² + 2ΔE₀/m) − v_g)²`.
///
/// Diverges at `z₀ = ±λ/2` (release exactly on a potential maximum), which
/// is rejected.
pub fn critical_amplitude(
    z0: f64,
    de0: f64,
    v_g: f64,
    lambda: f64,
    constants: &PhysicalConstants,
) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain("lambda must be > 0"));
    }
    let cos = (PI * z0 / lambda).cos();
    if cos == 0.0 || (z0.abs() * 2.0 - lambda).abs() < f64::EPSILON * lambda {
        return Err(Error::Domain("critical amplitude diverges at z0 = ±λ/2"));
    }
    let dv = delta_v_from_energy_offset(de0, v_g, constants)?;
    Ok(constants.m_e / (2.0 * cos * cos) * dv * dv)
}

/// Extreme lab-frame energy offsets reachable along the orbit, from the
/// velocity bounds of each regime mapped through [`energy_offset`].
///
/// Velocity bounds: bound orbits sweep `±(1/κ)√(2A/m)`; unbound orbits keep
/// the sign of `δv₀` and sweep between `(1/κ)√(2A/m)` and
/// `√((2A/m)(1−κ²))/κ` in magnitude; the rest sentinel never moves.
pub fn energy_bounds(ic: &InitialCondition, pot: &PotentialParams) -> Result<(f64, f64)> {
    let m_e = PhysicalConstants::DEFAULT.m_e;
    let k = kappa(ic, pot)?;
    if k.is_infinite() {
        return Ok((0.0, 0.0));
    }
    let v_scale = (2.0 * pot.a / m_e).sqrt();
    let w = v_scale / k;
    let (lo, hi) = match classify(k, SEPARATRIX_TOL) {
        TrajectoryClass::Bound => (-w, w),
        TrajectoryClass::Separatrix => {
            if ic.sign() > 0.0 {
                (0.0, v_scale)
            } else {
                (-v_scale, 0.0)
            }
        }
        TrajectoryClass::Unbound => {
            let inner = (v_scale / k) * (1.0 - k * k).sqrt();
            if ic.sign() > 0.0 {
                (inner, w)
            } else {
                (-w, -inner)
            }
        }
    };
    let consts = PhysicalConstants::DEFAULT;
    let e_lo = energy_offset(lo, pot.v_g, &consts);
    let e_hi = energy_offset(hi, pot.v_g, &consts);
    let mut min = e_lo.min(e_hi);
    let max = e_lo.max(e_hi);
    // ΔE(q̇) is a parabola with vertex at q̇ = −v_g; if the sweep crosses the
    // vertex the truly minimal offset is −(m/2)v_g².
    if lo < -pot.v_g && -pot.v_g < hi {
        min = -0.5 * m_e * pot.v_g * pot.v_g;
    }
    Ok((min, max))
}
