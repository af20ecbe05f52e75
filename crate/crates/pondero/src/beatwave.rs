//! Construction of the travelling ponderomotive potential from laser-field
//! quantities, and evaluation of the potential itself.
//!
//! Two colinear waves with angular frequencies `ω₁ > ω₂` and matched field
//! amplitude `E₀` produce, after cycle-averaging, the one-dimensional
//! potential
//!
//! ```text
//! U_p(z, t) = (A/2) · (1 − cos(2π(v_g·t − z)/λ))
//! ```
//!
//! with amplitude `A = q²E₀²/(m ω₁ω₂)`, group velocity
//! `v_g = c(ω₁−ω₂)/(ω₁+ω₂)` and spatial period `λ = 2πc/(ω₁+ω₂)`. Constant
//! wave phases are absorbed into the choice of spatial origin.

use crate::{Error, Result};

#[allow(unused_imports)]
use num_traits::Float;

/// Physical constants, fixed in one place (CODATA 2018 / exact SI values).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Electron rest mass [kg].
    pub m_e: f64,
    /// Elementary charge [C].
    pub e: f64,
    /// Speed of light in vacuum [m/s].
    pub c: f64,
    /// Reduced Planck constant [J·s].
    pub hbar: f64,
}

impl PhysicalConstants {
    pub const DEFAULT: Self = Self {
        m_e: 9.109_383_701_5e-31,
        e: 1.602_176_634e-19,
        c: 299_792_458.0,
        hbar: 1.054_571_817e-34,
    };

    /// One electronvolt in joules (exact by SI definition).
    pub const EV: f64 = 1.602_176_634e-19;
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Laser-side description of the beat: field amplitude, the two angular
/// frequencies, and the charge and mass of the particle riding the beat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeatWaveInputs {
    /// Electric-field amplitude of each wave [V/m].
    pub e0: f64,
    /// Higher angular frequency [rad/s].
    pub omega1: f64,
    /// Lower angular frequency [rad/s].
    pub omega2: f64,
    /// Particle charge [C]; enters the amplitude only as `q²`.
    pub q: f64,
    /// Particle mass [kg].
    pub m: f64,
}

impl BeatWaveInputs {
    /// Validates the record: `ω₁ > ω₂ > 0` (the convention that fixes the
    /// sign of `v_g`), `E₀ ≥ 0`, `q ≠ 0`, `m > 0`.
    pub fn new(e0: f64, omega1: f64, omega2: f64, q: f64, m: f64) -> Result<Self> {
        if !(e0 >= 0.0) {
            return Err(Error::Domain("field amplitude E0 must be >= 0"));
        }
        if !(omega2 > 0.0) || !(omega1 > omega2) {
            return Err(Error::Domain("frequencies must satisfy omega1 > omega2 > 0"));
        }
        if q == 0.0 || !q.is_finite() {
            return Err(Error::Domain("charge must be finite and nonzero"));
        }
        if !(m > 0.0) {
            return Err(Error::Domain("mass must be > 0"));
        }
        Ok(Self { e0, omega1, omega2, q, m })
    }
}

/// The three numbers that fully describe the idealized travelling potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialParams {
    /// Amplitude `A` [J].
    pub a: f64,
    /// Group velocity `v_g` [m/s]; zero for a standing wave.
    pub v_g: f64,
    /// Spatial period `λ` [m].
    pub lambda: f64,
}

impl PotentialParams {
    /// Validates `A ≥ 0`, `λ > 0`, `|v_g| < c`.
    pub fn new(a: f64, v_g: f64, lambda: f64) -> Result<Self> {
        if !(a >= 0.0) {
            return Err(Error::Domain("potential amplitude A must be >= 0"));
        }
        if !(lambda > 0.0) {
            return Err(Error::Domain("potential period lambda must be > 0"));
        }
        if !(v_g.abs() < PhysicalConstants::DEFAULT.c) {
            return Err(Error::Domain("group velocity must satisfy |v_g| < c"));
        }
        Ok(Self { a, v_g, lambda })
    }

    /// Ratio `|δv₀ / v_g|` used to judge how far an initial condition pushes
    /// the slow-drift assumption behind the beat-frame derivation. Returns
    /// `+∞` for a standing wave, where the criterion does not apply.
    pub fn drift_ratio(&self, delta_v0: f64) -> f64 {
        (delta_v0 / self.v_g).abs()
    }
}

/// Builds [`PotentialParams`] from the laser-side inputs via the
/// cycle-averaged beat formulas.
pub fn potential_from_fields(inputs: &BeatWaveInputs) -> Result<PotentialParams> {
    if !(inputs.omega1 > inputs.omega2) {
        return Err(Error::Domain("frequencies must satisfy omega1 > omega2"));
    }
    Ok(raw_params(inputs))
}

/// The degenerate `ω₁ = ω₂` case: two counterpropagating waves of equal
/// frequency form a standing lattice with `v_g = 0` and period `πc/ω`
/// (half the optical wavelength). This is the continuous limit of
/// [`potential_from_fields`] as `ω₂ → ω₁`.
pub fn standing_wave_potential(e0: f64, omega: f64, q: f64, m: f64) -> Result<PotentialParams> {
    if !(omega > 0.0) {
        return Err(Error::Domain("frequency must be > 0"));
    }
    if !(e0 >= 0.0) {
        return Err(Error::Domain("field amplitude E0 must be >= 0"));
    }
    let inputs = BeatWaveInputs { e0, omega1: omega, omega2: omega, q, m };
    Ok(raw_params(&inputs))
}

fn raw_params(inputs: &BeatWaveInputs) -> PotentialParams {
    let c = PhysicalConstants::DEFAULT.c;
    let sum = inputs.omega1 + inputs.omega2;
    PotentialParams {
        a: (inputs.q * inputs.e0).powi(2) / (inputs.m * inputs.omega1 * inputs.omega2),
        v_g: c * (inputs.omega1 - inputs.omega2) / sum,
        lambda: 2.0 * core::f64::consts::PI * c / sum,
    }
}

/// Field amplitude `E₀ = √(A·m_e·ω₁ω₂ / e²)` producing a given potential
/// amplitude for electrons; exact inverse of [`potential_from_fields`].
pub fn field_amplitude_for(
    a: f64,
    omega1: f64,
    omega2: f64,
    constants: &PhysicalConstants,
) -> Result<f64> {
    if !(a >= 0.0) {
        return Err(Error::Domain("potential amplitude A must be >= 0"));
    }
    if !(omega1 > 0.0 && omega2 > 0.0) {
        return Err(Error::Domain("frequencies must be > 0"));
    }
    Ok((a * constants.m_e * omega1 * omega2 / (constants.e * constants.e)).sqrt())
}

/// Evaluates `U_p(z, t)`; bounded in `[0, A]`, `λ`-periodic in `z`, and
/// invariant under the co-moving shift `(z, t) → (z + v_g τ, t + τ)`.
pub fn potential_value(params: &PotentialParams, z: f64, t: f64) -> f64 {
    let phase = 2.0 * core::f64::consts::PI * (params.v_g * t - z) / params.lambda;
    0.5 * params.a * (1.0 - phase.cos())
}

/// Angular frequency of an optical wave of vacuum wavelength `lambda0`.
pub fn omega_of_wavelength(lambda0: f64, constants: &PhysicalConstants) -> Result<f64> {
    if !(lambda0 > 0.0) {
        return Err(Error::Domain("wavelength must be > 0"));
    }
    Ok(2.0 * core::f64::consts::PI * constants.c / lambda0)
}
