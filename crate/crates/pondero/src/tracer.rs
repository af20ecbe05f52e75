//! Relativistic test-particle tracing in explicit pulsed-laser fields.
//!
//! Everywhere else in the crate the lattice is an idealised cycle-averaged
//! potential. This module drops that approximation: electrons are pushed
//! through the oscillating electric and magnetic fields of two focused,
//! pulsed paraxial beams by integrating the Lorentz-force equation
//!
//! ```text
//! du/dt = −(e/m_e)·(E + v × B),      dr/dt = v = u/γ,
//! ```
//!
//! with the proper velocity `u = γv` as the momentum-like variable and the
//! embedded Dormand–Prince driver from this crate doing the stepping. Two
//! counterpropagating colours make a travelling intensity beat whose
//! cycle-averaged envelope is exactly the potential of
//! [`crate::beatwave::potential_from_fields`], so finite-pulse runs here can
//! be compared column by column against the closed-form ensembles.
//!
//! Two campaign geometries are provided:
//!
//! * [`TracerScenario::inelastic`] — a 343 nm / 515 nm pair along ±ẑ with an
//!   electron bunch riding the beat at its drift speed; the recorded
//!   observable is the final kinetic-energy offset.
//! * [`TracerScenario::elastic`] — an equal-colour 1030 nm standing wave
//!   crossed by a bunch at a small angle; the recorded observable is the
//!   in-plane deflection angle.
//!
//! Each column of the returned [`SpectralDensityGrid`] is one pulse duration
//! from the sweep, labelled by the effective interaction time
//! ([`effective_time`]); all columns reuse the same bunch draws so that
//! column-to-column structure is free of shot noise. Traces only ever cover
//! the finite envelope support: outside it particles fly ballistically at
//! zero cost, so a zero-duration column reduces to the initial distribution.

use crate::beatwave::{field_amplitude_for, omega_of_wavelength, PhysicalConstants};
use crate::ensemble::{
    column_edges, particle_rng, run_fallible, standard_normal, BinSpec, GridMetadata,
    SpectralDensityGrid, FWHM_TO_SIGMA, MAX_RESAMPLE,
};
use crate::ode::{integrate_adaptive, AdaptiveOptions};
use crate::par;
use crate::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

#[allow(unused_imports)]
use num_traits::Float;

/// Default two-colour wavelengths [m] and the lattice depth [J] their field
/// amplitude is matched to.
const LAMBDA_FAST: f64 = 343e-9;
const LAMBDA_SLOW: f64 = 515e-9;
const LATTICE_DEPTH: f64 = 30e-3 * PhysicalConstants::EV;

/// Standing-wave geometry: equal carrier wavelength [m] and the field
/// amplitude [V/m] giving a 3.4 eV ponderomotive lattice.
const LAMBDA_STANDING: f64 = 1030e-9;
const E0_STANDING: f64 = 8e9;

/// Waist radius [m] shared by all stock pulses.
const WAIST: f64 = 100e-6;

/// Absolute error floors for the six-component state `(r, u)`: a picometre
/// scale for positions and mm/s for proper velocities, so the relative
/// tolerance governs everywhere the motion is non-trivial.
const ABS_TOL: [f64; 6] = [1e-12, 1e-12, 1e-12, 1e-3, 1e-3, 1e-3];

/// Temporal amplitude envelope, as a function of the scaled retarded time
/// `x = (t − t_center − z̃/c) / t_fwhm`.
///
/// `value` is 1 at the peak and cut to exactly zero outside
/// [`Envelope::support_half_width`], where the analytic forms have decayed
/// to ~4·10⁻⁶ (gaussian) respectively ~10⁻³⁵ (super-gaussian) of the peak.
/// The hard cut is what gives every trace a finite integration window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Envelope {
    /// `exp(−2 ln2 · x²)`; `t_fwhm` is the FWHM of the intensity profile.
    Gaussian,
    /// `exp(−ln2 · (2x²)^order)`: flat-topped, within 0.1% of the peak for
    /// `|x| ≲ 0.51` at order 10. Note the half-intensity points of this form
    /// sit at `x = ±2^{−(order+1)/(2·order)}`, slightly outside `±1/2`, so
    /// `t_fwhm` is a scale parameter rather than the literal intensity FWHM.
    SuperGaussian { order: u32 },
}

impl Envelope {
    /// Envelope amplitude at scaled time `x`; exactly 0 beyond the support.
    pub fn value(&self, x: f64) -> f64 {
        if !(x.abs() <= self.support_half_width()) {
            return 0.0;
        }
        match *self {
            Envelope::Gaussian => (-2.0 * LN_2 * x * x).exp(),
            Envelope::SuperGaussian { order } => {
                (-LN_2 * (2.0 * x * x).powi(order as i32)).exp()
            }
        }
    }

    /// Half-width of the support in units of `t_fwhm`. Chosen so the
    /// truncated amplitude is at most ~4·10⁻⁶ of the peak (exponent ≥ 12.5
    /// for the gaussian, 80 for the super-gaussian family).
    pub fn support_half_width(&self) -> f64 {
        match *self {
            Envelope::Gaussian => 3.0,
            Envelope::SuperGaussian { order } => {
                (0.5 * (80.0 / LN_2).powf(1.0 / order as f64)).sqrt()
            }
        }
    }
}

/// One linearly polarised, pulsed TEM₀₀ beam.
///
/// With `z̃` the distance along `direction`, `r⊥` the transverse offset,
/// `w(z̃) = w₀√(1 + (z̃/z_R)²)`, `R(z̃)` the wavefront curvature radius and
/// `z_R = πw₀²/λ` the Rayleigh range, the electric field is
///
/// ```text
/// E = E₀ · (w₀/w) · env((t − t_center − z̃/c)/t_fwhm) · exp(−r⊥²/w²)
///        · sin(ω(t − t_center) − k z̃ − k r⊥²/(2R) + arctan(z̃/z_R) + phase0)
/// ```
///
/// along `polarization`, and `B = (direction × E)/c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pulse {
    /// Vacuum carrier wavelength [m].
    pub lambda: f64,
    /// Peak field amplitude at the waist [V/m].
    pub e0: f64,
    /// Waist radius `w₀` [m].
    pub w0: f64,
    /// Envelope duration parameter [s]; zero disables the pulse entirely.
    pub t_fwhm: f64,
    pub envelope: Envelope,
    /// Unit propagation direction.
    pub direction: [f64; 3],
    /// Unit polarisation, orthogonal to `direction`.
    pub polarization: [f64; 3],
    /// Instant at which the envelope peak crosses the waist plane [s].
    pub t_center: f64,
    /// Carrier phase offset [rad].
    pub phase0: f64,
}

impl Pulse {
    /// Builds a pulse centred at `t = 0` with zero carrier offset.
    pub fn new(
        lambda: f64,
        e0: f64,
        w0: f64,
        t_fwhm: f64,
        envelope: Envelope,
        direction: [f64; 3],
        polarization: [f64; 3],
    ) -> Result<Self> {
        let pulse = Self {
            lambda,
            e0,
            w0,
            t_fwhm,
            envelope,
            direction,
            polarization,
            t_center: 0.0,
            phase0: 0.0,
        };
        pulse.validate()?;
        Ok(pulse)
    }

    /// Checks every field; the frame vectors must be unit length and
    /// orthogonal to within 10⁻⁶ (they are re-orthonormalised exactly when
    /// a run caches the pulse).
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Domain("pulse wavelength must be positive"));
        }
        if !(self.e0 >= 0.0 && self.e0.is_finite()) {
            return Err(Error::Domain("pulse amplitude must be finite and >= 0"));
        }
        if !(self.w0 > 0.0 && self.w0.is_finite()) {
            return Err(Error::Domain("waist radius must be positive"));
        }
        if !(self.t_fwhm >= 0.0 && self.t_fwhm.is_finite()) {
            return Err(Error::Domain("pulse duration must be finite and >= 0"));
        }
        if let Envelope::SuperGaussian { order } = self.envelope {
            if !(1..=40).contains(&order) {
                return Err(Error::Domain("super-gaussian order must lie in 1..=40"));
            }
        }
        if !(self.t_center.is_finite() && self.phase0.is_finite()) {
            return Err(Error::Domain("pulse timing and phase must be finite"));
        }
        check_unit(self.direction, "propagation direction must be a unit vector")?;
        check_unit(self.polarization, "polarisation must be a unit vector")?;
        if dot(self.direction, self.polarization).abs() > 1e-6 {
            return Err(Error::Domain("polarisation must be orthogonal to the propagation"));
        }
        Ok(())
    }
}

/// Evaluates one pulse's `(E, B)` at a lab position and time.
pub fn pulse_field(pulse: &Pulse, r: [f64; 3], t: f64) -> Result<([f64; 3], [f64; 3])> {
    pulse.validate()?;
    Ok(PulseEval::new(pulse, &PhysicalConstants::DEFAULT).field(r, t))
}

/// Position, proper velocity `u = γv` and time of one electron.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleState {
    pub r: [f64; 3],
    pub u: [f64; 3],
    pub t: f64,
}

impl ParticleState {
    pub fn gamma(&self, constants: &PhysicalConstants) -> f64 {
        (1.0 + dot(self.u, self.u) / (constants.c * constants.c)).sqrt()
    }

    pub fn velocity(&self, constants: &PhysicalConstants) -> [f64; 3] {
        scale(self.u, 1.0 / self.gamma(constants))
    }

    /// Lab-frame kinetic energy `(γ − 1) m_e c²` [J].
    pub fn kinetic_energy(&self, constants: &PhysicalConstants) -> f64 {
        (self.gamma(constants) - 1.0) * constants.m_e * constants.c * constants.c
    }
}

/// Advances one electron by `dt` through caller-supplied fields
/// `(r, t) → (E, B)` with the adaptive driver at relative tolerance
/// `rel_tol` (absolute floors: 1 pm on positions, 1 mm/s on `u`).
pub fn push<F>(state: &ParticleState, field: &F, dt: f64, rel_tol: f64) -> Result<ParticleState>
where
    F: Fn([f64; 3], f64) -> ([f64; 3], [f64; 3]),
{
    if !dt.is_finite() {
        return Err(Error::Domain("time step must be finite"));
    }
    if dt == 0.0 {
        return Ok(*state);
    }
    let constants = PhysicalConstants::DEFAULT;
    let rhs = lorentz_rhs(field, &constants);
    let y0 = [state.r[0], state.r[1], state.r[2], state.u[0], state.u[1], state.u[2]];
    let opt = AdaptiveOptions::new(rel_tol, ABS_TOL);
    let out = integrate_adaptive(&rhs, state.t, y0, state.t + dt, dt / 256.0, &opt)?;
    Ok(ParticleState {
        r: [out.y[0], out.y[1], out.y[2]],
        u: [out.y[3], out.y[4], out.y[5]],
        t: state.t + dt,
    })
}

/// Effective interaction time a lattice-riding electron spends inside a
/// pulse pair of nominal duration `t_fwhm`.
///
/// For gaussian envelopes the overlap of the two counterpropagating pulses
/// seen from the frame drifting at `β·c` is gaussian again with area
/// `t_fwhm·√(π / (4 ln2 (1 + β²)))`; a standing wave is the `β = 0` case.
/// Flat-topped super-gaussian pulses count their nominal duration.
pub fn effective_time(t_fwhm: f64, beta: f64, envelope: Envelope) -> f64 {
    match envelope {
        Envelope::Gaussian => t_fwhm * (PI / (4.0 * LN_2 * (1.0 + beta * beta))).sqrt(),
        Envelope::SuperGaussian { .. } => t_fwhm,
    }
}

/// Gaussian electron-bunch geometry and energy spread. The bunch reference
/// point is the common waist at the envelope-peak instant `t = 0`: draws are
/// the unperturbed positions the electrons would occupy at that moment, and
/// every trace starts far enough before the pulses to see their full rise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSpec {
    pub n_particles: usize,
    pub seed: u64,
    /// RMS position spread [m] along the lab x and y axes (transverse to
    /// the optical axis).
    pub sigma_xy: f64,
    /// RMS position spread [m] along the lab z axis (the optical axis).
    pub sigma_z: f64,
    /// Mean kinetic-energy offset from the reference energy [J].
    pub mean_offset: f64,
    /// FWHM of the kinetic-energy offset distribution [J].
    pub fwhm_offset: f64,
}

impl BeamSpec {
    pub fn new(
        n_particles: usize,
        seed: u64,
        sigma_xy: f64,
        sigma_z: f64,
        mean_offset: f64,
        fwhm_offset: f64,
    ) -> Result<Self> {
        let spec = Self { n_particles, seed, sigma_xy, sigma_z, mean_offset, fwhm_offset };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::Domain("bunch needs at least one particle"));
        }
        if !(self.sigma_xy >= 0.0 && self.sigma_xy.is_finite())
            || !(self.sigma_z >= 0.0 && self.sigma_z.is_finite())
        {
            return Err(Error::Domain("bunch sizes must be finite and >= 0"));
        }
        if !self.mean_offset.is_finite()
            || !(self.fwhm_offset >= 0.0 && self.fwhm_offset.is_finite())
        {
            return Err(Error::Domain("energy offsets must be finite, width >= 0"));
        }
        Ok(())
    }
}

/// Which scalar each trace reduces to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceObservable {
    /// Final kinetic energy minus the reference kinetic energy [J].
    EnergyOffset,
    /// Final in-plane angle minus the injection angle [rad], measured in
    /// the plane spanned by the bunch direction and the optical axis,
    /// positive towards the axis of the first pulse.
    DeflectionAngle,
}

/// A full two-pulse campaign: one bunch, a strictly increasing sweep of
/// pulse durations (one histogram column each), and the binning of the
/// recorded observable.
#[derive(Debug, Clone, PartialEq)]
pub struct TracerScenario {
    pub pulses: [Pulse; 2],
    pub beam: BeamSpec,
    /// Unit mean velocity direction of the bunch.
    pub beam_direction: [f64; 3],
    /// Speed defining the reference kinetic energy and the drift `β` that
    /// enters [`effective_time`] [m/s].
    pub reference_speed: f64,
    /// Pulse durations `t_fwhm` [s], strictly increasing (0 allowed first).
    pub sweep: Vec<f64>,
    pub bins: BinSpec,
    /// Relative tolerance handed to the adaptive pusher.
    pub rel_tol: f64,
    pub observable: TraceObservable,
}

impl TracerScenario {
    /// Two-colour travelling-lattice geometry: 343 nm up the z axis against
    /// 515 nm down it, both polarised along ŷ with amplitudes matched to a
    /// 30 meV lattice depth; the bunch rides the beat along +ẑ at its drift
    /// speed and the energy offset is recorded.
    pub fn inelastic(
        envelope: Envelope,
        sweep: Vec<f64>,
        beam: BeamSpec,
        bins: BinSpec,
    ) -> Result<Self> {
        let constants = PhysicalConstants::DEFAULT;
        let omega1 = omega_of_wavelength(LAMBDA_FAST, &constants)?;
        let omega2 = omega_of_wavelength(LAMBDA_SLOW, &constants)?;
        let e0 = field_amplitude_for(LATTICE_DEPTH, omega1, omega2, &constants)?;
        let fast = Pulse::new(LAMBDA_FAST, e0, WAIST, 0.0, envelope, [0.0, 0.0, 1.0], [0.0, 1.0, 0.0])?;
        let slow =
            Pulse::new(LAMBDA_SLOW, e0, WAIST, 0.0, envelope, [0.0, 0.0, -1.0], [0.0, 1.0, 0.0])?;
        let scenario = Self {
            pulses: [fast, slow],
            beam,
            beam_direction: [0.0, 0.0, 1.0],
            reference_speed: constants.c * (omega1 - omega2) / (omega1 + omega2),
            sweep,
            bins,
            rel_tol: 1e-8,
            observable: TraceObservable::EnergyOffset,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Equal-colour standing-wave geometry (1030 nm along ±ẑ, gaussian
    /// envelopes) crossed by a 0.01c bunch at angle `alpha` [rad] to the
    /// wavefront planes; the in-plane deflection angle is recorded.
    pub fn elastic(alpha: f64, sweep: Vec<f64>, beam: BeamSpec, bins: BinSpec) -> Result<Self> {
        if !(alpha >= 0.0 && alpha < 0.5) {
            return Err(Error::Domain("crossing angle must lie in [0, 0.5) rad"));
        }
        let constants = PhysicalConstants::DEFAULT;
        let up = Pulse::new(
            LAMBDA_STANDING,
            E0_STANDING,
            WAIST,
            0.0,
            Envelope::Gaussian,
            [0.0, 0.0, 1.0],
            [0.0, 1.0, 0.0],
        )?;
        let down = Pulse::new(
            LAMBDA_STANDING,
            E0_STANDING,
            WAIST,
            0.0,
            Envelope::Gaussian,
            [0.0, 0.0, -1.0],
            [0.0, 1.0, 0.0],
        )?;
        let scenario = Self {
            pulses: [up, down],
            beam,
            beam_direction: [alpha.cos(), 0.0, -alpha.sin()],
            reference_speed: 0.01 * constants.c,
            sweep,
            bins,
            rel_tol: 1e-8,
            observable: TraceObservable::DeflectionAngle,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    fn validate(&self) -> Result<()> {
        self.pulses[0].validate()?;
        self.pulses[1].validate()?;
        self.beam.validate()?;
        check_unit(self.beam_direction, "beam direction must be a unit vector")?;
        let c = PhysicalConstants::DEFAULT.c;
        if !(self.reference_speed > 0.0 && self.reference_speed < c) {
            return Err(Error::Domain("reference speed must lie in (0, c)"));
        }
        if self.sweep.is_empty() {
            return Err(Error::Domain("duration sweep must not be empty"));
        }
        if self.sweep.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Domain("durations must be finite and >= 0"));
        }
        if self.sweep.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("durations must be strictly increasing"));
        }
        if !(self.rel_tol >= 1e-13 && self.rel_tol <= 1e-3) {
            return Err(Error::Domain("pusher tolerance must lie in [1e-13, 1e-3]"));
        }
        Ok(())
    }
}

/// Runs the duration sweep for the travelling-lattice geometry and
/// histograms the final kinetic-energy offsets, one column per duration.
pub fn run_inelastic(scenario: &TracerScenario) -> Result<SpectralDensityGrid> {
    run_inelastic_chunked(scenario, par::DEFAULT_CHUNK)
}

fn run_inelastic_chunked(scenario: &TracerScenario, chunk: usize) -> Result<SpectralDensityGrid> {
    scenario.validate()?;
    if scenario.observable != TraceObservable::EnergyOffset {
        return Err(Error::Domain("inelastic sweep records the energy observable"));
    }
    let same_family = matches!(
        (scenario.pulses[0].envelope, scenario.pulses[1].envelope),
        (Envelope::Gaussian, Envelope::Gaussian)
            | (Envelope::SuperGaussian { .. }, Envelope::SuperGaussian { .. })
    );
    if !same_family {
        return Err(Error::Domain("both pulses must share the envelope family"));
    }
    let beta = scenario.reference_speed / PhysicalConstants::DEFAULT.c;
    let t_eff: Vec<f64> = scenario
        .sweep
        .iter()
        .map(|&t| effective_time(t, beta, scenario.pulses[0].envelope))
        .collect();
    run_scan(scenario, &t_eff, chunk)
}

/// Runs the duration sweep for the standing-wave crossing geometry and
/// histograms the final deflection angles, one column per duration.
pub fn run_elastic(scenario: &TracerScenario) -> Result<SpectralDensityGrid> {
    scenario.validate()?;
    if scenario.observable != TraceObservable::DeflectionAngle {
        return Err(Error::Domain("elastic sweep records the deflection observable"));
    }
    if scenario.pulses.iter().any(|p| !matches!(p.envelope, Envelope::Gaussian)) {
        return Err(Error::Domain("the standing-wave geometry is defined for gaussian pulses"));
    }
    let axis = normalized(scenario.pulses[0].direction);
    if dot(normalized(scenario.beam_direction), axis).abs() > 0.999 {
        return Err(Error::Domain("the bunch may not run along the standing-wave axis"));
    }
    let t_eff: Vec<f64> = scenario
        .sweep
        .iter()
        .map(|&t| effective_time(t, 0.0, Envelope::Gaussian))
        .collect();
    run_scan(scenario, &t_eff, par::DEFAULT_CHUNK)
}

struct TraceAcc {
    counts: Vec<u64>,
    live: Vec<u64>,
    saturated: u64,
    resampled: u64,
    failed: u64,
}

impl TraceAcc {
    fn new(n_cols: usize, n_bins: usize) -> Self {
        Self {
            counts: vec![0; n_cols * n_bins],
            live: vec![0; n_cols],
            saturated: 0,
            resampled: 0,
            failed: 0,
        }
    }

    fn merge(&mut self, other: TraceAcc) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.live.iter_mut().zip(&other.live) {
            *a += b;
        }
        self.saturated += other.saturated;
        self.resampled += other.resampled;
        self.failed += other.failed;
    }
}

fn run_scan(scenario: &TracerScenario, t_eff: &[f64], chunk: usize) -> Result<SpectralDensityGrid> {
    let constants = PhysicalConstants::DEFAULT;
    let c = constants.c;
    let mc2 = constants.m_e * c * c;
    let t_edges = column_edges(t_eff)?;
    let beam_dir = normalized(scenario.beam_direction);
    let beta_ref = scenario.reference_speed / c;
    let gamma_ref = 1.0 / (1.0 - beta_ref * beta_ref).sqrt();
    let sigma_e = scenario.beam.fwhm_offset * FWHM_TO_SIGMA;
    let axis = normalized(scenario.pulses[0].direction);
    let in_plane = match scenario.observable {
        TraceObservable::EnergyOffset => None,
        TraceObservable::DeflectionAngle => {
            Some(normalized(sub(beam_dir, scale(axis, dot(beam_dir, axis)))))
        }
    };
    let theta_ref = in_plane
        .map(|xpl| dot(beam_dir, axis).atan2(dot(beam_dir, xpl)))
        .unwrap_or(0.0);
    let evals: Vec<[PulseEval; 2]> = scenario
        .sweep
        .iter()
        .map(|&t_fwhm| {
            [
                PulseEval::new(&Pulse { t_fwhm, ..scenario.pulses[0] }, &constants),
                PulseEval::new(&Pulse { t_fwhm, ..scenario.pulses[1] }, &constants),
            ]
        })
        .collect();
    let h0 = scenario.pulses[0].lambda.min(scenario.pulses[1].lambda) / c / 20.0;
    let n_bins = scenario.bins.n;
    let n_cols = scenario.sweep.len();

    let acc = run_fallible(
        scenario.beam.n_particles,
        chunk,
        || TraceAcc::new(n_cols, n_bins),
        |acc: &mut TraceAcc, i| {
            let mut rng = particle_rng(scenario.beam.seed, i as u64);
            let x = scenario.beam.sigma_xy * standard_normal(&mut rng);
            let y = scenario.beam.sigma_xy * standard_normal(&mut rng);
            let z = scenario.beam.sigma_z * standard_normal(&mut rng);
            let r0 = [x, y, z];
            let mut retries = 0u64;
            let gamma0 = loop {
                let de = scenario.beam.mean_offset + sigma_e * standard_normal(&mut rng);
                let gamma = gamma_ref + de / mc2;
                if gamma > 1.0 {
                    break gamma;
                }
                retries += 1;
                if retries as u32 > MAX_RESAMPLE {
                    return Err(Error::Resampling { tries: retries as u32 });
                }
            };
            acc.resampled += retries;
            let u0 = scale(beam_dir, c * (gamma0 * gamma0 - 1.0).sqrt());
            let v0 = scale(u0, 1.0 / gamma0);
            for (col, pair) in evals.iter().enumerate() {
                let u_fin =
                    match trace_through(r0, u0, v0, pair, h0, scenario.rel_tol, &constants) {
                        Ok(u) => u,
                        Err(Error::Stiffness { .. }) | Err(Error::Truncation { .. }) => {
                            acc.failed += 1;
                            continue;
                        }
                        Err(e) => return Err(e),
                    };
                let value = match scenario.observable {
                    TraceObservable::EnergyOffset => {
                        let gamma = (1.0 + dot(u_fin, u_fin) / (c * c)).sqrt();
                        (gamma - gamma_ref) * mc2
                    }
                    TraceObservable::DeflectionAngle => {
                        let xpl = in_plane.expect("deflection runs precompute the plane");
                        dot(u_fin, axis).atan2(dot(u_fin, xpl)) - theta_ref
                    }
                };
                let (idx, sat) = scenario.bins.index_saturating(value);
                acc.saturated += sat as u64;
                acc.counts[col * n_bins + idx] += 1;
                acc.live[col] += 1;
            }
            Ok(())
        },
        TraceAcc::merge,
    )?;

    let mut density = vec![0.0; n_cols * n_bins];
    for col in 0..n_cols {
        let live = acc.live[col];
        if live == 0 {
            return Err(Error::Domain("every trace in a sweep column failed"));
        }
        for bin in 0..n_bins {
            density[col * n_bins + bin] = acc.counts[col * n_bins + bin] as f64 / live as f64;
        }
    }
    Ok(SpectralDensityGrid {
        t_edges,
        obs_edges: scenario.bins.edges(),
        density,
        metadata: GridMetadata {
            n_particles: scenario.beam.n_particles as u64,
            seed: scenario.beam.seed,
            resampled: acc.resampled,
            saturated: acc.saturated,
            separatrix: 0,
            failed: acc.failed,
        },
    })
}

/// Ballistic flight to the first envelope edge, one adaptive integration
/// across the union of both supports, then the frozen final `u`. The window
/// is found from the unperturbed motion: each pulse's retarded time along
/// the straight path is the linear clock `τ_p(t) = (1 − d̂·v₀/c)·t − b_p`,
/// so its support is an interval in `t`.
fn trace_through(
    r0: [f64; 3],
    u0: [f64; 3],
    v0: [f64; 3],
    pulses: &[PulseEval; 2],
    h0: f64,
    rel_tol: f64,
    constants: &PhysicalConstants,
) -> Result<[f64; 3]> {
    let mut t_lo = f64::INFINITY;
    let mut t_hi = f64::NEG_INFINITY;
    for pulse in pulses {
        if pulse.t_fwhm == 0.0 || pulse.e0 == 0.0 {
            continue;
        }
        let rate = 1.0 - dot(pulse.dir, v0) / constants.c;
        let offset = dot(pulse.dir, r0) / constants.c + pulse.t_center;
        t_lo = t_lo.min((offset - pulse.sup) / rate);
        t_hi = t_hi.max((offset + pulse.sup) / rate);
    }
    if !(t_hi > t_lo) {
        return Ok(u0);
    }
    let r_start = add(r0, scale(v0, t_lo));
    let field = |r: [f64; 3], t: f64| {
        let (e1, b1) = pulses[0].field(r, t);
        let (e2, b2) = pulses[1].field(r, t);
        (add(e1, e2), add(b1, b2))
    };
    let rhs = lorentz_rhs(&field, constants);
    let y0 = [r_start[0], r_start[1], r_start[2], u0[0], u0[1], u0[2]];
    let opt = AdaptiveOptions::new(rel_tol, ABS_TOL);
    let out = integrate_adaptive(&rhs, t_lo, y0, t_hi, h0, &opt)?;
    Ok([out.y[3], out.y[4], out.y[5]])
}

/// Per-run cache of one pulse's derived constants, with the propagation
/// frame orthonormalised exactly.
struct PulseEval {
    dir: [f64; 3],
    pol: [f64; 3],
    bvec: [f64; 3],
    e0: f64,
    w02: f64,
    k: f64,
    omega: f64,
    zr: f64,
    /// Absolute half-width of the envelope support [s].
    sup: f64,
    t_fwhm: f64,
    t_center: f64,
    phase0: f64,
    envelope: Envelope,
    inv_c: f64,
}

impl PulseEval {
    fn new(pulse: &Pulse, constants: &PhysicalConstants) -> Self {
        let dir = normalized(pulse.direction);
        let pol = normalized(sub(pulse.polarization, scale(dir, dot(pulse.polarization, dir))));
        let k = 2.0 * PI / pulse.lambda;
        Self {
            dir,
            pol,
            bvec: cross(dir, pol),
            e0: pulse.e0,
            w02: pulse.w0 * pulse.w0,
            k,
            omega: k * constants.c,
            zr: PI * pulse.w0 * pulse.w0 / pulse.lambda,
            sup: pulse.envelope.support_half_width() * pulse.t_fwhm,
            t_fwhm: pulse.t_fwhm,
            t_center: pulse.t_center,
            phase0: pulse.phase0,
            envelope: pulse.envelope,
            inv_c: 1.0 / constants.c,
        }
    }

    #[inline]
    fn field(&self, r: [f64; 3], t: f64) -> ([f64; 3], [f64; 3]) {
        let zero = ([0.0; 3], [0.0; 3]);
        if self.t_fwhm == 0.0 || self.e0 == 0.0 {
            return zero;
        }
        let z = dot(self.dir, r);
        let tau = t - self.t_center - z * self.inv_c;
        if tau.abs() > self.sup {
            return zero;
        }
        let env = self.envelope.value(tau / self.t_fwhm);
        if env == 0.0 {
            return zero;
        }
        let rp = sub(r, scale(self.dir, z));
        let r2 = dot(rp, rp);
        let s = z / self.zr;
        let expand = 1.0 + s * s;
        let amp = self.e0 * env * (-r2 / (self.w02 * expand)).exp() / expand.sqrt();
        let curvature = 0.5 * self.k * r2 * z / (z * z + self.zr * self.zr);
        let phi = self.omega * (t - self.t_center) - self.k * z - curvature + s.atan() + self.phase0;
        let e_pol = amp * phi.sin();
        (scale(self.pol, e_pol), scale(self.bvec, e_pol * self.inv_c))
    }
}

fn lorentz_rhs<'a, F>(
    field: &'a F,
    constants: &PhysicalConstants,
) -> impl Fn(f64, &[f64; 6]) -> [f64; 6] + 'a
where
    F: Fn([f64; 3], f64) -> ([f64; 3], [f64; 3]),
{
    let q_over_m = -constants.e / constants.m_e;
    let inv_c2 = 1.0 / (constants.c * constants.c);
    move |t, y| {
        let u = [y[3], y[4], y[5]];
        let gamma = (1.0 + dot(u, u) * inv_c2).sqrt();
        let v = scale(u, 1.0 / gamma);
        let (e, b) = field([y[0], y[1], y[2]], t);
        let f = add(e, cross(v, b));
        [v[0], v[1], v[2], q_over_m * f[0], q_over_m * f[1], q_over_m * f[2]]
    }
}

fn check_unit(v: [f64; 3], msg: &'static str) -> Result<()> {
    if v.iter().any(|c| !c.is_finite()) || (dot(v, v).sqrt() - 1.0).abs() > 1e-6 {
        return Err(Error::Domain(msg));
    }
    Ok(())
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn normalized(a: [f64; 3]) -> [f64; 3] {
    scale(a, 1.0 / dot(a, a).sqrt())
}
