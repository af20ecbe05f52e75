//! TOML scenario configuration: schema, validation and conversion into
//! library calls.
//!
//! A configuration file names one scenario kind and provides exactly the
//! sections that kind consumes; every other section is rejected, as is any
//! unknown key inside a section. All keys carry their unit in the name
//! (`amplitude_meV`, `t_final_ps`, …) and are converted to SI here, in one
//! place, so the rest of the crate deals in SI floats only.
//!
//! Parsing and validation are split deliberately: [`parse`] only enforces
//! the schema, while [`build`] performs the semantic checks and constructs
//! the library argument types. Everything rejected by either step is a
//! configuration error (exit code 2); failures past this point are runtime
//! errors (exit code 3).

use std::fmt;
use std::fs;
use std::path::Path;

use pondero::beatwave::{
    omega_of_wavelength, potential_from_fields, standing_wave_potential, BeatWaveInputs,
    PhysicalConstants, PotentialParams,
};
use pondero::classical::{delta_v_from_energy_offset, InitialCondition};
use pondero::ensemble::{BinSpec, EnsembleSpec, Observable, ScatterGeometry, FWHM_TO_SIGMA};
use pondero::qm_parabolic::{tail_probability, WavepacketSpec};
use pondero::tracer::{BeamSpec, Envelope, TracerScenario};
use serde::Deserialize;
use serde_json::json;

use crate::{CliError, CliResult};

const CONSTS: PhysicalConstants = PhysicalConstants::DEFAULT;
const EV: f64 = PhysicalConstants::EV;

/// Fraction |δv₀|/|v_g| above which the travelling-lattice description is
/// flagged as strained in the run manifest.
const DRIFT_RATIO_WARN: f64 = 0.1;
/// Probability mass outside |q| > λ/4 above which a parabolic-well packet
/// is flagged as poorly confined.
const TAIL_WARN: f64 = 1e-3;
/// Initial oscillator truncation handed to the parabolic decomposition; it
/// grows on demand.
const LHO_N_MAX: usize = 64;

/// The scenario kinds the runner can dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Trajectory,
    Periods,
    BoundFraction,
    Spectral,
    Scatter,
    Lho,
    Bloch,
    PulsedInelastic,
    PulsedElastic,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::Trajectory => "trajectory",
            ScenarioKind::Periods => "periods",
            ScenarioKind::BoundFraction => "bound-fraction",
            ScenarioKind::Spectral => "spectral",
            ScenarioKind::Scatter => "scatter",
            ScenarioKind::Lho => "lho",
            ScenarioKind::Bloch => "bloch",
            ScenarioKind::PulsedInelastic => "pulsed-inelastic",
            ScenarioKind::PulsedElastic => "pulsed-elastic",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Top-level document. Exactly the sections used by `scenario.kind` may be
/// present.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub potential: Option<PotentialSection>,
    pub fields: Option<FieldsSection>,
    pub ensemble: Option<EnsembleSection>,
    pub trajectory: Option<TrajectorySection>,
    pub periods: Option<PeriodsSection>,
    pub bound_fraction: Option<BoundFractionSection>,
    pub spectral: Option<SpectralSection>,
    pub scatter: Option<ScatterSection>,
    pub wavepacket: Option<WavepacketSection>,
    pub lho: Option<LhoSection>,
    pub bloch: Option<BlochSection>,
    pub tracer: Option<TracerSection>,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub kind: ScenarioKind,
}

/// Idealized travelling lattice, given directly.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    #[serde(rename = "amplitude_meV")]
    pub amplitude_mev: f64,
    pub wavelength_nm: f64,
    pub group_velocity_c: f64,
}

/// The same lattice, constructed from the two carrier waves instead.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsSection {
    pub wavelength_fast_nm: f64,
    pub wavelength_slow_nm: f64,
    #[serde(rename = "field_amplitude_V_per_m")]
    pub field_amplitude_v_per_m: f64,
}

/// Classical ensemble: positions uniform over one cell, lab-frame energy
/// offsets gaussian.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub n_particles: usize,
    #[serde(rename = "energy_mean_eV")]
    pub energy_mean_ev: f64,
    #[serde(rename = "energy_fwhm_eV")]
    pub energy_fwhm_ev: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    /// Start position as a fraction of the lattice period.
    pub z0_lambda: f64,
    #[serde(rename = "energy_offset_eV")]
    pub energy_offset_ev: f64,
    pub t_final_ps: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodsSection {
    pub bin_lo_ps: f64,
    pub bin_hi_ps: f64,
    pub n_bins: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundFractionSection {
    #[serde(rename = "amplitude_lo_meV")]
    pub amplitude_lo_mev: f64,
    #[serde(rename = "amplitude_hi_meV")]
    pub amplitude_hi_mev: f64,
    pub n_amplitudes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservableKey {
    Energy,
    Position,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSection {
    pub observable: ObservableKey,
    pub t_final_ps: f64,
    pub n_columns: usize,
    pub n_bins: usize,
    /// Energy window; required for the energy observable, forbidden for
    /// position (whose window is the fixed wrap interval [−λ/2, 3λ/2)).
    #[serde(rename = "bin_lo_eV")]
    pub bin_lo_ev: Option<f64>,
    #[serde(rename = "bin_hi_eV")]
    pub bin_hi_ev: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterSection {
    pub alpha_deg: f64,
    #[serde(rename = "kinetic_energy_mean_eV")]
    pub kinetic_energy_mean_ev: f64,
    #[serde(rename = "kinetic_energy_fwhm_eV")]
    pub kinetic_energy_fwhm_ev: f64,
    pub n_particles: usize,
    pub width_lo_um: f64,
    pub width_hi_um: f64,
    pub n_widths: usize,
    #[serde(rename = "bin_lo_keV_c")]
    pub bin_lo_kev_c: f64,
    #[serde(rename = "bin_hi_keV_c")]
    pub bin_hi_kev_c: f64,
    pub n_bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKey {
    Gaussian,
    SuperGaussian,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavepacketSection {
    pub shape: ShapeKey,
    /// Flatness order; required for the super-gaussian shape, forbidden
    /// for the gaussian.
    pub order: Option<u32>,
    /// Spatial FWHM as a fraction of the lattice period; required for the
    /// gaussian shape, forbidden for the super-gaussian (whose width is
    /// tied to the period by its functional form).
    pub position_fwhm_lambda: Option<f64>,
    #[serde(rename = "energy_offset_eV")]
    pub energy_offset_ev: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LhoSection {
    pub t_final_ps: f64,
    pub n_columns: usize,
    pub n_bins: usize,
    #[serde(rename = "bin_lo_keV_c")]
    pub bin_lo_kev_c: f64,
    #[serde(rename = "bin_hi_keV_c")]
    pub bin_hi_kev_c: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlochSection {
    /// Number of discrete momentum eigenstates sampled from the energy
    /// distribution (equal-probability-mass cells over ±3σ).
    pub n_components: usize,
    #[serde(rename = "energy_mean_eV")]
    pub energy_mean_ev: f64,
    #[serde(rename = "energy_fwhm_eV")]
    pub energy_fwhm_ev: f64,
    /// Gaussian smearing applied to each discrete line; zero keeps the
    /// lines sharp.
    #[serde(rename = "blur_fwhm_eV")]
    pub blur_fwhm_ev: f64,
    pub t_final_ps: f64,
    pub n_columns: usize,
    pub n_bins: usize,
    #[serde(rename = "bin_lo_eV")]
    pub bin_lo_ev: f64,
    #[serde(rename = "bin_hi_eV")]
    pub bin_hi_ev: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TracerSection {
    /// Pulse envelope family; pulsed-inelastic only (the elastic geometry
    /// is always gaussian).
    pub envelope: Option<ShapeKey>,
    /// Envelope flatness order; required with the super-gaussian envelope.
    pub order: Option<u32>,
    /// Crossing angle; pulsed-elastic only.
    pub alpha_deg: Option<f64>,
    pub fwhm_lo_ps: f64,
    pub fwhm_hi_ps: f64,
    pub n_durations: usize,
    pub n_particles: usize,
    pub sigma_xy_um: f64,
    pub sigma_z_um: f64,
    #[serde(rename = "energy_mean_eV")]
    pub energy_mean_ev: f64,
    #[serde(rename = "energy_fwhm_eV")]
    pub energy_fwhm_ev: f64,
    pub n_bins: usize,
    /// Energy window; pulsed-inelastic only.
    #[serde(rename = "bin_lo_eV")]
    pub bin_lo_ev: Option<f64>,
    #[serde(rename = "bin_hi_eV")]
    pub bin_hi_ev: Option<f64>,
    /// Deflection window; pulsed-elastic only.
    pub bin_lo_deg: Option<f64>,
    pub bin_hi_deg: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; relative paths land under the directory named by
    /// the `PONDERO_OUTPUT_ROOT` environment variable (default `.`).
    pub dir: String,
    /// Seed for every stochastic draw of the scenario; defaults to 0.
    pub seed: Option<u64>,
}

/// Everything the runner needs: the library arguments plus the metadata
/// destined for the output sidecars.
#[derive(Debug, Clone)]
pub struct BuiltScenario {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub out_dir: String,
    /// The lattice the scenario runs in; pulsed scenarios report the
    /// effective lattice their fixed optical geometry produces.
    pub potential: Option<PotentialParams>,
    /// Resolved SI parameters, echoed into the grid sidecar.
    pub parameters: serde_json::Value,
    /// Advisory messages collected while building; copied into the run
    /// manifest.
    pub warnings: Vec<String>,
    pub plan: Plan,
}

/// Library arguments per scenario kind.
#[derive(Debug, Clone)]
pub enum Plan {
    Trajectory {
        pot: PotentialParams,
        ic: InitialCondition,
        t_final: f64,
        n_samples: usize,
    },
    Periods {
        pot: PotentialParams,
        spec: EnsembleSpec,
        bins: BinSpec,
    },
    BoundFraction {
        pot: PotentialParams,
        spec: EnsembleSpec,
        a_grid: Vec<f64>,
    },
    Spectral {
        pot: PotentialParams,
        spec: EnsembleSpec,
        t_grid: Vec<f64>,
        observable: Observable,
        bins: BinSpec,
    },
    Scatter {
        pot: PotentialParams,
        n_particles: usize,
        seed: u64,
        geom: ScatterGeometry,
        bins: BinSpec,
    },
    Lho {
        pot: PotentialParams,
        packet: WavepacketSpec,
        n_max: usize,
        t_grid: Vec<f64>,
        bins: BinSpec,
    },
    Bloch {
        pot: PotentialParams,
        weights: Vec<(f64, f64)>,
        t_grid: Vec<f64>,
        bins: BinSpec,
        blur: f64,
    },
    PulsedInelastic {
        scenario: TracerScenario,
    },
    PulsedElastic {
        scenario: TracerScenario,
    },
}

/// Reads and schema-checks a configuration file.
pub fn parse_file(path: &Path) -> CliResult<ScenarioConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

/// Schema-checks configuration text.
pub fn parse(text: &str) -> CliResult<ScenarioConfig> {
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

fn config_err<T>(msg: String) -> CliResult<T> {
    Err(CliError::Config(msg))
}

/// Wraps a library constructor failure with the section it came from.
fn in_section<T>(section: &str, r: pondero::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Config(format!("[{section}]: {e}")))
}

fn require<'a, T>(section: &'static str, slot: &'a Option<T>) -> CliResult<&'a T> {
    slot.as_ref()
        .ok_or_else(|| CliError::Config(format!("missing section [{section}]")))
}

fn check_positive(key: &str, v: f64) -> CliResult<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        config_err(format!("{key}: must be a positive finite number (got {v})"))
    }
}

fn check_nonnegative(key: &str, v: f64) -> CliResult<f64> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        config_err(format!("{key}: must be a finite number >= 0 (got {v})"))
    }
}

fn check_finite(key: &str, v: f64) -> CliResult<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        config_err(format!("{key}: must be a finite number (got {v})"))
    }
}

fn check_count(key: &str, v: usize) -> CliResult<usize> {
    if v > 0 {
        Ok(v)
    } else {
        config_err(format!("{key}: must be at least 1"))
    }
}

/// `n` evenly spaced samples from `lo` to `hi` inclusive; a single sample
/// sits at `lo`.
fn linspace(key_lo: &str, key_hi: &str, lo: f64, hi: f64, n: usize) -> CliResult<Vec<f64>> {
    if n == 1 {
        return Ok(vec![lo]);
    }
    if !(hi > lo) {
        return config_err(format!(
            "{key_hi}: must exceed {key_lo} when more than one sample is requested"
        ));
    }
    let step = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| if i == n - 1 { hi } else { lo + step * i as f64 }).collect())
}

/// Sample times from 0 to `t_final` inclusive; a single column samples
/// `t_final` itself.
fn time_grid(section: &str, t_final_ps: f64, n_columns: usize) -> CliResult<Vec<f64>> {
    let t_final = check_positive(&format!("[{section}].t_final_ps"), t_final_ps)? * 1e-12;
    check_count(&format!("[{section}].n_columns"), n_columns)?;
    if n_columns == 1 {
        return Ok(vec![t_final]);
    }
    let step = t_final / (n_columns - 1) as f64;
    Ok((0..n_columns)
        .map(|i| if i == n_columns - 1 { t_final } else { step * i as f64 })
        .collect())
}

fn kev_c_to_si(v: f64) -> f64 {
    v * 1e3 * EV / CONSTS.c
}

/// Sections a scenario kind consumes, besides `[scenario]` and `[output]`.
fn allowed_sections(kind: ScenarioKind) -> &'static [&'static str] {
    match kind {
        ScenarioKind::Trajectory => &["potential", "fields", "trajectory"],
        ScenarioKind::Periods => &["potential", "fields", "ensemble", "periods"],
        ScenarioKind::BoundFraction => &["potential", "fields", "ensemble", "bound_fraction"],
        ScenarioKind::Spectral => &["potential", "fields", "ensemble", "spectral"],
        ScenarioKind::Scatter => &["potential", "fields", "scatter"],
        ScenarioKind::Lho => &["potential", "fields", "wavepacket", "lho"],
        ScenarioKind::Bloch => &["potential", "fields", "bloch"],
        ScenarioKind::PulsedInelastic => &["tracer"],
        ScenarioKind::PulsedElastic => &["tracer"],
    }
}

fn present_sections(cfg: &ScenarioConfig) -> Vec<&'static str> {
    let mut out = Vec::new();
    if cfg.potential.is_some() {
        out.push("potential");
    }
    if cfg.fields.is_some() {
        out.push("fields");
    }
    if cfg.ensemble.is_some() {
        out.push("ensemble");
    }
    if cfg.trajectory.is_some() {
        out.push("trajectory");
    }
    if cfg.periods.is_some() {
        out.push("periods");
    }
    if cfg.bound_fraction.is_some() {
        out.push("bound_fraction");
    }
    if cfg.spectral.is_some() {
        out.push("spectral");
    }
    if cfg.scatter.is_some() {
        out.push("scatter");
    }
    if cfg.wavepacket.is_some() {
        out.push("wavepacket");
    }
    if cfg.lho.is_some() {
        out.push("lho");
    }
    if cfg.bloch.is_some() {
        out.push("bloch");
    }
    if cfg.tracer.is_some() {
        out.push("tracer");
    }
    out
}

/// The lattice, from whichever physics section is present (exactly one).
fn build_potential(cfg: &ScenarioConfig) -> CliResult<(PotentialParams, serde_json::Value)> {
    match (&cfg.potential, &cfg.fields) {
        (Some(_), Some(_)) => {
            config_err("sections [potential] and [fields] are mutually exclusive".into())
        }
        (None, None) => config_err(
            "the scenario needs a lattice: provide section [potential] or [fields]".into(),
        ),
        (Some(p), None) => {
            let a = check_nonnegative("[potential].amplitude_meV", p.amplitude_mev)? * 1e-3 * EV;
            let lambda = check_positive("[potential].wavelength_nm", p.wavelength_nm)? * 1e-9;
            let v_g = check_finite("[potential].group_velocity_c", p.group_velocity_c)? * CONSTS.c;
            let pot = in_section("potential", PotentialParams::new(a, v_g, lambda))?;
            let echo = json!({
                "route": "potential",
                "amplitude_meV": p.amplitude_mev,
                "wavelength_nm": p.wavelength_nm,
                "group_velocity_c": p.group_velocity_c,
            });
            Ok((pot, echo))
        }
        (None, Some(f)) => {
            let lf = check_positive("[fields].wavelength_fast_nm", f.wavelength_fast_nm)? * 1e-9;
            let ls = check_positive("[fields].wavelength_slow_nm", f.wavelength_slow_nm)? * 1e-9;
            let e0 =
                check_positive("[fields].field_amplitude_V_per_m", f.field_amplitude_v_per_m)?;
            let omega1 = in_section("fields", omega_of_wavelength(lf, &CONSTS))?;
            let omega2 = in_section("fields", omega_of_wavelength(ls, &CONSTS))?;
            if omega1 <= omega2 {
                return config_err(
                    "[fields].wavelength_fast_nm: must be shorter than wavelength_slow_nm".into(),
                );
            }
            let inputs =
                in_section("fields", BeatWaveInputs::new(e0, omega1, omega2, CONSTS.e, CONSTS.m_e))?;
            let pot = in_section("fields", potential_from_fields(&inputs))?;
            let echo = json!({
                "route": "fields",
                "wavelength_fast_nm": f.wavelength_fast_nm,
                "wavelength_slow_nm": f.wavelength_slow_nm,
                "field_amplitude_V_per_m": f.field_amplitude_v_per_m,
            });
            Ok((pot, echo))
        }
    }
}

fn build_ensemble(cfg: &ScenarioConfig, seed: u64) -> CliResult<EnsembleSpec> {
    let e = require("ensemble", &cfg.ensemble)?;
    check_count("[ensemble].n_particles", e.n_particles)?;
    let mean = check_finite("[ensemble].energy_mean_eV", e.energy_mean_ev)? * EV;
    let fwhm = check_nonnegative("[ensemble].energy_fwhm_eV", e.energy_fwhm_ev)? * EV;
    in_section("ensemble", EnsembleSpec::new(e.n_particles, seed, mean, fwhm))
}

/// Advisory drift check: how far the ensemble mean sits from the lattice
/// speed, relative to the lattice speed.
fn drift_warning(pot: &PotentialParams, mean_offset: f64, fwhm: f64) -> Option<String> {
    let probe = mean_offset.abs() + fwhm;
    let dv = delta_v_from_energy_offset(probe.copysign(mean_offset), pot.v_g, &CONSTS).ok()?;
    let ratio = pot.drift_ratio(dv);
    (ratio > DRIFT_RATIO_WARN).then(|| {
        format!(
            "drift ratio |dv0|/|v_g| reaches {ratio:.3} at the distribution edge; \
             the travelling-lattice picture assumes it stays well below 1"
        )
    })
}

/// Discretizes a gaussian energy distribution into `n` equal-width cells
/// over ±3σ, returning `(k0, amplitude)` pairs with Σ amplitude² = 1.
fn bloch_weights(
    mu: f64,
    fwhm: f64,
    n: usize,
    v_g: f64,
) -> CliResult<Vec<(f64, f64)>> {
    let to_k0 = |de: f64| -> CliResult<f64> {
        let dv = delta_v_from_energy_offset(de, v_g, &CONSTS)
            .map_err(|e| CliError::Config(format!("[bloch].energy_mean_eV: {e}")))?;
        Ok(CONSTS.m_e * dv / CONSTS.hbar)
    };
    if n == 1 || fwhm == 0.0 {
        return Ok(vec![(to_k0(mu)?, 1.0)]);
    }
    let sigma = fwhm * FWHM_TO_SIGMA;
    let sqrt2 = core::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(n);
    let mut total = 0.0;
    for i in 0..n {
        let lo = mu + sigma * (-3.0 + 6.0 * i as f64 / n as f64);
        let hi = mu + sigma * (-3.0 + 6.0 * (i + 1) as f64 / n as f64);
        let mass = 0.5
            * (libm::erf((hi - mu) / (sigma * sqrt2)) - libm::erf((lo - mu) / (sigma * sqrt2)));
        out.push((to_k0(0.5 * (lo + hi))?, mass));
        total += mass;
    }
    let scale = total.sqrt().recip();
    for slot in out.iter_mut() {
        slot.1 = slot.1.sqrt() * scale;
    }
    Ok(out)
}

/// Semantic validation: turns a schema-checked configuration into library
/// arguments, or a configuration error naming the offending key.
pub fn build(cfg: &ScenarioConfig) -> CliResult<BuiltScenario> {
    let kind = cfg.scenario.kind;
    let allowed = allowed_sections(kind);
    for name in present_sections(cfg) {
        if !allowed.contains(&name) {
            return config_err(format!(
                "section [{name}] is not used by scenario kind `{kind}`"
            ));
        }
    }
    if cfg.output.dir.is_empty() {
        return config_err("[output].dir: must not be empty".into());
    }
    let seed = cfg.output.seed.unwrap_or(0);
    let mut warnings = Vec::new();

    let (potential, parameters, plan) = match kind {
        ScenarioKind::Trajectory => {
            let (pot, pot_echo) = build_potential(cfg)?;
            let t = require("trajectory", &cfg.trajectory)?;
            let z0_frac = check_finite("[trajectory].z0_lambda", t.z0_lambda)?;
            let de = check_finite("[trajectory].energy_offset_eV", t.energy_offset_ev)? * EV;
            let t_final = check_positive("[trajectory].t_final_ps", t.t_final_ps)? * 1e-12;
            let n_samples = check_count("[trajectory].n_samples", t.n_samples)?;
            let dv = delta_v_from_energy_offset(de, pot.v_g, &CONSTS)
                .map_err(|e| CliError::Config(format!("[trajectory].energy_offset_eV: {e}")))?;
            let ic = in_section(
                "trajectory",
                InitialCondition::new(z0_frac * pot.lambda, dv, pot.lambda),
            )?;
            if let Some(w) = drift_warning(&pot, de, 0.0) {
                warnings.push(w);
            }
            let params = json!({
                "lattice": pot_echo,
                "z0_lambda": z0_frac,
                "energy_offset_eV": t.energy_offset_ev,
                "t_final_s": t_final,
                "n_samples": n_samples,
            });
            (Some(pot), params, Plan::Trajectory { pot, ic, t_final, n_samples })
        }
        ScenarioKind::Periods => {
            let (pot, pot_echo) = build_potential(cfg)?;
            let spec = build_ensemble(cfg, seed)?;
            let p = require("periods", &cfg.periods)?;
            let lo = check_nonnegative("[periods].bin_lo_ps", p.bin_lo_ps)? * 1e-12;
            let hi = check_positive("[periods].bin_hi_ps", p.bin_hi_ps)? * 1e-12;
            check_count("[periods].n_bins", p.n_bins)?;
            let bins = in_section("periods", BinSpec::new(lo, hi, p.n_bins))?;
            if let Some(w) = drift_warning(&pot, spec.mean_offset, spec.fwhm_offset) {
                warnings.push(w);
            }
            let params = json!({
                "lattice": pot_echo,
                "n_particles": spec.n_particles,
                "energy_mean_J": spec.mean_offset,
                "energy_fwhm_J": spec.fwhm_offset,
                "bin_lo_s": lo,
                "bin_hi_s": hi,
            });
            (Some(pot), params, Plan::Periods { pot, spec, bins })
        }
        ScenarioKind::BoundFraction => {
            let (pot, pot_echo) = build_potential(cfg)?;
            let spec = build_ensemble(cfg, seed)?;
            let b = require("bound_fraction", &cfg.bound_fraction)?;
            let lo = check_positive("[bound_fraction].amplitude_lo_meV", b.amplitude_lo_mev)?;
            let hi = check_finite("[bound_fraction].amplitude_hi_meV", b.amplitude_hi_mev)?;
            let n = check_count("[bound_fraction].n_amplitudes", b.n_amplitudes)?;
            let a_grid: Vec<f64> = linspace(
                "[bound_fraction].amplitude_lo_meV",
                "[bound_fraction].amplitude_hi_meV",
                lo,
                hi,
                n,
            )?
            .into_iter()
            .map(|a| a * 1e-3 * EV)
            .collect();
            if let Some(w) = drift_warning(&pot, spec.mean_offset, spec.fwhm_offset) {
                warnings.push(w);
            }
            let params = json!({
                "lattice": pot_echo,
                "n_particles": spec.n_particles,
                "energy_mean_J": spec.mean_offset,
                "energy_fwhm_J": spec.fwhm_offset,
                "amplitude_grid_J": a_grid,
            });
            (Some(pot), params, Plan::BoundFraction { pot, spec, a_grid })
        }
        ScenarioKind::Spectral => {
            let (pot, pot_echo) = build_potential(cfg)?;
            let spec = build_ensemble(cfg, seed)?;
            let s = require("spectral", &cfg.spectral)?;
            let t_grid = time_grid("spectral", s.t_final_ps, s.n_columns)?;
            check_count("[spectral].n_bins", s.n_bins)?;
            let (observable, bins) = match s.observable {
                ObservableKey::Energy => {
                    let (Some(lo), Some(hi)) = (s.bin_lo_ev, s.bin_hi_ev) else {
                        return config_err(
                            "[spectral]: the energy observable needs bin_lo_eV and bin_hi_eV"
                                .into(),
                        );
                    };
                    let lo = check_finite("[spectral].bin_lo_eV", lo)? * EV;
                    let hi = check_finite("[spectral].bin_hi_eV", hi)? * EV;
                    (Observable::Energy, in_section("spectral", BinSpec::new(lo, hi, s.n_bins))?)
                }
                ObservableKey::Position => {
                    if s.bin_lo_ev.is_some() || s.bin_hi_ev.is_some() {
                        return config_err(
                            "[spectral]: the position observable fixes its own window; \
                             drop bin_lo_eV/bin_hi_eV"
                                .into(),
                        );
                    }
                    let bins = in_section(
                        "spectral",
                        BinSpec::new(-0.5 * pot.lambda, 1.5 * pot.lambda, s.n_bins),
                    )?;
                    (Observable::Position, bins)
                }
            };
            if let Some(w) = drift_warning(&pot, spec.mean_offset, spec.fwhm_offset) {
                warnings.push(w);
            }
            let params = json!({
                "lattice": pot_echo,
                "observable": match observable {
                    Observable::Energy => "energy",
                    Observable::Position => "position",
                },
                "n_particles": spec.n_particles,
                "energy_mean_J": spec.mean_offset,
                "energy_fwhm_J": spec.fwhm_offset,
                "t_final_s": t_grid.last().copied(),
                "n_columns": t_grid.len(),
            });
            (Some(pot), params, Plan::Spectral { pot, spec, t_grid, observable, bins })
        }
        ScenarioKind::Scatter => {
            let (pot, pot_echo) = build_potential(cfg)?;
            let s = require("scatter", &cfg.scatter)?;
            let alpha = check_positive("[scatter].alpha_deg", s.alpha_deg)?.to_radians();
            let e_mean =
                check_positive("[scatter].kinetic_energy_mean_eV", s.kinetic_energy_mean_ev)? * EV;
            let e_fwhm =
                check_nonnegative("[scatter].kinetic_energy_fwhm_eV", s.kinetic_energy_fwhm_ev)?
                    * EV;
            check_count("[scatter].n_particles", s.n_particles)?;
            let lo = check_nonnegative("[scatter].width_lo_um", s.width_lo_um)?;
            let hi = check_finite("[scatter].width_hi_um", s.width_hi_um)?;
            let n = check_count("[scatter].n_widths", s.n_widths)?;
            let d_values: Vec<f64> =
                linspace("[scatter].width_lo_um", "[scatter].width_hi_um", lo, hi, n)?
                    .into_iter()
                    .map(|d| d * 1e-6)
                    .collect();
            let geom =
                in_section("scatter", ScatterGeometry::new(alpha, e_mean, e_fwhm, d_values))?;
            check_count("[scatter].n_bins", s.n_bins)?;
            let bins = in_section(
                "scatter",
                BinSpec::new(
                    check_finite("[scatter].bin_lo_keV_c", s.bin_lo_kev_c).map(kev_c_to_si)?,
                    check_finite("[scatter].bin_hi_keV_c", s.bin_hi_kev_c).map(kev_c_to_si)?,
                    s.n_bins,
                ),
            )?;
            let params = json!({
                "lattice": pot_echo,
                "alpha_rad": geom.alpha,
                "kinetic_energy_mean_J": geom.e0_mean,
                "kinetic_energy_fwhm_J": geom.e0_fwhm,
                "n_particles": s.n_particles,
                "widths_m": geom.d_values,
            });
            (
                Some(pot),
                params,
                Plan::Scatter { pot, n_particles: s.n_particles, seed, geom, bins },
            )
        }
        ScenarioKind::Lho => {
            let (pot, pot_echo) = build_potential(cfg)?;
            let w = require("wavepacket", &cfg.wavepacket)?;
            let l = require("lho", &cfg.lho)?;
            let de = check_finite("[wavepacket].energy_offset_eV", w.energy_offset_ev)? * EV;
            let dv = delta_v_from_energy_offset(de, pot.v_g, &CONSTS)
                .map_err(|e| CliError::Config(format!("[wavepacket].energy_offset_eV: {e}")))?;
            let mu_p = CONSTS.m_e * dv;
            let packet = match w.shape {
                ShapeKey::Gaussian => {
                    if w.order.is_some() {
                        return config_err(
                            "[wavepacket].order: only the super-gaussian shape takes an order"
                                .into(),
                        );
                    }
                    let Some(frac) = w.position_fwhm_lambda else {
                        return config_err(
                            "[wavepacket].position_fwhm_lambda: required for the gaussian shape"
                                .into(),
                        );
                    };
                    let frac = check_positive("[wavepacket].position_fwhm_lambda", frac)?;
                    let sigma_q = frac * pot.lambda * FWHM_TO_SIGMA;
                    WavepacketSpec::Gaussian { mu_p, sigma_p: CONSTS.hbar / (2.0 * sigma_q) }
                }
                ShapeKey::SuperGaussian => {
                    if w.position_fwhm_lambda.is_some() {
                        return config_err(
                            "[wavepacket].position_fwhm_lambda: the super-gaussian width is \
                             fixed by its shape; drop the key"
                                .into(),
                        );
                    }
                    let Some(order) = w.order else {
                        return config_err(
                            "[wavepacket].order: required for the super-gaussian shape".into(),
                        );
                    };
                    WavepacketSpec::SuperGaussian { order, mu_p, lambda: pot.lambda }
                }
            };
            let t_grid = time_grid("lho", l.t_final_ps, l.n_columns)?;
            check_count("[lho].n_bins", l.n_bins)?;
            let bins = in_section(
                "lho",
                BinSpec::new(
                    check_finite("[lho].bin_lo_keV_c", l.bin_lo_kev_c).map(kev_c_to_si)?,
                    check_finite("[lho].bin_hi_keV_c", l.bin_hi_kev_c).map(kev_c_to_si)?,
                    l.n_bins,
                ),
            )?;
            let tail = in_section("wavepacket", tail_probability(&packet, 0.25 * pot.lambda))?;
            if tail > TAIL_WARN {
                warnings.push(format!(
                    "wavepacket carries {tail:.2e} probability outside a quarter period; \
                     the parabolic-well approximation degrades for such wide packets"
                ));
            }
            let params = json!({
                "lattice": pot_echo,
                "shape": match w.shape {
                    ShapeKey::Gaussian => "gaussian",
                    ShapeKey::SuperGaussian => "super-gaussian",
                },
                "order": w.order,
                "position_fwhm_lambda": w.position_fwhm_lambda,
                "mean_momentum_kg_m_per_s": mu_p,
                "t_final_s": t_grid.last().copied(),
                "n_columns": t_grid.len(),
            });
            (Some(pot), params, Plan::Lho { pot, packet, n_max: LHO_N_MAX, t_grid, bins })
        }
        ScenarioKind::Bloch => {
            let (pot, pot_echo) = build_potential(cfg)?;
            let b = require("bloch", &cfg.bloch)?;
            let n = check_count("[bloch].n_components", b.n_components)?;
            let mu = check_finite("[bloch].energy_mean_eV", b.energy_mean_ev)? * EV;
            let fwhm = check_nonnegative("[bloch].energy_fwhm_eV", b.energy_fwhm_ev)? * EV;
            let blur = check_nonnegative("[bloch].blur_fwhm_eV", b.blur_fwhm_ev)? * EV;
            let weights = bloch_weights(mu, fwhm, n, pot.v_g)?;
            let t_grid = time_grid("bloch", b.t_final_ps, b.n_columns)?;
            check_count("[bloch].n_bins", b.n_bins)?;
            let bins = in_section(
                "bloch",
                BinSpec::new(
                    check_finite("[bloch].bin_lo_eV", b.bin_lo_ev)? * EV,
                    check_finite("[bloch].bin_hi_eV", b.bin_hi_ev)? * EV,
                    b.n_bins,
                ),
            )?;
            if let Some(w) = drift_warning(&pot, mu, fwhm) {
                warnings.push(w);
            }
            let params = json!({
                "lattice": pot_echo,
                "n_components": n,
                "energy_mean_J": mu,
                "energy_fwhm_J": fwhm,
                "blur_fwhm_J": blur,
                "t_final_s": t_grid.last().copied(),
                "n_columns": t_grid.len(),
            });
            (Some(pot), params, Plan::Bloch { pot, weights, t_grid, bins, blur })
        }
        ScenarioKind::PulsedInelastic | ScenarioKind::PulsedElastic => {
            build_pulsed(cfg, kind, seed, &mut warnings)?
        }
    };

    Ok(BuiltScenario {
        kind,
        seed,
        out_dir: cfg.output.dir.clone(),
        potential,
        parameters,
        warnings,
        plan,
    })
}

/// The two pulsed scenarios share the whole `[tracer]` section; only the
/// observable-specific keys differ.
fn build_pulsed(
    cfg: &ScenarioConfig,
    kind: ScenarioKind,
    seed: u64,
    warnings: &mut Vec<String>,
) -> CliResult<(Option<PotentialParams>, serde_json::Value, Plan)> {
    let t = require("tracer", &cfg.tracer)?;
    let lo = check_nonnegative("[tracer].fwhm_lo_ps", t.fwhm_lo_ps)? * 1e-12;
    let hi = check_nonnegative("[tracer].fwhm_hi_ps", t.fwhm_hi_ps)? * 1e-12;
    let n = check_count("[tracer].n_durations", t.n_durations)?;
    let sweep = linspace("[tracer].fwhm_lo_ps", "[tracer].fwhm_hi_ps", lo, hi, n)?;
    check_count("[tracer].n_particles", t.n_particles)?;
    let sigma_xy = check_nonnegative("[tracer].sigma_xy_um", t.sigma_xy_um)? * 1e-6;
    let sigma_z = check_nonnegative("[tracer].sigma_z_um", t.sigma_z_um)? * 1e-6;
    let mean = check_finite("[tracer].energy_mean_eV", t.energy_mean_ev)? * EV;
    let fwhm = check_nonnegative("[tracer].energy_fwhm_eV", t.energy_fwhm_ev)? * EV;
    let beam = in_section(
        "tracer",
        BeamSpec::new(t.n_particles, seed, sigma_xy, sigma_z, mean, fwhm),
    )?;
    check_count("[tracer].n_bins", t.n_bins)?;

    match kind {
        ScenarioKind::PulsedInelastic => {
            if t.alpha_deg.is_some() || t.bin_lo_deg.is_some() || t.bin_hi_deg.is_some() {
                return config_err(
                    "[tracer]: alpha_deg and bin_*_deg belong to the pulsed-elastic scenario"
                        .into(),
                );
            }
            let (Some(blo), Some(bhi)) = (t.bin_lo_ev, t.bin_hi_ev) else {
                return config_err("[tracer]: pulsed-inelastic needs bin_lo_eV and bin_hi_eV".into());
            };
            let bins = in_section(
                "tracer",
                BinSpec::new(
                    check_finite("[tracer].bin_lo_eV", blo)? * EV,
                    check_finite("[tracer].bin_hi_eV", bhi)? * EV,
                    t.n_bins,
                ),
            )?;
            let envelope = match t.envelope {
                None => {
                    return config_err(
                        "[tracer].envelope: required for pulsed-inelastic (gaussian or \
                         super-gaussian)"
                            .into(),
                    )
                }
                Some(ShapeKey::Gaussian) => {
                    if t.order.is_some() {
                        return config_err(
                            "[tracer].order: only the super-gaussian envelope takes an order"
                                .into(),
                        );
                    }
                    Envelope::Gaussian
                }
                Some(ShapeKey::SuperGaussian) => {
                    let Some(order) = t.order else {
                        return config_err(
                            "[tracer].order: required for the super-gaussian envelope".into(),
                        );
                    };
                    Envelope::SuperGaussian { order }
                }
            };
            let scenario =
                in_section("tracer", TracerScenario::inelastic(envelope, sweep, beam, bins))?;
            let pot = effective_lattice(&scenario, warnings)?;
            let params = json!({
                "envelope": match envelope {
                    Envelope::Gaussian => "gaussian",
                    Envelope::SuperGaussian { .. } => "super-gaussian",
                },
                "order": t.order,
                "pulse_fwhm_s": scenario.sweep,
                "n_particles": t.n_particles,
                "sigma_xy_m": sigma_xy,
                "sigma_z_m": sigma_z,
                "energy_mean_J": mean,
                "energy_fwhm_J": fwhm,
                "reference_speed_m_per_s": scenario.reference_speed,
            });
            Ok((Some(pot), params, Plan::PulsedInelastic { scenario }))
        }
        ScenarioKind::PulsedElastic => {
            if t.envelope.is_some() || t.order.is_some() {
                return config_err(
                    "[tracer].envelope: the pulsed-elastic geometry is always gaussian; \
                     drop envelope/order"
                        .into(),
                );
            }
            if t.bin_lo_ev.is_some() || t.bin_hi_ev.is_some() {
                return config_err(
                    "[tracer]: bin_*_eV belong to the pulsed-inelastic scenario".into(),
                );
            }
            let Some(alpha_deg) = t.alpha_deg else {
                return config_err("[tracer].alpha_deg: required for pulsed-elastic".into());
            };
            let alpha = check_nonnegative("[tracer].alpha_deg", alpha_deg)?.to_radians();
            let (Some(blo), Some(bhi)) = (t.bin_lo_deg, t.bin_hi_deg) else {
                return config_err(
                    "[tracer]: pulsed-elastic needs bin_lo_deg and bin_hi_deg".into(),
                );
            };
            let bins = in_section(
                "tracer",
                BinSpec::new(
                    check_finite("[tracer].bin_lo_deg", blo)?.to_radians(),
                    check_finite("[tracer].bin_hi_deg", bhi)?.to_radians(),
                    t.n_bins,
                ),
            )?;
            let scenario = in_section("tracer", TracerScenario::elastic(alpha, sweep, beam, bins))?;
            let pot = effective_lattice(&scenario, warnings)?;
            let params = json!({
                "alpha_deg": alpha_deg,
                "pulse_fwhm_s": scenario.sweep,
                "n_particles": t.n_particles,
                "sigma_xy_m": sigma_xy,
                "sigma_z_m": sigma_z,
                "energy_mean_J": mean,
                "energy_fwhm_J": fwhm,
                "reference_speed_m_per_s": scenario.reference_speed,
            });
            Ok((Some(pot), params, Plan::PulsedElastic { scenario }))
        }
        _ => unreachable!("build_pulsed is only called for pulsed kinds"),
    }
}

/// The cycle-averaged lattice equivalent to a tracer scenario's optical
/// geometry, for the output metadata.
fn effective_lattice(
    scenario: &TracerScenario,
    warnings: &mut Vec<String>,
) -> CliResult<PotentialParams> {
    let [a, b] = &scenario.pulses;
    let omega_a = in_section("tracer", omega_of_wavelength(a.lambda, &CONSTS))?;
    let omega_b = in_section("tracer", omega_of_wavelength(b.lambda, &CONSTS))?;
    let pot = if (omega_a - omega_b).abs() > 0.0 {
        let (hi, lo) = if omega_a > omega_b { (omega_a, omega_b) } else { (omega_b, omega_a) };
        let inputs = in_section("tracer", BeatWaveInputs::new(a.e0, hi, lo, CONSTS.e, CONSTS.m_e))?;
        in_section("tracer", potential_from_fields(&inputs))?
    } else {
        in_section(
            "tracer",
            standing_wave_potential(a.e0, omega_a, CONSTS.e, CONSTS.m_e),
        )?
    };
    if scenario.beam.fwhm_offset > 0.0 || scenario.beam.mean_offset != 0.0 {
        let gamma_ref = 1.0
            / (1.0 - scenario.reference_speed * scenario.reference_speed / (CONSTS.c * CONSTS.c))
                .sqrt();
        let e_ref = (gamma_ref - 1.0) * CONSTS.m_e * CONSTS.c * CONSTS.c;
        let probe = scenario.beam.mean_offset.abs() + scenario.beam.fwhm_offset;
        if probe > 0.5 * e_ref {
            warnings.push(format!(
                "energy offsets reach {:.1}% of the reference kinetic energy; \
                 the bunch is far from riding the lattice",
                100.0 * probe / e_ref
            ));
        }
    }
    Ok(pot)
}
