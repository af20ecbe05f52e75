//! Monte-Carlo ensembles and their aggregate observables: bound-fraction
//! curves, oscillation-period distributions, time-resolved spectral densities
//! in energy and position, and the momentum spectra of electrons crossing the
//! lattice at an angle.
//!
//! Sampling is counter-based: every particle index owns an independent
//! ChaCha8 stream derived from `(seed, index)`, so ensembles are reproducible
//! bit for bit regardless of evaluation order or worker count. Histogram
//! reduction uses integer counts merged in fixed chunk order for the same
//! reason.

use crate::beatwave::{PhysicalConstants, PotentialParams};
use crate::classical::{
    self, build_trajectory, classify, delta_v_from_energy_offset, energy_offset, eval_q,
    eval_qdot, InitialCondition, TrajectoryClass, SEPARATRIX_TOL,
};
use crate::par;
use crate::{Error, Result};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[allow(unused_imports)]
use num_traits::Float;

/// Converts a full width at half maximum to a gaussian σ.
pub const FWHM_TO_SIGMA: f64 = 0.42466090014400953; // 1/(2√(2 ln 2))

pub(crate) const MAX_RESAMPLE: u32 = 10_000;

/// Ensemble description: positions uniform over one lattice cell, lab-frame
/// energy offsets gaussian with the given mean and full width at half
/// maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub n_particles: usize,
    pub seed: u64,
    /// Mean lab-frame kinetic-energy offset ΔE₀ [J].
    pub mean_offset: f64,
    /// FWHM of the offset distribution [J]; `0` collapses to a point mass.
    pub fwhm_offset: f64,
}

impl EnsembleSpec {
    pub fn new(n_particles: usize, seed: u64, mean_offset: f64, fwhm_offset: f64) -> Result<Self> {
        if n_particles == 0 {
            return Err(Error::Domain("ensemble needs at least one particle"));
        }
        if !mean_offset.is_finite() || !fwhm_offset.is_finite() || fwhm_offset < 0.0 {
            return Err(Error::Domain("offset distribution parameters must be finite, fwhm ≥ 0"));
        }
        Ok(Self { n_particles, seed, mean_offset, fwhm_offset })
    }

    fn sigma(&self) -> f64 {
        self.fwhm_offset * FWHM_TO_SIGMA
    }
}

/// Uniform binning of one observable axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl BinSpec {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo < hi) || n == 0 {
            return Err(Error::Domain("bin range must be non-empty with lo < hi"));
        }
        Ok(Self { lo, hi, n })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.n)
            .map(|i| self.lo + (self.hi - self.lo) * i as f64 / self.n as f64)
            .collect()
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }

    /// Bin index for `x`, saturating out-of-range values into the edge bins;
    /// the flag reports whether saturation happened.
    pub fn index_saturating(&self, x: f64) -> (usize, bool) {
        let raw = ((x - self.lo) / (self.hi - self.lo) * self.n as f64).floor();
        if raw < 0.0 {
            (0, true)
        } else if raw >= self.n as f64 {
            (self.n - 1, x >= self.hi)
        } else {
            (raw as usize, false)
        }
    }
}

/// Which single-particle observable a spectral grid histograms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// Lab-frame kinetic-energy offset ΔE(t).
    Energy,
    /// Rest-frame position, wrapped into [−λ/2, 3λ/2) so drift across the
    /// neighbouring cell stays visible.
    Position,
}

/// Bookkeeping carried by every grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GridMetadata {
    pub n_particles: u64,
    pub seed: u64,
    /// Rejected-and-redrawn samples (offsets outside the kinematic range).
    pub resampled: u64,
    /// Observable values that fell outside the bin range and were folded
    /// into the nearest edge bin.
    pub saturated: u64,
    /// Draws inside the separatrix tolerance band.
    pub separatrix: u64,
    /// Particle traces aborted by the integrator and excluded from the
    /// histogram (always zero for closed-form ensembles).
    pub failed: u64,
}

/// A per-column-normalized 2-D histogram: observable distribution (rows)
/// against sample time or traversal distance (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensityGrid {
    /// Abscissa bin edges (`n_columns + 1`): sample times, or lattice
    /// thicknesses for scattering grids.
    pub t_edges: Vec<f64>,
    /// Observable bin edges (`n_bins + 1`).
    pub obs_edges: Vec<f64>,
    /// Column-contiguous densities, `density[col * n_bins + row]`; every
    /// column sums to 1.
    pub density: Vec<f64>,
    pub metadata: GridMetadata,
}

impl SpectralDensityGrid {
    pub fn n_columns(&self) -> usize {
        self.t_edges.len() - 1
    }

    pub fn n_bins(&self) -> usize {
        self.obs_edges.len() - 1
    }

    pub fn column(&self, col: usize) -> &[f64] {
        let n = self.n_bins();
        &self.density[col * n..(col + 1) * n]
    }

    /// Mean of the binned observable in one column.
    pub fn column_mean(&self, col: usize) -> f64 {
        self.column(col)
            .iter()
            .enumerate()
            .map(|(i, &p)| p * 0.5 * (self.obs_edges[i] + self.obs_edges[i + 1]))
            .sum::<f64>()
    }

    /// Standard deviation of the binned observable in one column.
    pub fn column_std(&self, col: usize) -> f64 {
        let mean = self.column_mean(col);
        self.column(col)
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let c = 0.5 * (self.obs_edges[i] + self.obs_edges[i + 1]);
                p * (c - mean) * (c - mean)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Result of drawing one full ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSample {
    pub ics: Vec<InitialCondition>,
    pub resampled: u64,
}

/// Bound fraction against potential amplitude, with the tail bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundFractionCurve {
    /// Fraction of the ensemble trapped at each requested amplitude.
    pub fractions: Vec<f64>,
    /// Draws that can never be trapped (release exactly on a potential
    /// maximum, where the critical amplitude diverges).
    pub never_bound: u64,
    pub resampled: u64,
}

/// Normalized distribution of oscillation/drift periods.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodDistribution {
    pub edges: Vec<f64>,
    /// Probability density over the period axis; integrates to 1.
    pub density: Vec<f64>,
    pub bound_counts: Vec<u64>,
    pub unbound_counts: Vec<u64>,
    /// Separatrix draws carry an infinite period and are excluded.
    pub separatrix_excluded: u64,
    pub saturated: u64,
    pub resampled: u64,
}

pub(crate) fn particle_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

pub(crate) fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
}

pub(crate) fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Draws one particle: position uniform over the cell, offset gaussian,
/// converted to a rest-frame velocity. Kinematically impossible offsets
/// (below −m·v_g²/2) are redrawn and counted.
fn draw_initial(
    spec: &EnsembleSpec,
    pot: &PotentialParams,
    index: u64,
) -> Result<(InitialCondition, u64)> {
    let mut rng = particle_rng(spec.seed, index);
    let z0 = (uniform(&mut rng) - 0.5) * pot.lambda;
    let sigma = spec.sigma();
    let mut retries = 0u64;
    loop {
        let de0 = spec.mean_offset + sigma * standard_normal(&mut rng);
        match delta_v_from_energy_offset(de0, pot.v_g, &PhysicalConstants::DEFAULT) {
            Ok(dv) => return Ok((InitialCondition::new(z0, dv, pot.lambda)?, retries)),
            Err(_) => {
                retries += 1;
                if retries as u32 > MAX_RESAMPLE {
                    return Err(Error::Resampling { tries: retries as u32 });
                }
            }
        }
    }
}

struct FallibleAcc<T> {
    value: T,
    error: Option<Error>,
}

pub(crate) fn run_fallible<T: Send>(
    n: usize,
    chunk: usize,
    make: impl Fn() -> T + Sync,
    fill: impl Fn(&mut T, usize) -> Result<()> + Sync,
    mut merge: impl FnMut(&mut T, T),
) -> Result<T> {
    let total = par::chunked_merge(
        n,
        chunk,
        || FallibleAcc { value: make(), error: None },
        |acc, i| {
            if acc.error.is_none() {
                if let Err(e) = fill(&mut acc.value, i) {
                    acc.error = Some(e);
                }
            }
        },
        |total, part| {
            if total.error.is_none() {
                total.error = part.error;
                merge(&mut total.value, part.value);
            }
        },
    );
    match total.error {
        Some(e) => Err(e),
        None => Ok(total.value),
    }
}

/// Draws the whole ensemble in index order.
pub fn sample_ensemble(spec: &EnsembleSpec, pot: &PotentialParams) -> Result<EnsembleSample> {
    sample_ensemble_chunked(spec, pot, par::DEFAULT_CHUNK)
}

fn sample_ensemble_chunked(
    spec: &EnsembleSpec,
    pot: &PotentialParams,
    chunk: usize,
) -> Result<EnsembleSample> {
    let acc = run_fallible(
        spec.n_particles,
        chunk,
        || (Vec::new(), 0u64),
        |acc: &mut (Vec<InitialCondition>, u64), i| {
            let (ic, retries) = draw_initial(spec, pot, i as u64)?;
            acc.0.push(ic);
            acc.1 += retries;
            Ok(())
        },
        |a, b| {
            a.0.extend_from_slice(&b.0);
            a.1 += b.1;
        },
    )?;
    Ok(EnsembleSample { ics: acc.0, resampled: acc.1 })
}

/// Fraction of the ensemble trapped as a function of potential amplitude,
/// evaluated by ranking each particle's critical amplitude: a particle is
/// bound exactly when `A` exceeds its own threshold, so the curve is the
/// cumulative distribution of thresholds over the ensemble.
pub fn bound_fraction_curve(
    spec: &EnsembleSpec,
    pot_template: &PotentialParams,
    a_grid: &[f64],
) -> Result<BoundFractionCurve> {
    if a_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("amplitude grid must be strictly increasing"));
    }
    let consts = PhysicalConstants::DEFAULT;
    let acc = run_fallible(
        spec.n_particles,
        par::DEFAULT_CHUNK,
        || (Vec::new(), 0u64, 0u64),
        |acc: &mut (Vec<f64>, u64, u64), i| {
            let (ic, retries) = draw_initial(spec, pot_template, i as u64)?;
            acc.2 += retries;
            let de0 = energy_offset(ic.delta_v0, pot_template.v_g, &consts);
            match classical::critical_amplitude(
                ic.z0,
                de0,
                pot_template.v_g,
                pot_template.lambda,
                &consts,
            ) {
                Ok(a_crit) => acc.0.push(a_crit),
                Err(_) => acc.1 += 1,
            }
            Ok(())
        },
        |a, b| {
            a.0.extend_from_slice(&b.0);
            a.1 += b.1;
            a.2 += b.2;
        },
    )?;
    let (mut thresholds, never_bound, resampled) = acc;
    thresholds.sort_unstable_by(f64::total_cmp);
    let n = spec.n_particles as f64;
    let fractions = a_grid
        .iter()
        .map(|&a| thresholds.partition_point(|&t| t < a) as f64 / n)
        .collect();
    Ok(BoundFractionCurve { fractions, never_bound, resampled })
}

/// Histogram of oscillation (bound) and cell-crossing (unbound) periods.
pub fn period_distribution(
    spec: &EnsembleSpec,
    pot: &PotentialParams,
    bins: &BinSpec,
) -> Result<PeriodDistribution> {
    struct Acc {
        bound: Vec<u64>,
        unbound: Vec<u64>,
        separatrix: u64,
        saturated: u64,
        resampled: u64,
    }
    let acc = run_fallible(
        spec.n_particles,
        par::DEFAULT_CHUNK,
        || Acc {
            bound: vec![0; bins.n],
            unbound: vec![0; bins.n],
            separatrix: 0,
            saturated: 0,
            resampled: 0,
        },
        |acc: &mut Acc, i| {
            let (ic, retries) = draw_initial(spec, pot, i as u64)?;
            acc.resampled += retries;
            let kappa = classical::kappa(&ic, pot)?;
            match classify(kappa, SEPARATRIX_TOL) {
                TrajectoryClass::Separatrix => acc.separatrix += 1,
                class => {
                    let t = classical::period(&ic, pot)?;
                    let (idx, sat) = bins.index_saturating(t);
                    acc.saturated += sat as u64;
                    match class {
                        TrajectoryClass::Bound => acc.bound[idx] += 1,
                        _ => acc.unbound[idx] += 1,
                    }
                }
            }
            Ok(())
        },
        |a, b| {
            for (x, y) in a.bound.iter_mut().zip(&b.bound) {
                *x += y;
            }
            for (x, y) in a.unbound.iter_mut().zip(&b.unbound) {
                *x += y;
            }
            a.separatrix += b.separatrix;
            a.saturated += b.saturated;
            a.resampled += b.resampled;
        },
    )?;
    let counted: u64 = acc
        .bound
        .iter()
        .chain(acc.unbound.iter())
        .sum();
    let norm = 1.0 / (counted.max(1) as f64 * bins.width());
    let density = acc
        .bound
        .iter()
        .zip(&acc.unbound)
        .map(|(&b, &u)| (b + u) as f64 * norm)
        .collect();
    Ok(PeriodDistribution {
        edges: bins.edges(),
        density,
        bound_counts: acc.bound,
        unbound_counts: acc.unbound,
        separatrix_excluded: acc.separatrix,
        saturated: acc.saturated,
        resampled: acc.resampled,
    })
}

pub(crate) fn column_edges(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() || samples.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("sample grid must be non-empty and strictly increasing"));
    }
    let n = samples.len();
    let mut edges = Vec::with_capacity(n + 1);
    if n == 1 {
        let half = samples[0].abs().max(1e-12) * 0.5;
        edges.push(samples[0] - half);
        edges.push(samples[0] + half);
        return Ok(edges);
    }
    edges.push(samples[0] - 0.5 * (samples[1] - samples[0]));
    for w in samples.windows(2) {
        edges.push(0.5 * (w[0] + w[1]));
    }
    edges.push(samples[n - 1] + 0.5 * (samples[n - 1] - samples[n - 2]));
    Ok(edges)
}

/// Wraps a rest-frame position into the display window [−λ/2, 3λ/2).
fn wrap_for_display(q: f64, lambda: f64) -> f64 {
    let period = 2.0 * lambda;
    q - period * ((q + 0.5 * lambda) / period).floor()
}

struct GridAcc {
    counts: Vec<u64>,
    saturated: u64,
    separatrix: u64,
    resampled: u64,
}

impl GridAcc {
    fn new(len: usize) -> Self {
        Self { counts: vec![0; len], saturated: 0, separatrix: 0, resampled: 0 }
    }

    fn merge(&mut self, other: GridAcc) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.saturated += other.saturated;
        self.separatrix += other.separatrix;
        self.resampled += other.resampled;
    }

    fn into_grid(
        self,
        t_edges: Vec<f64>,
        bins: &BinSpec,
        n_particles: usize,
        seed: u64,
    ) -> SpectralDensityGrid {
        let density = self
            .counts
            .iter()
            .map(|&c| c as f64 / n_particles as f64)
            .collect();
        SpectralDensityGrid {
            t_edges,
            obs_edges: bins.edges(),
            density,
            metadata: GridMetadata {
                n_particles: n_particles as u64,
                seed,
                resampled: self.resampled,
                saturated: self.saturated,
                separatrix: self.separatrix,
                failed: 0,
            },
        }
    }
}

/// Time-resolved spectral density of one observable over the ensemble.
pub fn spectral_evolution(
    spec: &EnsembleSpec,
    pot: &PotentialParams,
    t_grid: &[f64],
    observable: Observable,
    bins: &BinSpec,
) -> Result<SpectralDensityGrid> {
    spectral_evolution_chunked(spec, pot, t_grid, observable, bins, par::DEFAULT_CHUNK)
}

fn spectral_evolution_chunked(
    spec: &EnsembleSpec,
    pot: &PotentialParams,
    t_grid: &[f64],
    observable: Observable,
    bins: &BinSpec,
    chunk: usize,
) -> Result<SpectralDensityGrid> {
    let t_edges = column_edges(t_grid)?;
    let consts = PhysicalConstants::DEFAULT;
    let n_bins = bins.n;
    let acc = run_fallible(
        spec.n_particles,
        chunk,
        || GridAcc::new(t_grid.len() * n_bins),
        |acc: &mut GridAcc, i| {
            let (ic, retries) = draw_initial(spec, pot, i as u64)?;
            acc.resampled += retries;
            let traj = build_trajectory(&ic, pot)?;
            if traj.class == TrajectoryClass::Separatrix {
                acc.separatrix += 1;
            }
            for (col, &t) in t_grid.iter().enumerate() {
                let value = match observable {
                    Observable::Energy => {
                        energy_offset(eval_qdot(&traj, t)?, pot.v_g, &consts)
                    }
                    Observable::Position => wrap_for_display(eval_q(&traj, t)?, pot.lambda),
                };
                let (idx, sat) = bins.index_saturating(value);
                acc.saturated += sat as u64;
                acc.counts[col * n_bins + idx] += 1;
            }
            Ok(())
        },
        GridAcc::merge,
    )?;
    Ok(acc.into_grid(t_edges, bins, spec.n_particles, spec.seed))
}

/// Crossing geometry for electrons incident at an angle to the lattice
/// planes: `alpha` is the angle between the electron velocity and the
/// lattice wavefront normal's transverse plane, so the velocity component
/// along the lattice axis is `v·sin α`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatterGeometry {
    pub alpha: f64,
    /// Mean total initial kinetic energy [J].
    pub e0_mean: f64,
    /// FWHM of the kinetic-energy distribution [J].
    pub e0_fwhm: f64,
    /// Lattice thicknesses [m] at which the exit spectrum is recorded.
    pub d_values: Vec<f64>,
}

impl ScatterGeometry {
    pub fn new(alpha: f64, e0_mean: f64, e0_fwhm: f64, d_values: Vec<f64>) -> Result<Self> {
        if !(alpha > 0.0 && alpha < PI / 2.0) {
            return Err(Error::Domain("crossing angle must lie in (0, π/2)"));
        }
        if !(e0_mean > 0.0) || e0_fwhm < 0.0 || !e0_fwhm.is_finite() {
            return Err(Error::Domain("kinetic energy must be positive, fwhm ≥ 0"));
        }
        if d_values.is_empty()
            || d_values.iter().any(|&d| d < 0.0)
            || d_values.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Domain("thickness grid must be non-negative and increasing"));
        }
        Ok(Self { alpha, e0_mean, e0_fwhm, d_values })
    }
}

/// Exit momentum spectra for an ensemble crossing the moving lattice at an
/// angle.
///
/// Each electron keeps its transverse velocity (the lattice has no gradient
/// that way), so it spends `Δt = d/(v cos α)` inside a thickness `d`; its
/// parallel dynamics follow the rest-frame trajectory with
/// `δv₀ = v sin α − v_g`. The recorded observable is the parallel momentum
/// relative to the frame, `δp = m·q̇(Δt)`.
pub fn nonparallel_scatter(
    n_particles: usize,
    seed: u64,
    geom: &ScatterGeometry,
    pot: &PotentialParams,
    dp_bins: &BinSpec,
) -> Result<SpectralDensityGrid> {
    if n_particles == 0 {
        return Err(Error::Domain("ensemble needs at least one particle"));
    }
    let d_edges = column_edges(&geom.d_values)?;
    let consts = PhysicalConstants::DEFAULT;
    let sigma = geom.e0_fwhm * FWHM_TO_SIGMA;
    let (sin_a, cos_a) = geom.alpha.sin_cos();
    let n_bins = dp_bins.n;
    let acc = run_fallible(
        n_particles,
        par::DEFAULT_CHUNK,
        || GridAcc::new(geom.d_values.len() * n_bins),
        |acc: &mut GridAcc, i| {
            let mut rng = particle_rng(seed, i as u64);
            let z0 = (uniform(&mut rng) - 0.5) * pot.lambda;
            let mut e0;
            let mut retries = 0u64;
            loop {
                e0 = geom.e0_mean + sigma * standard_normal(&mut rng);
                if e0 > 0.0 {
                    break;
                }
                retries += 1;
                if retries as u32 > MAX_RESAMPLE {
                    return Err(Error::Resampling { tries: retries as u32 });
                }
            }
            acc.resampled += retries;
            let speed = (2.0 * e0 / consts.m_e).sqrt();
            let ic = InitialCondition::new(z0, speed * sin_a - pot.v_g, pot.lambda)?;
            let traj = build_trajectory(&ic, pot)?;
            if traj.class == TrajectoryClass::Separatrix {
                acc.separatrix += 1;
            }
            for (col, &d) in geom.d_values.iter().enumerate() {
                let dt = d / (speed * cos_a);
                let dp = consts.m_e * eval_qdot(&traj, dt)?;
                let (idx, sat) = dp_bins.index_saturating(dp);
                acc.saturated += sat as u64;
                acc.counts[col * n_bins + idx] += 1;
            }
            Ok(())
        },
        GridAcc::merge,
    )?;
    Ok(acc.into_grid(d_edges, dp_bins, n_particles, seed))
}
