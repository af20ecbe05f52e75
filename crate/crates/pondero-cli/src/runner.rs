//! Scenario execution: dispatch to the library, render the outputs, write
//! them atomically and record the run manifest.
//!
//! All output content is produced in memory first; files only start to
//! appear once the simulation has succeeded. If a write fails midway,
//! every file this run had already placed is removed again, so a run
//! directory never holds a partial result set. The manifest is written
//! last and only on success.

use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pondero::beatwave::{PhysicalConstants, PotentialParams};
use pondero::classical::{
    self, build_trajectory, eval_q, eval_qdot, SEPARATRIX_TOL,
};
use pondero::ensemble::{
    bound_fraction_curve, nonparallel_scatter, period_distribution, spectral_evolution,
    Observable, SpectralDensityGrid,
};
use pondero::qm_bloch::wavepacket_evolution;
use pondero::qm_parabolic::{decompose, evolve_momentum_density, LHOBasis};
use pondero::tracer::{run_elastic, run_inelastic};
use serde_json::json;

use crate::config::{self, BuiltScenario, Plan};
use crate::grid_io::{
    format_grid, format_table, AxisMeta, ColumnMeta, CountersMeta, GridAxes, PotentialMeta,
    Sidecar, META_FORMAT,
};
use crate::manifest::{
    sha256_hex, write_atomic, OutputFile, RunManifest, StageTiming, MANIFEST_FORMAT,
    MANIFEST_NAME,
};
use crate::{CliError, CliResult};

const CONSTS: PhysicalConstants = PhysicalConstants::DEFAULT;
const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Environment variable naming the directory under which relative
/// `[output].dir` paths are created.
pub const OUTPUT_ROOT_VAR: &str = "PONDERO_OUTPUT_ROOT";

/// A fully rendered output file, not yet on disk.
struct Artifact {
    name: &'static str,
    bytes: Vec<u8>,
}

/// Result of a successful `run` invocation.
#[derive(Debug)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
}

/// Resolves `[output].dir` against the output root.
pub fn resolve_out_dir(dir: &str) -> PathBuf {
    let dir = PathBuf::from(dir);
    if dir.is_absolute() {
        return dir;
    }
    match env::var_os(OUTPUT_ROOT_VAR) {
        Some(root) => PathBuf::from(root).join(dir),
        None => dir,
    }
}

/// Parses, builds and checks a configuration file without running it.
pub fn validate(config_path: &Path) -> CliResult<BuiltScenario> {
    let cfg = config::parse_file(config_path)?;
    config::build(&cfg)
}

/// Runs a configuration file end to end and returns the manifest.
pub fn run(config_path: &Path) -> CliResult<RunOutcome> {
    let wall_start = Instant::now();
    let raw = fs::read(config_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let text = String::from_utf8(raw.clone())
        .map_err(|_| CliError::Config(format!("{} is not UTF-8", config_path.display())))?;

    let build_start = Instant::now();
    let cfg = config::parse(&text)?;
    let built = config::build(&cfg)?;
    let build_s = build_start.elapsed().as_secs_f64();

    let run_start = Instant::now();
    let mut warnings = built.warnings.clone();
    let artifacts = dispatch(&built, &mut warnings)?;
    let run_s = run_start.elapsed().as_secs_f64();

    let emit_start = Instant::now();
    let out_dir = resolve_out_dir(&built.out_dir);
    fs::create_dir_all(&out_dir).map_err(|e| {
        CliError::Runtime(format!("cannot create output directory {}: {e}", out_dir.display()))
    })?;
    let mut outputs = Vec::with_capacity(artifacts.len());
    let mut written: Vec<PathBuf> = Vec::with_capacity(artifacts.len());
    for artifact in &artifacts {
        let path = out_dir.join(artifact.name);
        if let Err(e) = write_atomic(&path, &artifact.bytes) {
            for w in &written {
                let _ = fs::remove_file(w);
            }
            return Err(CliError::Runtime(format!("cannot write {}: {e}", path.display())));
        }
        written.push(path);
        outputs.push(OutputFile {
            path: artifact.name.to_string(),
            bytes: artifact.bytes.len() as u64,
            sha256: sha256_hex(&artifact.bytes),
        });
    }
    let emit_s = emit_start.elapsed().as_secs_f64();

    let manifest = RunManifest {
        format: MANIFEST_FORMAT.into(),
        tool_version: TOOL_VERSION.into(),
        scenario: built.kind.as_str().into(),
        config_sha256: sha256_hex(&raw),
        seed: built.seed,
        threads: current_threads(),
        wall_clock_s: wall_start.elapsed().as_secs_f64(),
        stages: vec![
            StageTiming { name: "build".into(), seconds: build_s },
            StageTiming { name: "run".into(), seconds: run_s },
            StageTiming { name: "emit".into(), seconds: emit_s },
        ],
        warnings,
        outputs,
    };
    let manifest_path = out_dir.join(MANIFEST_NAME);
    if let Err(e) = write_atomic(&manifest_path, manifest.to_json().as_bytes()) {
        for w in &written {
            let _ = fs::remove_file(w);
        }
        return Err(CliError::Runtime(format!(
            "cannot write {}: {e}",
            manifest_path.display()
        )));
    }
    Ok(RunOutcome { out_dir, manifest_path, manifest })
}

fn current_threads() -> usize {
    rayon::current_num_threads()
}

fn runtime(e: pondero::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn potential_meta(pot: &PotentialParams) -> PotentialMeta {
    PotentialMeta {
        amplitude_j: pot.a,
        group_velocity_m_per_s: pot.v_g,
        wavelength_m: pot.lambda,
    }
}

fn sidecar(
    built: &BuiltScenario,
    normalization: &str,
    grid_axes: Option<GridAxes>,
    table_columns: Option<Vec<ColumnMeta>>,
    parameters: serde_json::Value,
    counters: Option<CountersMeta>,
) -> Sidecar {
    Sidecar {
        format: META_FORMAT.into(),
        tool_version: TOOL_VERSION.into(),
        scenario: built.kind.as_str().into(),
        seed: built.seed,
        normalization: normalization.into(),
        grid_axes,
        table_columns,
        potential: built.potential.as_ref().map(potential_meta),
        parameters,
        counters,
    }
}

/// Extends the build-time parameter record with run-time facts.
fn merge_params(base: &serde_json::Value, extra: serde_json::Value) -> serde_json::Value {
    let mut merged = base.clone();
    if let (Some(obj), Some(add)) = (merged.as_object_mut(), extra.as_object()) {
        for (k, v) in add {
            obj.insert(k.clone(), v.clone());
        }
    }
    merged
}

fn grid_warnings(grid: &SpectralDensityGrid, warnings: &mut Vec<String>) {
    if grid.metadata.saturated > 0 {
        warnings.push(format!(
            "{} samples fell outside the observable window and were folded into the edge bins",
            grid.metadata.saturated
        ));
    }
    if grid.metadata.failed > 0 {
        warnings.push(format!(
            "{} particle traces aborted and were excluded from the histograms",
            grid.metadata.failed
        ));
    }
}

/// The per-column normalization statement shared by every emitted grid.
const COLUMN_NORM: &str = "each column sums to one over the binned range";

fn grid_artifacts(
    built: &BuiltScenario,
    stem_csv: &'static str,
    stem_meta: &'static str,
    grid: &SpectralDensityGrid,
    axes: GridAxes,
    extra_params: serde_json::Value,
) -> Vec<Artifact> {
    let csv = format_grid(grid, &axes);
    let meta = sidecar(
        built,
        COLUMN_NORM,
        Some(axes),
        None,
        merge_params(&built.parameters, extra_params),
        Some(CountersMeta::from(grid.metadata)),
    );
    vec![
        Artifact { name: stem_csv, bytes: csv.into_bytes() },
        Artifact { name: stem_meta, bytes: meta.to_json().into_bytes() },
    ]
}

fn dispatch(built: &BuiltScenario, warnings: &mut Vec<String>) -> CliResult<Vec<Artifact>> {
    match &built.plan {
        Plan::Trajectory { pot, ic, t_final, n_samples } => {
            let traj = build_trajectory(ic, pot).map_err(runtime)?;
            let kappa = classical::kappa(ic, pot).map_err(runtime)?;
            let class = match classical::classify(kappa, SEPARATRIX_TOL) {
                classical::TrajectoryClass::Bound => "bound",
                classical::TrajectoryClass::Unbound => "unbound",
                classical::TrajectoryClass::Separatrix => "separatrix",
            };
            let period = match classical::period(ic, pot) {
                Ok(t) => Some(t),
                Err(pondero::Error::InfinitePeriod) => None,
                Err(e) => return Err(runtime(e)),
            };
            let mut records = Vec::with_capacity(n_samples + 1);
            for i in 0..=*n_samples {
                let t = t_final * i as f64 / *n_samples as f64;
                let q = eval_q(&traj, t).map_err(runtime)?;
                let qdot = eval_qdot(&traj, t).map_err(runtime)?;
                records.push(vec![t, q, qdot]);
            }
            let columns = vec![
                ColumnMeta::new("t", "s"),
                ColumnMeta::new("q", "m"),
                ColumnMeta::new("qdot", "m/s"),
            ];
            let csv = format_table(&columns, &records);
            let meta = sidecar(
                built,
                "rest-frame trajectory samples; no normalization applies",
                None,
                Some(columns),
                merge_params(
                    &built.parameters,
                    json!({ "kappa": kappa, "class": class, "period_s": period }),
                ),
                None,
            );
            Ok(vec![
                Artifact { name: "trajectory.csv", bytes: csv.into_bytes() },
                Artifact { name: "trajectory.meta.json", bytes: meta.to_json().into_bytes() },
            ])
        }
        Plan::Periods { pot, spec, bins } => {
            let dist = period_distribution(spec, pot, bins).map_err(runtime)?;
            let n = dist.density.len();
            let mut records = Vec::with_capacity(n);
            for i in 0..n {
                records.push(vec![
                    dist.edges[i],
                    dist.edges[i + 1],
                    dist.density[i],
                    dist.bound_counts[i] as f64,
                    dist.unbound_counts[i] as f64,
                ]);
            }
            let columns = vec![
                ColumnMeta::new("period_lo", "s"),
                ColumnMeta::new("period_hi", "s"),
                ColumnMeta::new("density", "1/s"),
                ColumnMeta::new("bound_count", "1"),
                ColumnMeta::new("unbound_count", "1"),
            ];
            if dist.saturated > 0 {
                warnings.push(format!(
                    "{} periods fell outside the bin range and were folded into the edge bins",
                    dist.saturated
                ));
            }
            let csv = format_table(&columns, &records);
            let meta = sidecar(
                built,
                "density integrates to one over the period axis",
                None,
                Some(columns),
                built.parameters.clone(),
                Some(CountersMeta {
                    n_particles: spec.n_particles as u64,
                    seed: spec.seed,
                    resampled: dist.resampled,
                    saturated: dist.saturated,
                    separatrix: dist.separatrix_excluded,
                    failed: 0,
                }),
            );
            Ok(vec![
                Artifact { name: "periods.csv", bytes: csv.into_bytes() },
                Artifact { name: "periods.meta.json", bytes: meta.to_json().into_bytes() },
            ])
        }
        Plan::BoundFraction { pot, spec, a_grid } => {
            let curve = bound_fraction_curve(spec, pot, a_grid).map_err(runtime)?;
            if curve.never_bound > 0 {
                warnings.push(format!(
                    "{} draws start exactly on a potential maximum and can never be trapped",
                    curve.never_bound
                ));
            }
            let records: Vec<Vec<f64>> = a_grid
                .iter()
                .zip(&curve.fractions)
                .map(|(&a, &f)| vec![a, f])
                .collect();
            let columns = vec![
                ColumnMeta::new("amplitude", "J"),
                ColumnMeta::new("bound_fraction", "1"),
            ];
            let csv = format_table(&columns, &records);
            let meta = sidecar(
                built,
                "bound_fraction is the trapped probability, in [0, 1]",
                None,
                Some(columns),
                merge_params(
                    &built.parameters,
                    json!({ "never_bound": curve.never_bound }),
                ),
                Some(CountersMeta {
                    n_particles: spec.n_particles as u64,
                    seed: spec.seed,
                    resampled: curve.resampled,
                    saturated: 0,
                    separatrix: 0,
                    failed: 0,
                }),
            );
            Ok(vec![
                Artifact { name: "bound_fraction.csv", bytes: csv.into_bytes() },
                Artifact { name: "bound_fraction.meta.json", bytes: meta.to_json().into_bytes() },
            ])
        }
        Plan::Spectral { pot, spec, t_grid, observable, bins } => {
            let grid = spectral_evolution(spec, pot, t_grid, *observable, bins).map_err(runtime)?;
            grid_warnings(&grid, warnings);
            let rows = match observable {
                Observable::Energy => AxisMeta::new("energy_offset", "J", grid.n_bins()),
                Observable::Position => AxisMeta::new("position", "m", grid.n_bins()),
            };
            let axes = GridAxes {
                columns: AxisMeta::new("sample_time", "s", grid.n_columns()),
                rows,
            };
            Ok(grid_artifacts(built, "spectral.csv", "spectral.meta.json", &grid, axes, json!({})))
        }
        Plan::Scatter { pot, n_particles, seed, geom, bins } => {
            let grid =
                nonparallel_scatter(*n_particles, *seed, geom, pot, bins).map_err(runtime)?;
            grid_warnings(&grid, warnings);
            let axes = GridAxes {
                columns: AxisMeta::new("thickness", "m", grid.n_columns()),
                rows: AxisMeta::new("parallel_momentum", "kg m/s", grid.n_bins()),
            };
            Ok(grid_artifacts(built, "scatter.csv", "scatter.meta.json", &grid, axes, json!({})))
        }
        Plan::Lho { pot, packet, n_max, t_grid, bins } => {
            let basis = LHOBasis::for_potential(pot, &CONSTS, *n_max);
            let coeffs = decompose(&basis, packet).map_err(runtime)?;
            let grid = evolve_momentum_density(&basis, &coeffs, t_grid, bins).map_err(runtime)?;
            if grid.metadata.saturated > 0 {
                warnings.push(format!(
                    "{} time columns miss more than 1e-6 of the packet norm; \
                     the momentum window clips the state",
                    grid.metadata.saturated
                ));
            }
            let axes = GridAxes {
                columns: AxisMeta::new("sample_time", "s", grid.n_columns()),
                rows: AxisMeta::new("momentum", "kg m/s", grid.n_bins()),
            };
            let extra = json!({
                "oscillator_angular_frequency_rad_per_s": basis.omega,
                "n_states": coeffs.c.len(),
                "captured_norm": coeffs.captured_norm,
            });
            Ok(grid_artifacts(
                built,
                "momentum_density.csv",
                "momentum_density.meta.json",
                &grid,
                axes,
                extra,
            ))
        }
        Plan::Bloch { pot, weights, t_grid, bins, blur } => {
            let grid =
                wavepacket_evolution(weights, pot, &CONSTS, t_grid, bins, *blur).map_err(runtime)?;
            if grid.metadata.saturated > 0 {
                warnings.push(format!(
                    "{} momentum levels carried visible probability outside the energy window",
                    grid.metadata.saturated
                ));
            }
            let axes = GridAxes {
                columns: AxisMeta::new("sample_time", "s", grid.n_columns()),
                rows: AxisMeta::new("energy_offset", "J", grid.n_bins()),
            };
            Ok(grid_artifacts(
                built,
                "energy_density.csv",
                "energy_density.meta.json",
                &grid,
                axes,
                json!({}),
            ))
        }
        Plan::PulsedInelastic { scenario } => {
            let grid = run_inelastic(scenario).map_err(runtime)?;
            grid_warnings(&grid, warnings);
            let axes = GridAxes {
                columns: AxisMeta::new("pulse_fwhm", "s", grid.n_columns()),
                rows: AxisMeta::new("energy_offset", "J", grid.n_bins()),
            };
            Ok(grid_artifacts(
                built,
                "energy_density.csv",
                "energy_density.meta.json",
                &grid,
                axes,
                json!({}),
            ))
        }
        Plan::PulsedElastic { scenario } => {
            let grid = run_elastic(scenario).map_err(runtime)?;
            grid_warnings(&grid, warnings);
            let axes = GridAxes {
                columns: AxisMeta::new("pulse_fwhm", "s", grid.n_columns()),
                rows: AxisMeta::new("deflection_angle", "rad", grid.n_bins()),
            };
            Ok(grid_artifacts(
                built,
                "deflection_density.csv",
                "deflection_density.meta.json",
                &grid,
                axes,
                json!({}),
            ))
        }
    }
}
