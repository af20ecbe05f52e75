//! Text formats for simulation output: the grid CSV, the table CSV, and
//! the JSON sidecar carrying the run metadata.
//!
//! Every float is printed with Rust's `{:e}` formatting, which emits the
//! shortest decimal string that parses back to the identical bit pattern;
//! [`parse_grid`] therefore round-trips grids exactly. The full grammar is
//! documented in `docs/formats.md` at the repository root.

use std::fmt::Write as _;

use pondero::ensemble::{GridMetadata, SpectralDensityGrid};
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

pub const GRID_HEADER: &str = "# pondero-grid v1";
pub const TABLE_HEADER: &str = "# pondero-table v1";
pub const META_FORMAT: &str = "pondero-meta v1";

/// One named, unit-carrying axis of a grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxisMeta {
    pub name: String,
    pub unit: String,
    pub count: usize,
}

impl AxisMeta {
    pub fn new(name: &str, unit: &str, count: usize) -> Self {
        Self { name: name.into(), unit: unit.into(), count }
    }
}

/// Column (abscissa) and row (observable) axes of a grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridAxes {
    pub columns: AxisMeta,
    pub rows: AxisMeta,
}

/// One named, unit-carrying column of a table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub unit: String,
}

impl ColumnMeta {
    pub fn new(name: &str, unit: &str) -> Self {
        Self { name: name.into(), unit: unit.into() }
    }
}

/// Histogram bookkeeping mirrored from the library, in sidecar form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountersMeta {
    pub n_particles: u64,
    pub seed: u64,
    pub resampled: u64,
    pub saturated: u64,
    pub separatrix: u64,
    pub failed: u64,
}

impl From<GridMetadata> for CountersMeta {
    fn from(m: GridMetadata) -> Self {
        Self {
            n_particles: m.n_particles,
            seed: m.seed,
            resampled: m.resampled,
            saturated: m.saturated,
            separatrix: m.separatrix,
            failed: m.failed,
        }
    }
}

/// The lattice actually used, with full float fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialMeta {
    #[serde(rename = "amplitude_J")]
    pub amplitude_j: f64,
    pub group_velocity_m_per_s: f64,
    pub wavelength_m: f64,
}

/// JSON sidecar written next to every CSV, `<stem>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format: String,
    pub tool_version: String,
    pub scenario: String,
    pub seed: u64,
    /// Human-readable statement of what the emitted numbers sum to.
    pub normalization: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_axes: Option<GridAxes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_columns: Option<Vec<ColumnMeta>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialMeta>,
    /// Scenario parameters, resolved to SI.
    pub parameters: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counters: Option<CountersMeta>,
}

impl Sidecar {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sidecar serializes");
        s.push('\n');
        s
    }
}

fn push_floats(out: &mut String, values: &[f64], sep: char) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(sep);
        }
        write!(out, "{v:e}").expect("string write");
    }
}

/// Renders a grid: header comments carrying both axes and both edge
/// vectors, then one text line per observable bin (lowest edge first),
/// with one comma-separated field per abscissa column.
pub fn format_grid(grid: &SpectralDensityGrid, axes: &GridAxes) -> String {
    let n_cols = grid.n_columns();
    let n_rows = grid.n_bins();
    debug_assert_eq!(axes.columns.count, n_cols);
    debug_assert_eq!(axes.rows.count, n_rows);
    let mut out = String::new();
    out.push_str(GRID_HEADER);
    out.push('\n');
    let _ = writeln!(out, "# columns: {} [{}] n={}", axes.columns.name, axes.columns.unit, n_cols);
    let _ = writeln!(out, "# rows: {} [{}] n={}", axes.rows.name, axes.rows.unit, n_rows);
    out.push_str("# column_edges: ");
    push_floats(&mut out, &grid.t_edges, ' ');
    out.push('\n');
    out.push_str("# row_edges: ");
    push_floats(&mut out, &grid.obs_edges, ' ');
    out.push('\n');
    for row in 0..n_rows {
        for col in 0..n_cols {
            if col > 0 {
                out.push(',');
            }
            let v = grid.density[col * n_rows + row];
            let _ = write!(out, "{v:e}");
        }
        out.push('\n');
    }
    out
}

/// Renders a table: a header comment listing `name [unit]` per column,
/// then one comma-separated line per record.
pub fn format_table(columns: &[ColumnMeta], records: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(TABLE_HEADER);
    out.push('\n');
    out.push_str("# columns: ");
    for (i, c) in columns.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{} [{}]", c.name, c.unit);
    }
    out.push('\n');
    for record in records {
        debug_assert_eq!(record.len(), columns.len());
        push_floats(&mut out, record, ',');
        out.push('\n');
    }
    out
}

/// A grid read back from its CSV rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedGrid {
    pub axes: GridAxes,
    pub column_edges: Vec<f64>,
    pub row_edges: Vec<f64>,
    /// Row-major values: `values[row * n_columns + col]`.
    pub values: Vec<f64>,
}

impl ParsedGrid {
    pub fn n_columns(&self) -> usize {
        self.axes.columns.count
    }

    pub fn n_rows(&self) -> usize {
        self.axes.rows.count
    }

    /// Sum of one abscissa column over all observable bins.
    pub fn column_sum(&self, col: usize) -> f64 {
        (0..self.n_rows()).map(|r| self.values[r * self.n_columns() + col]).sum()
    }
}

fn grid_err<T>(msg: String) -> CliResult<T> {
    Err(CliError::Runtime(format!("grid parse: {msg}")))
}

fn parse_f64(field: &str) -> CliResult<f64> {
    field.parse::<f64>().map_err(|_| {
        CliError::Runtime(format!("grid parse: `{field}` is not a floating point number"))
    })
}

fn parse_axis_line(line: &str, tag: &str) -> CliResult<AxisMeta> {
    let Some(rest) = line.strip_prefix(tag) else {
        return grid_err(format!("expected a line starting with `{tag}`, found `{line}`"));
    };
    let Some((name, rest)) = rest.split_once(" [") else {
        return grid_err(format!("axis line `{line}` misses the ` [unit]` part"));
    };
    let Some((unit, rest)) = rest.split_once("] n=") else {
        return grid_err(format!("axis line `{line}` misses the `] n=` part"));
    };
    let count: usize = rest
        .parse()
        .map_err(|_| CliError::Runtime(format!("grid parse: bad axis count in `{line}`")))?;
    Ok(AxisMeta::new(name, unit, count))
}

fn parse_edges_line(line: &str, tag: &str, expect: usize) -> CliResult<Vec<f64>> {
    let Some(rest) = line.strip_prefix(tag) else {
        return grid_err(format!("expected a line starting with `{tag}`, found `{line}`"));
    };
    let edges: CliResult<Vec<f64>> = rest.split(' ').map(parse_f64).collect();
    let edges = edges?;
    if edges.len() != expect {
        return grid_err(format!(
            "{tag} carries {} values, expected {expect}",
            edges.len()
        ));
    }
    Ok(edges)
}

/// Strict reader for [`format_grid`] output; the round trip is bit-exact.
pub fn parse_grid(text: &str) -> CliResult<ParsedGrid> {
    let mut lines = text.lines();
    match lines.next() {
        Some(l) if l == GRID_HEADER => {}
        other => return grid_err(format!("missing `{GRID_HEADER}` header, found {other:?}")),
    }
    let columns = parse_axis_line(
        lines.next().unwrap_or_default(),
        "# columns: ",
    )?;
    let rows = parse_axis_line(lines.next().unwrap_or_default(), "# rows: ")?;
    let column_edges = parse_edges_line(
        lines.next().unwrap_or_default(),
        "# column_edges: ",
        columns.count + 1,
    )?;
    let row_edges =
        parse_edges_line(lines.next().unwrap_or_default(), "# row_edges: ", rows.count + 1)?;
    let mut values = Vec::with_capacity(rows.count * columns.count);
    for r in 0..rows.count {
        let Some(line) = lines.next() else {
            return grid_err(format!("{} data rows, expected {}", r, rows.count));
        };
        let mut n = 0;
        for field in line.split(',') {
            values.push(parse_f64(field)?);
            n += 1;
        }
        if n != columns.count {
            return grid_err(format!(
                "data row {r} has {n} fields, expected {}",
                columns.count
            ));
        }
    }
    if lines.next().is_some() {
        return grid_err("trailing content after the data rows".into());
    }
    Ok(ParsedGrid { axes: GridAxes { columns, rows }, column_edges, row_edges, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use pondero::ensemble::GridMetadata;

    fn awkward_grid() -> SpectralDensityGrid {
        SpectralDensityGrid {
            t_edges: vec![-0.0, 0.1 + 0.2, 4e-323],
            obs_edges: vec![-1e301, core::f64::consts::PI, 1.0 + f64::EPSILON],
            density: vec![0.1, 0.3f64.next_up(), 5e-324, 1.0 - f64::EPSILON],
            metadata: GridMetadata::default(),
        }
    }

    fn axes_2x2() -> GridAxes {
        GridAxes {
            columns: AxisMeta::new("sample_time", "s", 2),
            rows: AxisMeta::new("energy_offset", "J", 2),
        }
    }

    #[test]
    fn a_two_by_two_grid_round_trips_bitwise() {
        let grid = awkward_grid();
        let text = format_grid(&grid, &axes_2x2());
        let parsed = parse_grid(&text).unwrap();
        assert_eq!(parsed.axes, axes_2x2());
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&parsed.column_edges), bits(&grid.t_edges));
        assert_eq!(bits(&parsed.row_edges), bits(&grid.obs_edges));
        // CSV stores rows-major; the library grid is column-major.
        let expect_row_major =
            [grid.density[0], grid.density[2], grid.density[1], grid.density[3]];
        assert_eq!(bits(&parsed.values), bits(&expect_row_major));
        // A second rendering of the parse result is byte-identical.
        let back = SpectralDensityGrid {
            t_edges: parsed.column_edges.clone(),
            obs_edges: parsed.row_edges.clone(),
            density: vec![
                parsed.values[0],
                parsed.values[2],
                parsed.values[1],
                parsed.values[3],
            ],
            metadata: GridMetadata::default(),
        };
        assert_eq!(format_grid(&back, &parsed.axes), text);
    }

    #[test]
    fn column_sums_are_recovered_from_the_text_form() {
        let grid = awkward_grid();
        let text = format_grid(&grid, &axes_2x2());
        let parsed = parse_grid(&text).unwrap();
        assert_eq!(parsed.column_sum(0), grid.density[0] + grid.density[1]);
        assert_eq!(parsed.column_sum(1), grid.density[2] + grid.density[3]);
    }

    #[test]
    fn malformed_grids_are_rejected_with_a_reason() {
        let grid = awkward_grid();
        let good = format_grid(&grid, &axes_2x2());
        let missing_row = {
            let cut = good.trim_end().rfind('\n').unwrap() + 1;
            good[..cut].to_string()
        };
        for (broken, needle) in [
            (good.replace("pondero-grid v1", "pondero-grid v2"), "header"),
            (good.replace("[J] n=2", "[J] n=3"), "carries 3 values, expected 4"),
            (good.replace("# row_edges: ", "# row_edges:  "), "not a floating point"),
            (format!("{good}0.5,0.5\n"), "trailing content"),
            (format!("{},1e0\n", good.trim_end()), "fields"),
            (missing_row, "data rows, expected 2"),
        ] {
            let err = parse_grid(&broken).unwrap_err();
            assert!(err.to_string().contains(needle), "{err} (wanted `{needle}`)");
        }
    }

    #[test]
    fn tables_render_their_columns_and_units() {
        let cols = [ColumnMeta::new("amplitude", "J"), ColumnMeta::new("bound_fraction", "1")];
        let text = format_table(&cols, &[vec![1.5e-21, 0.25], vec![3e-21, 0.5]]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(TABLE_HEADER));
        assert_eq!(lines.next(), Some("# columns: amplitude [J], bound_fraction [1]"));
        assert_eq!(lines.next(), Some("1.5e-21,2.5e-1"));
        assert_eq!(lines.next(), Some("3e-21,5e-1"));
        assert_eq!(lines.next(), None);
    }

    #[test]
    fn sidecars_round_trip_through_serde() {
        let sidecar = Sidecar {
            format: META_FORMAT.into(),
            tool_version: "0.1.0".into(),
            scenario: "spectral".into(),
            seed: 42,
            normalization: "each column sums to one over the binned range".into(),
            grid_axes: Some(axes_2x2()),
            table_columns: None,
            potential: Some(PotentialMeta {
                amplitude_j: 30.0e-3 * 1.602_176_634e-19,
                group_velocity_m_per_s: 0.2 * 299_792_458.0,
                wavelength_m: 206e-9,
            }),
            parameters: serde_json::json!({"n_particles": 1000}),
            counters: None,
        };
        let text = sidecar.to_json();
        let back: Sidecar = serde_json::from_str(&text).unwrap();
        assert_eq!(back, sidecar);
        assert_eq!(
            back.potential.unwrap().amplitude_j.to_bits(),
            (30.0e-3 * 1.602_176_634e-19_f64).to_bits()
        );
    }
}
