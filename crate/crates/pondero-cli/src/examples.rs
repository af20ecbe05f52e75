//! The example configurations shipped in the repository's `examples/`
//! directory, embedded so `list-examples` works and so tests can keep
//! every shipped file valid.

use crate::config::ScenarioKind;

pub struct Example {
    /// File stem under `examples/`.
    pub name: &'static str,
    pub kind: ScenarioKind,
    /// One-line summary for the listing.
    pub description: &'static str,
    /// Embedded file content, identical to the file in the repository.
    pub toml: &'static str,
}

impl Example {
    pub fn path(&self) -> String {
        format!("examples/{}.toml", self.name)
    }
}

macro_rules! example {
    ($name:literal, $kind:ident, $desc:literal) => {
        Example {
            name: $name,
            kind: ScenarioKind::$kind,
            description: $desc,
            toml: include_str!(concat!("../../../examples/", $name, ".toml")),
        }
    };
}

pub const EXAMPLES: &[Example] = &[
    example!(
        "bound_fraction_weak",
        BoundFraction,
        "Trapped fraction against lattice depth for a cold bunch 9 eV below the lattice"
    ),
    example!(
        "period_distributions",
        Periods,
        "Oscillation and crossing period histogram of a drifting ensemble"
    ),
    example!(
        "energy_spectra",
        Spectral,
        "Time-resolved kinetic-energy spectra in a weak travelling lattice"
    ),
    example!(
        "position_spectra",
        Spectral,
        "Time-resolved position spectra in the frame riding the lattice"
    ),
    example!(
        "strong_capture_spectra",
        Spectral,
        "Capture of a 1 keV-offset ensemble by a 30 eV lattice"
    ),
    example!(
        "scatter_geometry",
        Scatter,
        "Coarse look at a 10.2 keV bunch crossing the moving lattice at 30 degrees"
    ),
    example!(
        "scatter_width_sweep",
        Scatter,
        "Exit momentum spectra against lattice profile width, narrowest near 75 um"
    ),
    example!(
        "lho_wavepackets",
        Lho,
        "Gaussian wavepacket breathing in the parabolic bottom of one well"
    ),
    example!(
        "bloch_evolution",
        Bloch,
        "Plane-wave-ladder evolution of a sampled momentum mixture"
    ),
    example!(
        "pulsed_gaussian",
        PulsedInelastic,
        "Traced two-colour interaction with gaussian envelopes (minutes)"
    ),
    example!(
        "pulsed_supergaussian",
        PulsedInelastic,
        "Traced two-colour interaction with flat-topped envelopes (minutes)"
    ),
    example!(
        "beam_splitter",
        PulsedElastic,
        "Pulsed standing-wave beam splitter at one degree incidence (minutes)"
    ),
    example!(
        "trajectory_bound",
        Trajectory,
        "One closed-form bound trajectory in the co-moving frame"
    ),
];

/// Renders the aligned listing printed by `list-examples`.
pub fn listing() -> String {
    let name_w = EXAMPLES.iter().map(|e| e.path().len()).max().unwrap_or(0);
    let kind_w = EXAMPLES.iter().map(|e| e.kind.as_str().len()).max().unwrap_or(0);
    let mut out = String::new();
    for e in EXAMPLES {
        out.push_str(&format!(
            "{:name_w$}  {:kind_w$}  {}\n",
            e.path(),
            e.kind.as_str(),
            e.description
        ));
    }
    out.push_str("\nRun one with: pondero run <path>\n");
    out
}
