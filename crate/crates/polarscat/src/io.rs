//! Persistence and configuration: spectrum and series CSV files,
//! normalization of raw measurements against references, and the TOML run
//! configuration shared by the command-line tools.

use crate::dielectric::{DielectricModel, Layer, Stack};
use crate::dispersion::{BranchRecord, CouplingFitMode, DetuningSeries, DispersionError};
use crate::scattermodel::ScatteringLaw;
use crate::tmm::{energy_grid, find_cavity_thickness, Channel, Spectrum, TmmError};
use serde::Deserialize;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("bad header: expected `{expected}`, got `{got}`")]
    BadHeader { expected: String, got: String },
    #[error("grid not strictly increasing at row {row}")]
    OrderError { row: usize },
    #[error("negative count at row {row}")]
    NegativeCount { row: usize },
    #[error("reference is unusable: {0}")]
    BadReference(String),
    #[error("sample and reference grids do not overlap")]
    NoOverlap,
    #[error("config schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    File(#[from] std::io::Error),
    #[error(transparent)]
    Spectrum(#[from] TmmError),
    #[error(transparent)]
    Series(#[from] DispersionError),
}

const SPECTRUM_HEADER: &str = "energy_ev,value";
const SERIES_HEADER_FULL: &str = "detuning_ev,e_upper_ev,e_lower_ev,sigma_u,sigma_l";
const SERIES_HEADER_BARE: &str = "detuning_ev,e_upper_ev,e_lower_ev";

/// An as-measured spectrum: energies, nonnegative counts in arbitrary
/// units, and minimal metadata.
#[derive(Debug, Clone)]
pub struct RawMeasurement {
    pub energies: Vec<f64>,
    pub counts: Vec<f64>,
    pub sample_id: String,
    pub intent: Channel,
}

impl RawMeasurement {
    pub fn new(
        energies: Vec<f64>,
        counts: Vec<f64>,
        sample_id: impl Into<String>,
        intent: Channel,
    ) -> Result<Self, IoError> {
        if energies.len() != counts.len() {
            return Err(IoError::Schema(format!(
                "{} energies but {} counts",
                energies.len(),
                counts.len()
            )));
        }
        for (i, window) in energies.windows(2).enumerate() {
            if !(window[1] > window[0]) {
                return Err(IoError::OrderError { row: i + 3 });
            }
        }
        for (i, &c) in counts.iter().enumerate() {
            if !c.is_finite() || !energies[i].is_finite() {
                return Err(IoError::Parse {
                    row: i + 2,
                    message: "non-finite value".into(),
                });
            }
            if c < 0.0 {
                return Err(IoError::NegativeCount { row: i + 2 });
            }
        }
        Ok(RawMeasurement {
            energies,
            counts,
            sample_id: sample_id.into(),
            intent,
        })
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Reinterprets the measurement as a validated spectrum on `channel`.
    pub fn into_spectrum(self, channel: Channel) -> Result<Spectrum, IoError> {
        Ok(Spectrum::new(self.energies, self.counts, channel)?)
    }
}

fn interpolate(grid: &[f64], values: &[f64], e: f64) -> f64 {
    let idx = grid.partition_point(|&x| x < e);
    if idx == 0 {
        return values[0];
    }
    if idx >= grid.len() {
        return values[grid.len() - 1];
    }
    let (e0, e1) = (grid[idx - 1], grid[idx]);
    let t = (e - e0) / (e1 - e0);
    values[idx - 1] * (1.0 - t) + values[idx] * t
}

/// Divides a sample by a reference measurement on the part of the sample
/// grid the reference covers, interpolating the reference linearly. The
/// ratio is clipped to [0, 1.2]; indices of clipped points are returned
/// alongside the (channel-Raw) spectrum. A reference that drops below 1e−6
/// of its own maximum anywhere it is needed is rejected.
pub fn normalize(
    sample: &RawMeasurement,
    reference: &RawMeasurement,
) -> Result<(Spectrum, Vec<usize>), IoError> {
    if reference.is_empty() || sample.is_empty() {
        return Err(IoError::NoOverlap);
    }
    let ref_lo = reference.energies[0];
    let ref_hi = reference.energies[reference.len() - 1];
    let ref_max = reference.counts.iter().cloned().fold(0.0f64, f64::max);
    if ref_max <= 0.0 {
        return Err(IoError::BadReference("reference is identically zero".into()));
    }
    let threshold = 1e-6 * ref_max;
    let mut energies = Vec::new();
    let mut values = Vec::new();
    let mut flagged = Vec::new();
    for (&e, &c) in sample.energies.iter().zip(&sample.counts) {
        if e < ref_lo || e > ref_hi {
            continue;
        }
        let r = interpolate(&reference.energies, &reference.counts, e);
        if r < threshold {
            return Err(IoError::BadReference(format!(
                "reference falls below 1e-6 of its maximum at {e:.4} eV"
            )));
        }
        let ratio = c / r;
        if !(0.0..=1.2).contains(&ratio) {
            flagged.push(energies.len());
        }
        energies.push(e);
        values.push(ratio.clamp(0.0, 1.2));
    }
    if energies.is_empty() {
        return Err(IoError::NoOverlap);
    }
    Ok((Spectrum::new(energies, values, Channel::Raw)?, flagged))
}

/// Renders a spectrum as `energy_ev,value` CSV with 17 significant digits,
/// which round-trips every f64 exactly. LF line endings.
pub fn spectrum_csv_string(spectrum: &Spectrum) -> String {
    let mut out = String::with_capacity(64 * (spectrum.len() + 1));
    out.push_str(SPECTRUM_HEADER);
    out.push('\n');
    for (&e, &v) in spectrum.energies().iter().zip(spectrum.values()) {
        let _ = writeln!(out, "{e:.16e},{v:.16e}");
    }
    out
}

/// Writes [`spectrum_csv_string`] to `path`.
pub fn write_spectrum_csv(spectrum: &Spectrum, path: impl AsRef<Path>) -> Result<(), IoError> {
    std::fs::write(path, spectrum_csv_string(spectrum))?;
    Ok(())
}

/// Reads an `energy_ev,value` CSV. Parse failures name the 1-based file
/// line; a non-increasing grid is an order error. The sample id is taken
/// from the file stem and the channel intent is left as `Raw`.
pub fn read_spectrum_csv(path: impl AsRef<Path>) -> Result<RawMeasurement, IoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let header = match lines.next() {
        Some((_, line)) => line.trim_end_matches('\r'),
        None => {
            return Err(IoError::BadHeader {
                expected: SPECTRUM_HEADER.into(),
                got: String::new(),
            })
        }
    };
    if header != SPECTRUM_HEADER {
        return Err(IoError::BadHeader {
            expected: SPECTRUM_HEADER.into(),
            got: header.into(),
        });
    }
    let mut energies = Vec::new();
    let mut counts = Vec::new();
    for (i, raw_line) in lines {
        let row = i + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 2 {
            return Err(IoError::Parse {
                row,
                message: format!("expected 2 fields, got {}", fields.len()),
            });
        }
        let parse = |field: &str| -> Result<f64, IoError> {
            field.trim().parse::<f64>().map_err(|_| IoError::Parse {
                row,
                message: format!("could not parse `{field}` as a number"),
            })
        };
        let e = parse(fields[0])?;
        let v = parse(fields[1])?;
        if let Some(&prev) = energies.last() {
            if e <= prev {
                return Err(IoError::OrderError { row });
            }
        }
        if v < 0.0 {
            return Err(IoError::NegativeCount { row });
        }
        energies.push(e);
        counts.push(v);
    }
    let sample_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    RawMeasurement::new(energies, counts, sample_id, Channel::Raw)
}

/// Renders a detuning series as CSV. When no record carries strengths the
/// two sigma columns are omitted; otherwise missing strengths become empty
/// cells.
pub fn series_csv_string(series: &DetuningSeries) -> String {
    let with_sigma = series.records().iter().any(|r| r.sigma_u.is_some());
    let mut out = String::new();
    out.push_str(if with_sigma {
        SERIES_HEADER_FULL
    } else {
        SERIES_HEADER_BARE
    });
    out.push('\n');
    for r in series.records() {
        let _ = write!(
            out,
            "{:.16e},{:.16e},{:.16e}",
            r.detuning_ev, r.e_upper_ev, r.e_lower_ev
        );
        if with_sigma {
            match (r.sigma_u, r.sigma_l) {
                (Some(u), Some(l)) => {
                    let _ = write!(out, ",{u:.16e},{l:.16e}");
                }
                _ => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

/// Writes [`series_csv_string`] to `path`.
pub fn write_series_csv(series: &DetuningSeries, path: impl AsRef<Path>) -> Result<(), IoError> {
    std::fs::write(path, series_csv_string(series))?;
    Ok(())
}

/// Reads a detuning-series CSV in either the three- or five-column layout.
pub fn read_series_csv(path: impl AsRef<Path>) -> Result<DetuningSeries, IoError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .map(|(_, l)| l.trim_end_matches('\r'))
        .unwrap_or("");
    let with_sigma = match header {
        SERIES_HEADER_FULL => true,
        SERIES_HEADER_BARE => false,
        other => {
            return Err(IoError::BadHeader {
                expected: format!("{SERIES_HEADER_BARE} or {SERIES_HEADER_FULL}"),
                got: other.into(),
            })
        }
    };
    let mut records = Vec::new();
    for (i, raw_line) in lines {
        let row = i + 1;
        let line = raw_line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let expected = if with_sigma { 5 } else { 3 };
        if fields.len() != expected {
            return Err(IoError::Parse {
                row,
                message: format!("expected {expected} fields, got {}", fields.len()),
            });
        }
        let parse = |field: &str| -> Result<f64, IoError> {
            field.trim().parse::<f64>().map_err(|_| IoError::Parse {
                row,
                message: format!("could not parse `{field}` as a number"),
            })
        };
        let parse_opt = |field: &str| -> Result<Option<f64>, IoError> {
            if field.trim().is_empty() {
                Ok(None)
            } else {
                parse(field).map(Some)
            }
        };
        let (sigma_u, sigma_l) = if with_sigma {
            (parse_opt(fields[3])?, parse_opt(fields[4])?)
        } else {
            (None, None)
        };
        records.push(BranchRecord {
            detuning_ev: parse(fields[0])?,
            e_upper_ev: parse(fields[1])?,
            e_lower_ev: parse(fields[2])?,
            sigma_u,
            sigma_l,
        });
    }
    Ok(DetuningSeries::new(records)?)
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

/// Energy grid section: bounds and step in eV.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub min_ev: f64,
    pub max_ev: f64,
    pub step_ev: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            min_ev: 1.8,
            max_ev: 2.4,
            step_ev: 0.001,
        }
    }
}

/// Cavity stack section: named layer materials, mirror thicknesses, and the
/// dye-doped film. A missing film thickness means "tune the bare cavity so
/// its reflectance dip sits at `tune_dip_to_ev`".
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CavityConfig {
    pub ambient: String,
    pub mirror: String,
    pub substrate: String,
    pub top_mirror_nm: f64,
    pub bottom_mirror_nm: f64,
    pub film_thickness_nm: Option<f64>,
    pub tune_dip_to_ev: f64,
    pub concentration_mm: f64,
    pub oscillator_strength_per_mm: Option<f64>,
    pub exciton_ev: f64,
    pub exciton_fwhm_ev: f64,
}

impl Default for CavityConfig {
    fn default() -> Self {
        CavityConfig {
            ambient: "air".into(),
            mirror: "silver".into(),
            substrate: "glass".into(),
            top_mirror_nm: 35.0,
            bottom_mirror_nm: 120.0,
            film_thickness_nm: None,
            tune_dip_to_ev: 2.11,
            concentration_mm: 56.0,
            oscillator_strength_per_mm: None,
            exciton_ev: 2.11,
            exciton_fwhm_ev: 0.040,
        }
    }
}

/// Coupled-oscillator constants used by the analysis side. `v_ev` is
/// optional: when absent, tools derive the coupling from simulated spectra.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OscillatorConfig {
    pub e_x_ev: f64,
    pub gamma_c_ev: f64,
    pub gamma_x_ev: f64,
    pub v_ev: Option<f64>,
}

impl Default for OscillatorConfig {
    fn default() -> Self {
        OscillatorConfig {
            e_x_ev: 2.11,
            gamma_c_ev: 0.060,
            gamma_x_ev: 0.040,
            v_ev: None,
        }
    }
}

/// Sweep section: exactly one axis (film thicknesses or dye concentrations).
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub thicknesses_nm: Option<Vec<f64>>,
    pub concentrations_mm: Option<Vec<f64>>,
}

/// Scattering-law section; mirrors [`ScatteringLaw`].
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LawConfig {
    pub s_tot: f64,
    pub slope: f64,
    pub offset_upper: f64,
    pub offset_lower: f64,
    pub width_ev: f64,
    pub skew_upper: f64,
    pub skew_lower: f64,
    pub noise_floor: f64,
}

impl Default for LawConfig {
    fn default() -> Self {
        let law = ScatteringLaw::default();
        LawConfig {
            s_tot: law.s_tot,
            slope: law.slope,
            offset_upper: law.offset_upper,
            offset_lower: law.offset_lower,
            width_ev: law.width_ev,
            skew_upper: law.skew_upper,
            skew_lower: law.skew_lower,
            noise_floor: law.noise_floor,
        }
    }
}

/// Fit options.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// "known-detuning" or "free-cavity".
    pub mode: String,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            mode: "known-detuning".into(),
        }
    }
}

/// Top-level run configuration. `version` is required; everything else has
/// defaults matching the reference cavity.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub cavity: CavityConfig,
    #[serde(default)]
    pub oscillator: OscillatorConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub law: LawConfig,
    #[serde(default)]
    pub fit: FitOptions,
}

fn resolve_model(name: &str) -> Result<DielectricModel, IoError> {
    match name {
        "air" => Ok(DielectricModel::Constant { eps_b: 1.0 }),
        "glass" => Ok(DielectricModel::Constant { eps_b: 2.25 }),
        "polymer" => Ok(DielectricModel::polymer()),
        "silver" => Ok(DielectricModel::silver()),
        other => Err(IoError::Schema(format!("unknown model name `{other}`"))),
    }
}

/// Which quantity a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Thickness,
    Concentration,
}

/// One fully resolved sweep point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub label: String,
    pub axis_value: f64,
    pub stack: Stack,
    pub film_thickness_nm: f64,
    pub strength_ev2: f64,
}

impl RunConfig {
    /// Schema-level validation beyond what deserialization enforces.
    pub fn validate(&self) -> Result<(), IoError> {
        if self.version != 1 {
            return Err(IoError::Schema(format!(
                "unsupported config version {} (expected 1)",
                self.version
            )));
        }
        let g = &self.grid;
        if !(g.step_ev > 0.0 && g.step_ev.is_finite()) {
            return Err(IoError::Schema(format!(
                "grid step {} must be positive",
                g.step_ev
            )));
        }
        if !(g.min_ev > 0.0 && g.min_ev < g.max_ev) {
            return Err(IoError::Schema(format!(
                "grid bounds [{}, {}] are not an increasing positive range",
                g.min_ev, g.max_ev
            )));
        }
        let c = &self.cavity;
        for (name, value) in [
            ("top_mirror_nm", c.top_mirror_nm),
            ("bottom_mirror_nm", c.bottom_mirror_nm),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(IoError::Schema(format!(
                    "{name} = {value} must be a nonnegative thickness"
                )));
            }
        }
        if let Some(d) = c.film_thickness_nm {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(IoError::Schema(format!(
                    "film_thickness_nm = {d} must be a nonnegative thickness"
                )));
            }
        }
        if !(c.concentration_mm >= 0.0 && c.concentration_mm.is_finite()) {
            return Err(IoError::Schema(format!(
                "concentration_mm = {} must be nonnegative",
                c.concentration_mm
            )));
        }
        if let Some(k) = c.oscillator_strength_per_mm {
            if !(k > 0.0 && k.is_finite()) {
                return Err(IoError::Schema(format!(
                    "oscillator_strength_per_mm = {k} must be positive"
                )));
            }
        }
        if !(c.exciton_ev > 0.0 && c.exciton_fwhm_ev >= 0.0) {
            return Err(IoError::Schema(
                "exciton energy must be positive and its width nonnegative".into(),
            ));
        }
        for name in [&c.ambient, &c.mirror, &c.substrate] {
            resolve_model(name)?;
        }
        let o = &self.oscillator;
        if !(o.e_x_ev > 0.0 && o.gamma_c_ev >= 0.0 && o.gamma_x_ev >= 0.0) {
            return Err(IoError::Schema(
                "oscillator constants must be positive/nonnegative".into(),
            ));
        }
        if let Some(v) = o.v_ev {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(IoError::Schema(format!("v_ev = {v} must be nonnegative")));
            }
        }
        self.law().validate().map_err(|e| IoError::Schema(e.to_string()))?;
        self.fit_mode()?;
        if let Some(sweep) = &self.sweep {
            match (&sweep.thicknesses_nm, &sweep.concentrations_mm) {
                (Some(_), Some(_)) => {
                    return Err(IoError::Schema(
                        "sweep must set thicknesses_nm or concentrations_mm, not both".into(),
                    ))
                }
                (None, None) => {
                    return Err(IoError::Schema(
                        "sweep section needs thicknesses_nm or concentrations_mm".into(),
                    ))
                }
                (Some(list), None) => {
                    if list.is_empty() || list.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
                        return Err(IoError::Schema(
                            "sweep thicknesses must be a nonempty list of nonnegative values"
                                .into(),
                        ));
                    }
                }
                (None, Some(list)) => {
                    if list.is_empty() || list.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
                        return Err(IoError::Schema(
                            "sweep concentrations must be a nonempty list of nonnegative values"
                                .into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// The configured energy grid.
    pub fn energy_grid(&self) -> Vec<f64> {
        energy_grid(self.grid.min_ev, self.grid.max_ev, self.grid.step_ev)
    }

    /// The configured scattering law.
    pub fn law(&self) -> ScatteringLaw {
        ScatteringLaw {
            s_tot: self.law.s_tot,
            slope: self.law.slope,
            offset_upper: self.law.offset_upper,
            offset_lower: self.law.offset_lower,
            width_ev: self.law.width_ev,
            skew_upper: self.law.skew_upper,
            skew_lower: self.law.skew_lower,
            noise_floor: self.law.noise_floor,
        }
    }

    /// The configured coupling-fit mode.
    pub fn fit_mode(&self) -> Result<CouplingFitMode, IoError> {
        match self.fit.mode.as_str() {
            "known-detuning" => Ok(CouplingFitMode::KnownDetuning),
            "free-cavity" => Ok(CouplingFitMode::FreeCavityEnergies),
            other => Err(IoError::Schema(format!(
                "unknown fit mode `{other}` (expected `known-detuning` or `free-cavity`)"
            ))),
        }
    }

    /// Lorentz oscillator strength f = k·c for the configured film.
    pub fn film_strength(&self) -> f64 {
        let k = self
            .cavity
            .oscillator_strength_per_mm
            .unwrap_or(crate::tmm::DEFAULT_OSC_STRENGTH_PER_MM);
        crate::tmm::oscillator_strength_from_concentration(k, self.cavity.concentration_mm)
    }

    fn assemble_stack(&self, film_thickness_nm: f64, strength_ev2: f64) -> Result<Stack, IoError> {
        let c = &self.cavity;
        let film = DielectricModel::doped_film(c.exciton_ev, c.exciton_fwhm_ev, strength_ev2);
        film.validate()
            .map_err(|e| IoError::Schema(e.to_string()))?;
        let stack = Stack::new(vec![
            Layer::semi_infinite(resolve_model(&c.ambient)?),
            Layer::finite(c.top_mirror_nm, resolve_model(&c.mirror)?),
            Layer::finite(film_thickness_nm, film),
            Layer::finite(c.bottom_mirror_nm, resolve_model(&c.mirror)?),
            Layer::semi_infinite(resolve_model(&c.substrate)?),
        ])
        .map_err(|e| IoError::Schema(e.to_string()))?;
        Ok(stack)
    }

    /// Resolves the film thickness: explicit when configured, otherwise
    /// tuned so the undoped cavity dip sits at `tune_dip_to_ev`.
    pub fn resolve_film_thickness(&self) -> Result<f64, IoError> {
        match self.cavity.film_thickness_nm {
            Some(d) => Ok(d),
            None => {
                let template = self.assemble_stack(150.0, self.film_strength())?;
                Ok(find_cavity_thickness(
                    &template,
                    1,
                    self.cavity.tune_dip_to_ev,
                )?)
            }
        }
    }

    /// Builds the configured cavity stack; returns it with the resolved
    /// film thickness.
    pub fn build_stack(&self) -> Result<(Stack, f64), IoError> {
        let d = self.resolve_film_thickness()?;
        Ok((self.assemble_stack(d, self.film_strength())?, d))
    }

    /// The coupling strength to analyze with. Uses `oscillator.v_ev` when set;
    /// otherwise derives it from the dip splitting of the configured stack.
    pub fn resolved_v_ev(&self) -> Result<f64, IoError> {
        if let Some(v) = self.oscillator.v_ev {
            return Ok(v);
        }
        let (stack, _) = self.build_stack()?;
        let grid = self.energy_grid();
        let s = crate::tmm::dip_splitting(&stack, &grid)?.ok_or_else(|| {
            IoError::Schema(
                "oscillator.v_ev is unset and the configured stack shows no \
                 resolvable dip splitting to derive it from"
                    .into(),
            )
        })?;
        Ok(crate::oscillator::coupling_from_splitting(
            s,
            self.oscillator.gamma_c_ev,
            self.oscillator.gamma_x_ev,
        ))
    }

    /// Expands the sweep section into fully resolved stacks, one per point.
    pub fn sweep_points(&self) -> Result<(SweepAxis, Vec<SweepPoint>), IoError> {
        let sweep = self
            .sweep
            .as_ref()
            .ok_or_else(|| IoError::Schema("config has no sweep section".into()))?;
        let (base, base_thickness) = self.build_stack()?;
        let base_strength = self.film_strength();
        match (&sweep.thicknesses_nm, &sweep.concentrations_mm) {
            (Some(thicknesses), None) => {
                let points = thicknesses
                    .iter()
                    .map(|&d| {
                        let stack = base
                            .with_interior_thickness(1, d)
                            .map_err(|e| IoError::Schema(e.to_string()))?;
                        Ok(SweepPoint {
                            label: format!("thickness_{d:07.2}nm"),
                            axis_value: d,
                            stack,
                            film_thickness_nm: d,
                            strength_ev2: base_strength,
                        })
                    })
                    .collect::<Result<Vec<_>, IoError>>()?;
                Ok((SweepAxis::Thickness, points))
            }
            (None, Some(concentrations)) => {
                let k = self
                    .cavity
                    .oscillator_strength_per_mm
                    .unwrap_or(crate::tmm::DEFAULT_OSC_STRENGTH_PER_MM);
                let points = concentrations
                    .iter()
                    .map(|&c| {
                        let f = crate::tmm::oscillator_strength_from_concentration(k, c);
                        SweepPoint {
                            label: format!("conc_{c:07.2}mM"),
                            axis_value: c,
                            stack: base.with_oscillator_strength(f),
                            film_thickness_nm: base_thickness,
                            strength_ev2: f,
                        }
                    })
                    .collect();
                Ok((SweepAxis::Concentration, points))
            }
            _ => Err(IoError::Schema(
                "sweep must set exactly one of thicknesses_nm / concentrations_mm".into(),
            )),
        }
    }
}

/// Parses a TOML run configuration. Unknown keys are rejected; the result
/// is fully validated.
pub fn parse_config(text: &str) -> Result<RunConfig, IoError> {
    parse_config_with_overrides(text, &[])
}

/// Parses a TOML run configuration after applying dotted-path overrides
/// (e.g. `("cavity.concentration_mm", "17")`). Override values are parsed
/// as TOML fragments, falling back to strings.
pub fn parse_config_with_overrides(
    text: &str,
    overrides: &[(String, String)],
) -> Result<RunConfig, IoError> {
    let mut value: toml::Value = text
        .parse()
        .map_err(|e: toml::de::Error| IoError::Schema(e.to_string()))?;
    for (path, raw) in overrides {
        apply_override(&mut value, path, raw)?;
    }
    let config: RunConfig = value
        .try_into()
        .map_err(|e: toml::de::Error| IoError::Schema(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

fn apply_override(root: &mut toml::Value, path: &str, raw: &str) -> Result<(), IoError> {
    let parsed: toml::Value = match format!("x = {raw}").parse::<toml::Table>() {
        Ok(mut table) => table.remove("x").expect("key just inserted"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut cursor = root;
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(IoError::Schema(format!("bad override path `{path}`")));
    }
    for segment in &segments[..segments.len() - 1] {
        let table = cursor.as_table_mut().ok_or_else(|| {
            IoError::Schema(format!("override path `{path}` crosses a non-table value"))
        })?;
        cursor = table
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = cursor.as_table_mut().ok_or_else(|| {
        IoError::Schema(format!("override path `{path}` crosses a non-table value"))
    })?;
    table.insert(segments[segments.len() - 1].to_string(), parsed);
    Ok(())
}
