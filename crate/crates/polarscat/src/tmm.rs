//! Normal-incidence transfer-matrix forward model for multilayer stacks.
//!
//! The characteristic-matrix formulation propagates the tangential field
//! components through each interior layer; reflectance and transmittance
//! follow from the assembled 2x2 matrix and the bounding-media indices.
//! Normal incidence only: the cavity detuning in this system is controlled by
//! layer thickness, not by angle, and s/p polarizations coincide.

use num_complex::Complex64;
use thiserror::Error;

use crate::dielectric::{refractive_index, DielectricError, Stack, Thickness};

/// Conversion constant ħc in eV·nm; the propagation phase is φ = (E/ħc)·n·d.
pub const HBAR_C_EV_NM: f64 = 197.326_980_4;

const BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum TmmError {
    #[error("energy grid must be strictly increasing at index {0}")]
    GridNotIncreasing(usize),
    #[error("energies ({energies}) and values ({values}) differ in length")]
    LengthMismatch { energies: usize, values: usize },
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("channel {channel:?} value {value} at index {index} outside [0, 1]")]
    ValueOutOfRange {
        channel: Channel,
        index: usize,
        value: f64,
    },
    #[error(transparent)]
    Dielectric(#[from] DielectricError),
    #[error("cavity not tunable to {target_ev} eV: {reason}")]
    NotTunable { target_ev: f64, reason: String },
    #[error("target energy {0} eV outside the tunable window [1.8, 2.6]")]
    TargetOutOfWindow(f64),
}

/// Physical meaning of the values in a [`Spectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Reflectance.
    R,
    /// Transmittance.
    T,
    /// Absorption.
    A,
    /// Scattering.
    S,
    /// Unconstrained signal (e.g. raw counts or ratios).
    Raw,
}

impl Channel {
    /// Fractional channels are bounded to [0, 1] (within slack).
    pub fn is_bounded(self) -> bool {
        !matches!(self, Channel::Raw)
    }
}

/// An energy grid with one real value per point and a channel tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    energies: Vec<f64>,
    values: Vec<f64>,
    channel: Channel,
}

impl Spectrum {
    pub fn new(energies: Vec<f64>, values: Vec<f64>, channel: Channel) -> Result<Self, TmmError> {
        if energies.len() != values.len() {
            return Err(TmmError::LengthMismatch {
                energies: energies.len(),
                values: values.len(),
            });
        }
        check_grid(&energies)?;
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(TmmError::NonFinite { index: i, value: v });
            }
            if channel.is_bounded() && !(-BOUND_SLACK..=1.0 + BOUND_SLACK).contains(&v) {
                return Err(TmmError::ValueOutOfRange {
                    channel,
                    index: i,
                    value: v,
                });
            }
        }
        Ok(Spectrum {
            energies,
            values,
            channel,
        })
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.energies.iter().copied().zip(self.values.iter().copied())
    }

    /// Largest value, or None for an empty spectrum.
    pub fn max_value(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::max)
    }
}

pub(crate) fn check_grid(energies: &[f64]) -> Result<(), TmmError> {
    for (i, w) in energies.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(TmmError::GridNotIncreasing(i + 1));
        }
    }
    if let Some(i) = energies.iter().position(|e| !e.is_finite()) {
        return Err(TmmError::NonFinite {
            index: i,
            value: energies[i],
        });
    }
    Ok(())
}

/// Uniform energy grid from `min_ev` to `max_ev` (inclusive) with step `step_ev`.
pub fn energy_grid(min_ev: f64, max_ev: f64, step_ev: f64) -> Vec<f64> {
    let n = ((max_ev - min_ev) / step_ev).round() as usize;
    (0..=n).map(|i| min_ev + i as f64 * step_ev).collect()
}

/// 2x2 complex characteristic matrix of a layer (or a product of layers).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharMatrix {
    pub m11: Complex64,
    pub m12: Complex64,
    pub m21: Complex64,
    pub m22: Complex64,
}

impl CharMatrix {
    pub fn identity() -> Self {
        CharMatrix {
            m11: Complex64::new(1.0, 0.0),
            m12: Complex64::new(0.0, 0.0),
            m21: Complex64::new(0.0, 0.0),
            m22: Complex64::new(1.0, 0.0),
        }
    }

    pub fn mul(&self, other: &CharMatrix) -> CharMatrix {
        CharMatrix {
            m11: self.m11 * other.m11 + self.m12 * other.m21,
            m12: self.m11 * other.m12 + self.m12 * other.m22,
            m21: self.m21 * other.m11 + self.m22 * other.m21,
            m22: self.m21 * other.m12 + self.m22 * other.m22,
        }
    }

    pub fn det(&self) -> Complex64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }
}

/// Characteristic matrix of a homogeneous layer of index `n` and thickness
/// `d_nm` at photon energy `energy_ev`.
pub fn layer_matrix(n: Complex64, d_nm: f64, energy_ev: f64) -> CharMatrix {
    let phi = energy_ev / HBAR_C_EV_NM * n * d_nm;
    let (cos, sin) = (phi.cos(), phi.sin());
    // Forward wave e^{+ikz} with Im n >= 0 for passive absorbers; that branch
    // choice forces the -i off-diagonals (+i would turn absorbers into gain).
    let mi = Complex64::new(0.0, -1.0);
    CharMatrix {
        m11: cos,
        m12: mi * sin / n,
        m21: mi * n * sin,
        m22: cos,
    }
}

/// Reflectance and transmittance of `stack` at `energy_ev`.
///
/// Stack validity (bounding media semi-infinite, interiors finite) is enforced
/// at [`Stack`] construction, so a degenerate stack cannot reach this point.
pub fn reflectance_transmittance(stack: &Stack, energy_ev: f64) -> Result<(f64, f64), TmmError> {
    let n_in = refractive_index(&stack.ambient().model, energy_ev)?;
    let n_out = refractive_index(&stack.substrate().model, energy_ev)?;

    let mut m = CharMatrix::identity();
    for layer in stack.interior() {
        let d = match layer.thickness {
            Thickness::Finite(d) => d,
            // Unreachable for a validated Stack.
            Thickness::SemiInfinite => {
                return Err(TmmError::Dielectric(DielectricError::InvalidStack(
                    "interior semi-infinite layer".into(),
                )))
            }
        };
        let n = refractive_index(&layer.model, energy_ev)?;
        m = m.mul(&layer_matrix(n, d, energy_ev));
    }

    // Field vector at the exit interface: [B, C] = M [1, n_out].
    let b = m.m11 + m.m12 * n_out;
    let c = m.m21 + m.m22 * n_out;
    let denom = n_in * b + c;
    let r = (n_in * b - c) / denom;
    let t = 2.0 * n_in / denom;

    let reflectance = r.norm_sqr();
    let transmittance = n_out.re / n_in.re * t.norm_sqr();
    Ok((reflectance, transmittance))
}

/// Reflectance, transmittance, and absorption spectra over `grid`.
pub struct SweepResult {
    pub reflectance: Spectrum,
    pub transmittance: Spectrum,
    pub absorption: Spectrum,
}

/// Pointwise application of [`reflectance_transmittance`], with A = 1 − R − T.
pub fn spectrum_sweep(stack: &Stack, grid: &[f64]) -> Result<SweepResult, TmmError> {
    check_grid(grid)?;
    let mut r = Vec::with_capacity(grid.len());
    let mut t = Vec::with_capacity(grid.len());
    let mut a = Vec::with_capacity(grid.len());
    for &e in grid {
        let (ri, ti) = reflectance_transmittance(stack, e)?;
        r.push(ri);
        t.push(ti);
        a.push(1.0 - ri - ti);
    }
    Ok(SweepResult {
        reflectance: Spectrum::new(grid.to_vec(), r, Channel::R)?,
        transmittance: Spectrum::new(grid.to_vec(), t, Channel::T)?,
        absorption: Spectrum::new(grid.to_vec(), a, Channel::A)?,
    })
}

/// A refined extremum of a sampled spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Extremum {
    pub energy_ev: f64,
    pub value: f64,
}

/// Interior local minima of `values`, each refined by a parabola through the
/// discrete minimum and its neighbors. Endpoints are not extrema.
pub(crate) fn refined_local_minima(energies: &[f64], values: &[f64]) -> Vec<Extremum> {
    let mut out = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        if values[i] < values[i - 1] && values[i] < values[i + 1] {
            out.push(parabolic_refine(energies, values, i));
        }
    }
    out
}

/// Interior local maxima, refined the same way.
pub(crate) fn refined_local_maxima(energies: &[f64], values: &[f64]) -> Vec<Extremum> {
    let mut out = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        if values[i] > values[i - 1] && values[i] > values[i + 1] {
            out.push(parabolic_refine(energies, values, i));
        }
    }
    out
}

/// Vertex of the parabola through points i-1, i, i+1. Falls back to the grid
/// point when the three points are collinear.
fn parabolic_refine(x: &[f64], y: &[f64], i: usize) -> Extremum {
    let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let dl = x1 - x0;
    let dr = x2 - x1;
    let num = dl * dl * (y1 - y2) - dr * dr * (y1 - y0);
    let den = dl * (y1 - y2) + dr * (y1 - y0);
    if den.abs() < 1e-300 {
        return Extremum {
            energy_ev: x1,
            value: y1,
        };
    }
    let xv = x1 - 0.5 * num / den;
    // Parabola value at the vertex, from the Lagrange form.
    let l0 = (xv - x1) * (xv - x2) / ((x0 - x1) * (x0 - x2));
    let l1 = (xv - x0) * (xv - x2) / ((x1 - x0) * (x1 - x2));
    let l2 = (xv - x0) * (xv - x1) / ((x2 - x0) * (x2 - x1));
    Extremum {
        energy_ev: xv,
        value: y0 * l0 + y1 * l1 + y2 * l2,
    }
}

/// Energy of the undoped-cavity reflectance dip nearest `near_ev`, on a
/// <= 1 meV grid spanning `window`.
fn nearest_dip(stack: &Stack, window: (f64, f64), near_ev: f64) -> Result<Option<f64>, TmmError> {
    let grid = energy_grid(window.0, window.1, 1e-3);
    let sweep = spectrum_sweep(stack, &grid)?;
    let dips = refined_local_minima(sweep.reflectance.energies(), sweep.reflectance.values());
    Ok(dips
        .iter()
        .map(|d| d.energy_ev)
        .min_by(|a, b| {
            (a - near_ev)
                .abs()
                .partial_cmp(&(b - near_ev).abs())
                .unwrap()
        }))
}

/// Finds the interior-layer thickness for which the undoped-cavity reflectance
/// dip sits at `target_ev`, by bisection on the dip position.
///
/// `cavity_layer` indexes the interior layers (0 = first layer after the
/// ambient). The stack is evaluated with all Lorentz oscillator strengths set
/// to zero, so the result is the bare-cavity resonance condition.
pub fn find_cavity_thickness(
    stack: &Stack,
    cavity_layer: usize,
    target_ev: f64,
) -> Result<f64, TmmError> {
    if !(1.8..=2.6).contains(&target_ev) {
        return Err(TmmError::TargetOutOfWindow(target_ev));
    }
    let undoped = stack.undoped();
    let window = (1.4, 3.0);
    let dip_at = |d: f64| -> Result<Option<f64>, TmmError> {
        let s = undoped.with_interior_thickness(cavity_layer, d)?;
        nearest_dip(&s, window, target_ev)
    };

    // Bracket the target: dip energy decreases with thickness.
    let mut bracket: Option<((f64, f64), (f64, f64))> = None;
    let mut prev: Option<(f64, f64)> = None;
    let mut d = 60.0;
    while d <= 420.0 {
        if let Some(e) = dip_at(d)? {
            if let Some((pd, pe)) = prev {
                if (pe - target_ev) >= 0.0 && (e - target_ev) <= 0.0 {
                    bracket = Some(((pd, pe), (d, e)));
                    break;
                }
            }
            prev = Some((d, e));
        }
        d += 20.0;
    }
    let ((mut lo, _), (mut hi, _)) = bracket.ok_or_else(|| TmmError::NotTunable {
        target_ev,
        reason: "no thickness in [60, 420] nm brackets the target dip".into(),
    })?;

    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let e = dip_at(mid)?.ok_or_else(|| TmmError::NotTunable {
            target_ev,
            reason: format!("dip lost during bisection at {mid} nm"),
        })?;
        if (e - target_ev).abs() < 1e-4 {
            return Ok(mid);
        }
        if e > target_ev {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 {
            break;
        }
    }
    let d = 0.5 * (lo + hi);
    let e = dip_at(d)?.unwrap_or(f64::NAN);
    if (e - target_ev).abs() <= 1e-3 {
        Ok(d)
    } else {
        Err(TmmError::NotTunable {
            target_ev,
            reason: format!("bisection stalled at dip {e} eV"),
        })
    }
}

/// Energy of the deepest reflectance dip of `stack` on `grid`, or None when
/// the spectrum has no interior minimum.
pub fn deepest_reflectance_dip(stack: &Stack, grid: &[f64]) -> Result<Option<f64>, TmmError> {
    let sweep = spectrum_sweep(stack, grid)?;
    let dips = refined_local_minima(sweep.reflectance.energies(), sweep.reflectance.values());
    Ok(dips
        .iter()
        .min_by(|a, b| a.value.partial_cmp(&b.value).unwrap())
        .map(|d| d.energy_ev))
}

/// Separation of the two deepest reflectance dips of `stack` on `grid`.
/// Returns None when fewer than two dips are resolved.
pub fn dip_splitting(stack: &Stack, grid: &[f64]) -> Result<Option<f64>, TmmError> {
    let sweep = spectrum_sweep(stack, grid)?;
    let mut dips = refined_local_minima(sweep.reflectance.energies(), sweep.reflectance.values());
    if dips.len() < 2 {
        return Ok(None);
    }
    dips.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
    Ok(Some((dips[0].energy_ev - dips[1].energy_ev).abs()))
}

/// Oscillator strength for a molar concentration, f = k·c.
pub fn oscillator_strength_from_concentration(k_ev2_per_mm: f64, concentration_mm: f64) -> f64 {
    k_ev2_per_mm * concentration_mm
}

/// Calibration constant k (eV² per mM) linking Lorentz oscillator strength to
/// molar dye concentration, chosen so the 56 mM resonant cavity shows a
/// 140 meV reflectance-dip splitting. Frozen output of
/// [`calibrate_oscillator_strength`] on the default stack; verified by test.
pub const DEFAULT_OSC_STRENGTH_PER_MM: f64 = 8.503962796075004e-4;

/// Reference concentration (mM) used for the calibration anchor.
pub const CALIBRATION_CONCENTRATION_MM: f64 = 56.0;

/// Observed dip splitting (eV) at the calibration concentration.
pub const CALIBRATION_SPLITTING_EV: f64 = 0.140;

/// Finds k such that `stack` doped with f = k·`concentration_mm` produces a
/// reflectance-dip splitting of `target_splitting_ev`, by bisection on f.
///
/// The stack should already be tuned so the undoped resonance coincides with
/// the dye transition; the splitting is then symmetric about it.
pub fn calibrate_oscillator_strength(
    stack: &Stack,
    concentration_mm: f64,
    target_splitting_ev: f64,
    grid: &[f64],
) -> Result<f64, TmmError> {
    let splitting_of = |f: f64| -> Result<Option<f64>, TmmError> {
        dip_splitting(&stack.with_oscillator_strength(f), grid)
    };
    let (mut lo, mut hi) = (1e-5, 0.5);
    let hi_split = splitting_of(hi)?.ok_or_else(|| TmmError::NotTunable {
        target_ev: target_splitting_ev,
        reason: "no resolved splitting at the upper oscillator-strength bound".into(),
    })?;
    if hi_split < target_splitting_ev {
        return Err(TmmError::NotTunable {
            target_ev: target_splitting_ev,
            reason: format!("max achievable splitting {hi_split} eV below target"),
        });
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        match splitting_of(mid)? {
            Some(s) if (s - target_splitting_ev).abs() < 1e-6 => {
                return Ok(mid / concentration_mm)
            }
            Some(s) if s > target_splitting_ev => hi = mid,
            // Splitting below target or unresolved: push up.
            _ => lo = mid,
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi) / concentration_mm)
}
