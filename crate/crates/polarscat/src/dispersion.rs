//! Detuning-resolved analysis: pulling branch energies out of spectra,
//! fitting the coupled-oscillator model across a detuning series, and
//! regressing branch strengths against photon weights.

use crate::fitting::{least_squares, FitProblem};
use crate::oscillator::{
    hopfield_photon_weights, polariton_energies, CoupledOscillatorParams, OscillatorError,
};
use crate::tmm::{refined_local_maxima, refined_local_minima, Spectrum, TmmError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DispersionError {
    #[error("invalid detuning series: {0}")]
    BadSeries(String),
    #[error("spectrum does not resolve two branch features")]
    UnresolvedSplitting,
    #[error("no resolvable branch pair at detuning {detuning_ev:.4} eV")]
    UnresolvedSplittingAt { detuning_ev: f64 },
    #[error("series carries no branch strengths")]
    MissingStrengths,
    #[error("need at least {needed} records for this analysis, have {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("regression is degenerate: {0}")]
    DegenerateRegression(String),
    #[error("branch strengths do not cross within the detuning range")]
    NoCrossing,
    #[error(transparent)]
    Spectrum(#[from] TmmError),
    #[error(transparent)]
    Oscillator(#[from] OscillatorError),
    #[error(transparent)]
    Fit(#[from] crate::fitting::FitError),
}

/// Branch energies (and optionally normalized branch strengths) observed at
/// one cavity detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchRecord {
    pub detuning_ev: f64,
    pub e_upper_ev: f64,
    pub e_lower_ev: f64,
    pub sigma_u: Option<f64>,
    pub sigma_l: Option<f64>,
}

/// An ordered set of branch records, one per detuning.
#[derive(Debug, Clone)]
pub struct DetuningSeries {
    records: Vec<BranchRecord>,
}

impl DetuningSeries {
    pub fn new(records: Vec<BranchRecord>) -> Result<Self, DispersionError> {
        if records.is_empty() {
            return Err(DispersionError::BadSeries("no records".into()));
        }
        for (i, r) in records.iter().enumerate() {
            let fields = [r.detuning_ev, r.e_upper_ev, r.e_lower_ev];
            if fields.iter().any(|v| !v.is_finite()) {
                return Err(DispersionError::BadSeries(format!(
                    "non-finite entry in record {i}"
                )));
            }
            if r.e_upper_ev <= r.e_lower_ev {
                return Err(DispersionError::BadSeries(format!(
                    "record {i}: upper branch {} eV not above lower branch {} eV",
                    r.e_upper_ev, r.e_lower_ev
                )));
            }
            match (r.sigma_u, r.sigma_l) {
                (None, None) => {}
                (Some(u), Some(l)) => {
                    if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&l) {
                        return Err(DispersionError::BadSeries(format!(
                            "record {i}: strengths must lie in [0, 1]"
                        )));
                    }
                }
                _ => {
                    return Err(DispersionError::BadSeries(format!(
                        "record {i}: strengths must be given for both branches or neither"
                    )));
                }
            }
        }
        if records.windows(2).any(|w| w[1].detuning_ev <= w[0].detuning_ev) {
            return Err(DispersionError::BadSeries(
                "detunings must be strictly increasing".into(),
            ));
        }
        Ok(DetuningSeries { records })
    }

    pub fn records(&self) -> &[BranchRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Branch separations E_U − E_L, one per record.
    pub fn separations(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.e_upper_ev - r.e_lower_ev)
            .collect()
    }

    fn require_strengths(&self) -> Result<(), DispersionError> {
        if self.records.iter().any(|r| r.sigma_u.is_none()) {
            return Err(DispersionError::MissingStrengths);
        }
        Ok(())
    }
}

/// Which spectral features mark the two branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchExtraction {
    /// Two deepest minima, as in reflection spectra.
    ReflectionDips,
    /// Two tallest maxima, as in scattering or transmission spectra.
    ScatteringPeaks,
}

/// Reads the two branch energies out of one spectrum: the two deepest dips
/// or the two tallest peaks, each refined below the grid spacing by a
/// parabola through the neighboring samples. Returns (E_upper, E_lower).
pub fn extract_branch_energies(
    spectrum: &Spectrum,
    mode: BranchExtraction,
) -> Result<(f64, f64), DispersionError> {
    let mut extrema = match mode {
        BranchExtraction::ReflectionDips => {
            refined_local_minima(spectrum.energies(), spectrum.values())
        }
        BranchExtraction::ScatteringPeaks => {
            refined_local_maxima(spectrum.energies(), spectrum.values())
        }
    };
    match mode {
        BranchExtraction::ReflectionDips => extrema.sort_by(|a, b| a.value.total_cmp(&b.value)),
        BranchExtraction::ScatteringPeaks => extrema.sort_by(|a, b| b.value.total_cmp(&a.value)),
    }
    if extrema.len() < 2 {
        return Err(DispersionError::UnresolvedSplitting);
    }
    let (a, b) = (extrema[0].energy_ev, extrema[1].energy_ev);
    Ok((a.max(b), a.min(b)))
}

/// Runs [`extract_branch_energies`] over a batch of spectra taken at
/// strictly increasing detunings and assembles the records into a series.
pub fn extract_detuning_series(
    detunings: &[f64],
    spectra: &[Spectrum],
    mode: BranchExtraction,
) -> Result<DetuningSeries, DispersionError> {
    if detunings.len() != spectra.len() {
        return Err(DispersionError::BadSeries(format!(
            "{} detunings but {} spectra",
            detunings.len(),
            spectra.len()
        )));
    }
    let mut records = Vec::with_capacity(spectra.len());
    for (&detuning_ev, spectrum) in detunings.iter().zip(spectra) {
        let (e_upper_ev, e_lower_ev) = extract_branch_energies(spectrum, mode)
            .map_err(|e| match e {
                DispersionError::UnresolvedSplitting => {
                    DispersionError::UnresolvedSplittingAt { detuning_ev }
                }
                other => other,
            })?;
        records.push(BranchRecord {
            detuning_ev,
            e_upper_ev,
            e_lower_ev,
            sigma_u: None,
            sigma_l: None,
        });
    }
    DetuningSeries::new(records)
}

/// How the cavity energies entering the coupling fit are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingFitMode {
    /// E_c = E_x + Δ per record; only the coupling strength V floats.
    KnownDetuning,
    /// V floats together with one cavity energy per record.
    FreeCavityEnergies,
}

/// Result of fitting the two-oscillator model to a detuning series.
#[derive(Debug, Clone)]
pub struct CouplingFit {
    pub v_ev: f64,
    pub v_uncertainty_ev: f64,
    /// Cavity energy per record: fitted in free mode, E_x + Δ otherwise.
    pub cavity_energies_ev: Vec<f64>,
    pub cost: f64,
    /// Root-mean-square branch-energy residual.
    pub rms_ev: f64,
}

fn predicted_branches(
    e_c: f64,
    e_x: f64,
    v: f64,
    gamma_c: f64,
    gamma_x: f64,
) -> Result<(f64, f64), OscillatorError> {
    let params = CoupledOscillatorParams::new(e_c, e_x, v.max(0.0), gamma_c, gamma_x);
    params.validate()?;
    let (plus, minus) = polariton_energies(&params);
    Ok((plus.re, minus.re))
}

/// Fits the coupling strength V (and, in free mode, per-record cavity
/// energies) to observed branch energies. The exciton energy and both line
/// widths are held fixed; at least three detunings are required.
pub fn fit_coupling(
    series: &DetuningSeries,
    e_x_ev: f64,
    gamma_c_ev: f64,
    gamma_x_ev: f64,
    mode: CouplingFitMode,
) -> Result<CouplingFit, DispersionError> {
    let records = series.records().to_vec();
    let n = records.len();
    if n < 3 {
        return Err(DispersionError::InsufficientData { needed: 3, got: n });
    }
    let min_sep = series
        .separations()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let v0 = (0.5 * min_sep).max(1e-3);

    let (initial, lower, upper): (Vec<f64>, Vec<f64>, Vec<f64>) = match mode {
        CouplingFitMode::KnownDetuning => (vec![v0], vec![1e-6], vec![1.0]),
        CouplingFitMode::FreeCavityEnergies => {
            let mut init = vec![v0];
            let mut lo = vec![1e-6];
            let mut hi = vec![1.0];
            for r in &records {
                init.push(e_x_ev + r.detuning_ev);
                lo.push(e_x_ev - 1.0);
                hi.push(e_x_ev + 1.0);
            }
            (init, lo, hi)
        }
    };

    let recs = records.clone();
    let residual = move |p: &[f64]| {
        let v = p[0];
        let mut out = Vec::with_capacity(2 * recs.len());
        for (i, r) in recs.iter().enumerate() {
            let e_c = match mode {
                CouplingFitMode::KnownDetuning => e_x_ev + r.detuning_ev,
                CouplingFitMode::FreeCavityEnergies => p[1 + i],
            };
            match predicted_branches(e_c, e_x_ev, v, gamma_c_ev, gamma_x_ev) {
                Ok((up, low)) => {
                    out.push(up - r.e_upper_ev);
                    out.push(low - r.e_lower_ev);
                }
                Err(_) => {
                    out.push(f64::NAN);
                    out.push(f64::NAN);
                }
            }
        }
        out
    };

    let problem = FitProblem::new(residual, initial).with_bounds(lower, upper);
    let fit = least_squares(problem)?;
    let v_ev = fit.params[0];
    let cavity_energies_ev = match mode {
        CouplingFitMode::KnownDetuning => {
            records.iter().map(|r| e_x_ev + r.detuning_ev).collect()
        }
        CouplingFitMode::FreeCavityEnergies => fit.params[1..].to_vec(),
    };
    let rms_ev = (2.0 * fit.cost / (2 * n) as f64).sqrt();
    Ok(CouplingFit {
        v_ev,
        v_uncertainty_ev: fit.uncertainties[0],
        cavity_energies_ev,
        cost: fit.cost,
        rms_ev,
    })
}

/// Ordinary least-squares line through (x, y) with goodness-of-fit numbers.
#[derive(Debug, Clone, Copy)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub rms: f64,
}

/// Fits y = slope·x + intercept by least squares.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit, DispersionError> {
    if x.len() != y.len() {
        return Err(DispersionError::DegenerateRegression(format!(
            "{} abscissae but {} ordinates",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(DispersionError::InsufficientData { needed: 2, got: n });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(DispersionError::DegenerateRegression(
            "non-finite sample".into(),
        ));
    }
    let nf = n as f64;
    let mean_x = x.iter().sum::<f64>() / nf;
    let mean_y = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mean_x) * (v - mean_x)).sum();
    if sxx <= 0.0 {
        return Err(DispersionError::DegenerateRegression(
            "abscissae do not vary".into(),
        ));
    }
    let sxy: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mean_x) * (b - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - (slope * a + intercept);
            e * e
        })
        .sum();
    let ss_tot: f64 = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum();
    let r_squared = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res <= f64::EPSILON {
        1.0
    } else {
        0.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        rms: (ss_res / nf).sqrt(),
    })
}

/// One branch's strength-versus-photon-weight regression together with the
/// (photon weight, σ̄) points that produced it.
#[derive(Debug, Clone)]
pub struct BranchRegression {
    pub fit: LinearFit,
    pub points: Vec<(f64, f64)>,
}

/// Branch strengths regressed against photon weights, per branch plus a
/// pooled fit over both branches.
#[derive(Debug, Clone)]
pub struct HopfieldRegression {
    pub upper: BranchRegression,
    pub lower: BranchRegression,
    pub pooled: LinearFit,
}

/// Regresses normalized branch strengths against the photon weights implied
/// by each record's detuning and the coupling strength `v_ev`. Requires
/// strengths on every record and at least two records.
pub fn hopfield_regression(
    series: &DetuningSeries,
    v_ev: f64,
) -> Result<HopfieldRegression, DispersionError> {
    series.require_strengths()?;
    if series.len() < 2 {
        return Err(DispersionError::InsufficientData {
            needed: 2,
            got: series.len(),
        });
    }
    let mut upper_points = Vec::new();
    let mut lower_points = Vec::new();
    for r in series.records() {
        let (weight_u, weight_l) = hopfield_photon_weights(r.detuning_ev, v_ev)?;
        upper_points.push((weight_u, r.sigma_u.expect("strengths checked above")));
        lower_points.push((weight_l, r.sigma_l.expect("strengths checked above")));
    }
    let split = |points: &[(f64, f64)]| -> (Vec<f64>, Vec<f64>) {
        points.iter().cloned().unzip()
    };
    let (wu, su) = split(&upper_points);
    let (wl, sl) = split(&lower_points);
    let upper_fit = linear_fit(&wu, &su)?;
    let lower_fit = linear_fit(&wl, &sl)?;
    let pooled_x: Vec<f64> = wu.iter().chain(&wl).cloned().collect();
    let pooled_y: Vec<f64> = su.iter().chain(&sl).cloned().collect();
    let pooled = linear_fit(&pooled_x, &pooled_y)?;
    Ok(HopfieldRegression {
        upper: BranchRegression {
            fit: upper_fit,
            points: upper_points,
        },
        lower: BranchRegression {
            fit: lower_fit,
            points: lower_points,
        },
        pooled,
    })
}

/// Detuning Δ* at which the two branch strengths cross (σ̄_U = σ̄_L), found
/// by linear interpolation between the bracketing records. Requires
/// strengths; errors when the difference never changes sign.
pub fn find_crossing_detuning(series: &DetuningSeries) -> Result<f64, DispersionError> {
    series.require_strengths()?;
    let records = series.records();
    let diff =
        |r: &BranchRecord| r.sigma_u.expect("checked") - r.sigma_l.expect("checked");
    for r in records {
        if diff(r) == 0.0 {
            return Ok(r.detuning_ev);
        }
    }
    for pair in records.windows(2) {
        let d0 = diff(&pair[0]);
        let d1 = diff(&pair[1]);
        if d0.signum() != d1.signum() {
            let x0 = pair[0].detuning_ev;
            let x1 = pair[1].detuning_ev;
            return Ok(x0 - d0 * (x1 - x0) / (d1 - d0));
        }
    }
    Err(DispersionError::NoCrossing)
}
