//! Phenomenological polariton scattering: a generative law that distributes
//! scattered power between the two branches in proportion to an affine
//! function of their photon weights, plus the four-channel energy balance.

use crate::lineshape::{eval_peak, SkewedGaussianPeak};
use crate::oscillator::{
    hopfield_photon_weights, polariton_energies, CoupledOscillatorParams, OscillatorError,
};
use crate::tmm::{Channel, Spectrum, TmmError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScatterModelError {
    #[error("invalid scattering law: {0}")]
    InvalidLaw(String),
    #[error("spectra are not on the same grid: {0}")]
    GridMismatch(String),
    #[error("expected a channel-{expected:?} spectrum, got channel {got:?}")]
    ChannelMismatch { expected: Channel, got: Channel },
    #[error("energy balance gives absorption {absorption:.3e} at {energy_ev:.4} eV")]
    UnphysicalBalance { energy_ev: f64, absorption: f64 },
    #[error(transparent)]
    Oscillator(#[from] OscillatorError),
    #[error(transparent)]
    Spectrum(#[from] TmmError),
}

/// Generative description of a two-branch scattering spectrum.
///
/// Branch areas follow σ̄ ∝ slope·(photon weight) + offset, renormalized so
/// the two branches sum to one. `s_tot` is the peak scattering efficiency of
/// the deterministic part; `noise_floor` is the amplitude of additive
/// uniform noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatteringLaw {
    pub s_tot: f64,
    pub slope: f64,
    pub offset_upper: f64,
    pub offset_lower: f64,
    pub width_ev: f64,
    pub skew_upper: f64,
    pub skew_lower: f64,
    pub noise_floor: f64,
}

impl Default for ScatteringLaw {
    fn default() -> Self {
        ScatteringLaw {
            s_tot: 0.25,
            slope: 1.0,
            offset_upper: 0.0,
            offset_lower: 0.0,
            width_ev: 0.03,
            skew_upper: 0.0,
            skew_lower: 0.0,
            noise_floor: 0.03,
        }
    }
}

impl ScatteringLaw {
    pub fn validate(&self) -> Result<(), ScatterModelError> {
        if !(0.0..=1.0).contains(&self.s_tot) {
            return Err(ScatterModelError::InvalidLaw(format!(
                "total scattering budget {} outside [0, 1]",
                self.s_tot
            )));
        }
        if !(0.0..=0.05).contains(&self.noise_floor) {
            return Err(ScatterModelError::InvalidLaw(format!(
                "noise floor {} outside [0, 0.05]",
                self.noise_floor
            )));
        }
        if !(self.width_ev > 0.0 && self.width_ev.is_finite()) {
            return Err(ScatterModelError::InvalidLaw(format!(
                "peak width {} must be positive",
                self.width_ev
            )));
        }
        let rest = [
            self.slope,
            self.offset_upper,
            self.offset_lower,
            self.skew_upper,
            self.skew_lower,
        ];
        if rest.iter().any(|v| !v.is_finite()) {
            return Err(ScatterModelError::InvalidLaw(
                "law parameters must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Normalized branch strengths (σ̄_U, σ̄_L) that the law assigns at a given
/// detuning and coupling. Fails when either raw strength goes negative.
pub fn branch_strengths(
    law: &ScatteringLaw,
    detuning_ev: f64,
    v_ev: f64,
) -> Result<(f64, f64), ScatterModelError> {
    law.validate()?;
    let (weight_u, weight_l) = hopfield_photon_weights(detuning_ev, v_ev)?;
    let raw_u = law.slope * weight_u + law.offset_upper;
    let raw_l = law.slope * weight_l + law.offset_lower;
    if raw_u < 0.0 || raw_l < 0.0 {
        return Err(ScatterModelError::InvalidLaw(format!(
            "branch areas ({raw_u:.4}, {raw_l:.4}) are not both nonnegative"
        )));
    }
    let total = raw_u + raw_l;
    if total <= 0.0 {
        return Err(ScatterModelError::InvalidLaw(
            "both branch areas vanish".into(),
        ));
    }
    let sigma_u = raw_u / total;
    Ok((sigma_u, 1.0 - sigma_u))
}

/// Synthesizes a channel-S spectrum for the polariton pair of `params`:
/// unit-area skewed-Gaussian peaks at Re E± weighted by the law's branch
/// strengths, scaled so the deterministic maximum equals `s_tot`, then
/// seeded uniform noise in [0, noise_floor) on top. Values are clipped at 1.
pub fn synthesize_scattering(
    params: &CoupledOscillatorParams,
    law: &ScatteringLaw,
    energies: &[f64],
    seed: u64,
) -> Result<Spectrum, ScatterModelError> {
    law.validate()?;
    params.validate()?;
    crate::tmm::check_grid(energies)?;
    // With nothing in the budget there are no peaks to weight, so branch
    // strengths (and hence a well-defined coupling) are not needed.
    let deterministic: Vec<f64> = if law.s_tot == 0.0 {
        vec![0.0; energies.len()]
    } else {
        let (e_plus, e_minus) = polariton_energies(params);
        let (sigma_u, sigma_l) = branch_strengths(law, params.detuning(), params.v)?;
        let unit_amp = 1.0 / (law.width_ev * std::f64::consts::PI.sqrt());
        let upper = SkewedGaussianPeak {
            amplitude: sigma_u * unit_amp,
            center_ev: e_plus.re,
            width_ev: law.width_ev,
            skewness: law.skew_upper,
        };
        let lower = SkewedGaussianPeak {
            amplitude: sigma_l * unit_amp,
            center_ev: e_minus.re,
            width_ev: law.width_ev,
            skewness: law.skew_lower,
        };
        let raw: Vec<f64> = energies
            .iter()
            .map(|&e| eval_peak(&upper, e) + eval_peak(&lower, e))
            .collect();
        let d_max = raw.iter().cloned().fold(0.0f64, f64::max);
        if d_max <= 1e-300 {
            return Err(ScatterModelError::InvalidLaw(
                "branch peaks have no support on the energy grid".into(),
            ));
        }
        let scale = law.s_tot / d_max;
        raw.iter().map(|d| d * scale).collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = deterministic
        .iter()
        .map(|d| (d + law.noise_floor * rng.gen::<f64>()).min(1.0))
        .collect();
    Ok(Spectrum::new(energies.to_vec(), values, Channel::S)?)
}

/// Pointwise A = 1 − T − R − S on a shared grid. Any point below −1e−6 is
/// an error; the residual numerical slack above that is clipped to zero.
pub fn energy_balance(
    reflectance: &Spectrum,
    transmittance: &Spectrum,
    scattering: &Spectrum,
) -> Result<Spectrum, ScatterModelError> {
    for (spectrum, expected) in [
        (reflectance, Channel::R),
        (transmittance, Channel::T),
        (scattering, Channel::S),
    ] {
        if spectrum.channel() != expected {
            return Err(ScatterModelError::ChannelMismatch {
                expected,
                got: spectrum.channel(),
            });
        }
    }
    let grid = reflectance.energies();
    for (name, other) in [("T", transmittance), ("S", scattering)] {
        if other.energies().len() != grid.len()
            || other.energies().iter().zip(grid).any(|(a, b)| a != b)
        {
            return Err(ScatterModelError::GridMismatch(format!(
                "channel {name} grid differs from channel R"
            )));
        }
    }
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let a = 1.0
            - reflectance.values()[i]
            - transmittance.values()[i]
            - scattering.values()[i];
        if a < -1e-6 {
            return Err(ScatterModelError::UnphysicalBalance {
                energy_ev: grid[i],
                absorption: a,
            });
        }
        values.push(a.max(0.0));
    }
    Ok(Spectrum::new(grid.to_vec(), values, Channel::A)?)
}

/// Reference fixture for the bare uncoupled film: one symmetric peak at the
/// exciton energy whose maximum equals `peak_efficiency` and whose full
/// width at half maximum is `gamma_x_ev`.
pub fn uncoupled_film_scattering(
    e_x_ev: f64,
    gamma_x_ev: f64,
    peak_efficiency: f64,
    energies: &[f64],
) -> Result<Spectrum, ScatterModelError> {
    if !(0.0..=1.0).contains(&peak_efficiency) {
        return Err(ScatterModelError::InvalidLaw(format!(
            "peak efficiency {peak_efficiency} outside [0, 1]"
        )));
    }
    if !(gamma_x_ev > 0.0 && gamma_x_ev.is_finite()) {
        return Err(ScatterModelError::InvalidLaw(format!(
            "line width {gamma_x_ev} must be positive"
        )));
    }
    crate::tmm::check_grid(energies)?;
    // FWHM of exp(−t²) is 2δ√(ln 2).
    let width_ev = gamma_x_ev / (2.0 * (2f64.ln()).sqrt());
    let peak = SkewedGaussianPeak {
        amplitude: peak_efficiency,
        center_ev: e_x_ev,
        width_ev,
        skewness: 0.0,
    };
    let values: Vec<f64> = energies.iter().map(|&e| eval_peak(&peak, e)).collect();
    Ok(Spectrum::new(energies.to_vec(), values, Channel::S)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lineshape::{fit_two_peaks, peak_area, relative_strengths};
    use proptest::prelude::*;

    fn grid() -> Vec<f64> {
        (0..=600).map(|i| 1.8 + 1e-3 * i as f64).collect()
    }

    fn resonant_params(v: f64) -> CoupledOscillatorParams {
        CoupledOscillatorParams::new(2.11, 2.11, v, 0.060, 0.040)
    }

    #[test]
    fn zero_detuning_splits_strength_evenly() {
        let law = ScatteringLaw::default();
        let (su, sl) = branch_strengths(&law, 0.0, 0.070).unwrap();
        assert_eq!(su, 0.5);
        assert_eq!(sl, 0.5);
    }

    #[test]
    fn zero_slope_equal_offsets_ignore_detuning() {
        let law = ScatteringLaw {
            slope: 0.0,
            offset_upper: 0.3,
            offset_lower: 0.3,
            ..ScatteringLaw::default()
        };
        for detuning in [-0.12, -0.03, 0.07, 0.15] {
            let (su, sl) = branch_strengths(&law, detuning, 0.070).unwrap();
            assert!((su - 0.5).abs() < 1e-15);
            assert!((sl - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn negative_branch_area_is_rejected() {
        let law = ScatteringLaw {
            offset_lower: -0.2,
            ..ScatteringLaw::default()
        };
        // Strong positive detuning drives the lower photon weight toward 0,
        // so slope·w_l + offset goes negative.
        match branch_strengths(&law, 0.4, 0.050) {
            Err(ScatterModelError::InvalidLaw(_)) => {}
            other => panic!("expected invalid-law error, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_maximum_matches_the_budget() {
        let law = ScatteringLaw {
            noise_floor: 0.0,
            ..ScatteringLaw::default()
        };
        let spectrum = synthesize_scattering(&resonant_params(0.070), &law, &grid(), 7).unwrap();
        let max = spectrum.max_value().unwrap();
        assert!((max - 0.25).abs() < 1e-12, "max {max}");
    }

    #[test]
    fn noise_lifts_the_maximum_by_at_most_the_floor() {
        let law = ScatteringLaw::default();
        let spectrum = synthesize_scattering(&resonant_params(0.070), &law, &grid(), 7).unwrap();
        let max = spectrum.max_value().unwrap();
        assert!(max >= 0.25 && max < 0.25 + 0.03 + 1e-12, "max {max}");
    }

    #[test]
    fn same_seed_reproduces_the_spectrum_exactly() {
        let law = ScatteringLaw::default();
        let params = resonant_params(0.075);
        let a = synthesize_scattering(&params, &law, &grid(), 42).unwrap();
        let b = synthesize_scattering(&params, &law, &grid(), 42).unwrap();
        assert_eq!(a.values(), b.values());
        let c = synthesize_scattering(&params, &law, &grid(), 43).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn zero_budget_leaves_only_the_noise_floor() {
        let law = ScatteringLaw {
            s_tot: 0.0,
            ..ScatteringLaw::default()
        };
        let spectrum = synthesize_scattering(&resonant_params(0.070), &law, &grid(), 11).unwrap();
        for &v in spectrum.values() {
            assert!((0.0..0.03).contains(&v), "noise sample {v}");
        }
    }

    #[test]
    fn zero_budget_works_even_without_a_defined_mixture() {
        // V = 0 at zero detuning has no branch decomposition, but with no
        // scattered power there is nothing to decompose.
        let params = CoupledOscillatorParams::new(2.11, 2.11, 0.0, 0.060, 0.040);
        let law = ScatteringLaw {
            s_tot: 0.0,
            ..ScatteringLaw::default()
        };
        let spectrum = synthesize_scattering(&params, &law, &grid(), 5).unwrap();
        assert!(spectrum.max_value().unwrap() < 0.03);
    }

    #[test]
    fn synthesized_strengths_survive_a_fit_round_trip() {
        let law = ScatteringLaw {
            skew_upper: 0.8,
            skew_lower: -0.8,
            ..ScatteringLaw::default()
        };
        let params = CoupledOscillatorParams::new(2.16, 2.11, 0.070, 0.060, 0.040);
        let (want_u, _) = branch_strengths(&law, params.detuning(), params.v).unwrap();
        let spectrum = synthesize_scattering(&params, &law, &grid(), 20260823).unwrap();
        let fit = fit_two_peaks(spectrum.energies(), spectrum.values(), None).unwrap();
        let (got_u, got_l) = relative_strengths(&fit).unwrap();
        assert!(
            (got_u - want_u).abs() < 0.02,
            "σ̄_U {got_u} vs generating {want_u}"
        );
        assert!((got_u + got_l - 1.0).abs() < 1e-12);
    }

    #[test]
    fn upper_strength_grows_with_detuning_under_the_identity_law() {
        let law = ScatteringLaw::default();
        let mut last = -1.0;
        for i in -5..=5 {
            let detuning = i as f64 * 0.03;
            let (su, _) = branch_strengths(&law, detuning, 0.070).unwrap();
            assert!(su > last, "σ̄_U not increasing at Δ = {detuning}");
            last = su;
        }
    }

    fn flat(value: f64, channel: Channel) -> Spectrum {
        let energies = grid();
        let values = vec![value; energies.len()];
        Spectrum::new(energies, values, channel).unwrap()
    }

    #[test]
    fn balance_reproduces_the_worked_example() {
        // R = 0.6, T = 0, S = 0.18 leaves A = 0.22.
        let a = energy_balance(
            &flat(0.6, Channel::R),
            &flat(0.0, Channel::T),
            &flat(0.18, Channel::S),
        )
        .unwrap();
        for &v in a.values() {
            assert!((v - 0.22).abs() < 1e-15);
        }
        assert_eq!(a.channel(), Channel::A);
    }

    #[test]
    fn balance_without_scattering_reduces_to_three_channels() {
        let a = energy_balance(
            &flat(0.55, Channel::R),
            &flat(0.15, Channel::T),
            &flat(0.0, Channel::S),
        )
        .unwrap();
        for &v in a.values() {
            assert!((v - 0.30).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_channels_balance_to_zero() {
        let a = energy_balance(
            &flat(0.5, Channel::R),
            &flat(0.3, Channel::T),
            &flat(0.2, Channel::S),
        )
        .unwrap();
        for &v in a.values() {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn oversubscribed_balance_is_unphysical() {
        match energy_balance(
            &flat(0.7, Channel::R),
            &flat(0.4, Channel::T),
            &flat(0.0, Channel::S),
        ) {
            Err(ScatterModelError::UnphysicalBalance { absorption, .. }) => {
                assert!((absorption + 0.1).abs() < 1e-12);
            }
            other => panic!("expected unphysical balance, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let r = flat(0.5, Channel::R);
        let t = flat(0.1, Channel::T);
        let shifted: Vec<f64> = grid().iter().map(|e| e + 5e-4).collect();
        let s = Spectrum::new(shifted, vec![0.0; r.len()], Channel::S).unwrap();
        assert!(matches!(
            energy_balance(&r, &t, &s),
            Err(ScatterModelError::GridMismatch(_))
        ));
    }

    #[test]
    fn wrong_channel_tags_are_rejected() {
        let r = flat(0.5, Channel::R);
        let t = flat(0.1, Channel::A);
        let s = flat(0.0, Channel::S);
        assert!(matches!(
            energy_balance(&r, &t, &s),
            Err(ScatterModelError::ChannelMismatch { .. })
        ));
    }

    #[test]
    fn bare_film_peak_sits_at_the_exciton_energy() {
        let spectrum = uncoupled_film_scattering(2.11, 0.040, 0.18, &grid()).unwrap();
        let mut best = (0.0, f64::NEG_INFINITY);
        for (&e, &v) in spectrum.energies().iter().zip(spectrum.values()) {
            if v > best.1 {
                best = (e, v);
            }
        }
        assert!((best.0 - 2.11).abs() < 1e-9, "peak at {} eV", best.0);
        assert!((best.1 - 0.18).abs() < 1e-12, "peak height {}", best.1);
    }

    #[test]
    fn bare_film_area_matches_the_closed_form() {
        let spectrum = uncoupled_film_scattering(2.11, 0.040, 0.18, &grid()).unwrap();
        // Trapezoidal integral of the emitted samples.
        let mut integral = 0.0;
        for i in 1..spectrum.len() {
            let de = spectrum.energies()[i] - spectrum.energies()[i - 1];
            integral += 0.5 * de * (spectrum.values()[i] + spectrum.values()[i - 1]);
        }
        let width = 0.040 / (2.0 * (2f64.ln()).sqrt());
        let peak = SkewedGaussianPeak {
            amplitude: 0.18,
            center_ev: 2.11,
            width_ev: width,
            skewness: 0.0,
        };
        let want = peak_area(&peak).unwrap();
        assert!(
            ((integral - want) / want).abs() < 1e-6,
            "{integral} vs {want}"
        );
        assert!((want - 0.18 * width * std::f64::consts::PI.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn zero_efficiency_gives_a_zero_spectrum() {
        let spectrum = uncoupled_film_scattering(2.11, 0.040, 0.0, &grid()).unwrap();
        assert!(spectrum.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn efficiency_above_unity_is_rejected() {
        assert!(matches!(
            uncoupled_film_scattering(2.11, 0.040, 1.2, &grid()),
            Err(ScatterModelError::InvalidLaw(_))
        ));
    }

    #[test]
    fn law_bounds_are_enforced() {
        let bad_budget = ScatteringLaw {
            s_tot: 1.3,
            ..ScatteringLaw::default()
        };
        assert!(bad_budget.validate().is_err());
        let bad_floor = ScatteringLaw {
            noise_floor: 0.08,
            ..ScatteringLaw::default()
        };
        assert!(bad_floor.validate().is_err());
    }

    proptest! {
        #[test]
        fn strengths_always_sum_to_one(
            detuning in -0.2..0.2f64,
            v in 0.02..0.15f64,
            offset in 0.0..0.5f64,
        ) {
            let law = ScatteringLaw {
                offset_upper: offset,
                offset_lower: offset,
                ..ScatteringLaw::default()
            };
            let (su, sl) = branch_strengths(&law, detuning, v).unwrap();
            prop_assert!((su + sl - 1.0).abs() < 1e-12);
            prop_assert!(su >= 0.0 && sl >= 0.0);
        }

        #[test]
        fn synthesized_values_stay_in_the_unit_interval(
            detuning in -0.1..0.1f64,
            v in 0.04..0.1f64,
            seed in 0u64..1000,
        ) {
            let params =
                CoupledOscillatorParams::new(2.11 + detuning, 2.11, v, 0.060, 0.040);
            let law = ScatteringLaw::default();
            let spectrum = synthesize_scattering(&params, &law, &grid(), seed).unwrap();
            for &value in spectrum.values() {
                prop_assert!((0.0..=1.0).contains(&value));
            }
        }

        #[test]
        fn balance_is_an_exact_identity(
            r in 0.0..0.5f64,
            t in 0.0..0.3f64,
            s in 0.0..0.2f64,
        ) {
            let a = energy_balance(
                &flat(r, Channel::R),
                &flat(t, Channel::T),
                &flat(s, Channel::S),
            ).unwrap();
            for &v in a.values() {
                prop_assert!((r + t + s + v - 1.0).abs() < 1e-15);
            }
        }
    }
}
