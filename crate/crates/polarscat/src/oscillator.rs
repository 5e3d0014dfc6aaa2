//! Coupled-oscillator model of the cavity-exciton system: complex polariton
//! eigenenergies, Hopfield photon weights, and the collective vacuum Rabi
//! frequency.
//!
//! Energies and linewidths are in eV; the linewidths γ_c and γ_x are FWHM
//! values and enter the eigenenergy formula directly:
//!
//! ```text
//! E± = (E_c + E_x)/2 + (i/2)(γ_c + γ_x) ± sqrt(V² + ¼[Δ − (i/2)(γ_c − γ_x)]²)
//! ```
//!
//! with detuning Δ = E_c − E_x. The principal square root puts the branch with
//! the larger real part on E+, matching the upper/lower polariton labels.

use num_complex::Complex64;
use thiserror::Error;

/// Reduced Planck constant (J·s).
pub const HBAR_JS: f64 = 1.054_571_817e-34;
/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// One Debye in C·m.
pub const DEBYE_CM: f64 = 3.335_640_951_981_52e-30;

#[derive(Debug, Error, PartialEq)]
pub enum OscillatorError {
    #[error("invalid oscillator parameters: {0}")]
    InvalidParams(String),
    #[error("photon/exciton mixture undefined at V = 0 and ΔE = 0")]
    UndefinedMixture,
}

/// Parameters of the two-coupled-oscillator model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledOscillatorParams {
    /// Cavity mode energy E_c (eV).
    pub e_c: f64,
    /// Bare exciton energy E_x (eV).
    pub e_x: f64,
    /// Coupling strength V (eV).
    pub v: f64,
    /// Cavity FWHM linewidth γ_c (eV).
    pub gamma_c: f64,
    /// Exciton FWHM linewidth γ_x (eV).
    pub gamma_x: f64,
}

impl CoupledOscillatorParams {
    pub fn new(e_c: f64, e_x: f64, v: f64, gamma_c: f64, gamma_x: f64) -> Self {
        CoupledOscillatorParams {
            e_c,
            e_x,
            v,
            gamma_c,
            gamma_x,
        }
    }

    /// Detuning Δ = E_c − E_x.
    pub fn detuning(&self) -> f64 {
        self.e_c - self.e_x
    }

    pub fn validate(&self) -> Result<(), OscillatorError> {
        let vals = [self.e_c, self.e_x, self.v, self.gamma_c, self.gamma_x];
        if !vals.iter().all(|v| v.is_finite()) {
            return Err(OscillatorError::InvalidParams("non-finite parameter".into()));
        }
        if self.e_c <= 0.0 || self.e_x <= 0.0 {
            return Err(OscillatorError::InvalidParams(
                "mode energies must be positive".into(),
            ));
        }
        if self.v < 0.0 || self.gamma_c < 0.0 || self.gamma_x < 0.0 {
            return Err(OscillatorError::InvalidParams(
                "coupling and linewidths must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Complex upper (E+) and lower (E−) polariton energies.
pub fn polariton_energies(p: &CoupledOscillatorParams) -> (Complex64, Complex64) {
    let center = Complex64::new(
        0.5 * (p.e_c + p.e_x),
        0.5 * (p.gamma_c + p.gamma_x),
    );
    let half_detuning = Complex64::new(p.detuning(), -0.5 * (p.gamma_c - p.gamma_x));
    let root = (Complex64::new(p.v * p.v, 0.0) + 0.25 * half_detuning * half_detuning).sqrt();
    // Principal sqrt has Re >= 0, so E+ carries the larger real part.
    (center + root, center - root)
}

/// Real-part splitting Re E+ − Re E−. Zero below the exceptional point,
/// where the branches coincide in energy and differ only in linewidth.
pub fn splitting(p: &CoupledOscillatorParams) -> f64 {
    let (e_plus, e_minus) = polariton_energies(p);
    e_plus.re - e_minus.re
}

/// Coupling strength that reproduces a given zero-detuning splitting:
/// the inverse of s = 2·sqrt(V² − (γc−γx)²/16).
pub fn coupling_from_splitting(splitting_ev: f64, gamma_c_ev: f64, gamma_x_ev: f64) -> f64 {
    let q = 0.25 * (gamma_c_ev - gamma_x_ev);
    (0.25 * splitting_ev * splitting_ev + q * q).sqrt()
}

/// Photon weights |α_ph|² of the upper and lower polaritons for detuning
/// `delta_e_ev` and coupling `v_ev`:
///
/// ```text
/// |α_ph^U|² = ½(1 + ΔE/√(ΔE² + 4V²)),   |α_ph^L|² = ½(1 − ΔE/√(ΔE² + 4V²))
/// ```
pub fn hopfield_photon_weights(delta_e_ev: f64, v_ev: f64) -> Result<(f64, f64), OscillatorError> {
    if v_ev == 0.0 && delta_e_ev == 0.0 {
        return Err(OscillatorError::UndefinedMixture);
    }
    let norm = (delta_e_ev * delta_e_ev + 4.0 * v_ev * v_ev).sqrt();
    let x = delta_e_ev / norm;
    Ok((0.5 * (1.0 + x), 0.5 * (1.0 - x)))
}

/// Polariton branch energies with their photon weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolaritonPair {
    pub e_plus: Complex64,
    pub e_minus: Complex64,
    pub photon_weight_upper: f64,
    pub photon_weight_lower: f64,
}

impl PolaritonPair {
    pub fn from_params(p: &CoupledOscillatorParams) -> Result<Self, OscillatorError> {
        p.validate()?;
        let (e_plus, e_minus) = polariton_energies(p);
        let (photon_weight_upper, photon_weight_lower) =
            hopfield_photon_weights(p.detuning(), p.v)?;
        Ok(PolaritonPair {
            e_plus,
            e_minus,
            photon_weight_upper,
            photon_weight_lower,
        })
    }

    /// True when the branches are real-degenerate (at or below the
    /// exceptional point), where upper/lower labeling by energy breaks down.
    pub fn is_exceptional(&self) -> bool {
        self.e_plus.re - self.e_minus.re < 1e-12
    }
}

/// Inputs of the collective vacuum Rabi formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiParams {
    /// Molecular transition dipole (C·m).
    pub dipole_cm: f64,
    /// Cavity resonance angular frequency (rad/s).
    pub omega_c: f64,
    /// Relative background dielectric constant inside the cavity.
    pub epsilon_r: f64,
    /// Cavity mode volume (m³).
    pub mode_volume_m3: f64,
    /// Number of molecules coupled to the mode.
    pub n_molecules: f64,
}

impl RabiParams {
    pub fn validate(&self) -> Result<(), OscillatorError> {
        let vals = [
            self.dipole_cm,
            self.omega_c,
            self.epsilon_r,
            self.mode_volume_m3,
            self.n_molecules,
        ];
        if !vals.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(OscillatorError::InvalidParams(
                "Rabi parameters must all be positive and finite".into(),
            ));
        }
        Ok(())
    }
}

/// Collective vacuum Rabi frequency (rad/s),
/// Ω_R = (2d/ħ)·√(ħω_c N / (2 ε₀ ε V_c)).
///
/// ε is the relative (dimensionless) background dielectric constant; the
/// vacuum permittivity appears explicitly so the result is in SI rad/s.
pub fn collective_rabi(r: &RabiParams) -> Result<f64, OscillatorError> {
    r.validate()?;
    let energy_density =
        HBAR_JS * r.omega_c * r.n_molecules / (2.0 * VACUUM_PERMITTIVITY * r.epsilon_r * r.mode_volume_m3);
    Ok(2.0 * r.dipole_cm / HBAR_JS * energy_density.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn resonant_params(v: f64) -> CoupledOscillatorParams {
        CoupledOscillatorParams::new(2.11, 2.11, v, 0.060, 0.040)
    }

    /// Independent oracle: Eq.-by-Eq. complex arithmetic, no shared code path.
    fn energies_oracle(p: &CoupledOscillatorParams) -> (Complex64, Complex64) {
        let i = Complex64::new(0.0, 1.0);
        let center = 0.5 * (p.e_c + p.e_x) + 0.5 * i * (p.gamma_c + p.gamma_x);
        let inner = Complex64::new(p.e_c - p.e_x, 0.0) - 0.5 * i * (p.gamma_c - p.gamma_x);
        let root = (p.v * p.v + 0.25 * inner * inner).sqrt();
        let (a, b) = (center + root, center - root);
        if a.re >= b.re {
            (a, b)
        } else {
            (b, a)
        }
    }

    #[test]
    fn lossless_resonant_case_splits_by_2v() {
        let p = CoupledOscillatorParams::new(2.11, 2.11, 0.075, 0.0, 0.0);
        let (ep, em) = polariton_energies(&p);
        assert!((ep - Complex64::new(2.185, 0.0)).norm() < 1e-14);
        assert!((em - Complex64::new(2.035, 0.0)).norm() < 1e-14);
        assert!((splitting(&p) - 0.150).abs() < 1e-14);
    }

    #[test]
    fn uncoupled_limit_recovers_bare_modes() {
        let p = CoupledOscillatorParams::new(2.21, 2.11, 0.0, 0.050, 0.050);
        let (ep, em) = polariton_energies(&p);
        assert!((ep.re - 2.21).abs() < 1e-14);
        assert!((em.re - 2.11).abs() < 1e-14);
    }

    #[test]
    fn v70_damping_case_gives_139_6_mev() {
        // 2·sqrt(V² − (γc−γx)²/16) with V = 70 meV: the observed 140 meV.
        let s = splitting(&resonant_params(0.070));
        assert!((s - 0.13964240043768941).abs() < 1e-12, "splitting {s}");
        let (ep, em) = energies_oracle(&resonant_params(0.070));
        assert!((s - (ep.re - em.re)).abs() < 1e-14);
    }

    #[test]
    fn v75_damping_case_matches_direct_evaluation() {
        let s = splitting(&resonant_params(0.075));
        assert!((s - 0.14966629547095767).abs() < 1e-12, "splitting {s}");
    }

    #[test]
    fn coupling_from_splitting_inverts_resonant_splitting() {
        for v in [0.02, 0.070, 0.075, 0.3] {
            let p = resonant_params(v);
            let s = splitting(&p);
            let back = coupling_from_splitting(s, p.gamma_c, p.gamma_x);
            assert!((back - v).abs() < 1e-14, "v {v} -> {back}");
        }
    }

    #[test]
    fn below_exceptional_point_real_splitting_vanishes() {
        // V < (γc−γx)/4: the sqrt of a negative real is purely imaginary.
        let p = resonant_params(0.001);
        assert_eq!(splitting(&p), 0.0);
        assert!(PolaritonPair::from_params(&p).unwrap().is_exceptional());
    }

    #[test]
    fn mean_energy_at_resonance_is_the_exciton_energy() {
        let (ep, em) = polariton_energies(&resonant_params(0.070));
        assert!((0.5 * (ep.re + em.re) - 2.11).abs() < 1e-12);
    }

    #[test]
    fn hopfield_weights_reference_points() {
        assert_eq!(hopfield_photon_weights(0.0, 0.075).unwrap(), (0.5, 0.5));

        // ΔE = 2V: ½(1 ± 1/√2), independent of V.
        let (u, l) = hopfield_photon_weights(0.150, 0.075).unwrap();
        assert!((u - 0.8535533905932737).abs() < 1e-15);
        assert!((l - 0.1464466094067262).abs() < 1e-15);

        // Far-detuned limit.
        let (u, l) = hopfield_photon_weights(1e6, 0.075).unwrap();
        assert!(u > 1.0 - 1e-10);
        assert!(l < 1e-10);
    }

    #[test]
    fn hopfield_weights_error_cases() {
        assert_eq!(
            hopfield_photon_weights(0.0, 0.0),
            Err(OscillatorError::UndefinedMixture)
        );
        // V = 0 with finite detuning is the fully uncoupled limit.
        assert_eq!(hopfield_photon_weights(0.1, 0.0).unwrap(), (1.0, 0.0));
        assert_eq!(hopfield_photon_weights(-0.1, 0.0).unwrap(), (0.0, 1.0));
    }

    fn rabi_fixture() -> RabiParams {
        RabiParams {
            dipole_cm: DEBYE_CM,
            omega_c: 3.2e15,
            epsilon_r: 2.2,
            mode_volume_m3: 1e-19,
            n_molecules: 1e8,
        }
    }

    #[test]
    fn rabi_scaling_laws() {
        let base = collective_rabi(&rabi_fixture()).unwrap();
        let mut quad_n = rabi_fixture();
        quad_n.n_molecules *= 4.0;
        assert_eq!(collective_rabi(&quad_n).unwrap(), 2.0 * base);
        let mut quad_v = rabi_fixture();
        quad_v.mode_volume_m3 *= 4.0;
        assert_eq!(collective_rabi(&quad_v).unwrap(), 0.5 * base);
    }

    #[test]
    fn rabi_matches_unit_by_unit_evaluation() {
        // Oracle route: vacuum field amplitude first, then 2·d·E·√N/ħ.
        let r = rabi_fixture();
        let field = (HBAR_JS * r.omega_c
            / (2.0 * VACUUM_PERMITTIVITY * r.epsilon_r * r.mode_volume_m3))
            .sqrt();
        let oracle = 2.0 * r.dipole_cm * field * r.n_molecules.sqrt() / HBAR_JS;
        let omega = collective_rabi(&r).unwrap();
        assert!((omega - oracle).abs() <= 1e-12 * oracle);
        // Desk-scale sanity: ħΩ_R of order 0.1 eV for these inputs.
        let ev = omega * HBAR_JS / 1.602_176_634e-19;
        assert!((0.05..0.5).contains(&ev), "ħΩ_R = {ev} eV");
    }

    #[test]
    fn invalid_params_are_rejected() {
        let p = CoupledOscillatorParams::new(-2.11, 2.11, 0.07, 0.06, 0.04);
        assert!(p.validate().is_err());
        let mut r = rabi_fixture();
        r.mode_volume_m3 = 0.0;
        assert!(collective_rabi(&r).is_err());
    }

    proptest! {
        #[test]
        fn branch_sum_and_ordering(
            e_c in 1.8f64..2.6,
            v in 0.0f64..0.2,
            gamma_c in 0.0f64..0.2,
            gamma_x in 0.0f64..0.2,
        ) {
            let p = CoupledOscillatorParams::new(e_c, 2.11, v, gamma_c, gamma_x);
            let (ep, em) = polariton_energies(&p);
            // The ± parts cancel exactly: sum = (E_c + E_x) + i(γ_c + γ_x).
            let sum = ep + em;
            prop_assert!((sum.re - (p.e_c + p.e_x)).abs() <= 1e-12);
            prop_assert!((sum.im - (p.gamma_c + p.gamma_x)).abs() <= 1e-12);
            prop_assert!(ep.re >= em.re);
            let (o_p, o_m) = energies_oracle(&p);
            prop_assert!((ep - o_p).norm() <= 1e-12);
            prop_assert!((em - o_m).norm() <= 1e-12);
        }

        #[test]
        fn photon_weights_sum_to_one(delta in -0.5f64..0.5, v in 1e-4f64..0.2) {
            let (u, l) = hopfield_photon_weights(delta, v).unwrap();
            prop_assert!((u + l - 1.0).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&u));
            prop_assert!((0.0..=1.0).contains(&l));
        }

        #[test]
        fn splitting_monotone_in_coupling(delta in -0.2f64..0.2) {
            let mut prev = -1.0;
            for i in 0..40 {
                let v = 0.005 * i as f64;
                let p = CoupledOscillatorParams::new(2.11 + delta, 2.11, v, 0.060, 0.040);
                let s = splitting(&p);
                prop_assert!(s >= prev - 1e-12, "splitting not monotone at V = {v}");
                prev = s;
            }
        }
    }
}
