//! Dielectric-function models for the layer species of a dye-filled microcavity.
//!
//! Three model families cover every layer used in this crate: a constant
//! background (ambient, glass, undoped polymer), a single Lorentz oscillator
//! (doped polymer film, resonance at the molecular transition), and a Drude
//! metal (the silver mirrors). All energies are in eV; the dielectric function
//! is evaluated with the exp(-iωt) convention, so passive media have
//! `Im ε(E) >= 0`.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DielectricError {
    #[error("invalid dielectric model: {0}")]
    InvalidModel(String),
    #[error("photon energy must be positive, got {0} eV")]
    NonPositiveEnergy(f64),
    #[error("invalid stack: {0}")]
    InvalidStack(String),
}

/// Dielectric function of a single layer species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DielectricModel {
    /// Dispersionless background, ε(E) = ε_b.
    Constant { eps_b: f64 },
    /// Single Lorentz oscillator, ε(E) = ε_b + f / (E_x² − E² − iγ_x E).
    ///
    /// `strength_ev2` (f, in eV²) is proportional to the molar dye
    /// concentration; see [`crate::tmm::oscillator_strength_from_concentration`].
    Lorentz {
        eps_b: f64,
        /// Resonance energy E_x (eV).
        resonance_ev: f64,
        /// FWHM linewidth γ_x (eV).
        fwhm_ev: f64,
        /// Oscillator strength f (eV²).
        strength_ev2: f64,
    },
    /// Drude metal, ε(E) = ε_∞ − E_p² / (E² + iΓE).
    Drude {
        eps_inf: f64,
        /// Plasma energy E_p (eV).
        plasma_ev: f64,
        /// Damping Γ (eV).
        damping_ev: f64,
    },
}

impl DielectricModel {
    /// Default silver mirror model. Literature-style Drude parameters giving
    /// >97% reflectivity for a thick film near 2.1 eV.
    pub fn silver() -> Self {
        DielectricModel::Drude {
            eps_inf: 4.0,
            plasma_ev: 9.0,
            damping_ev: 0.07,
        }
    }

    /// Undoped polymer background (PVA-like, n ≈ 1.48).
    pub fn polymer() -> Self {
        DielectricModel::Constant { eps_b: 2.2 }
    }

    /// Doped polymer film: polymer background plus the dye resonance.
    pub fn doped_film(resonance_ev: f64, fwhm_ev: f64, strength_ev2: f64) -> Self {
        DielectricModel::Lorentz {
            eps_b: 2.2,
            resonance_ev,
            fwhm_ev,
            strength_ev2,
        }
    }

    /// Checks the model invariants: finite parameters, positive resonance and
    /// plasma energies, positive damping, nonnegative oscillator strength.
    pub fn validate(&self) -> Result<(), DielectricError> {
        let bad = |msg: String| Err(DielectricError::InvalidModel(msg));
        match *self {
            DielectricModel::Constant { eps_b } => {
                if !eps_b.is_finite() {
                    return bad(format!("non-finite eps_b {eps_b}"));
                }
            }
            DielectricModel::Lorentz {
                eps_b,
                resonance_ev,
                fwhm_ev,
                strength_ev2,
            } => {
                if ![eps_b, resonance_ev, fwhm_ev, strength_ev2]
                    .iter()
                    .all(|v| v.is_finite())
                {
                    return bad("non-finite Lorentz parameter".into());
                }
                if resonance_ev <= 0.0 {
                    return bad(format!("resonance energy must be > 0, got {resonance_ev}"));
                }
                if fwhm_ev <= 0.0 {
                    return bad(format!("Lorentz linewidth must be > 0, got {fwhm_ev}"));
                }
                if strength_ev2 < 0.0 {
                    return bad(format!("oscillator strength must be >= 0, got {strength_ev2}"));
                }
            }
            DielectricModel::Drude {
                eps_inf,
                plasma_ev,
                damping_ev,
            } => {
                if ![eps_inf, plasma_ev, damping_ev].iter().all(|v| v.is_finite()) {
                    return bad("non-finite Drude parameter".into());
                }
                if plasma_ev <= 0.0 {
                    return bad(format!("plasma energy must be > 0, got {plasma_ev}"));
                }
                if damping_ev <= 0.0 {
                    return bad(format!("Drude damping must be > 0, got {damping_ev}"));
                }
            }
        }
        Ok(())
    }
}

/// Complex dielectric function of `model` at photon energy `energy_ev`.
pub fn eval_epsilon(model: &DielectricModel, energy_ev: f64) -> Result<Complex64, DielectricError> {
    model.validate()?;
    if !(energy_ev > 0.0) || !energy_ev.is_finite() {
        return Err(DielectricError::NonPositiveEnergy(energy_ev));
    }
    let e = energy_ev;
    Ok(match *model {
        DielectricModel::Constant { eps_b } => Complex64::new(eps_b, 0.0),
        DielectricModel::Lorentz {
            eps_b,
            resonance_ev,
            fwhm_ev,
            strength_ev2,
        } => {
            let denom = Complex64::new(resonance_ev * resonance_ev - e * e, -fwhm_ev * e);
            Complex64::new(eps_b, 0.0) + strength_ev2 / denom
        }
        DielectricModel::Drude {
            eps_inf,
            plasma_ev,
            damping_ev,
        } => {
            let denom = Complex64::new(e * e, damping_ev * e);
            Complex64::new(eps_inf, 0.0) - plasma_ev * plasma_ev / denom
        }
    })
}

/// Complex refractive index, the principal square root of ε with `Im n >= 0`.
pub fn refractive_index(
    model: &DielectricModel,
    energy_ev: f64,
) -> Result<Complex64, DielectricError> {
    let eps = eval_epsilon(model, energy_ev)?;
    Ok(sqrt_upper_half(eps))
}

/// Square root of a complex number on the branch with nonnegative imaginary part.
pub(crate) fn sqrt_upper_half(z: Complex64) -> Complex64 {
    let r = z.sqrt();
    if r.im < 0.0 {
        -r
    } else {
        r
    }
}

/// Layer thickness: interior layers are finite, bounding media are semi-infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Thickness {
    /// Thickness in nm, nonnegative.
    Finite(f64),
    SemiInfinite,
}

/// One layer of a multilayer stack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub thickness: Thickness,
    pub model: DielectricModel,
}

impl Layer {
    pub fn finite(thickness_nm: f64, model: DielectricModel) -> Self {
        Layer {
            thickness: Thickness::Finite(thickness_nm),
            model,
        }
    }

    pub fn semi_infinite(model: DielectricModel) -> Self {
        Layer {
            thickness: Thickness::SemiInfinite,
            model,
        }
    }

    pub fn is_semi_infinite(&self) -> bool {
        matches!(self.thickness, Thickness::SemiInfinite)
    }
}

/// Ordered multilayer description. Light enters from layer 0 (ambient-first
/// convention); exactly the first and last layers are semi-infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    layers: Vec<Layer>,
}

impl Stack {
    pub fn new(layers: Vec<Layer>) -> Result<Self, DielectricError> {
        if layers.len() < 3 {
            return Err(DielectricError::InvalidStack(format!(
                "a stack needs at least 3 layers, got {}",
                layers.len()
            )));
        }
        let last = layers.len() - 1;
        for (i, layer) in layers.iter().enumerate() {
            layer.model.validate()?;
            match layer.thickness {
                Thickness::SemiInfinite => {
                    if i != 0 && i != last {
                        return Err(DielectricError::InvalidStack(format!(
                            "interior layer {i} is semi-infinite"
                        )));
                    }
                }
                Thickness::Finite(d) => {
                    if i == 0 || i == last {
                        return Err(DielectricError::InvalidStack(format!(
                            "bounding layer {i} must be semi-infinite"
                        )));
                    }
                    if !d.is_finite() || d < 0.0 {
                        return Err(DielectricError::InvalidStack(format!(
                            "layer {i} thickness {d} nm is invalid"
                        )));
                    }
                }
            }
        }
        Ok(Stack { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Interior layers between the bounding media.
    pub fn interior(&self) -> &[Layer] {
        &self.layers[1..self.layers.len() - 1]
    }

    pub fn ambient(&self) -> &Layer {
        &self.layers[0]
    }

    pub fn substrate(&self) -> &Layer {
        &self.layers[self.layers.len() - 1]
    }

    /// Same stack traversed from the substrate side.
    pub fn reversed(&self) -> Stack {
        let mut layers = self.layers.clone();
        layers.reverse();
        Stack { layers }
    }

    /// Returns a copy with the thickness of interior layer `index`
    /// (0 = first interior layer) replaced.
    pub fn with_interior_thickness(
        &self,
        index: usize,
        thickness_nm: f64,
    ) -> Result<Stack, DielectricError> {
        let n_interior = self.layers.len() - 2;
        if index >= n_interior {
            return Err(DielectricError::InvalidStack(format!(
                "interior layer index {index} out of range (stack has {n_interior})"
            )));
        }
        let mut layers = self.layers.clone();
        layers[index + 1].thickness = Thickness::Finite(thickness_nm);
        Stack::new(layers)
    }

    /// Returns a copy with every Lorentz oscillator strength set to zero.
    /// This is the undoped reference cavity used for resonance tuning.
    pub fn undoped(&self) -> Stack {
        let mut layers = self.layers.clone();
        for layer in &mut layers {
            if let DielectricModel::Lorentz { strength_ev2, .. } = &mut layer.model {
                *strength_ev2 = 0.0;
            }
        }
        Stack { layers }
    }

    /// Returns a copy with every Lorentz oscillator strength replaced by `f`.
    pub fn with_oscillator_strength(&self, f: f64) -> Stack {
        let mut layers = self.layers.clone();
        for layer in &mut layers {
            if let DielectricModel::Lorentz { strength_ev2, .. } = &mut layer.model {
                *strength_ev2 = f;
            }
        }
        Stack { layers }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_model_is_flat() {
        let m = DielectricModel::Constant { eps_b: 2.2 };
        for e in [1.5, 2.11, 3.0] {
            assert_eq!(eval_epsilon(&m, e).unwrap(), Complex64::new(2.2, 0.0));
        }
    }

    #[test]
    fn lorentz_zero_strength_reduces_to_background() {
        let m = DielectricModel::doped_film(2.11, 0.040, 0.0);
        let eps = eval_epsilon(&m, 2.11).unwrap();
        assert_eq!(eps, Complex64::new(2.2, 0.0));
    }

    #[test]
    fn lorentz_on_resonance_matches_direct_arithmetic() {
        // Oracle: eps_b + f / (E_x^2 - E^2 - i γ E) evaluated by hand at E = E_x,
        // where the denominator collapses to -i γ E_x.
        let (eps_b, e_x, gamma, f) = (2.2, 2.11, 0.040, 0.10);
        let m = DielectricModel::Lorentz {
            eps_b,
            resonance_ev: e_x,
            fwhm_ev: gamma,
            strength_ev2: f,
        };
        let eps = eval_epsilon(&m, e_x).unwrap();
        let oracle = Complex64::new(eps_b, 0.0) + f / Complex64::new(0.0, -gamma * e_x);
        assert!((eps - oracle).norm() < 1e-14);
        // f / (γ E_x) = 0.10 / 0.0844 = 1.18483...
        assert!((eps.re - 2.2).abs() < 1e-12);
        assert!((eps.im - 1.1848341232227488).abs() < 1e-12);
    }

    #[test]
    fn refractive_index_trivial_cases() {
        let m = DielectricModel::Constant { eps_b: 4.0 };
        assert_eq!(refractive_index(&m, 2.0).unwrap(), Complex64::new(2.0, 0.0));
        // Negative real ε takes the branch with nonnegative imaginary part.
        let n = sqrt_upper_half(Complex64::new(-1.0, 0.0));
        assert!((n - Complex64::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn silver_is_metallic_in_the_visible() {
        let n = refractive_index(&DielectricModel::silver(), 2.1).unwrap();
        // Re n ≪ Im n for a good mirror metal.
        assert!(n.re.abs() < 0.05 * n.im.abs(), "n = {n}");
        assert!(n.im > 3.0);
    }

    #[test]
    fn non_finite_parameters_are_rejected() {
        let m = DielectricModel::Constant { eps_b: f64::NAN };
        assert!(matches!(
            eval_epsilon(&m, 2.0),
            Err(DielectricError::InvalidModel(_))
        ));
        let m = DielectricModel::Drude {
            eps_inf: 4.0,
            plasma_ev: f64::INFINITY,
            damping_ev: 0.07,
        };
        assert!(m.validate().is_err());
    }

    #[test]
    fn nonpositive_energy_is_rejected() {
        let m = DielectricModel::polymer();
        assert!(matches!(
            eval_epsilon(&m, 0.0),
            Err(DielectricError::NonPositiveEnergy(_))
        ));
        assert!(eval_epsilon(&m, -1.0).is_err());
    }

    #[test]
    fn stack_validation() {
        let ag = DielectricModel::silver();
        let air = DielectricModel::Constant { eps_b: 1.0 };
        let ok = Stack::new(vec![
            Layer::semi_infinite(air),
            Layer::finite(35.0, ag),
            Layer::semi_infinite(air),
        ]);
        assert!(ok.is_ok());

        assert!(Stack::new(vec![Layer::semi_infinite(air), Layer::semi_infinite(air)]).is_err());
        assert!(Stack::new(vec![
            Layer::semi_infinite(air),
            Layer::semi_infinite(ag),
            Layer::semi_infinite(air),
        ])
        .is_err());
        assert!(Stack::new(vec![
            Layer::finite(10.0, air),
            Layer::finite(35.0, ag),
            Layer::semi_infinite(air),
        ])
        .is_err());
        assert!(Stack::new(vec![
            Layer::semi_infinite(air),
            Layer::finite(-1.0, ag),
            Layer::semi_infinite(air),
        ])
        .is_err());
    }

    #[test]
    fn undoped_zeroes_every_lorentz() {
        let stack = Stack::new(vec![
            Layer::semi_infinite(DielectricModel::Constant { eps_b: 1.0 }),
            Layer::finite(135.0, DielectricModel::doped_film(2.11, 0.040, 0.05)),
            Layer::semi_infinite(DielectricModel::Constant { eps_b: 2.25 }),
        ])
        .unwrap();
        let undoped = stack.undoped();
        match undoped.interior()[0].model {
            DielectricModel::Lorentz { strength_ev2, .. } => assert_eq!(strength_ev2, 0.0),
            _ => panic!("model family changed"),
        }
    }

    fn arb_model() -> impl Strategy<Value = DielectricModel> {
        prop_oneof![
            (1.0..6.0).prop_map(|eps_b| DielectricModel::Constant { eps_b }),
            (1.0..4.0, 1.8..2.6, 0.01..0.2, 0.0..0.2).prop_map(|(eps_b, e_x, g, f)| {
                DielectricModel::Lorentz {
                    eps_b,
                    resonance_ev: e_x,
                    fwhm_ev: g,
                    strength_ev2: f,
                }
            }),
            (1.0..6.0, 5.0..12.0, 0.01..0.5).prop_map(|(eps_inf, ep, g)| DielectricModel::Drude {
                eps_inf,
                plasma_ev: ep,
                damping_ev: g,
            }),
        ]
    }

    proptest! {
        #[test]
        fn passive_medium_has_nonnegative_absorption(m in arb_model(), e in 1.5f64..3.0) {
            let eps = eval_epsilon(&m, e).unwrap();
            let n = refractive_index(&m, e).unwrap();
            prop_assert!(eps.im >= 0.0);
            prop_assert!(n.im >= 0.0);
        }

        #[test]
        fn index_squares_back_to_epsilon(m in arb_model(), e in 1.5f64..3.0) {
            let eps = eval_epsilon(&m, e).unwrap();
            let n = refractive_index(&m, e).unwrap();
            prop_assert!((n * n - eps).norm() <= 1e-12 * eps.norm().max(1.0));
        }

        #[test]
        fn lorentz_is_linear_in_oscillator_strength(
            f1 in 0.0f64..0.1, f2 in 0.0f64..0.1, e in 1.5f64..3.0
        ) {
            let with_f = |f| DielectricModel::doped_film(2.11, 0.040, f);
            let eps_b = Complex64::new(2.2, 0.0);
            let lhs = eval_epsilon(&with_f(f1 + f2), e).unwrap() - eps_b;
            let rhs = (eval_epsilon(&with_f(f1), e).unwrap() - eps_b)
                + (eval_epsilon(&with_f(f2), e).unwrap() - eps_b);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        }
    }
}
