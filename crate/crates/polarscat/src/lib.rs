//! Simulation and analysis toolkit for strongly coupled dye-microcavity systems.
//!
//! The crate forward-models multilayer cavity spectra with a normal-incidence
//! transfer-matrix method, synthesizes polariton resonant-Rayleigh-scattering
//! spectra from a phenomenological law, and inverse-fits spectra to recover
//! coupling strength, polariton energies, Hopfield photon weights, and relative
//! scattering strengths.
//!
//! Module map:
//! - [`dielectric`]: Lorentz / Drude / constant dielectric models per layer species.
//! - [`tmm`]: characteristic-matrix reflectance/transmittance and cavity tuning.
//! - [`oscillator`]: coupled-oscillator polariton energies, Hopfield weights,
//!   collective Rabi frequency.
//! - [`fitting`]: bounded Levenberg-Marquardt nonlinear least squares.
//! - [`lineshape`]: skewed-Gaussian peaks, two-peak decomposition, integrated
//!   scattering strengths.
//! - [`dispersion`]: detuning-series analysis, coupling-strength fits,
//!   scattering-strength vs photon-weight regression.
//! - [`scattermodel`]: phenomenological scattering synthesizer and the
//!   four-channel energy balance.
//! - [`io`]: CSV persistence, reference normalization, run configuration.

pub mod dielectric;
pub mod dispersion;
pub mod fitting;
pub mod io;
pub mod lineshape;
pub mod oscillator;
pub mod scattermodel;
pub mod tmm;

pub use dielectric::{DielectricModel, Layer, Stack};
pub use oscillator::{CoupledOscillatorParams, PolaritonPair};
pub use tmm::{Channel, Spectrum};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
