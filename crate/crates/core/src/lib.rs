//! Identification of linear time-invariant channels driven by signals with
//! discrete (almost-periodic) spectra.
//!
//! The pipeline works on finite sampled records:
//!
//! 1. [`spectral`] estimates Fourier exponents and extracts refined frequency sets.
//! 2. [`freqset`] performs tolerance-aware set algebra (union, intersection,
//!    difference) and separates shared link components between coupled inputs.
//! 3. [`identify`] keeps only the exact input frequencies that reach an output,
//!    estimates the frequency response there and fits ODE coefficients.
//!
//! [`channel`] generates ground-truth scenarios by exact spectral synthesis.

pub mod channel;
pub mod error;
pub mod freqset;
pub mod identify;
pub mod io;
mod optimize;
pub mod pipeline;
pub mod signal;
pub mod spectral;

pub use channel::{ChannelResponse, MimoScenario, ScenarioSpec};
pub use error::{ApsiError, Result, Warning};
pub use freqset::FrequencySet;
pub use identify::{FrequencyResponse, OdeModel};
pub use signal::{ApSignal, EnergyClass, HarmonicComponent, SampledRecord};
pub use spectral::{AnalysisConfig, SpectrumEstimate};

/// Complex Fourier exponent or frequency-response value.
pub type ComplexValue = num_complex::Complex64;
