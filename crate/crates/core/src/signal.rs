//! Almost-periodic signal model, exact synthesis, and time-average functionals.
//!
//! A real almost-periodic signal is stored one-sided:
//! `x(t) = Σ A_k cos(ω_k t + φ_k)`, whose Fourier exponent at `ω_k > 0` is
//! `(A_k / 2)·e^{jφ_k}` and at `ω = 0` is the (signed) DC amplitude.
//!
//! All averages are taken over `[t0, t0 + T]` with the trapezoidal rule and
//! normalized by the span `T`, the finite-record stand-in for the Bohr mean.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ApsiError, Result};
use crate::ComplexValue;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_phase(phase: f64) -> f64 {
    let mut p = phase.rem_euclid(2.0 * PI);
    if p > PI {
        p -= 2.0 * PI;
    }
    p
}

/// One spectral line `A cos(ωt + φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawComponent", into = "RawComponent")]
pub struct HarmonicComponent {
    frequency: f64,
    amplitude: f64,
    phase: f64,
}

#[derive(Serialize, Deserialize)]
struct RawComponent {
    omega: f64,
    amplitude: f64,
    phase: f64,
}

impl TryFrom<RawComponent> for HarmonicComponent {
    type Error = ApsiError;

    fn try_from(raw: RawComponent) -> Result<Self> {
        HarmonicComponent::new(raw.omega, raw.amplitude, raw.phase)
    }
}

impl From<HarmonicComponent> for RawComponent {
    fn from(c: HarmonicComponent) -> Self {
        RawComponent {
            omega: c.frequency,
            amplitude: c.amplitude,
            phase: c.phase,
        }
    }
}

impl HarmonicComponent {
    /// Builds a normalized component.
    ///
    /// A negative amplitude at `ω > 0` is folded into the phase. At `ω = 0`
    /// the phase is folded into a signed amplitude `A·cos φ`.
    pub fn new(frequency: f64, amplitude: f64, phase: f64) -> Result<Self> {
        if !(frequency.is_finite() && amplitude.is_finite() && phase.is_finite()) {
            return Err(ApsiError::invalid("component fields must be finite"));
        }
        if frequency < 0.0 {
            return Err(ApsiError::invalid(format!(
                "component frequency {frequency} is negative"
            )));
        }
        if frequency == 0.0 {
            return Ok(Self {
                frequency,
                amplitude: amplitude * phase.cos(),
                phase: 0.0,
            });
        }
        let (amplitude, phase) = if amplitude < 0.0 {
            (-amplitude, phase + PI)
        } else {
            (amplitude, phase)
        };
        Ok(Self {
            frequency,
            amplitude,
            phase: wrap_phase(phase),
        })
    }

    /// DC term with a signed level.
    pub fn dc(level: f64) -> Result<Self> {
        Self::new(0.0, level, 0.0)
    }

    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// One-sided Fourier exponent of this line.
    pub fn exponent(&self) -> ComplexValue {
        if self.frequency == 0.0 {
            ComplexValue::new(self.amplitude, 0.0)
        } else {
            ComplexValue::from_polar(self.amplitude / 2.0, self.phase)
        }
    }

    /// Recovers a component from its one-sided exponent.
    pub fn from_exponent(frequency: f64, exponent: ComplexValue) -> Result<Self> {
        if frequency == 0.0 {
            Self::dc(exponent.re)
        } else {
            Self::new(frequency, 2.0 * exponent.norm(), exponent.arg())
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.amplitude * (self.frequency * t + self.phase).cos()
    }

    /// Average power contributed by this line.
    pub fn power(&self) -> f64 {
        if self.frequency == 0.0 {
            self.amplitude * self.amplitude
        } else {
            self.amplitude * self.amplitude / 2.0
        }
    }
}

/// A finite sum of harmonic components with strictly increasing frequencies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSignal", into = "RawSignal")]
pub struct ApSignal {
    components: Vec<HarmonicComponent>,
}

#[derive(Serialize, Deserialize)]
struct RawSignal {
    components: Vec<HarmonicComponent>,
}

impl TryFrom<RawSignal> for ApSignal {
    type Error = ApsiError;

    fn try_from(raw: RawSignal) -> Result<Self> {
        ApSignal::new(raw.components)
    }
}

impl From<ApSignal> for RawSignal {
    fn from(s: ApSignal) -> Self {
        RawSignal {
            components: s.components,
        }
    }
}

impl ApSignal {
    /// Sorts the components by frequency; duplicate frequencies are rejected.
    pub fn new(mut components: Vec<HarmonicComponent>) -> Result<Self> {
        components.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
        if let Some(w) = components
            .windows(2)
            .find(|w| w[0].frequency == w[1].frequency)
        {
            return Err(ApsiError::invalid(format!(
                "duplicate component frequency {}",
                w[0].frequency
            )));
        }
        Ok(Self { components })
    }

    /// Convenience constructor from `(ω, A, φ)` triples.
    pub fn from_triples(lines: &[(f64, f64, f64)]) -> Result<Self> {
        let components = lines
            .iter()
            .map(|&(w, a, p)| HarmonicComponent::new(w, a, p))
            .collect::<Result<Vec<_>>>()?;
        Self::new(components)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn components(&self) -> &[HarmonicComponent] {
        &self.components
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.frequency).collect()
    }

    pub fn max_frequency(&self) -> Option<f64> {
        self.components.last().map(|c| c.frequency)
    }

    /// Smallest nonzero frequency.
    pub fn min_positive_frequency(&self) -> Option<f64> {
        self.components
            .iter()
            .map(|c| c.frequency)
            .find(|&w| w > 0.0)
    }

    /// Smallest gap between adjacent component frequencies.
    pub fn min_spacing(&self) -> Option<f64> {
        self.components
            .windows(2)
            .map(|w| w[1].frequency - w[0].frequency)
            .min_by(f64::total_cmp)
    }

    /// Fails if two components are closer than `spacing`.
    pub fn check_min_spacing(&self, spacing: f64) -> Result<()> {
        match self.min_spacing() {
            Some(gap) if gap < spacing => Err(ApsiError::invalid(format!(
                "components {gap} rad/s apart, closer than required {spacing}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.components.iter().map(|c| c.value_at(t)).sum()
    }

    /// Parseval power `Σ A²/2 + A_DC²`.
    pub fn average_power(&self) -> f64 {
        self.components.iter().map(HarmonicComponent::power).sum()
    }

    /// Exact one-sided exponent at `omega` (zero off the spectrum).
    pub fn exponent(&self, omega: f64) -> ComplexValue {
        self.components
            .iter()
            .find(|c| c.frequency == omega)
            .map(HarmonicComponent::exponent)
            .unwrap_or_default()
    }

    pub fn scaled(&self, gain: f64) -> Self {
        let components = self
            .components
            .iter()
            .filter_map(|c| HarmonicComponent::new(c.frequency, c.amplitude * gain, c.phase).ok())
            .collect();
        Self { components }
    }

    /// Component-wise union of two signals with disjoint frequencies.
    pub fn merged(&self, other: &ApSignal) -> Result<Self> {
        let mut components = self.components.clone();
        components.extend_from_slice(&other.components);
        Self::new(components)
    }
}

/// Uniformly sampled finite realization starting at `t0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRecord", into = "RawRecord")]
pub struct SampledRecord {
    samples: Vec<f64>,
    dt: f64,
    t0: f64,
}

#[derive(Serialize, Deserialize)]
struct RawRecord {
    dt: f64,
    #[serde(default)]
    t0: f64,
    samples: Vec<f64>,
}

impl TryFrom<RawRecord> for SampledRecord {
    type Error = ApsiError;

    fn try_from(raw: RawRecord) -> Result<Self> {
        SampledRecord::with_start(raw.samples, raw.dt, raw.t0)
    }
}

impl From<SampledRecord> for RawRecord {
    fn from(r: SampledRecord) -> Self {
        RawRecord {
            dt: r.dt,
            t0: r.t0,
            samples: r.samples,
        }
    }
}

impl SampledRecord {
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self> {
        Self::with_start(samples, dt, 0.0)
    }

    pub fn with_start(samples: Vec<f64>, dt: f64, t0: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(ApsiError::invalid(format!("dt must be positive, got {dt}")));
        }
        if !t0.is_finite() {
            return Err(ApsiError::invalid("t0 must be finite"));
        }
        if samples.is_empty() {
            return Err(ApsiError::invalid("record has no samples"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(ApsiError::invalid("record contains non-finite samples"));
        }
        Ok(Self { samples, dt, t0 })
    }

    /// Samples `f` on `t = i·dt`, `i = 0..=floor(duration/dt)`.
    pub fn from_fn(duration: f64, dt: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let n = sample_count(duration, dt)?;
        let samples = (0..n).map(|i| f(i as f64 * dt)).collect();
        Self::new(samples, dt)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Span `T = dt·(len − 1)`.
    pub fn duration(&self) -> f64 {
        self.dt * (self.samples.len() - 1) as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Angular Nyquist limit `π/dt`.
    pub fn nyquist(&self) -> f64 {
        PI / self.dt
    }

    /// Frequency resolution `Δω = 2π/T`.
    pub fn resolution(&self) -> f64 {
        2.0 * PI / self.duration()
    }

    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|v| v * gain).collect(),
            dt: self.dt,
            t0: self.t0,
        }
    }

    /// Restricts the record to its first `len` samples.
    pub fn truncated(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.samples.len() {
            return Err(ApsiError::invalid(format!(
                "cannot truncate {} samples to {len}",
                self.samples.len()
            )));
        }
        Self::with_start(self.samples[..len].to_vec(), self.dt, self.t0)
    }

    fn same_grid(&self, other: &SampledRecord) -> bool {
        self.samples.len() == other.samples.len()
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt.max(other.dt)
    }

    fn require_span(&self) -> Result<()> {
        if self.samples.len() < 2 {
            return Err(ApsiError::invalid("record needs at least two samples"));
        }
        Ok(())
    }
}

fn sample_count(duration: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(ApsiError::invalid(format!("dt must be positive, got {dt}")));
    }
    if !(duration.is_finite() && duration > 0.0) {
        return Err(ApsiError::invalid(format!(
            "duration must be positive, got {duration}"
        )));
    }
    // Tolerate round-off when duration is a multiple of dt.
    Ok((duration / dt + 1e-9).floor() as usize + 1)
}

/// Trapezoidal sum `Σ f_i − (f_0 + f_last)/2`, in units of the sample step.
pub(crate) fn trapezoid<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let mut iter = values.into_iter();
    let Some(first) = iter.next() else {
        return 0.0;
    };
    let mut sum = first;
    let mut last = first;
    let mut count = 1usize;
    for v in iter {
        sum += v;
        last = v;
        count += 1;
    }
    if count == 1 {
        return 0.0;
    }
    sum - 0.5 * (first + last)
}

/// Samples `signal` exactly on `t = i·dt` over `[0, duration]`.
pub fn synthesize(signal: &ApSignal, duration: f64, dt: f64) -> Result<SampledRecord> {
    synthesize_from(signal, 0.0, duration, dt)
}

/// As [`synthesize`] with the first sample at `t0`.
pub fn synthesize_from(
    signal: &ApSignal,
    t0: f64,
    duration: f64,
    dt: f64,
) -> Result<SampledRecord> {
    let n = sample_count(duration, dt)?;
    if let Some(w_max) = signal.max_frequency() {
        if w_max > 0.0 && dt >= PI / w_max {
            return Err(ApsiError::invalid(format!(
                "dt = {dt} s does not resolve {w_max} rad/s (needs dt < {})",
                PI / w_max
            )));
        }
    }
    if let Some(w_min) = signal.min_positive_frequency() {
        if duration < 10.0 * 2.0 * PI / w_min {
            log::warn!(
                "duration {duration} s covers fewer than 10 periods of {w_min} rad/s"
            );
        }
    }
    let samples = (0..n)
        .map(|i| signal.value_at(t0 + i as f64 * dt))
        .collect();
    SampledRecord::with_start(samples, dt, t0)
}

/// Finite-span time average `(1/T)∫ x dt`.
pub fn bohr_mean(record: &SampledRecord) -> Result<f64> {
    record.require_span()?;
    Ok(trapezoid(record.samples.iter().copied()) / (record.len() - 1) as f64)
}

/// Finite-span scalar product `(1/T)∫ a·b dt`.
pub fn inner_product(a: &SampledRecord, b: &SampledRecord) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(ApsiError::invalid(format!(
            "records differ in grid: ({} samples, dt {}) vs ({} samples, dt {})",
            a.len(),
            a.dt,
            b.len(),
            b.dt
        )));
    }
    a.require_span()?;
    let products = a.samples.iter().zip(&b.samples).map(|(x, y)| x * y);
    Ok(trapezoid(products) / (a.len() - 1) as f64)
}

/// Running scalar product `(1/s)∫₀ˢ a·b dt` for every span `s = k·dt`, `k ≥ 1`.
///
/// Entry `k − 1` holds the average over the first `k + 1` samples.
pub fn running_inner_product(a: &SampledRecord, b: &SampledRecord) -> Result<Vec<f64>> {
    if !a.same_grid(b) {
        return Err(ApsiError::invalid("records differ in grid"));
    }
    a.require_span()?;
    let mut out = Vec::with_capacity(a.len() - 1);
    let mut integral = 0.0;
    let mut prev = a.samples[0] * b.samples[0];
    for (k, (x, y)) in a.samples.iter().zip(&b.samples).enumerate().skip(1) {
        let cur = x * y;
        integral += 0.5 * (prev + cur);
        prev = cur;
        out.push(integral / k as f64);
    }
    Ok(out)
}

/// Single-realization autocorrelation at each lag, normalized by the overlap `T − |τ|`.
pub fn autocorrelation(record: &SampledRecord, lags: &[f64]) -> Result<Vec<f64>> {
    record.require_span()?;
    let span = record.duration();
    let n = record.len();
    lags.iter()
        .map(|&tau| {
            if !tau.is_finite() || tau.abs() >= span / 2.0 {
                return Err(ApsiError::invalid(format!(
                    "lag {tau} s must satisfy |τ| < T/2 = {}",
                    span / 2.0
                )));
            }
            let steps = tau.abs() / record.dt;
            let m = steps.round();
            if (steps - m).abs() > 1e-6 * m.max(1.0) {
                return Err(ApsiError::invalid(format!(
                    "lag {tau} s is not a multiple of dt = {}",
                    record.dt
                )));
            }
            let m = m as usize;
            let x = &record.samples;
            let products = (m..n).map(|i| x[i] * x[i - m]);
            Ok(trapezoid(products) / (n - 1 - m) as f64)
        })
        .collect()
}

/// Average power `(1/T)∫ x² dt` over the whole record.
pub fn average_power(record: &SampledRecord) -> Result<f64> {
    inner_product(record, record)
}

/// One row of [`power_decay_table`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerRow {
    pub span: f64,
    /// Average power of `e^{-|t|}` over `[0, span]`.
    pub pulse: f64,
    /// Average power of `cos t` over `[0, span]`.
    pub cosine: f64,
}

/// Average power of a finite-energy pulse and of a cosine at growing spans.
///
/// The pulse power falls like `1/T` while the cosine power stays at 1/2, so a
/// time-averaged autocorrelation cannot describe finite-energy signals.
pub fn power_decay_table(spans: &[f64], dt: f64) -> Result<Vec<PowerRow>> {
    spans
        .iter()
        .map(|&span| {
            let pulse = SampledRecord::from_fn(span, dt, |t| (-t.abs()).exp())?;
            let cosine = SampledRecord::from_fn(span, dt, f64::cos)?;
            Ok(PowerRow {
                span,
                pulse: average_power(&pulse)?,
                cosine: average_power(&cosine)?,
            })
        })
        .collect()
}

/// Average power over the first `k + 1` samples (span `k·dt`).
fn prefix_power(samples: &[f64], k: usize) -> f64 {
    trapezoid(samples[..=k].iter().map(|v| v * v)) / k as f64
}

/// Behaviour of average power as the averaging span grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnergyClass {
    /// Power falls like `1/T`: the record has finite energy.
    DecaysAsInverseT,
    /// Power stays put: an almost-periodic (persistent) signal.
    Persistent,
    Indeterminate,
}

/// Average power at the nested spans `T/4`, `T/2`, `T`.
pub fn nested_average_power(record: &SampledRecord) -> Result<[f64; 3]> {
    let last = record.len().saturating_sub(1);
    if last < 4 {
        return Err(ApsiError::invalid(format!(
            "{} samples cannot be split into nested spans T/4, T/2, T",
            record.len()
        )));
    }
    let s = &record.samples;
    Ok([
        prefix_power(s, last / 4),
        prefix_power(s, last / 2),
        prefix_power(s, last),
    ])
}

/// Classifies a record as finite-energy or persistent from `P(T)/P(T/2)`.
pub fn is_finite_energy(record: &SampledRecord) -> Result<EnergyClass> {
    let [_, half, full] = nested_average_power(record)?;
    if half <= 0.0 || !half.is_finite() {
        return Ok(EnergyClass::Indeterminate);
    }
    let ratio = full / half;
    Ok(if ratio < 0.6 {
        EnergyClass::DecaysAsInverseT
    } else if ratio > 0.8 {
        EnergyClass::Persistent
    } else {
        EnergyClass::Indeterminate
    })
}
