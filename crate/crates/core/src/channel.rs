//! Linear channels acting on almost-periodic signals, and seeded MIMO scenarios.
//!
//! A stationary linear channel multiplies each Fourier exponent by its
//! frequency response, so outputs are synthesized exactly from the spectrum
//! with no time-domain integration.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ApsiError, Result};
use crate::freqset::FrequencySet;
use crate::signal::{synthesize, ApSignal, HarmonicComponent, SampledRecord};
use crate::ComplexValue;

/// Evaluates `Σ c_k (jω)^k`.
pub fn jw_polynomial(coefficients: &[f64], omega: f64) -> ComplexValue {
    let s = ComplexValue::new(0.0, omega);
    coefficients
        .iter()
        .rev()
        .fold(ComplexValue::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// Frequency response `K(jω)` of a channel, in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelResponse {
    Identity,
    /// Constant complex gain.
    Gain { re: f64, im: f64 },
    /// `K = 1 / Σ a_k (jω)^k` for the ODE `Σ a_k y^(k) = x`.
    Ode { coefficients: Vec<f64> },
    /// `K = Σ b_k (jω)^k / Σ a_k (jω)^k`.
    Rational {
        numerator: Vec<f64>,
        denominator: Vec<f64>,
    },
}

impl ChannelResponse {
    pub fn gain(value: ComplexValue) -> Self {
        ChannelResponse::Gain {
            re: value.re,
            im: value.im,
        }
    }

    pub fn ode(coefficients: Vec<f64>) -> Result<Self> {
        match coefficients.last() {
            Some(&a) if a != 0.0 && coefficients.iter().all(|c| c.is_finite()) => {
                Ok(ChannelResponse::Ode { coefficients })
            }
            _ => Err(ApsiError::invalid(
                "ODE channel needs finite coefficients with a nonzero leading term",
            )),
        }
    }

    pub fn response(&self, omega: f64) -> ComplexValue {
        match self {
            ChannelResponse::Identity => ComplexValue::new(1.0, 0.0),
            ChannelResponse::Gain { re, im } => ComplexValue::new(*re, *im),
            ChannelResponse::Ode { coefficients } => jw_polynomial(coefficients, omega).inv(),
            ChannelResponse::Rational {
                numerator,
                denominator,
            } => jw_polynomial(numerator, omega) / jw_polynomial(denominator, omega),
        }
    }

    pub fn description(&self) -> String {
        match self {
            ChannelResponse::Identity => "identity".to_string(),
            ChannelResponse::Gain { re, im } => format!("constant gain {re}{im:+}j"),
            ChannelResponse::Ode { coefficients } => {
                format!("ODE of order {} with a = {coefficients:?}", coefficients.len() - 1)
            }
            ChannelResponse::Rational {
                numerator,
                denominator,
            } => format!("rational b = {numerator:?} / a = {denominator:?}"),
        }
    }
}

/// Passes a signal through a channel: `(ω, A, φ) → (ω, A|K|, φ + arg K)`.
///
/// Components where the channel has zero gain are dropped.
pub fn apply_channel(signal: &ApSignal, channel: &ChannelResponse) -> ApSignal {
    let components = signal
        .components()
        .iter()
        .filter_map(|c| {
            let k = channel.response(c.frequency());
            let gain = k.norm();
            if gain == 0.0 || !gain.is_finite() {
                return None;
            }
            HarmonicComponent::new(c.frequency(), c.amplitude() * gain, c.phase() + k.arg()).ok()
        })
        .collect();
    ApSignal::new(components).expect("channel output keeps the input's distinct frequencies")
}

/// Adds signals, combining exponents of components at identical frequencies.
pub fn superpose(signals: &[&ApSignal]) -> ApSignal {
    let mut lines: Vec<(f64, ComplexValue)> = signals
        .iter()
        .flat_map(|s| s.components().iter().map(|c| (c.frequency(), c.exponent())))
        .collect();
    lines.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut summed: Vec<(f64, ComplexValue)> = Vec::with_capacity(lines.len());
    for (w, c) in lines {
        match summed.last_mut() {
            Some((lw, lc)) if *lw == w => *lc += c,
            _ => summed.push((w, c)),
        }
    }
    let scale: f64 = signals
        .iter()
        .flat_map(|s| s.components().iter().map(|c| c.exponent().norm()))
        .fold(0.0, f64::max);
    // Cancelled lines leave round-off behind.
    let components = summed
        .into_iter()
        .filter(|(_, c)| c.norm() > 1e-14 * scale)
        .filter_map(|(w, c)| HarmonicComponent::from_exponent(w, c).ok())
        .collect();
    ApSignal::new(components).expect("superposed frequencies are distinct")
}

/// Frequency sets recorded when a scenario is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTruth {
    /// Ω_x per input.
    pub inputs: Vec<FrequencySet>,
    /// Ω_v.
    pub link: FrequencySet,
    /// Ω_n per input.
    pub input_noises: Vec<FrequencySet>,
    /// Ω_m per output.
    pub output_noises: Vec<FrequencySet>,
}

/// Cross-coupled multi-input multi-output ground truth.
///
/// Input `l` observes `x_l + v + n_l`; output `q` observes
/// `Σ_l k_lq(x_l + v) + m_q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScenario", into = "RawScenario")]
pub struct MimoScenario {
    inputs: Vec<ApSignal>,
    link: ApSignal,
    input_noises: Vec<ApSignal>,
    /// `channels[l][q]` maps input `l` to output `q`.
    channels: Vec<Vec<ChannelResponse>>,
    output_noises: Vec<ApSignal>,
    planned_duration: f64,
    truth: ScenarioTruth,
}

#[derive(Serialize, Deserialize)]
struct RawScenario {
    planned_duration: f64,
    inputs: Vec<ApSignal>,
    link: ApSignal,
    input_noises: Vec<ApSignal>,
    channels: Vec<Vec<ChannelResponse>>,
    output_noises: Vec<ApSignal>,
    truth: ScenarioTruth,
}

impl TryFrom<RawScenario> for MimoScenario {
    type Error = ApsiError;

    fn try_from(raw: RawScenario) -> Result<Self> {
        let built = MimoScenario::new(
            raw.inputs,
            raw.link,
            raw.input_noises,
            raw.channels,
            raw.output_noises,
            raw.planned_duration,
        )?;
        if built.truth != raw.truth {
            return Err(ApsiError::invalid("scenario truth sets do not match its signals"));
        }
        Ok(built)
    }
}

impl From<MimoScenario> for RawScenario {
    fn from(s: MimoScenario) -> Self {
        RawScenario {
            planned_duration: s.planned_duration,
            inputs: s.inputs,
            link: s.link,
            input_noises: s.input_noises,
            channels: s.channels,
            output_noises: s.output_noises,
            truth: s.truth,
        }
    }
}

impl MimoScenario {
    /// Validates shapes and the `4Δ` separation of every line, `Δ = 2π/planned_duration`.
    pub fn new(
        inputs: Vec<ApSignal>,
        link: ApSignal,
        input_noises: Vec<ApSignal>,
        channels: Vec<Vec<ChannelResponse>>,
        output_noises: Vec<ApSignal>,
        planned_duration: f64,
    ) -> Result<Self> {
        if !(planned_duration.is_finite() && planned_duration > 0.0) {
            return Err(ApsiError::invalid("planned duration must be positive"));
        }
        if input_noises.len() != inputs.len() {
            return Err(ApsiError::invalid(format!(
                "{} inputs but {} input noises",
                inputs.len(),
                input_noises.len()
            )));
        }
        if channels.len() != inputs.len()
            || channels.iter().any(|row| row.len() != output_noises.len())
        {
            return Err(ApsiError::invalid(format!(
                "channel matrix must be {} x {}",
                inputs.len(),
                output_noises.len()
            )));
        }
        let delta = 2.0 * PI / planned_duration;
        let min_gap = 4.0 * delta;
        let mut all: Vec<f64> = inputs
            .iter()
            .chain(std::iter::once(&link))
            .chain(&input_noises)
            .chain(&output_noises)
            .flat_map(ApSignal::frequencies)
            .collect();
        all.sort_by(f64::total_cmp);
        if let Some(w) = all.windows(2).find(|w| w[1] - w[0] < min_gap) {
            return Err(ApsiError::invalid(format!(
                "lines at {} and {} rad/s are closer than 4Δ = {min_gap}",
                w[0], w[1]
            )));
        }
        let to_set = |s: &ApSignal| FrequencySet::new(s.frequencies(), delta);
        let truth = ScenarioTruth {
            inputs: inputs.iter().map(to_set).collect::<Result<_>>()?,
            link: to_set(&link)?,
            input_noises: input_noises.iter().map(to_set).collect::<Result<_>>()?,
            output_noises: output_noises.iter().map(to_set).collect::<Result<_>>()?,
        };
        Ok(Self {
            inputs,
            link,
            input_noises,
            channels,
            output_noises,
            planned_duration,
            truth,
        })
    }

    pub fn input_count(&self) -> usize {
        self.inputs.len()
    }

    pub fn output_count(&self) -> usize {
        self.output_noises.len()
    }

    pub fn inputs(&self) -> &[ApSignal] {
        &self.inputs
    }

    pub fn link(&self) -> &ApSignal {
        &self.link
    }

    pub fn input_noises(&self) -> &[ApSignal] {
        &self.input_noises
    }

    pub fn output_noises(&self) -> &[ApSignal] {
        &self.output_noises
    }

    pub fn channel(&self, l: usize, q: usize) -> Option<&ChannelResponse> {
        self.channels.get(l).and_then(|row| row.get(q))
    }

    pub fn channels(&self) -> &[Vec<ChannelResponse>] {
        &self.channels
    }

    pub fn truth(&self) -> &ScenarioTruth {
        &self.truth
    }

    pub fn planned_duration(&self) -> f64 {
        self.planned_duration
    }

    /// Planned analysis resolution `2π/T`.
    pub fn delta(&self) -> f64 {
        2.0 * PI / self.planned_duration
    }

    fn check_input(&self, l: usize) -> Result<()> {
        if l >= self.inputs.len() {
            return Err(ApsiError::invalid(format!(
                "input index {l} out of range (0..{})",
                self.inputs.len()
            )));
        }
        Ok(())
    }

    fn check_output(&self, q: usize) -> Result<()> {
        if q >= self.output_noises.len() {
            return Err(ApsiError::invalid(format!(
                "output index {q} out of range (0..{})",
                self.output_noises.len()
            )));
        }
        Ok(())
    }

    /// Observed input `x_l + v + n_l` as a spectrum.
    pub fn input_signal(&self, l: usize) -> Result<ApSignal> {
        self.check_input(l)?;
        Ok(superpose(&[&self.inputs[l], &self.link, &self.input_noises[l]]))
    }

    /// Noise-free output `Σ_l k_lq(x_l + v)`.
    pub fn exact_output(&self, q: usize) -> Result<ApSignal> {
        self.check_output(q)?;
        let driven: Vec<ApSignal> = self
            .inputs
            .iter()
            .zip(&self.channels)
            .map(|(x, row)| apply_channel(&superpose(&[x, &self.link]), &row[q]))
            .collect();
        Ok(superpose(&driven.iter().collect::<Vec<_>>()))
    }

    /// Observed output `Σ_l k_lq(x_l + v) + m_q` as a spectrum.
    pub fn output_signal(&self, q: usize) -> Result<ApSignal> {
        let exact = self.exact_output(q)?;
        Ok(superpose(&[&exact, &self.output_noises[q]]))
    }
}

/// Samples input `l` (zero-based) over `[0, duration]`.
pub fn realize_input(scenario: &MimoScenario, l: usize, duration: f64, dt: f64) -> Result<SampledRecord> {
    synthesize(&scenario.input_signal(l)?, duration, dt)
}

/// Samples output `q` (zero-based) over `[0, duration]`.
pub fn realize_output(scenario: &MimoScenario, q: usize, duration: f64, dt: f64) -> Result<SampledRecord> {
    synthesize(&scenario.output_signal(q)?, duration, dt)
}

/// Shape of a randomly drawn scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub inputs: usize,
    pub outputs: usize,
    pub lines_per_input: usize,
    pub link_lines: usize,
    pub input_noise_lines: usize,
    pub output_noise_lines: usize,
    /// Band `(lo, hi)` in rad/s that all lines are drawn from.
    pub band: (f64, f64),
    /// Record length the scenario is designed for; sets `Δ = 2π/T`.
    pub planned_duration: f64,
    /// Log-uniform amplitude range for exact and link lines.
    pub amplitude_range: (f64, f64),
    /// Log-uniform amplitude range for noise lines.
    pub noise_amplitude_range: (f64, f64),
    /// Explicit `channels[l][q]`; random first-order lags when absent.
    pub channels: Option<Vec<Vec<ChannelResponse>>>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            inputs: 2,
            outputs: 2,
            lines_per_input: 2,
            link_lines: 1,
            input_noise_lines: 2,
            output_noise_lines: 2,
            band: (1.0, 50.0),
            planned_duration: 100.0,
            amplitude_range: (0.5, 2.0),
            noise_amplitude_range: (0.2, 1.0),
            channels: None,
        }
    }
}

impl ScenarioSpec {
    fn total_lines(&self) -> usize {
        self.inputs * (self.lines_per_input + self.input_noise_lines)
            + self.link_lines
            + self.outputs * self.output_noise_lines
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        (rng.gen_range(lo.ln()..hi.ln())).exp()
    }
}

const MAX_DRAWS_PER_LINE: usize = 10_000;

/// Draws a scenario whose lines are all at least `4Δ` apart; deterministic in `seed`.
pub fn random_scenario(spec: &ScenarioSpec, seed: u64) -> Result<MimoScenario> {
    let (lo, hi) = spec.band;
    if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
        return Err(ApsiError::invalid(format!("band ({lo}, {hi}) must satisfy 0 < lo < hi")));
    }
    if spec.inputs == 0 {
        return Err(ApsiError::invalid("scenario needs at least one input"));
    }
    for (name, (a, b)) in [
        ("amplitude_range", spec.amplitude_range),
        ("noise_amplitude_range", spec.noise_amplitude_range),
    ] {
        if !(a > 0.0 && a <= b && b.is_finite()) {
            return Err(ApsiError::invalid(format!("{name} ({a}, {b}) must be positive and ordered")));
        }
    }
    if !(spec.planned_duration.is_finite() && spec.planned_duration > 0.0) {
        return Err(ApsiError::invalid("planned duration must be positive"));
    }
    let delta = 2.0 * PI / spec.planned_duration;
    let gap = 4.0 * delta;
    let total = spec.total_lines();
    let crowded = || {
        ApsiError::GenerationFailed(format!(
            "band ({lo}, {hi}) rad/s is too crowded for {total} lines at minimum gap {gap:.4} rad/s"
        ))
    };
    // Lines stay 2Δ inside the band edges.
    let (draw_lo, draw_hi) = (lo + 2.0 * delta, hi - 2.0 * delta);
    if draw_hi <= draw_lo || (total.saturating_sub(1)) as f64 * gap > draw_hi - draw_lo {
        return Err(crowded());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken: Vec<f64> = Vec::with_capacity(total);
    let mut draw_set = |rng: &mut ChaCha8Rng, count: usize, amps: (f64, f64)| -> Result<ApSignal> {
        let mut lines = Vec::with_capacity(count);
        for _ in 0..count {
            let omega = (0..MAX_DRAWS_PER_LINE)
                .map(|_| rng.gen_range(draw_lo..draw_hi))
                .find(|w| taken.iter().all(|t| (t - w).abs() >= gap))
                .ok_or_else(crowded)?;
            taken.push(omega);
            let amplitude = log_uniform(rng, amps);
            let phase = rng.gen_range(-PI..PI);
            lines.push(HarmonicComponent::new(omega, amplitude, phase)?);
        }
        ApSignal::new(lines)
    };

    let inputs = (0..spec.inputs)
        .map(|_| draw_set(&mut rng, spec.lines_per_input, spec.amplitude_range))
        .collect::<Result<Vec<_>>>()?;
    let link = draw_set(&mut rng, spec.link_lines, spec.amplitude_range)?;
    let input_noises = (0..spec.inputs)
        .map(|_| draw_set(&mut rng, spec.input_noise_lines, spec.noise_amplitude_range))
        .collect::<Result<Vec<_>>>()?;
    let output_noises = (0..spec.outputs)
        .map(|_| draw_set(&mut rng, spec.output_noise_lines, spec.noise_amplitude_range))
        .collect::<Result<Vec<_>>>()?;

    let channels = match &spec.channels {
        Some(c) => c.clone(),
        None => (0..spec.inputs)
            .map(|_| {
                (0..spec.outputs)
                    .map(|_| {
                        let a0 = log_uniform(&mut rng, (0.5, 2.0));
                        let corner = log_uniform(&mut rng, (hi / 4.0, 2.0 * hi));
                        ChannelResponse::Ode {
                            coefficients: vec![a0, a0 / corner],
                        }
                    })
                    .collect()
            })
            .collect(),
    };

    MimoScenario::new(
        inputs,
        link,
        input_noises,
        channels,
        output_noises,
        spec.planned_duration,
    )
}
