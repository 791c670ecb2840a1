//! Fourier exponents of finite records and frequency-set extraction.
//!
//! The exponent `C(ω) = (1/T)∫₀ᵀ x(t)e^{-jωt} dt` is evaluated at arbitrary
//! frequencies (no FFT). Extraction scans a grid with step `Δω = 2π/T`,
//! refines each local maximum by golden-section search, drops lines below a
//! relative energy threshold and merges lines closer than `2Δω`. A final
//! polishing pass re-refines each line with its neighbours subtracted and
//! re-estimates all exponents jointly, which removes the mutual leakage of
//! nearby lines and the bias from each tone's negative-frequency image.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ApsiError, Result, Warning};
use crate::freqset::FrequencySet;
use crate::optimize::golden_section_max;
use crate::signal::{bohr_mean, trapezoid, HarmonicComponent, SampledRecord};
use crate::ComplexValue;

/// Samples between exact re-evaluations of the rotating phasor.
const PHASOR_RESYNC: usize = 512;

/// Gauss-Seidel sweeps of the polishing pass.
const POLISH_SWEEPS: usize = 3;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    /// `(ω_lo, ω_hi)` in rad/s.
    pub band: (f64, f64),
    /// Minimum line energy `|C|²` relative to the strongest line.
    pub energy_threshold: f64,
    /// Golden-section stopping width, rad/s.
    pub refine_tolerance: f64,
    pub max_refine_iterations: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            band: (0.0, 1.0),
            energy_threshold: 1e-4,
            refine_tolerance: 1e-7,
            max_refine_iterations: 100,
        }
    }
}

impl AnalysisConfig {
    pub fn for_band(lo: f64, hi: f64) -> Self {
        Self {
            band: (lo, hi),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.band;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
            return Err(ApsiError::invalid(format!("band ({lo}, {hi}) must satisfy 0 ≤ lo < hi")));
        }
        if !(self.energy_threshold > 0.0 && self.energy_threshold < 1.0) {
            return Err(ApsiError::invalid(format!(
                "energy threshold {} must lie in (0, 1)",
                self.energy_threshold
            )));
        }
        if !(self.refine_tolerance > 0.0 && self.refine_tolerance.is_finite()) {
            return Err(ApsiError::invalid("refine tolerance must be positive"));
        }
        Ok(())
    }
}

/// A frequency and its estimated Fourier exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralLine {
    pub omega: f64,
    pub exponent: ComplexValue,
}

impl SpectralLine {
    pub fn energy(&self) -> f64 {
        self.exponent.norm_sqr()
    }

    /// Harmonic component `(ω, A, φ)` implied by the exponent.
    pub fn component(&self) -> Result<HarmonicComponent> {
        HarmonicComponent::from_exponent(self.omega, self.exponent)
    }
}

#[derive(Serialize, Deserialize)]
struct RawLine {
    omega: f64,
    re: f64,
    im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpectrum", into = "RawSpectrum")]
pub struct SpectrumEstimate {
    lines: Vec<SpectralLine>,
    resolution: f64,
    record_span: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSpectrum {
    resolution: f64,
    record_span: f64,
    lines: Vec<RawLine>,
}

impl TryFrom<RawSpectrum> for SpectrumEstimate {
    type Error = ApsiError;

    fn try_from(raw: RawSpectrum) -> Result<Self> {
        let lines = raw
            .lines
            .into_iter()
            .map(|l| SpectralLine {
                omega: l.omega,
                exponent: ComplexValue::new(l.re, l.im),
            })
            .collect();
        let est = SpectrumEstimate::new(lines, raw.record_span)?;
        if (est.resolution - raw.resolution).abs() > 1e-9 * est.resolution {
            return Err(ApsiError::invalid("resolution does not equal 2π/record_span"));
        }
        Ok(est)
    }
}

impl From<SpectrumEstimate> for RawSpectrum {
    fn from(s: SpectrumEstimate) -> Self {
        RawSpectrum {
            resolution: s.resolution,
            record_span: s.record_span,
            lines: s
                .lines
                .iter()
                .map(|l| RawLine {
                    omega: l.omega,
                    re: l.exponent.re,
                    im: l.exponent.im,
                })
                .collect(),
        }
    }
}

impl SpectrumEstimate {
    pub fn new(lines: Vec<SpectralLine>, record_span: f64) -> Result<Self> {
        if !(record_span.is_finite() && record_span > 0.0) {
            return Err(ApsiError::invalid("record span must be positive"));
        }
        if lines.iter().any(|l| !(l.omega >= 0.0 && l.omega.is_finite())) {
            return Err(ApsiError::invalid("spectral line frequencies must be non-negative"));
        }
        if lines.windows(2).any(|w| w[1].omega <= w[0].omega) {
            return Err(ApsiError::invalid("spectral lines must be strictly increasing"));
        }
        Ok(Self {
            lines,
            resolution: 2.0 * PI / record_span,
            record_span,
        })
    }

    pub fn lines(&self) -> &[SpectralLine] {
        &self.lines
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn record_span(&self) -> f64 {
        self.record_span
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.lines.iter().map(|l| l.omega).collect()
    }
}

fn check_frequency(record: &SampledRecord, omega: f64) -> Result<()> {
    if !(omega.is_finite() && omega >= 0.0) {
        return Err(ApsiError::invalid(format!("frequency {omega} must be non-negative")));
    }
    if omega >= record.nyquist() {
        return Err(ApsiError::OutOfBand {
            omega,
            nyquist: record.nyquist(),
        });
    }
    if record.len() < 2 {
        return Err(ApsiError::invalid("record needs at least two samples"));
    }
    Ok(())
}

/// `Σ' x_i e^{-jω t_i}` with trapezoid end weights, divided by `len − 1`.
fn exponent_sum(record: &SampledRecord, omega: f64) -> ComplexValue {
    let x = record.samples();
    let dt = record.dt();
    let step = ComplexValue::from_polar(1.0, -omega * dt);
    let mut acc = ComplexValue::new(0.0, 0.0);
    for (block, chunk) in x.chunks(PHASOR_RESYNC).enumerate() {
        let start = block * PHASOR_RESYNC;
        let mut phasor = ComplexValue::from_polar(1.0, -omega * record.time(start));
        for &v in chunk {
            acc += phasor * v;
            phasor *= step;
        }
    }
    let first = x[0] * ComplexValue::from_polar(1.0, -omega * record.time(0));
    let last_idx = x.len() - 1;
    let last = x[last_idx] * ComplexValue::from_polar(1.0, -omega * record.time(last_idx));
    (acc - 0.5 * (first + last)) / last_idx as f64
}

/// Finite-record Fourier exponent at `omega`.
pub fn fourier_exponent(record: &SampledRecord, omega: f64) -> Result<ComplexValue> {
    check_frequency(record, omega)?;
    if omega == 0.0 {
        return Ok(ComplexValue::new(bohr_mean(record)?, 0.0));
    }
    Ok(exponent_sum(record, omega))
}

/// Energy `|C(ω)|²`; `C(−ω) = conj C(ω)` for real records.
fn energy_at(record: &SampledRecord, omega: f64) -> f64 {
    exponent_sum(record, omega.abs()).norm_sqr()
}

fn grid(record: &SampledRecord, config: &AnalysisConfig) -> Result<Vec<f64>> {
    config.validate()?;
    if record.len() < 2 {
        return Err(ApsiError::invalid("record needs at least two samples"));
    }
    let (lo, hi) = config.band;
    if hi >= record.nyquist() {
        return Err(ApsiError::OutOfBand {
            omega: hi,
            nyquist: record.nyquist(),
        });
    }
    let step = record.resolution();
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| lo + k as f64 * step).collect())
}

/// Exponents on the analysis grid `ω_lo + kΔω`, for plotting and inspection.
pub fn evaluate_grid(record: &SampledRecord, config: &AnalysisConfig) -> Result<SpectrumEstimate> {
    let omegas = grid(record, config)?;
    let lines = omegas
        .par_iter()
        .map(|&omega| SpectralLine {
            omega,
            exponent: if omega == 0.0 {
                ComplexValue::new(trapezoid(record.samples().iter().copied()) / (record.len() - 1) as f64, 0.0)
            } else {
                exponent_sum(record, omega)
            },
        })
        .collect();
    SpectrumEstimate::new(lines, record.duration())
}

/// Strict local maxima of `|C|²` on the analysis grid (unrefined candidates).
pub fn scan_spectrum(record: &SampledRecord, config: &AnalysisConfig) -> Result<SpectrumEstimate> {
    let omegas = grid(record, config)?;
    let step = record.resolution();
    let nyquist = record.nyquist();
    let energies: Vec<f64> = omegas.par_iter().map(|&w| energy_at(record, w)).collect();
    // Neighbours just outside the band so that edge points can qualify.
    let below = energy_at(record, omegas[0] - step);
    let above_omega = omegas[omegas.len() - 1] + step;
    let above = if above_omega < nyquist {
        energy_at(record, above_omega)
    } else {
        f64::NEG_INFINITY
    };

    let mut lines = Vec::new();
    for (k, (&omega, &e)) in omegas.iter().zip(&energies).enumerate() {
        let left = if k == 0 { below } else { energies[k - 1] };
        let right = energies.get(k + 1).copied().unwrap_or(above);
        if e > left && e > right {
            lines.push(SpectralLine {
                omega,
                exponent: fourier_exponent(record, omega)?,
            });
        }
    }
    SpectrumEstimate::new(lines, record.duration())
}

/// Refines a grid peak by golden-section search on `|C(ω)|²` within `seed ± Δω`.
pub fn refine_peak(record: &SampledRecord, seed_omega: f64, config: &AnalysisConfig) -> Result<f64> {
    check_frequency(record, seed_omega)?;
    let step = record.resolution();
    let lo = (seed_omega - step).max(0.0);
    let hi = (seed_omega + step).min(record.nyquist() * (1.0 - 1e-12));
    let center = energy_at(record, seed_omega);
    if energy_at(record, lo) > center && energy_at(record, hi) > center {
        return Err(ApsiError::RefinementFailed { seed: seed_omega });
    }
    let best = golden_section_max(
        |w| energy_at(record, w),
        lo,
        hi,
        config.refine_tolerance,
        config.max_refine_iterations,
    );
    if !best.converged {
        log::debug!(
            "refinement near {seed_omega} stopped after {} iterations above tolerance",
            best.iterations
        );
    }
    Ok(if best.value >= center { best.x } else { seed_omega })
}

/// Result of [`extract_frequency_set`].
#[derive(Debug, Clone)]
pub struct Extraction {
    pub set: FrequencySet,
    /// Jointly fitted exponents at the polished frequencies.
    pub spectrum: SpectrumEstimate,
    pub warnings: Vec<Warning>,
}

impl Extraction {
    pub fn components(&self) -> Result<Vec<HarmonicComponent>> {
        self.spectrum.lines().iter().map(SpectralLine::component).collect()
    }
}

/// Trapezoidal mean of `e^{jθt}` over the record grid, in closed form.
fn grid_mean(record: &SampledRecord, theta: f64) -> ComplexValue {
    let n = record.len();
    let last = n - 1;
    let start = ComplexValue::from_polar(1.0, theta * record.time(0));
    let end = ComplexValue::from_polar(1.0, theta * record.time(last));
    // Σ_{i<n} e^{jiu} = e^{ju(n−1)/2}·sin(nu/2)/sin(u/2), stable near u = 0.
    let u = theta * record.dt();
    let half = (0.5 * u).sin();
    let kernel = if half.abs() < 1e-300 {
        n as f64
    } else {
        (0.5 * n as f64 * u).sin() / half
    };
    let sum = start * ComplexValue::from_polar(kernel, 0.5 * u * last as f64);
    (sum - 0.5 * (start + end)) / last as f64
}

#[derive(Clone, Copy)]
enum Basis {
    Cos(f64),
    Sin(f64),
}

/// `M{u·v}` for two basis functions.
fn basis_product(record: &SampledRecord, u: Basis, v: Basis) -> f64 {
    let (a, b) = match (u, v) {
        (Basis::Cos(a) | Basis::Sin(a), Basis::Cos(b) | Basis::Sin(b)) => (a, b),
    };
    let diff = grid_mean(record, a - b);
    let sum = grid_mean(record, a + b);
    match (u, v) {
        (Basis::Cos(_), Basis::Cos(_)) => 0.5 * (diff.re + sum.re),
        (Basis::Sin(_), Basis::Sin(_)) => 0.5 * (diff.re - sum.re),
        (Basis::Cos(_), Basis::Sin(_)) => 0.5 * (sum.im - diff.im),
        (Basis::Sin(_), Basis::Cos(_)) => 0.5 * (sum.im + diff.im),
    }
}

/// Least-squares exponents of a sum of tones at fixed frequencies.
///
/// Fits `Σ a_k cos ω_k t + b_k sin ω_k t` (a constant for `ω = 0`) to the
/// record and returns the one-sided exponents `(a_k − j b_k)/2`, or the level
/// for the DC term. Unlike [`fourier_exponent`], the result carries no
/// leakage from the other listed frequencies.
pub fn joint_exponents(record: &SampledRecord, omegas: &[f64]) -> Result<Vec<ComplexValue>> {
    let mut basis = Vec::with_capacity(2 * omegas.len());
    let mut rhs = Vec::with_capacity(2 * omegas.len());
    for &w in omegas {
        let c = fourier_exponent(record, w)?;
        basis.push(Basis::Cos(w));
        rhs.push(c.re);
        if w > 0.0 {
            basis.push(Basis::Sin(w));
            rhs.push(-c.im);
        }
    }
    if basis.is_empty() {
        return Ok(Vec::new());
    }
    let m = basis.len();
    let gram = DMatrix::from_fn(m, m, |i, j| basis_product(record, basis[i], basis[j]));
    let rhs = DVector::from_vec(rhs);
    let coeffs = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .svd(true, true)
            .solve(&rhs, 1e-12)
            .map_err(|e| ApsiError::EstimationFailed(format!("joint exponent fit: {e}")))?,
    };
    let mut out = Vec::with_capacity(omegas.len());
    let mut k = 0;
    for &w in omegas {
        if w > 0.0 {
            out.push(ComplexValue::new(coeffs[k], -coeffs[k + 1]) / 2.0);
            k += 2;
        } else {
            out.push(ComplexValue::new(coeffs[k], 0.0));
            k += 1;
        }
    }
    Ok(out)
}

/// Power captured by the best real tone at `omega`: `[c s] G⁻¹ [c s]ᵀ`.
fn tone_fit_power(record: &SampledRecord, omega: f64) -> f64 {
    let c = exponent_sum(record, omega);
    let (mc, ms) = (c.re, -c.im);
    let g = grid_mean(record, 2.0 * omega);
    let (gcc, gss, gcs) = (0.5 * (1.0 + g.re), 0.5 * (1.0 - g.re), 0.5 * g.im);
    let det = gcc * gss - gcs * gcs;
    if det <= 0.0 {
        return c.norm_sqr();
    }
    (gss * mc * mc - 2.0 * gcs * mc * ms + gcc * ms * ms) / det
}

fn tone_samples(record: &SampledRecord, omega: f64, exponent: ComplexValue) -> Vec<f64> {
    (0..record.len())
        .map(|i| {
            if omega == 0.0 {
                exponent.re
            } else {
                2.0 * (exponent * ComplexValue::from_polar(1.0, omega * record.time(i))).re
            }
        })
        .collect()
}

/// Re-refines every line against the record with the other lines removed.
///
/// Each frequency stays within `Δω/2` of its starting value, so lines that
/// start at least `2Δω` apart cannot swap or collide.
fn polish(record: &SampledRecord, omegas: &[f64], config: &AnalysisConfig) -> Result<Vec<SpectralLine>> {
    let step = record.resolution();
    let ceiling = record.nyquist() * (1.0 - 1e-12);
    let mut current = omegas.to_vec();
    let mut exps = joint_exponents(record, &current)?;
    for _ in 0..POLISH_SWEEPS {
        let mut models: Vec<Vec<f64>> = current
            .iter()
            .zip(&exps)
            .map(|(&w, &c)| tone_samples(record, w, c))
            .collect();
        let mut total: Vec<f64> = record.samples().to_vec();
        for model in &models {
            for (t, m) in total.iter_mut().zip(model) {
                *t -= m;
            }
        }
        let mut moved = 0.0f64;
        for k in 0..current.len() {
            if omegas[k] == 0.0 {
                continue;
            }
            let residual: Vec<f64> = total.iter().zip(&models[k]).map(|(r, m)| r + m).collect();
            let residual = SampledRecord::with_start(residual, record.dt(), record.t0())?;
            let lo = (omegas[k] - 0.5 * step).max(0.5 * omegas[k]);
            let hi = (omegas[k] + 0.5 * step).min(ceiling);
            let best = golden_section_max(
                |w| tone_fit_power(&residual, w),
                lo,
                hi,
                config.refine_tolerance,
                config.max_refine_iterations,
            );
            if best.value > tone_fit_power(&residual, current[k]) {
                moved = moved.max((best.x - current[k]).abs());
                current[k] = best.x;
            }
            let fit = joint_exponents(&residual, &current[k..=k])?[0];
            let model = tone_samples(record, current[k], fit);
            for ((t, old), new) in total.iter_mut().zip(&models[k]).zip(&model) {
                *t += old - new;
            }
            models[k] = model;
        }
        exps = joint_exponents(record, &current)?;
        if moved <= config.refine_tolerance {
            break;
        }
    }
    Ok(current
        .into_iter()
        .zip(exps)
        .map(|(omega, exponent)| SpectralLine { omega, exponent })
        .collect())
}

/// Drops lines below the relative energy floor, then keeps the stronger of
/// any two lines closer than `2Δω`.
fn threshold_and_merge(mut lines: Vec<SpectralLine>, step: f64, config: &AnalysisConfig) -> Vec<SpectralLine> {
    let strongest = lines.iter().map(SpectralLine::energy).fold(0.0, f64::max);
    let floor = config.energy_threshold * strongest;
    lines.retain(|l| l.energy() >= floor && l.energy() > 0.0);

    lines.sort_by(|a, b| b.energy().total_cmp(&a.energy()).then(a.omega.total_cmp(&b.omega)));
    let mut kept: Vec<SpectralLine> = Vec::with_capacity(lines.len());
    for line in lines {
        if kept.iter().all(|k| (k.omega - line.omega).abs() >= 2.0 * step) {
            kept.push(line);
        }
    }
    kept.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    kept
}

/// Scan, refine, threshold, merge and polish: the frequency set of a record.
pub fn extract_frequency_set(record: &SampledRecord, config: &AnalysisConfig) -> Result<Extraction> {
    let candidates = scan_spectrum(record, config)?;
    let step = record.resolution();

    let refined: Vec<(f64, Option<Warning>)> = candidates
        .lines()
        .par_iter()
        .map(|line| match refine_peak(record, line.omega, config) {
            Ok(w) => Ok((w, None)),
            Err(ApsiError::RefinementFailed { seed }) => {
                Ok((seed, Some(Warning::RefinementFailed { seed })))
            }
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    let mut lines = Vec::with_capacity(refined.len());
    for (omega, warning) in refined {
        warnings.extend(warning);
        lines.push(SpectralLine {
            omega,
            exponent: fourier_exponent(record, omega)?,
        });
    }
    let coarse = threshold_and_merge(lines, step, config);

    let omegas: Vec<f64> = coarse.iter().map(|l| l.omega).collect();
    let kept = threshold_and_merge(polish(record, &omegas, config)?, step, config);

    let set = FrequencySet::new(kept.iter().map(|l| l.omega).collect(), step)?;
    let spectrum = SpectrumEstimate::new(kept, record.duration())?;
    Ok(Extraction {
        set,
        spectrum,
        warnings,
    })
}
