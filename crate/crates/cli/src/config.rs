//! Pipeline configuration file and command-line overrides.

use std::path::{Path, PathBuf};

use apsi::{AnalysisConfig, ScenarioSpec};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Contents of a `--config` JSON file. Every field is optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub scenario: ScenarioSpec,
    /// Record span in seconds; defaults to the scenario's planned duration.
    pub duration: Option<f64>,
    pub dt: f64,
    /// Analysis band; defaults to `(2π/T, 0.9·π/dt)` of the record at hand.
    pub band: Option<(f64, f64)>,
    pub energy_threshold: f64,
    pub refine_tolerance: f64,
    pub max_refine_iterations: usize,
    pub max_order: usize,
    pub residual_tol: f64,
    pub out: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let analysis = AnalysisConfig::default();
        Self {
            seed: 0,
            scenario: ScenarioSpec::default(),
            duration: None,
            dt: 0.01,
            band: None,
            energy_threshold: analysis.energy_threshold,
            refine_tolerance: analysis.refine_tolerance,
            max_refine_iterations: analysis.max_refine_iterations,
            max_order: 6,
            residual_tol: 1e-3,
            out: None,
        }
    }
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Pipeline configuration JSON.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Record span, seconds.
    #[arg(long, global = true)]
    pub duration: Option<f64>,
    /// Sample step, seconds.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    /// Lower edge of the analysis band, rad/s.
    #[arg(long, global = true)]
    pub band_lo: Option<f64>,
    /// Upper edge of the analysis band, rad/s.
    #[arg(long, global = true)]
    pub band_hi: Option<f64>,
    #[arg(long, global = true)]
    pub energy_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub refine_tolerance: Option<f64>,
    #[arg(long, global = true)]
    pub max_order: Option<usize>,
    #[arg(long, global = true)]
    pub residual_tol: Option<f64>,
}

impl CommonArgs {
    /// Loads the config file (if any) and applies the flag overrides.
    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg: PipelineConfig = match &self.config {
            Some(path) => apsi::io::load_json(path).map_err(|e| CliError::input(format!("config {}: {e}", path.display())))?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = &self.out {
            cfg.out = Some(v.clone());
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.duration {
            cfg.duration = Some(v);
        }
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        match (self.band_lo, self.band_hi, cfg.band) {
            (None, None, _) => {}
            (Some(lo), Some(hi), _) => cfg.band = Some((lo, hi)),
            (lo, hi, Some((clo, chi))) => cfg.band = Some((lo.unwrap_or(clo), hi.unwrap_or(chi))),
            _ => return Err(CliError::input("--band-lo and --band-hi must be given together unless the config sets a band")),
        }
        if let Some(v) = self.energy_threshold {
            cfg.energy_threshold = v;
        }
        if let Some(v) = self.refine_tolerance {
            cfg.refine_tolerance = v;
        }
        if let Some(v) = self.max_order {
            cfg.max_order = v;
        }
        if let Some(v) = self.residual_tol {
            cfg.residual_tol = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("dt", self.dt),
            ("energy_threshold", self.energy_threshold),
            ("refine_tolerance", self.refine_tolerance),
            ("residual_tol", self.residual_tol),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::input(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(d) = self.duration {
            if !(d.is_finite() && d > 0.0) {
                return Err(CliError::input(format!("duration must be positive, got {d}")));
            }
        }
        if self.max_order == 0 || self.max_refine_iterations == 0 {
            return Err(CliError::input("max_order and max_refine_iterations must be at least 1"));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.duration.unwrap_or(self.scenario.planned_duration)
    }

    /// Analysis settings for a record with the given span and step.
    pub fn analysis(&self, span: f64, dt: f64) -> AnalysisConfig {
        let band = self
            .band
            .unwrap_or((2.0 * std::f64::consts::PI / span, 0.9 * std::f64::consts::PI / dt));
        AnalysisConfig {
            band,
            energy_threshold: self.energy_threshold,
            refine_tolerance: self.refine_tolerance,
            max_refine_iterations: self.max_refine_iterations,
        }
    }

    pub fn out_or(&self, fallback: &Path) -> PathBuf {
        self.out.clone().unwrap_or_else(|| fallback.to_path_buf())
    }
}
