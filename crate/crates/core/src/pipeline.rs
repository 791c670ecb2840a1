//! End-to-end identification of one channel from sampled records.

use std::fmt;

use rayon::prelude::*;

use crate::error::{ApsiError, Warning};
use crate::freqset::{decorrelate, FrequencySet};
use crate::identify::{estimate_frf, filter_exact_frequencies, select_order, FrequencyResponse, OdeModel};
use crate::signal::SampledRecord;
use crate::spectral::{extract_frequency_set, AnalysisConfig, Extraction};

/// Pipeline stage, used to label failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Extract,
    Decorrelate,
    Filter,
    Frf,
    Fit,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Extract => "extract",
            Stage::Decorrelate => "decorrelate",
            Stage::Filter => "filter",
            Stage::Frf => "frf",
            Stage::Fit => "fit",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: ApsiError,
}

fn at(stage: Stage) -> impl FnOnce(ApsiError) -> StageError {
    move |source| StageError { stage, source }
}

#[derive(Debug, Clone)]
pub struct IdentifyOptions {
    pub analysis: AnalysisConfig,
    pub max_order: usize,
    pub residual_tol: f64,
}

/// Everything produced while identifying channel `p → q`.
#[derive(Debug, Clone)]
pub struct ChannelIdentification {
    pub input_extractions: Vec<Extraction>,
    pub output_extraction: Extraction,
    /// Ω_v estimate (empty with a single input).
    pub link: FrequencySet,
    /// Conditional input sets after link removal.
    pub conditional: Vec<FrequencySet>,
    /// Ω_xp estimate.
    pub exact_set: FrequencySet,
    pub frf: FrequencyResponse,
    pub model: OdeModel,
    pub warnings: Vec<Warning>,
}

/// Extracts every input's frequency set.
pub fn extract_all(records: &[SampledRecord], config: &AnalysisConfig) -> Result<Vec<Extraction>, StageError> {
    records
        .par_iter()
        .map(|r| extract_frequency_set(r, config))
        .collect::<Result<Vec<_>, _>>()
        .map_err(at(Stage::Extract))
}

/// Link set and conditional sets for the observed inputs.
pub fn split_inputs(sets: &[FrequencySet]) -> Result<(FrequencySet, Vec<FrequencySet>), StageError> {
    match sets {
        [] => Err(at(Stage::Decorrelate)(ApsiError::invalid("no input records"))),
        [single] => Ok((
            FrequencySet::empty(single.delta()).map_err(at(Stage::Decorrelate))?,
            vec![single.clone()],
        )),
        _ => {
            let d = decorrelate(sets).map_err(at(Stage::Decorrelate))?;
            Ok((d.link, d.conditional))
        }
    }
}

/// extract → decorrelate → filter → FRF → order selection, for input `p` (zero-based).
pub fn identify_channel(
    inputs: &[SampledRecord],
    output: &SampledRecord,
    p: usize,
    options: &IdentifyOptions,
) -> Result<ChannelIdentification, StageError> {
    if p >= inputs.len() {
        return Err(at(Stage::Filter)(ApsiError::invalid(format!(
            "input index {p} out of range (0..{})",
            inputs.len()
        ))));
    }
    let input_extractions = extract_all(inputs, &options.analysis)?;
    let output_extraction = extract_frequency_set(output, &options.analysis).map_err(at(Stage::Extract))?;
    let mut warnings: Vec<Warning> = input_extractions
        .iter()
        .chain(std::iter::once(&output_extraction))
        .flat_map(|e| e.warnings.iter().cloned())
        .collect();

    let sets: Vec<FrequencySet> = input_extractions.iter().map(|e| e.set.clone()).collect();
    let (link, conditional) = split_inputs(&sets)?;

    let filtered = filter_exact_frequencies(&sets[p], &output_extraction.set, &link);
    warnings.extend(filtered.warnings);

    let frf = estimate_frf(&inputs[p], output, &filtered.set).map_err(at(Stage::Frf))?;
    warnings.extend(frf.warnings);

    let max_order = options
        .max_order
        .min((2 * frf.response.len()).saturating_sub(2))
        .max(1);
    let model = select_order(&frf.response, max_order, options.residual_tol).map_err(at(Stage::Fit))?;

    Ok(ChannelIdentification {
        input_extractions,
        output_extraction,
        link,
        conditional,
        exact_set: filtered.set,
        frf: frf.response,
        model,
        warnings,
    })
}
