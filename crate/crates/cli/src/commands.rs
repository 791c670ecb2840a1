//! Subcommand implementations: file I/O around library calls.

use std::fs;
use std::path::{Path, PathBuf};

use apsi::channel::{random_scenario, realize_input, realize_output, ChannelResponse, MimoScenario};
use apsi::freqset::{difference, intersect, set_equal, union, FrequencySet};
use apsi::io::{load_json, load_record_csv, save_json, save_record_csv, write_frf_csv, write_spectrum_csv};
use apsi::pipeline::{identify_channel, IdentifyOptions, Stage};
use apsi::signal::power_decay_table;
use apsi::spectral::{evaluate_grid, extract_frequency_set};
use apsi::{OdeModel, SampledRecord};
use clap::ValueEnum;
use serde::Serialize;

use crate::config::PipelineConfig;
use crate::error::CliError;

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))
}

fn load_record(path: &Path) -> Result<SampledRecord, CliError> {
    load_record_csv(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn synth(cfg: &PipelineConfig) -> Result<(), CliError> {
    let out = cfg.out_or(Path::new("apsi-out"));
    let scenario = random_scenario(&cfg.scenario, cfg.seed)?;
    let duration = cfg.duration();
    create_dir(&out)?;
    for l in 0..scenario.input_count() {
        save_record_csv(out.join(format!("input_{}.csv", l + 1)), &realize_input(&scenario, l, duration, cfg.dt)?)?;
    }
    for q in 0..scenario.output_count() {
        save_record_csv(out.join(format!("output_{}.csv", q + 1)), &realize_output(&scenario, q, duration, cfg.dt)?)?;
    }
    save_json(out.join("scenario.json"), &scenario)?;
    println!(
        "wrote {} inputs, {} outputs and scenario.json to {}",
        scenario.input_count(),
        scenario.output_count(),
        out.display()
    );
    Ok(())
}

pub fn spectrum(record_path: &Path, cfg: &PipelineConfig) -> Result<(), CliError> {
    let record = load_record(record_path)?;
    let analysis = cfg.analysis(record.duration(), record.dt());
    let grid = evaluate_grid(&record, &analysis).map_err(|e| CliError::at(Stage::Extract, e))?;
    let extraction = extract_frequency_set(&record, &analysis).map_err(|e| CliError::at(Stage::Extract, e))?;
    for w in &extraction.warnings {
        log::warn!("{w}");
    }
    let out = cfg.out_or(Path::new("."));
    create_dir(&out)?;
    write_spectrum_csv(fs::File::create(out.join("spectrum.csv")).map_err(apsi::ApsiError::from)?, &grid)?;
    save_json(out.join("freqset.json"), &extraction.set)?;
    println!("{}", extraction.set);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SetOp {
    Union,
    Intersect,
    Diff,
}

pub fn setop(op: SetOp, a: &Path, b: &Path, cfg: &PipelineConfig) -> Result<(), CliError> {
    let load = |p: &Path| -> Result<FrequencySet, CliError> {
        load_json(p).map_err(|e| CliError::input(format!("{}: not a frequency set: {e}", p.display())))
    };
    let (a, b) = (load(a)?, load(b)?);
    let result = match op {
        SetOp::Union => union(&a, &b),
        SetOp::Intersect => intersect(&a, &b),
        SetOp::Diff => difference(&a, &b),
    };
    let out = cfg.out_or(Path::new("."));
    create_dir(&out)?;
    save_json(out.join("freqset.json"), &result)?;
    println!("{result}");
    Ok(())
}

/// Comparison of an identification against the scenario truth.
#[derive(Debug, Serialize)]
pub struct Report {
    pub input: usize,
    pub output: usize,
    pub exact_set_matches_truth: bool,
    pub truth_exact_set: FrequencySet,
    pub estimated_exact_set: FrequencySet,
    pub true_channel: ChannelResponse,
    pub model_order: usize,
    /// Relative error per coefficient; present when the true channel is an
    /// ODE of the identified order.
    pub coefficient_errors: Option<Vec<f64>>,
    /// Largest `|Ŵ − K|/|K|` over the estimated exact frequencies.
    pub max_frf_error: f64,
}

/// Numbered record files `<prefix>_1.csv, <prefix>_2.csv, …` present in `dir`.
fn numbered_records(dir: &Path, prefix: &str) -> Vec<PathBuf> {
    (1..)
        .map(|i| dir.join(format!("{prefix}_{i}.csv")))
        .take_while(|p| p.is_file())
        .collect()
}

pub fn identify(dir: &Path, p: usize, q: usize, cfg: &PipelineConfig) -> Result<(), CliError> {
    let input_paths = numbered_records(dir, "input");
    if input_paths.is_empty() {
        return Err(CliError::input(format!("no input_1.csv in {}", dir.display())));
    }
    if p == 0 || p > input_paths.len() {
        return Err(CliError::input(format!("input {p} out of range 1..={}", input_paths.len())));
    }
    if q == 0 {
        return Err(CliError::input("output index is 1-based"));
    }
    let inputs = input_paths.iter().map(|path| load_record(path)).collect::<Result<Vec<_>, _>>()?;
    let output = load_record(&dir.join(format!("output_{q}.csv")))?;

    let options = IdentifyOptions {
        analysis: cfg.analysis(output.duration(), output.dt()),
        max_order: cfg.max_order,
        residual_tol: cfg.residual_tol,
    };
    let id = identify_channel(&inputs, &output, p - 1, &options)?;
    for w in &id.warnings {
        log::warn!("{w}");
    }

    let out = cfg.out_or(dir);
    create_dir(&out)?;
    save_json(out.join("exact_set.json"), &id.exact_set)?;
    write_frf_csv(fs::File::create(out.join("frf.csv")).map_err(apsi::ApsiError::from)?, &id.frf)?;
    save_json(out.join("model.json"), &id.model)?;

    let scenario_path = dir.join("scenario.json");
    if scenario_path.is_file() {
        let scenario: MimoScenario = load_json(&scenario_path)?;
        let report = report(&scenario, p, q, &id.exact_set, &id.frf, &id.model)?;
        save_json(out.join("report.json"), &report)?;
        println!(
            "exact set matches truth: {}; max FRF error {:.3e}",
            report.exact_set_matches_truth, report.max_frf_error
        );
    }
    println!(
        "channel {p}->{q}: order {} coefficients {:?} residual {:.3e}{}",
        id.model.order(),
        id.model.coefficients(),
        id.model.residual(),
        if id.model.converged() { "" } else { " (not converged)" }
    );
    Ok(())
}

fn report(
    scenario: &MimoScenario,
    p: usize,
    q: usize,
    exact_set: &FrequencySet,
    frf: &apsi::FrequencyResponse,
    model: &OdeModel,
) -> Result<Report, CliError> {
    let truth = scenario
        .truth()
        .inputs
        .get(p - 1)
        .ok_or_else(|| CliError::input(format!("scenario.json has no input {p}")))?
        .clone();
    let channel = scenario
        .channel(p - 1, q - 1)
        .ok_or_else(|| CliError::input(format!("scenario.json has no channel {p}->{q}")))?
        .clone();
    let coefficient_errors = match &channel {
        ChannelResponse::Ode { coefficients } if coefficients.len() == model.coefficients().len() => Some(
            model
                .coefficients()
                .iter()
                .zip(coefficients)
                .map(|(got, want)| (got - want).abs() / want.abs())
                .collect(),
        ),
        _ => None,
    };
    let max_frf_error = frf
        .points()
        .iter()
        .map(|&(w, v)| {
            let k = channel.response(w);
            (v - k).norm() / k.norm()
        })
        .fold(0.0, f64::max);
    Ok(Report {
        input: p,
        output: q,
        exact_set_matches_truth: set_equal(exact_set, &truth),
        truth_exact_set: truth,
        estimated_exact_set: exact_set.clone(),
        true_channel: channel,
        model_order: model.order(),
        coefficient_errors,
        max_frf_error,
    })
}

/// Spans of the power table.
pub const PARADOX_SPANS: [f64; 4] = [25.0, 50.0, 100.0, 200.0];

pub fn paradox() -> Result<(), CliError> {
    let rows = power_decay_table(&PARADOX_SPANS, 0.01)?;
    println!("{:>8} {:>14} {:>14}", "T", "P[exp(-|t|)]", "P[cos t]");
    for row in &rows {
        println!("{:>8} {:>14.6e} {:>14.6e}", row.span, row.pulse, row.cosine);
    }
    let (first, last) = (rows[0], rows[rows.len() - 1]);
    println!(
        "pulse power x{:.4} and cosine power x{:.4} from T={} to T={}",
        last.pulse / first.pulse,
        last.cosine / first.cosine,
        first.span,
        last.span
    );
    Ok(())
}
