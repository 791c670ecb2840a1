//! CSV and JSON interchange for records, spectra, sets and models.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{ApsiError, Result};
use crate::identify::FrequencyResponse;
use crate::signal::SampledRecord;
use crate::spectral::SpectrumEstimate;

/// Relative tolerance on sample-spacing uniformity when reading `t` columns.
const DT_UNIFORMITY: f64 = 1e-6;

/// Writes `t,value` rows.
pub fn write_record_csv<W: Write>(writer: W, record: &SampledRecord) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "value"])?;
    for (i, v) in record.samples().iter().enumerate() {
        w.write_record([record.time(i).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `t,value` CSV; the time column must be uniformly spaced.
pub fn read_record_csv<R: Read>(reader: R) -> Result<SampledRecord> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "t" || &headers[1] != "value" {
        return Err(ApsiError::Malformed {
            line: 1,
            message: format!("expected header `t,value`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for row in r.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            ApsiError::Malformed {
                line,
                message: e.to_string(),
            }
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let parse = |field: Option<&str>, name: &str| -> Result<f64> {
            field
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| ApsiError::Malformed {
                    line,
                    message: format!("column `{name}` is not a finite number"),
                })
        };
        times.push(parse(row.get(0), "t")?);
        values.push(parse(row.get(1), "value")?);
    }
    if times.len() < 2 {
        return Err(ApsiError::invalid("record CSV needs at least two rows"));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if dt.is_nan() || dt <= 0.0 {
        return Err(ApsiError::invalid("time column must be increasing"));
    }
    for (i, t) in times.iter().enumerate() {
        let expected = times[0] + i as f64 * dt;
        if (t - expected).abs() > DT_UNIFORMITY * dt.max(expected.abs() * 1e-6) {
            return Err(ApsiError::Malformed {
                line: i as u64 + 2,
                message: format!("time {t} breaks uniform spacing dt = {dt}"),
            });
        }
    }
    SampledRecord::with_start(values, dt, times[0])
}

/// Writes `omega,re,im,magnitude` rows.
pub fn write_spectrum_csv<W: Write>(writer: W, spectrum: &SpectrumEstimate) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["omega", "re", "im", "magnitude"])?;
    for line in spectrum.lines() {
        let c = line.exponent;
        w.write_record([
            line.omega.to_string(),
            c.re.to_string(),
            c.im.to_string(),
            c.norm().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `omega,re,im,magnitude,phase` rows.
pub fn write_frf_csv<W: Write>(writer: W, frf: &FrequencyResponse) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["omega", "re", "im", "magnitude", "phase"])?;
    for (omega, v) in frf.points() {
        w.write_record([
            omega.to_string(),
            v.re.to_string(),
            v.im.to_string(),
            v.norm().to_string(),
            v.arg().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_record_csv(path: impl AsRef<Path>, record: &SampledRecord) -> Result<()> {
    write_record_csv(BufWriter::new(File::create(path)?), record)
}

pub fn load_record_csv(path: impl AsRef<Path>) -> Result<SampledRecord> {
    read_record_csv(BufReader::new(File::open(path)?))
}

/// Pretty JSON with a trailing newline.
pub fn save_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
