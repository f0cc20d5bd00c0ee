//! Plain-text file formats shared by the command-line tool and tests.
//!
//! Floats are written with Rust's shortest round-trip formatting, so output is
//! byte-identical for identical values.

use std::io::{BufRead, BufReader, Read, Write};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::clustering::DistanceTable;
use crate::error::{Error, Result};
use crate::filter_core::Filter;
use crate::gapstat::{GapResult, ReferenceCurve};
use crate::mixture_em::MixtureARModel;
use crate::simgen::{ExperimentTable, Method};

fn parse_number(field: &str, line: usize, column: &str) -> Result<f64> {
    let value: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::InvalidInput(format!("line {line}: cannot parse '{}' in column {column}", field.trim())))?;
    if !value.is_finite() {
        return Err(Error::InvalidInput(format!("line {line}: non-finite value in column {column}")));
    }
    Ok(value)
}

fn csv_reader<R: Read>(reader: R, has_headers: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(has_headers).trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader)
}

fn record_line(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

/// Writes filters one per row under the header `psi_1,...,psi_L`.
/// An empty batch produces the header alone.
pub fn write_filters_csv<W: Write>(writer: W, lag: usize, filters: &[Filter]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record((1..=lag).map(|l| format!("psi_{l}")))?;
    for f in filters {
        if f.lag() != lag {
            return Err(Error::LengthMismatch { expected: lag, actual: f.lag() });
        }
        out.write_record(f.coefficients().iter().map(|c| c.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads filters written by [`write_filters_csv`]. Stability is not required.
pub fn read_filters_csv<R: Read>(reader: R) -> Result<Vec<Filter>> {
    let mut rdr = csv_reader(reader, true);
    let headers = rdr.headers()?.clone();
    let lag = headers.len();
    for (i, h) in headers.iter().enumerate() {
        if h != format!("psi_{}", i + 1) {
            return Err(Error::InvalidInput(format!("line 1: expected header psi_{}, found '{h}'", i + 1)));
        }
    }
    let mut filters = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        let coefficients = record
            .iter()
            .zip(headers.iter())
            .map(|(field, column)| parse_number(field, line, column))
            .collect::<Result<Vec<f64>>>()?;
        if coefficients.len() != lag {
            return Err(Error::InvalidInput(format!(
                "line {line}: expected {lag} values, found {}",
                coefficients.len()
            )));
        }
        filters.push(Filter::new(coefficients)?);
    }
    Ok(filters)
}

/// Reads a single-column series with header `x`, in time order.
pub fn read_series_csv<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv_reader(reader, true);
    let headers = rdr.headers()?.clone();
    if headers.len() != 1 || &headers[0] != "x" {
        return Err(Error::InvalidInput("line 1: expected a single column with header 'x'".into()));
    }
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| match e.position() {
            Some(p) => Error::InvalidInput(format!("line {}: {e}", p.line())),
            None => Error::Csv(e),
        })?;
        let line = record_line(&record);
        if record.len() != 1 {
            return Err(Error::InvalidInput(format!("line {line}: expected one value, found {}", record.len())));
        }
        values.push(parse_number(&record[0], line, "x")?);
    }
    Ok(values)
}

pub fn write_series_csv<W: Write>(writer: W, values: &[f64]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["x"])?;
    for v in values {
        out.write_record([v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `M,log_w_ref` preceded by a `#` line carrying the curve's provenance.
pub fn write_reference_curve_csv<W: Write>(mut writer: W, curve: &ReferenceCurve) -> Result<()> {
    writeln!(
        writer,
        "# lag={} filters={} instances={} seed={}",
        curve.lag, curve.n_filters, curve.n_instances, curve.seed
    )?;
    writeln!(writer, "M,log_w_ref")?;
    for (m, v) in curve.values.iter().enumerate() {
        writeln!(writer, "{},{}", m + 1, v)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a curve written by [`write_reference_curve_csv`]. The provenance line
/// is required because the lag must be known to check it against a series.
pub fn read_reference_curve_csv<R: Read>(reader: R) -> Result<ReferenceCurve> {
    let mut lines = BufReader::new(reader).lines();
    let meta = lines.next().transpose()?.unwrap_or_default();
    let meta = meta
        .strip_prefix('#')
        .ok_or_else(|| Error::InvalidInput("line 1: expected '# lag=.. filters=.. instances=.. seed=..'".into()))?;
    let (mut lag, mut n_filters, mut n_instances, mut seed) = (None, None, None, None);
    for item in meta.split_whitespace() {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("line 1: malformed metadata item '{item}'")))?;
        let bad = || Error::InvalidInput(format!("line 1: cannot parse {key}='{value}'"));
        match key {
            "lag" => lag = Some(value.parse::<usize>().map_err(|_| bad())?),
            "filters" => n_filters = Some(value.parse::<usize>().map_err(|_| bad())?),
            "instances" => n_instances = Some(value.parse::<usize>().map_err(|_| bad())?),
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad())?),
            _ => {}
        }
    }
    let lag = lag.ok_or_else(|| Error::InvalidInput("line 1: missing lag".into()))?;
    match lines.next().transpose()? {
        Some(h) if h.trim() == "M,log_w_ref" => {}
        _ => return Err(Error::InvalidInput("line 2: expected header 'M,log_w_ref'".into())),
    }
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let number = i + 3;
        if line.trim().is_empty() {
            continue;
        }
        let (m, v) = line
            .split_once(',')
            .ok_or_else(|| Error::InvalidInput(format!("line {number}: expected 'M,log_w_ref'")))?;
        if m.trim().parse::<usize>().ok() != Some(values.len() + 1) {
            return Err(Error::InvalidInput(format!("line {number}: expected M = {}", values.len() + 1)));
        }
        values.push(parse_number(v, number, "log_w_ref")?);
    }
    if values.is_empty() {
        return Err(Error::InvalidInput("reference curve has no rows".into()));
    }
    Ok(ReferenceCurve {
        lag,
        m_max: values.len(),
        values,
        n_filters: n_filters.unwrap_or(0),
        n_instances: n_instances.unwrap_or(0),
        seed: seed.unwrap_or(0),
    })
}

/// Writes `M,log_w_ref,log_mspe_emp,gap`.
pub fn write_gap_csv<W: Write>(writer: W, result: &GapResult) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["M", "log_w_ref", "log_mspe_emp", "gap"])?;
    for m in 0..result.gaps.len() {
        out.write_record([
            (m + 1).to_string(),
            result.reference.values[m].to_string(),
            result.empirical[m].to_string(),
            result.gaps[m].to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Dense table without a header; row `i` holds the distances from filter `i`.
pub fn write_distance_table_csv<W: Write>(writer: W, table: &DistanceTable) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for row in table.rows() {
        out.write_record(row.iter().map(|d| d.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_distance_table_csv<R: Read>(reader: R) -> Result<DistanceTable> {
    let mut rdr = csv_reader(reader, false);
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record_line(&record);
        rows.push(record.iter().map(|f| parse_number(f, line, "distance")).collect::<Result<Vec<f64>>>()?);
    }
    DistanceTable::from_rows(rows)
}

/// One row per method and candidate `M` with its count, then a summary row per
/// method whose `count` is the number of replications.
pub fn write_experiment_csv<W: Write>(writer: W, table: &ExperimentTable) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["scenario", "method", "selected_m", "count", "accuracy"])?;
    for method in Method::ALL {
        for (m, count) in table.counts[&method].iter().enumerate() {
            out.write_record([
                table.scenario.to_string(),
                method.name().into(),
                (m + 1).to_string(),
                count.to_string(),
                String::new(),
            ])?;
        }
    }
    for method in Method::ALL {
        out.write_record([
            table.scenario.to_string(),
            method.name().into(),
            "all".into(),
            table.n_replications.to_string(),
            table.accuracy(method).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize + ?Sized>(mut writer: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, value)?;
    writeln!(writer)?;
    writer.flush()?;
    Ok(())
}

pub fn read_json<R: Read, T: DeserializeOwned>(reader: R) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(reader))?)
}

/// Reads a `{weights, modes, sigma2}` model and validates it.
pub fn read_model_json<R: Read>(reader: R) -> Result<MixtureARModel> {
    let model: MixtureARModel = read_json(reader)?;
    model.validate()?;
    Ok(model)
}
