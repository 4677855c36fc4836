//! CSV formats for recordings, markers and feature tables.
//!
//! * recording: header `time_ms,<ch1>,...,<chK>`, one row per sample
//! * markers: header `sample_index,symbol,group,label`; `group` is 1-based,
//!   `label` is one of `+1`, `-1`, `NA`; `symbol` is an integer or `NA`
//! * features: header `trial,group,label,symbol,f0,...,f{d-1}`

use std::io::{Read, Write};

use crate::error::{LlpError, Result};
use crate::signal::{ContinuousRecording, Marker};
use crate::types::{FeatureVector, Label};

fn parse_err(line: usize, message: impl Into<String>) -> LlpError {
    LlpError::Parse { line, message: message.into() }
}

fn csv_err(e: csv::Error) -> LlpError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_err(line, e.to_string())
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

fn parse_f64(s: &str, line: usize, what: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| parse_err(line, format!("bad {what} `{s}`")))
}

fn parse_opt_usize(s: &str, line: usize, what: &str) -> Result<Option<usize>> {
    if s == "NA" || s.is_empty() {
        return Ok(None);
    }
    s.parse::<usize>().map(Some).map_err(|_| parse_err(line, format!("bad {what} `{s}`")))
}

/// Reads samples and channel names; the rate is inferred from the time column.
pub fn read_recording<R: Read>(r: R) -> Result<(Vec<Vec<f64>>, f64, Vec<String>)> {
    let mut rdr = reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.get(0) != Some("time_ms") || headers.len() < 2 {
        return Err(parse_err(1, "recording header must be `time_ms,<channels...>`"));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut samples = vec![Vec::new(); names.len()];
    let mut times = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != names.len() + 1 {
            return Err(parse_err(line, format!("expected {} fields, got {}", names.len() + 1, rec.len())));
        }
        times.push(parse_f64(&rec[0], line, "time")?);
        for (c, field) in rec.iter().skip(1).enumerate() {
            samples[c].push(parse_f64(field, line, "sample")?);
        }
    }
    if times.len() < 2 {
        return Err(parse_err(1, "recording needs at least two samples"));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(parse_err(3, "time column must increase"));
    }
    Ok((samples, 1000.0 / dt, names))
}

pub fn write_recording<W: Write>(w: W, rec: &ContinuousRecording) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["time_ms".to_string()];
    header.extend(rec.channel_names.iter().cloned());
    wtr.write_record(&header).map_err(csv_err)?;
    for t in 0..rec.len() {
        let mut row = vec![format!("{}", t as f64 * 1000.0 / rec.rate)];
        row.extend(rec.samples.iter().map(|c| format!("{}", c[t])));
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_markers<R: Read>(r: R) -> Result<Vec<Marker>> {
    let mut rdr = reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let expected = ["sample_index", "symbol", "group", "label"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(parse_err(1, format!("marker header must be `{}`", expected.join(","))));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != 4 {
            return Err(parse_err(line, format!("expected 4 fields, got {}", rec.len())));
        }
        let index = rec[0].parse::<usize>().map_err(|_| parse_err(line, format!("bad sample_index `{}`", &rec[0])))?;
        let symbol = parse_opt_usize(&rec[1], line, "symbol")?;
        let group = rec[2]
            .parse::<usize>()
            .ok()
            .filter(|g| *g >= 1)
            .ok_or_else(|| parse_err(line, format!("bad group `{}`", &rec[2])))?;
        let label = Label::parse(&rec[3]).map_err(|e| parse_err(line, e.to_string()))?;
        out.push(Marker { index, symbol, group: group - 1, label });
    }
    Ok(out)
}

pub fn write_markers<W: Write>(w: W, markers: &[Marker]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["sample_index", "symbol", "group", "label"]).map_err(csv_err)?;
    for m in markers {
        let symbol = m.symbol.map_or_else(|| "NA".to_string(), |s| s.to_string());
        wtr.write_record([m.index.to_string(), symbol, (m.group + 1).to_string(), Label::format(m.label).to_string()])
            .map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// One row of a feature table.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub trial: usize,
    /// Zero-based sequence group.
    pub group: usize,
    pub label: Option<Label>,
    /// Attended symbol of the trial, when known.
    pub symbol: Option<usize>,
    pub features: FeatureVector,
}

pub fn read_features<R: Read>(r: R) -> Result<Vec<FeatureRow>> {
    let mut rdr = reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let fixed = ["trial", "group", "label", "symbol"];
    if headers.len() < 5 || headers.iter().take(4).collect::<Vec<_>>() != fixed {
        return Err(parse_err(1, "feature header must be `trial,group,label,symbol,f0,...`"));
    }
    let d = headers.len() - 4;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != d + 4 {
            return Err(parse_err(line, format!("expected {} fields, got {}", d + 4, rec.len())));
        }
        let trial = rec[0].parse::<usize>().map_err(|_| parse_err(line, format!("bad trial `{}`", &rec[0])))?;
        let group = rec[1]
            .parse::<usize>()
            .ok()
            .filter(|g| *g >= 1)
            .ok_or_else(|| parse_err(line, format!("bad group `{}`", &rec[1])))?;
        let label = Label::parse(&rec[2]).map_err(|e| parse_err(line, e.to_string()))?;
        let symbol = parse_opt_usize(&rec[3], line, "symbol")?;
        let features = rec.iter().skip(4).map(|f| parse_f64(f, line, "feature")).collect::<Result<Vec<_>>>()?;
        out.push(FeatureRow { trial, group: group - 1, label, symbol, features: FeatureVector(features) });
    }
    Ok(out)
}

pub fn write_features<W: Write>(w: W, rows: &[FeatureRow]) -> Result<()> {
    let d = rows.first().map_or(0, |r| r.features.dim());
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = ["trial", "group", "label", "symbol"].iter().map(|s| s.to_string()).collect();
    header.extend((0..d).map(|i| format!("f{i}")));
    wtr.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut row = vec![
            r.trial.to_string(),
            (r.group + 1).to_string(),
            Label::format(r.label).to_string(),
            r.symbol.map_or_else(|| "NA".to_string(), |s| s.to_string()),
        ];
        // `{:?}` prints the shortest representation that round-trips exactly
        row.extend(r.features.iter().map(|v| format!("{v:?}")));
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}
