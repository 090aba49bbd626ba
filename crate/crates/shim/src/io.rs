//! Dataset CSV input/output and deterministic JSON serialisation.
//!
//! CSV layout: one header row naming every column, one column holding the
//! response (named `y` unless told otherwise), all other columns base
//! features in file order.  Feature entries must lie in `[0, 1]`.
//!
//! JSON output serialises every float with 17 significant digits
//! (`{:.16e}`), which round-trips `f64` exactly — reports rerun from the
//! same seed are byte-identical.

use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::data::Dataset;
use crate::error::Error;
use crate::Result;

/// Loads a dataset from CSV.  `response` names the response column;
/// `sigma2` is the known noise variance (the file does not carry it).
pub fn load_csv(path: &Path, response: &str, sigma2: f64) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let resp_idx = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| {
            Error::Input(format!(
                "response column '{response}' not found among [{}]",
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != resp_idx)
        .map(|(_, h)| h.to_string())
        .collect();

    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut y: Vec<f64> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let mut base = 0;
        for (c, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                row: r + 1,
                col: c + 1,
                msg: format!("'{field}' is not a number"),
            })?;
            if c == resp_idx {
                y.push(value);
            } else {
                cols[base].push(value);
                base += 1;
            }
        }
    }
    Dataset::with_names(cols, y, sigma2, names)
}

/// Writes a dataset as CSV (base columns under their names, response under
/// `y`).
pub fn save_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = data.names().iter().map(String::as_str).collect();
    header.push("y");
    writer.write_record(&header)?;
    for i in 0..data.n() {
        let mut row: Vec<String> = (1..=data.m())
            .map(|j| format!("{:.16e}", data.col(j)[i]))
            .collect();
        row.push(format!("{:.16e}", data.y()[i]));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Serialises floats as `{:.16e}` so equal values produce equal bytes and
/// full precision survives the round trip.
struct DeterministicFormatter;

impl serde_json::ser::Formatter for DeterministicFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.8e}")
    }
}

/// JSON with deterministic float formatting (non-finite floats become
/// `null`, serde's convention).
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, DeterministicFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

/// Writes the JSON document to a file, or to stdout when `out` is `None`.
/// A trailing newline is appended either way.
pub fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let json = to_json_string(value)?;
    match out {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            f.write_all(json.as_bytes())?;
            f.write_all(b"\n")?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(json.as_bytes())?;
            lock.write_all(b"\n")?;
        }
    }
    Ok(())
}
