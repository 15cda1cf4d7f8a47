//! Delimited text tables with a required header row.

use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub(crate) struct DelimitedTable {
    headers: Vec<String>,
    records: Vec<csv::StringRecord>,
}

impl DelimitedTable {
    pub(crate) fn read<R: Read>(reader: R, delimiter: u8) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(reader);
        let headers =
            rdr.headers().map_err(|e| Error::parse(1, "<header>", e))?.iter().map(str::to_string).collect::<Vec<_>>();
        if headers.is_empty() || headers.iter().all(String::is_empty) {
            return Err(Error::parse(1, "<header>", "missing header row"));
        }
        let mut records = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(i + 2);
                Error::parse(line, "<record>", e)
            })?;
            records.push(rec);
        }
        Ok(DelimitedTable { headers, records })
    }

    pub(crate) fn column(&self, name: &str) -> Result<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    /// Records paired with their 1-based line number in the source.
    pub(crate) fn rows(&self) -> impl Iterator<Item = (usize, &csv::StringRecord)> {
        self.records.iter().enumerate().map(|(i, r)| {
            let line = r.position().map(|p| p.line() as usize).unwrap_or(i + 2);
            (line, r)
        })
    }
}

pub(crate) fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn field<T: FromStr>(rec: &csv::StringRecord, col: usize, row: usize, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = rec.get(col).unwrap_or("");
    raw.parse::<T>().map_err(|e| Error::parse(row, name, format!("`{raw}`: {e}")))
}

pub(crate) fn finite(rec: &csv::StringRecord, col: usize, row: usize, name: &str) -> Result<f64> {
    let v: f64 = field(rec, col, row, name)?;
    if !v.is_finite() {
        return Err(Error::parse(row, name, "not finite"));
    }
    Ok(v)
}

/// Shortest round-trip representation of a float; `-0` prints as `0`.
pub(crate) fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}
