//! Rectangular numeric tables written as CSV, with run metadata kept in a
//! JSON sidecar so the CSV bytes depend only on config and seed.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableMetadata {
    pub kind: String,
    pub seed: u64,
    /// Seconds since the Unix epoch when the run finished.
    pub timestamp: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    pub metadata: Option<TableMetadata>,
}

/// Shortest round-trip form is not fixed-width; 17 significant digits is.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

impl ResultTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        ResultTable {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            metadata: None,
        }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<(), HarnessError> {
        if row.len() != self.columns.len() {
            return Err(HarnessError::Output(format!(
                "row of {} values for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| HarnessError::Output(format!("writing CSV: {e}"));
        w.write_record(&self.columns).map_err(err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| format_float(*x))).map_err(err)?;
        }
        w.flush()
            .map_err(|e| HarnessError::Output(format!("writing CSV: {e}")))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, HarnessError> {
        let mut r = csv::Reader::from_reader(input);
        let err = |e: csv::Error| HarnessError::Output(format!("reading CSV: {e}"));
        let columns: Vec<String> = r.headers().map_err(err)?.iter().map(String::from).collect();
        let mut table = ResultTable::new(columns);
        for rec in r.records() {
            let rec = rec.map_err(err)?;
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|e| HarnessError::Output(format!("bad number `{f}`: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            table.push(row)?;
        }
        Ok(table)
    }

    /// Writes `<stem>.csv` and, when metadata is present, `<stem>.meta.json`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(), HarnessError> {
        let path = dir.join(format!("{stem}.csv"));
        let io = |p: &Path| {
            let p = p.to_path_buf();
            move |e| HarnessError::Io { path: p, source: e }
        };
        let file = std::fs::File::create(&path).map_err(io(&path))?;
        self.write_csv(std::io::BufWriter::new(file))?;
        if let Some(meta) = &self.metadata {
            let meta_path = dir.join(format!("{stem}.meta.json"));
            let json = serde_json::to_string_pretty(meta)
                .map_err(|e| HarnessError::Output(format!("metadata: {e}")))?;
            std::fs::write(&meta_path, json + "\n").map_err(io(&meta_path))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-2.5), "-2.5000000000000000e0");
        assert_eq!(format_float(f64::NAN), "NaN");
    }

    #[test]
    fn csv_round_trip() {
        let mut t = ResultTable::new(["a", "b"]);
        t.push(vec![std::f64::consts::PI, -1e-300]).unwrap();
        t.push(vec![0.0, 1.0 / 3.0]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("a,b\n"));
        let back = ResultTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let mut t = ResultTable::new(["a", "b"]);
        assert!(t.push(vec![1.0]).is_err());
    }
}
