//! Report assembly: a JSON document plus, where meaningful, a numeric table
//! for CSV output.

use std::io::Write;
use std::path::Path;

use bgeo_core::linalg::{CMat, CVec};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

impl<'de> serde::Deserialize<'de> for OutputFormat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            _ => Err(serde::de::Error::custom(format!("output must be json or csv, got {s:?}"))),
        }
    }
}

/// Rows of floats under a header, written with 17 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.header.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn write_to(&self, path: &Path) -> CliResult<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
        let mut buf = std::io::BufWriter::new(file);
        self.write_csv(&mut buf)
            .and_then(|_| buf.flush())
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
    }
}

/// Column names `{stem}_re,{stem}_im` per component, numbered from 1 when n > 1.
pub fn complex_columns(stem: &str, n: usize) -> Vec<String> {
    (0..n)
        .flat_map(|j| {
            let name = if n == 1 { stem.to_string() } else { format!("{stem}{}", j + 1) };
            [format!("{name}_re"), format!("{name}_im")]
        })
        .collect()
}

pub fn push_complex(row: &mut Vec<f64>, v: &[Complex64]) {
    for z in v {
        row.push(z.re);
        row.push(z.im);
    }
}

pub struct Report {
    pub json: Value,
    pub table: Option<Table>,
    /// Preformatted CSV for reports whose rows are not purely numeric.
    pub csv_text: Option<String>,
    /// False for failed verifications and unconverged solves (exit code 1).
    pub passed: bool,
}

impl Report {
    pub fn ok(json: Value) -> Self {
        Report { json, table: None, csv_text: None, passed: true }
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }
}

pub fn cj(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn vj(v: &CVec) -> Value {
    Value::Array(v.iter().map(|&z| cj(z)).collect())
}

pub fn mj(m: &CMat) -> Value {
    Value::Array((0..m.nrows()).map(|i| Value::Array((0..m.ncols()).map(|j| cj(m[(i, j)])).collect())).collect())
}
