//! Number formatting and report rendering.
//!
//! Every number leaves the program rounded to 12 significant digits, and
//! non-finite values are written as the strings `"inf"` / `"-inf"`.

use gpchan::ExtReal;
use serde_json::{json, Value};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Units {
    Bits,
    Nats,
}

impl Units {
    pub fn name(self) -> &'static str {
        match self {
            Units::Bits => "bits",
            Units::Nats => "nats",
        }
    }

    /// Converts an information quantity given in nats.
    pub fn from_nats(self, v: f64) -> f64 {
        match self {
            Units::Nats => v,
            Units::Bits => v / std::f64::consts::LN_2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

pub fn round12(v: f64) -> f64 {
    if !v.is_finite() {
        return v;
    }
    let r: f64 = format!("{v:.11e}").parse().expect("formatted float parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(round12(v))
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

pub fn ext(v: ExtReal) -> Value {
    num(v.to_f64())
}

pub fn nums(vs: &[f64]) -> Value {
    Value::Array(vs.iter().map(|&v| num(v)).collect())
}

pub fn matrix(rows: &[Vec<f64>]) -> Value {
    Value::Array(rows.iter().map(|r| nums(r)).collect())
}

/// Text form used in CSV cells.
pub fn text(v: f64) -> String {
    if v.is_finite() {
        format!("{}", round12(v))
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn joined(vs: impl IntoIterator<Item = f64>) -> String {
    vs.into_iter().map(text).collect::<Vec<_>>().join(";")
}

/// A command's result: always a JSON document, sometimes also a table.
pub struct Report {
    pub json: Value,
    pub table: Option<Table>,
    /// Some part of the computation stopped at the wall-clock budget.
    pub budget: bool,
}

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json).expect("report serializes");
                s.push('\n');
                Ok(s)
            }
            Format::Csv => {
                let table = self
                    .table
                    .as_ref()
                    .ok_or_else(|| CliError::Input("csv output is only available for exponent, curve and probe".into()))?;
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&table.header).expect("in-memory write");
                for row in &table.rows {
                    w.write_record(row).expect("in-memory write");
                }
                Ok(String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8"))
            }
        }
    }
}
