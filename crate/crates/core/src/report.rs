//! CSV output. Floats are written in shortest round-trip form.

use std::io::{self, Write};

use crate::netsim::ExperimentResult;

pub const COMPARISON_HEADER: [&str; 8] = [
    "pb_power_dbm",
    "kind",
    "mean_ber",
    "ci95_ber",
    "active_fraction",
    "ci95_active",
    "trials",
    "seed",
];

/// Shortest decimal string that parses back to the same `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", self.header.join(","))?;
        for row in &self.rows {
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

pub fn comparison_table(results: &[ExperimentResult]) -> Table {
    let mut t = Table::new(&COMPARISON_HEADER);
    for r in results {
        t.push(vec![
            fmt_float(r.pb_power_dbm),
            r.kind.to_string(),
            fmt_opt(r.mean_ber),
            fmt_opt(r.ci95_ber),
            fmt_float(r.active_fraction),
            fmt_float(r.ci95_active),
            r.trials.to_string(),
            r.seed.to_string(),
        ]);
    }
    t
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SchemaError {
    #[error("file is empty")]
    Empty,
    #[error("header `{found}` does not match `{expected}`")]
    Header { expected: String, found: String },
    #[error("row {row} has {found} fields, expected {expected}")]
    Row {
        row: usize,
        expected: usize,
        found: usize,
    },
}

/// Checks the header line and that every row has the header's field count.
pub fn validate_csv(text: &str, header: &[&str]) -> Result<usize, SchemaError> {
    let mut lines = text.lines();
    let first = lines.next().ok_or(SchemaError::Empty)?;
    let expected = header.join(",");
    if first != expected {
        return Err(SchemaError::Header {
            expected,
            found: first.to_string(),
        });
    }
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let found = line.split(',').count();
        if found != header.len() {
            return Err(SchemaError::Row {
                row: i + 1,
                expected: header.len(),
                found,
            });
        }
        rows += 1;
    }
    Ok(rows)
}
