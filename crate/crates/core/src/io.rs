//! CSV interchange: datasets (`f0..f{d-1}`, `y0..y{K-1}`) and experiment
//! result rows sharing one schema across subcommands.
//!
//! Floats are written in Rust's shortest round-trip form, so a dataset read
//! back parses to bit-identical matrices.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::types::{Dataset, InstanceSet, SampledLabels};

/// A parsed CSV file: header names and string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn read<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            rows.push(rec?.iter().map(|c| c.trim().to_string()).collect());
        }
        Ok(Self { headers, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }
}

fn parse_float(cell: &str, row: usize, col: &str) -> Result<f64> {
    let v: f64 = cell
        .parse()
        .map_err(|_| Error::Data(format!("row {}: column {col}: '{cell}' is not a number", row + 1)))?;
    if !v.is_finite() {
        return Err(Error::Data(format!("row {}: column {col}: value is not finite", row + 1)));
    }
    Ok(v)
}

fn parse_label(cell: &str, row: usize, col: &str) -> Result<u8> {
    match cell {
        "0" => Ok(0),
        "1" => Ok(1),
        _ => Err(Error::Data(format!("row {}: column {col}: '{cell}' is not 0 or 1", row + 1))),
    }
}

fn is_indexed(name: &str, prefix: char) -> bool {
    name.strip_prefix(prefix)
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

/// Builds a dataset from a table. With `label_columns`, those columns are the
/// labels (in the given order) and every other column is a feature; otherwise
/// the `f*` / `y*` schema is used.
pub fn dataset_from_table(table: &CsvTable, label_columns: Option<&[String]>) -> Result<Dataset> {
    let (features, labels): (Vec<usize>, Vec<usize>) = match label_columns {
        Some(names) => {
            let labels = names
                .iter()
                .map(|n| table.column(n).ok_or_else(|| Error::Data(format!("no column named '{n}'"))))
                .collect::<Result<Vec<_>>>()?;
            let features = (0..table.headers.len()).filter(|c| !labels.contains(c)).collect();
            (features, labels)
        }
        None => {
            let features = (0..table.headers.len()).filter(|&c| is_indexed(&table.headers[c], 'f')).collect();
            let labels = (0..table.headers.len()).filter(|&c| is_indexed(&table.headers[c], 'y')).collect();
            (features, labels)
        }
    };
    if features.is_empty() {
        return Err(Error::Data("no feature columns".into()));
    }
    if labels.is_empty() {
        return Err(Error::Data("no label columns".into()));
    }
    if table.rows.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    let mut x = Vec::with_capacity(table.rows.len() * features.len());
    let mut y = Vec::with_capacity(table.rows.len() * labels.len());
    for (r, row) in table.rows.iter().enumerate() {
        if row.len() != table.headers.len() {
            return Err(Error::Data(format!("row {} has {} cells, header has {}", r + 1, row.len(), table.headers.len())));
        }
        for &c in &features {
            x.push(parse_float(&row[c], r, &table.headers[c])?);
        }
        for &c in &labels {
            y.push(parse_label(&row[c], r, &table.headers[c])?);
        }
    }
    let n = table.rows.len();
    let map = |e: Error| Error::Data(e.to_string());
    Dataset::new(
        InstanceSet::new(x, n, features.len()).map_err(map)?,
        SampledLabels::new(y, n, labels.len()).map_err(map)?,
    )
}

pub fn read_dataset<R: Read>(reader: R, label_columns: Option<&[String]>) -> Result<Dataset> {
    dataset_from_table(&CsvTable::read(reader)?, label_columns)
}

pub fn write_dataset<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let d = data.features.d();
    let k = data.labels.k();
    let header: Vec<String> = (0..d).map(|j| format!("f{j}")).chain((0..k).map(|j| format!("y{j}"))).collect();
    w.write_record(&header)?;
    for i in 0..data.n() {
        let rec: Vec<String> = data
            .features
            .row(i)
            .iter()
            .map(|v| format!("{v}"))
            .chain(data.labels.row(i).iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One output row; unset fields are written as empty cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub method: String,
    pub seed: Option<u64>,
    pub trial: Option<u64>,
    /// What the row summarizes, e.g. `trial`, `mean`, `stderr`, or a check name.
    pub stat: String,
    pub n: Option<u64>,
    pub k: Option<u64>,
    pub tau: Option<f64>,
    pub rho: Option<f64>,
    pub pi1: Option<f64>,
    pub pi2: Option<f64>,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub auc_1: Option<f64>,
    pub auc_2: Option<f64>,
    pub diff: Option<f64>,
    pub min: Option<f64>,
    pub gap: Option<f64>,
    pub bound: Option<f64>,
    pub note: String,
    pub runtime_ms: Option<f64>,
}

pub const RESULT_COLUMNS: [&str; 21] = [
    "experiment", "method", "seed", "trial", "stat", "n", "k", "tau", "rho", "pi1", "pi2", "a1", "a2", "auc_1",
    "auc_2", "diff", "min", "gap", "bound", "note", "runtime_ms",
];

fn cell<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl ResultRow {
    fn cells(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.method.clone(),
            cell(&self.seed),
            cell(&self.trial),
            self.stat.clone(),
            cell(&self.n),
            cell(&self.k),
            cell(&self.tau),
            cell(&self.rho),
            cell(&self.pi1),
            cell(&self.pi2),
            cell(&self.a1),
            cell(&self.a2),
            cell(&self.auc_1),
            cell(&self.auc_2),
            cell(&self.diff),
            cell(&self.min),
            cell(&self.gap),
            cell(&self.bound),
            self.note.clone(),
            cell(&self.runtime_ms),
        ]
    }
}

pub fn write_results<W: Write>(writer: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.write_record(r.cells())?;
    }
    w.flush()?;
    Ok(())
}
