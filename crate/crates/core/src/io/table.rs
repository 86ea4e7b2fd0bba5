use super::{create, from_csv, open, IoError};
use crate::model::CorrelationMatrix;
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

const SIGNIFICANT_DIGITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Num(f64),
    Int(i64),
    Empty,
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

impl TableFormat {
    /// `json` for a `.json` extension, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => TableFormat::Json,
            _ => TableFormat::Csv,
        }
    }
}

impl FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "json" => Ok(TableFormat::Json),
            other => Err(format!("unknown table format {other:?} (expected csv or json)")),
        }
    }
}

impl fmt::Display for TableFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TableFormat::Csv => "csv",
            TableFormat::Json => "json",
        })
    }
}

fn round_significant(v: f64) -> f64 {
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, v).parse().expect("formatted float parses")
}

/// Twelve significant digits, trailing zeros dropped, plain notation for
/// moderate magnitudes. Non-finite values give `None`.
pub fn format_number(v: f64) -> Option<String> {
    if !v.is_finite() {
        return None;
    }
    let r = round_significant(v);
    if r == 0.0 {
        return Some("0".into());
    }
    let exponent = r.abs().log10().floor();
    Some(if (-5.0..16.0).contains(&exponent) {
        format!("{r}")
    } else {
        format!("{r:e}")
    })
}

fn cell_text(cell: &Cell) -> String {
    match cell {
        Cell::Text(s) => s.clone(),
        Cell::Num(v) => format_number(*v).unwrap_or_default(),
        Cell::Int(v) => v.to_string(),
        Cell::Empty => String::new(),
    }
}

fn cell_json(cell: &Cell) -> Value {
    match cell {
        Cell::Text(s) => Value::String(s.clone()),
        Cell::Num(v) if v.is_finite() => {
            let r = round_significant(*v);
            serde_json::Number::from_f64(if r == 0.0 { 0.0 } else { r }).map_or(Value::Null, Value::Number)
        }
        Cell::Int(v) => Value::from(*v),
        Cell::Num(_) | Cell::Empty => Value::Null,
    }
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

pub fn write_table_to<W: Write>(table: &Table, mut out: W, format: TableFormat) -> Result<(), IoError> {
    match format {
        TableFormat::Csv => {
            let mut w = csv_writer(out);
            w.write_record(&table.columns).map_err(from_csv)?;
            for row in &table.rows {
                w.write_record(row.iter().map(cell_text)).map_err(from_csv)?;
            }
            w.flush().map_err(IoError::stream)
        }
        TableFormat::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> =
                        table.columns.iter().cloned().zip(row.iter().map(cell_json)).collect();
                    Value::Object(obj)
                })
                .collect();
            let text = serde_json::to_string_pretty(&Value::Array(rows)).expect("json values serialize");
            out.write_all(text.as_bytes())
                .and_then(|_| out.write_all(b"\n"))
                .and_then(|_| out.flush())
                .map_err(IoError::stream)
        }
    }
}

pub fn write_table(table: &Table, path: &Path, format: TableFormat) -> Result<(), IoError> {
    write_table_to(table, create(path)?, format).map_err(|e| e.with_path(path))
}

/// `symbol,A,B,...` header followed by one labelled row per symbol.
pub fn write_matrix_to<W: Write>(labels: &[String], corr: &CorrelationMatrix, out: W) -> Result<(), IoError> {
    let mut w = csv_writer(out);
    w.write_record(std::iter::once("symbol").chain(labels.iter().map(String::as_str)))
        .map_err(from_csv)?;
    for (i, label) in labels.iter().enumerate() {
        let cells = (0..corr.n()).map(|j| format_number(corr.get(i, j)).unwrap_or_default());
        w.write_record(std::iter::once(label.clone()).chain(cells)).map_err(from_csv)?;
    }
    w.flush().map_err(IoError::stream)
}

pub fn write_matrix(labels: &[String], corr: &CorrelationMatrix, path: &Path) -> Result<(), IoError> {
    write_matrix_to(labels, corr, create(path)?).map_err(|e| e.with_path(path))
}

pub fn read_matrix_from<R: Read>(input: R) -> Result<(Vec<String>, CorrelationMatrix), IoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows = rdr.records();
    let header = rows
        .next()
        .ok_or_else(|| IoError::schema(1, "missing header"))?
        .map_err(from_csv)?;
    if header.get(0) != Some("symbol") || header.len() < 2 {
        return Err(IoError::schema(1, "header must be `symbol,<label>,...`"));
    }
    let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let n = labels.len();
    let mut entries = Vec::with_capacity(n * n);
    let mut last_line = 1;
    for (i, row) in rows.enumerate() {
        let row = row.map_err(from_csv)?;
        last_line = row.position().map_or(0, |p| p.line());
        if i >= n {
            return Err(IoError::schema(last_line, format!("more than {n} matrix rows")));
        }
        if row.get(0) != Some(labels[i].as_str()) {
            return Err(IoError::schema(last_line, format!("row label must be `{}`", labels[i])));
        }
        for cell in row.iter().skip(1) {
            let v: f64 = cell
                .parse()
                .map_err(|_| IoError::schema(last_line, format!("invalid number {cell:?}")))?;
            entries.push(v);
        }
    }
    if entries.len() != n * n {
        return Err(IoError::schema(last_line, format!("expected {n} rows of {n} values")));
    }
    let corr = CorrelationMatrix::new(n, entries).map_err(|e| IoError::schema(last_line, e.to_string()))?;
    Ok((labels, corr))
}

pub fn read_matrix(path: &Path) -> Result<(Vec<String>, CorrelationMatrix), IoError> {
    read_matrix_from(open(path)?).map_err(|e| e.with_path(path))
}

/// `symbol,sector` rows.
pub fn read_sectors_from<R: Read>(input: R) -> Result<BTreeMap<String, String>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows = rdr.records();
    let header = rows
        .next()
        .ok_or_else(|| IoError::schema(1, "missing header"))?
        .map_err(from_csv)?;
    if header.iter().ne(["symbol", "sector"]) {
        return Err(IoError::schema(1, "header must be `symbol,sector`"));
    }
    let mut sectors = BTreeMap::new();
    for row in rows {
        let row = row.map_err(from_csv)?;
        let line = row.position().map_or(0, |p| p.line());
        if sectors.insert(row[0].to_string(), row[1].to_string()).is_some() {
            return Err(IoError::schema(line, format!("duplicate symbol `{}`", &row[0])));
        }
    }
    Ok(sectors)
}

pub fn read_sectors(path: &Path) -> Result<BTreeMap<String, String>, IoError> {
    read_sectors_from(open(path)?).map_err(|e| e.with_path(path))
}
