//! Matrix Market and CSV input/output.
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! write followed by a read reproduces every entry bit for bit.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

/// Parses a Matrix Market `matrix coordinate` file (`real`, `integer` or `pattern`;
/// `general` or `symmetric`).
pub fn read_matrix_market<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty Matrix Market file".into()))??;
    let tokens: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(Error::Parse(format!("bad Matrix Market header: {header}")));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::Parse(format!("unsupported Matrix Market format '{}'", tokens[2])));
    }
    let pattern = match tokens[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" => true,
        f => return Err(Error::Parse(format!("unsupported field type '{f}'"))),
    };
    let symmetric = match tokens[4].as_str() {
        "general" => false,
        "symmetric" => true,
        s => return Err(Error::Parse(format!("unsupported symmetry '{s}'"))),
    };
    let mut size: Option<(usize, usize, usize)> = None;
    let mut out = DMatrix::zeros(0, 0);
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let f: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if f.len() != 3 {
                    return Err(Error::Parse(format!("bad size line: {t}")));
                }
                let r = parse_usize(f[0])?;
                let c = parse_usize(f[1])?;
                let nnz = parse_usize(f[2])?;
                size = Some((r, c, nnz));
                out = DMatrix::zeros(r, c);
            }
            Some((r, c, _)) => {
                let need = if pattern { 2 } else { 3 };
                if f.len() < need {
                    return Err(Error::Parse(format!("bad entry line: {t}")));
                }
                let i = parse_usize(f[0])?;
                let j = parse_usize(f[1])?;
                if i == 0 || j == 0 || i > r || j > c {
                    return Err(Error::Parse(format!("entry ({i}, {j}) out of range")));
                }
                let v = if pattern { 1.0 } else { parse_f64(f[2])? };
                out[(i - 1, j - 1)] = v;
                if symmetric {
                    out[(j - 1, i - 1)] = v;
                }
                seen += 1;
            }
        }
    }
    match size {
        None => Err(Error::Parse("missing size line".into())),
        Some((_, _, nnz)) if nnz != seen => {
            Err(Error::Parse(format!("expected {nnz} entries, found {seen}")))
        }
        Some(_) => Ok(out),
    }
}

/// Writes the nonzero entries of `a` as a `coordinate real general` file.
pub fn write_matrix_market<W: Write>(mut writer: W, a: &DMatrix<f64>) -> Result<()> {
    let mut body = String::new();
    let mut nnz = 0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let v = a[(i, j)];
            if v != 0.0 {
                writeln!(body, "{} {} {:?}", i + 1, j + 1, v).expect("string write");
                nnz += 1;
            }
        }
    }
    writeln!(writer, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(writer, "{} {} {}", a.nrows(), a.ncols(), nnz)?;
    writer.write_all(body.as_bytes())?;
    Ok(())
}

pub fn read_matrix_market_file(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    read_matrix_market(std::fs::File::open(path)?)
}

pub fn write_matrix_market_file(path: impl AsRef<Path>, a: &DMatrix<f64>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_matrix_market(std::io::BufWriter::new(f), a)
}

/// Reads a dense numeric CSV matrix without a header.
pub fn read_dense_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(rec.iter().map(parse_f64).collect::<Result<_>>()?);
    }
    rows_to_matrix(rows)
}

/// Writes a dense matrix as CSV without a header.
pub fn write_dense_csv<W: Write>(writer: W, a: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for i in 0..a.nrows() {
        w.write_record((0..a.ncols()).map(|j| format!("{:?}", a[(i, j)])))?;
    }
    w.flush()?;
    Ok(())
}

/// A numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    pub names: Vec<String>,
    pub values: DMatrix<f64>,
}

impl DataTable {
    pub fn column(&self, name: &str) -> Result<DVector<f64>> {
        let j = self
            .names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no column named '{name}'")))?;
        Ok(self.values.column(j).into_owned())
    }

    /// The matrix of all columns except those listed in `exclude`.
    pub fn matrix_without(&self, exclude: &[&str]) -> DMatrix<f64> {
        let keep: Vec<usize> =
            (0..self.names.len()).filter(|&j| !exclude.contains(&self.names[j].as_str())).collect();
        DMatrix::from_fn(self.values.nrows(), keep.len(), |i, j| self.values[(i, keep[j])])
    }
}

/// Reads a CSV file with a header row of column names.
pub fn read_table<R: Read>(reader: R) -> Result<DataTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        rows.push(rec.iter().map(parse_f64).collect::<Result<_>>()?);
    }
    let values = if rows.is_empty() { DMatrix::zeros(0, names.len()) } else { rows_to_matrix(rows)? };
    if values.ncols() != names.len() {
        return Err(Error::Parse("header width does not match data".into()));
    }
    Ok(DataTable { names, values })
}

/// Writes a CSV file with a header row.
pub fn write_table<W: Write>(writer: W, table: &DataTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(&table.names)?;
    for i in 0..table.values.nrows() {
        w.write_record((0..table.values.ncols()).map(|j| format!("{:?}", table.values[(i, j)])))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table_file(path: impl AsRef<Path>) -> Result<DataTable> {
    read_table(std::fs::File::open(path)?)
}

/// Reads a matrix, choosing the format from the file extension (`.mtx` or CSV).
pub fn read_matrix_file(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let p = path.as_ref();
    if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("mtx")) {
        read_matrix_market_file(p)
    } else {
        read_dense_csv(std::fs::File::open(p)?)
    }
}

/// Writes a matrix, choosing the format from the file extension (`.mtx` or CSV).
pub fn write_matrix_file(path: impl AsRef<Path>, a: &DMatrix<f64>) -> Result<()> {
    let p = path.as_ref();
    if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("mtx")) {
        write_matrix_market_file(p, a)
    } else {
        write_dense_csv(std::io::BufWriter::new(std::fs::File::create(p)?), a)
    }
}

fn rows_to_matrix(rows: Vec<Vec<f64>>) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Parse("ragged CSV rows".into()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn parse_usize(s: &str) -> Result<usize> {
    s.parse().map_err(|_| Error::Parse(format!("expected an integer, found '{s}'")))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("expected a number, found '{s}'")))
}
