//! Observation matrices and their CSV representation.
//!
//! A [`DataMatrix`] is an n×d matrix of samples, one observation per row.
//! All entries are finite; constructors reject NaN and infinities so the
//! numerical modules never have to re-check.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    /// Wraps a matrix, rejecting non-finite entries.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidConfig(
                "data matrix must have at least one row and one column".into(),
            ));
        }
        if let Some((k, j)) = find_non_finite(&values) {
            return Err(Error::DegenerateData(format!(
                "non-finite entry at row {k}, column {j}"
            )));
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidConfig("no rows given".into()));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidConfig("ragged rows".into()));
        }
        let values = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Self::new(values)
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of variables.
    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column(&self, j: usize) -> DVector<f64> {
        self.values.column(j).into_owned()
    }

    /// New matrix keeping only `cols`, in the order given.
    pub fn select_columns(&self, cols: &[usize]) -> DataMatrix {
        let values = DMatrix::from_fn(self.n(), cols.len(), |i, j| self.values[(i, cols[j])]);
        DataMatrix { values }
    }

    pub fn drop_column(&self, j: usize) -> DataMatrix {
        DataMatrix {
            values: self.values.clone().remove_column(j),
        }
    }

    /// Unbiased (n−1 denominator) sample variance of column `j`.
    pub fn column_variance(&self, j: usize) -> f64 {
        column_variance(self.values.column(j).iter().copied(), self.n())
    }

    /// Reads the dataset CSV format: an optional `x0,…,x{d−1}` header
    /// followed by one sample per line. Ragged rows, non-numeric fields and
    /// non-finite values are rejected with the offending line number.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut width: Option<usize> = None;
        for record in rdr.records() {
            let record = record.map_err(|e| Error::Parse {
                line: csv_error_line(&e),
                message: e.to_string(),
            })?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            let fields: Vec<&str> = record.iter().map(str::trim).collect();
            if fields.iter().all(|f| f.is_empty()) {
                continue;
            }
            // A first row that fails to parse as numbers is treated as the header.
            let parsed: std::result::Result<Vec<f64>, _> =
                fields.iter().map(|f| f.parse::<f64>()).collect();
            let parsed = match parsed {
                Ok(v) => v,
                Err(e) if rows.is_empty() && width.is_none() => {
                    let _ = e;
                    width = Some(fields.len());
                    continue;
                }
                Err(e) => {
                    return Err(Error::Parse {
                        line,
                        message: format!("non-numeric field: {e}"),
                    })
                }
            };
            if let Some(w) = width {
                if parsed.len() != w {
                    return Err(Error::Parse {
                        line,
                        message: format!("expected {w} fields, got {}", parsed.len()),
                    });
                }
            } else {
                width = Some(parsed.len());
            }
            if let Some(j) = parsed.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value in column {j}"),
                });
            }
            rows.push(parsed);
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                line: 0,
                message: "no data rows".into(),
            });
        }
        Self::from_rows(&rows)
    }

    pub fn read_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    /// Writes `x0,…,x{d−1}` header plus one row per sample. Floats use the
    /// shortest representation that round-trips.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let header: Vec<String> = (0..self.d()).map(|j| format!("x{j}")).collect();
        wtr.write_record(&header).map_err(csv_io_error)?;
        for i in 0..self.n() {
            let fields: Vec<String> = self
                .values
                .row(i)
                .iter()
                .map(|v| format!("{v}"))
                .collect();
            wtr.write_record(&fields).map_err(csv_io_error)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Unbiased sample variance of an iterator with known length.
pub fn column_variance(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let vals: Vec<f64> = values.collect();
    let mean = vals.iter().sum::<f64>() / n as f64;
    vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0)
}

fn find_non_finite(m: &DMatrix<f64>) -> Option<(usize, usize)> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Some((i, j));
            }
        }
    }
    None
}

fn csv_error_line(e: &csv::Error) -> usize {
    e.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn csv_io_error(e: csv::Error) -> Error {
    Error::Parse {
        line: csv_error_line(&e),
        message: e.to_string(),
    }
}
