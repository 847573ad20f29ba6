//! CSV designs and JSON group specifications.

use std::fs::File;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::GroupedDesign;

/// Parses a JSON array of positive group sizes.
pub fn parse_group_spec(text: &str) -> Result<Vec<usize>> {
    let sizes: Vec<usize> =
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("group spec: {e}")))?;
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::InvalidConfig("group spec needs at least one group, all of positive size".into()));
    }
    Ok(sizes)
}

pub fn load_group_spec(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_group_spec(&text)
}

/// Reads a design from CSV. The header row is required; the first column is
/// the response and the rest are covariates in group order. Error locations
/// are 1-based, with row 1 being the first data row.
pub fn read_design<R: std::io::Read>(reader: R, group_sizes: Vec<usize>) -> Result<GroupedDesign> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse { row: 0, column: 0, message: e.to_string() })?
        .clone();
    if headers.len() < 2 {
        return Err(Error::InsufficientData("need a response column and at least one covariate".into()));
    }
    if headers.get(0) != Some("y") {
        return Err(Error::Parse {
            row: 0,
            column: 1,
            message: format!("first column must be named 'y', found '{}'", headers.get(0).unwrap_or("")),
        });
    }
    let width = headers.len();
    let p = width - 1;
    let total: usize = group_sizes.iter().sum();
    if total != p {
        return Err(Error::DimensionMismatch(format!("group sizes sum to {total} but the file has {p} covariates")));
    }
    let mut values = Vec::new();
    let mut n = 0;
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse { row, column: 0, message: e.to_string() })?;
        if record.len() != width {
            return Err(Error::Parse {
                row,
                column: record.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let column = j + 1;
            if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
                return Err(Error::MissingValue { row, column });
            }
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column,
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, column, message: format!("'{cell}' is not finite") });
            }
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::InsufficientData("no data rows".into()));
    }
    let all = DMatrix::from_row_slice(n, width, &values);
    let y = DVector::from_iterator(n, all.column(0).iter().copied());
    let x = all.columns(1, p).into_owned();
    GroupedDesign::new(y, x, group_sizes)
}

pub fn load_csv(path: &Path, group_spec_path: &Path) -> Result<GroupedDesign> {
    let sizes = load_group_spec(group_spec_path)?;
    let file = File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_design(file, sizes)
}
