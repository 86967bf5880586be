//! Plain-text matrix files.
//!
//! Matrices are CSV with one row per line and `%.17g` floats. Dictionaries
//! (and equivalent dictionaries) use a JSON wrapper carrying the block sizes:
//!
//! ```json
//! { "rows": 2, "cols": 3, "block_sizes": [1, 2], "data": [1, 0, 0, 0, 1, 1] }
//! ```
//!
//! with `data` in row-major order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::block_model::{BlockStructure, Dict, EquivalentDictionary};
use crate::error::{Error, Result};

/// C-style `%.17g`.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    const P: i32 = 17;
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= P {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, x);
        strip_zeros(&fixed).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&format_g17(m[(r, c)]));
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {tok:?}: {e}", lineno + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!(
                    "line {}: expected {} values, found {}",
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    parse_matrix_csv(&fs::read_to_string(path)?)
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    fs::write(path, matrix_to_csv(m))?;
    Ok(())
}

/// On-disk form of a block-structured matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMatrixFile {
    pub rows: usize,
    pub cols: usize,
    pub block_sizes: Vec<usize>,
    pub data: Vec<f64>,
}

impl BlockMatrixFile {
    pub fn from_parts(matrix: &DMatrix<f64>, structure: &BlockStructure) -> Self {
        let mut data = Vec::with_capacity(matrix.len());
        for r in 0..matrix.nrows() {
            data.extend(matrix.row(r).iter());
        }
        Self {
            rows: matrix.nrows(),
            cols: matrix.ncols(),
            block_sizes: structure.sizes().to_vec(),
            data,
        }
    }

    pub fn into_parts(self) -> Result<(DMatrix<f64>, BlockStructure)> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Parse(format!(
                "expected {} values for a {}x{} matrix, found {}",
                self.rows * self.cols,
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        let structure = BlockStructure::new(self.block_sizes)?;
        let matrix = DMatrix::from_row_slice(self.rows, self.cols, &self.data);
        Ok((matrix, structure))
    }
}

pub fn dict_to_json(dict: &Dict) -> Result<String> {
    Ok(serde_json::to_string(&BlockMatrixFile::from_parts(
        dict.matrix(),
        dict.structure(),
    ))?)
}

pub fn dict_from_json(text: &str) -> Result<Dict> {
    let file: BlockMatrixFile = serde_json::from_str(text)?;
    let (m, bs) = file.into_parts()?;
    Dict::new(m, bs)
}

pub fn read_dict(path: impl AsRef<Path>) -> Result<Dict> {
    dict_from_json(&fs::read_to_string(path)?)
}

pub fn write_dict(path: impl AsRef<Path>, dict: &Dict) -> Result<()> {
    fs::write(path, dict_to_json(dict)?)?;
    Ok(())
}

pub fn read_equivalent(path: impl AsRef<Path>) -> Result<EquivalentDictionary> {
    let file: BlockMatrixFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    let (m, bs) = file.into_parts()?;
    EquivalentDictionary::new(m, bs)
}

pub fn write_equivalent(path: impl AsRef<Path>, e: &EquivalentDictionary) -> Result<()> {
    let file = BlockMatrixFile::from_parts(e.matrix(), e.structure());
    fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

/// Header line plus rows, each field already formatted.
pub(crate) fn csv_table(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{header}");
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}
