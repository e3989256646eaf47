//! Plain-text matrix and vector files (comma separated, one row per line).

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Decimal rendering with 10 significant digits. Non-finite values are
/// written as `inf`, `-inf` or `nan`.
pub fn fmt_sig10(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v == 0.0 {
        return "0".into();
    }
    // The exponent of the rounded scientific form already accounts for carries.
    let sci = format!("{v:.9e}");
    let magnitude: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    let decimals = (9 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = String::with_capacity(m.len() * 20);
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:e}", m[(r, c)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    let mut out = String::with_capacity(v.len() * 20);
    for x in v.iter() {
        out.push_str(&format!("{x:e}\n"));
    }
    write_file(path, out.as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Parse {
            path: path.into(),
            reason: e.to_string(),
        })?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path.into(),
            reason: e.to_string(),
        })?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.into(),
                    reason: format!("line {}: `{field}` is not a number", line + 1),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let rows = read_rows(path)?;
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse {
            path: path.into(),
            reason: "rows have different lengths".into(),
        });
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(flat.len() / ncols.max(1), ncols, &flat))
}

/// Reads a vector stored either one value per line or as a single row.
pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let rows = read_rows(path)?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DVector::from_vec(flat))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_significant_digits() {
        assert_eq!(fmt_sig10(0.0), "0");
        assert_eq!(fmt_sig10(1.0), "1");
        assert_eq!(fmt_sig10(0.123456789012), "0.123456789");
        assert_eq!(fmt_sig10(1234.56789012345), "1234.56789");
        assert_eq!(fmt_sig10(-2.5e-7), "-0.00000025");
        assert_eq!(fmt_sig10(9.99999999999), "10");
        assert_eq!(fmt_sig10(12345678901234.0), "12345678901234");
        assert_eq!(fmt_sig10(f64::INFINITY), "inf");
        let v = 0.987_654_321_123;
        let back: f64 = fmt_sig10(v).parse().unwrap();
        assert!((back - v).abs() <= 1e-10);
    }
}
