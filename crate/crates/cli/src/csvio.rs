//! Matrix exchange as headerless RFC-4180 CSV, row-major, with every value
//! written in its shortest round-trip decimal form.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use otpool_core::Matrix;

use crate::error::{CliError, Result};

pub fn parse_matrix(text: &str, source: &str) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(format!("{source}: row {}: {e}", r + 1)))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (c, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| {
                CliError::input(format!("{source}: row {}, column {}: cannot parse {field:?} as a number", r + 1, c + 1))
            })?;
            if !value.is_finite() {
                return Err(CliError::input(format!("{source}: row {}, column {}: value is not finite", r + 1, c + 1)));
            }
            row.push(value);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(CliError::input(format!(
                    "{source}: row {} has {} columns, expected {}",
                    r + 1,
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::input(format!("{source}: no data")));
    }
    Ok(Matrix::from_rows(&rows)?)
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_matrix(&text, &path.display().to_string())
}

/// A vector stored either as one row or as one column.
pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let m = read_matrix(path)?;
    if m.rows() != 1 && m.cols() != 1 {
        return Err(CliError::input(format!(
            "{}: expected a single row or column, found {}x{}",
            path.display(),
            m.rows(),
            m.cols()
        )));
    }
    Ok(m.into_vec())
}

pub fn format_matrix(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x}")).collect();
        out.push_str(&row.join(","));
        out.push_str("\r\n");
    }
    out
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let mut file = File::create(path).map_err(|e| CliError::io(path, e))?;
    file.write_all(format_matrix(m).as_bytes()).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn names_bad_cell() {
        let err = parse_matrix("1,2\n3,x\n", "c.csv").unwrap_err().to_string();
        assert!(err.contains("row 2, column 2"), "{err}");
    }

    #[test]
    fn rejects_ragged_rows() {
        let err = parse_matrix("1,2\n3\n", "c.csv").unwrap_err().to_string();
        assert!(err.contains("row 2 has 1 columns"), "{err}");
    }

    #[test]
    fn accepts_whitespace_and_crlf() {
        let m = parse_matrix(" 1, 2.5\r\n3 ,4\r\n", "c.csv").unwrap();
        assert_eq!(m.as_slice(), &[1.0, 2.5, 3.0, 4.0]);
    }

    proptest! {
        #[test]
        fn text_round_trip_is_exact(rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
            let mut state = seed;
            let data: Vec<f64> = (0..rows * cols).map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                f64::from_bits((state >> 2) | 0x3000_0000_0000_0000) * if state & 1 == 0 { 1.0 } else { -1.0 }
            }).collect();
            let m = Matrix::from_vec(rows, cols, data).unwrap();
            let back = parse_matrix(&format_matrix(&m), "mem").unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
