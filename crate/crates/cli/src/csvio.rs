//! Reading numeric CSV files: rows are observations, columns coordinates.
//!
//! A first row containing any non-numeric cell is taken as a header. Every
//! other cell must parse as a finite decimal number.

use std::path::Path;

use hdmt_core::Sample;

use crate::error::CliError;

/// A rectangular block of finite reals with an optional header.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvMatrix {
    pub header: Option<Vec<String>>,
    pub rows: usize,
    pub cols: usize,
    /// Row-major.
    pub values: Vec<f64>,
}

impl CsvMatrix {
    pub fn into_sample(self) -> Result<Sample, CliError> {
        Ok(Sample::from_rows(self.rows, self.cols, &self.values)?)
    }
}

pub fn read_matrix(path: &Path) -> Result<CsvMatrix, CliError> {
    let shown = path.display();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(format!("cannot read {shown}: {e}")))?;

    let mut header = None;
    let mut values = Vec::new();
    let mut rows = 0usize;
    let mut cols = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { .. } => {
                CliError::input(format!("{shown}: ragged CSV, rows have different lengths ({e})"))
            }
            _ => CliError::input(format!("cannot read {shown}: {e}")),
        })?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Vec<Option<f64>> = record.iter().map(|c| c.parse::<f64>().ok()).collect();
        if line == 0 && parsed.iter().any(Option::is_none) {
            header = Some(record.iter().map(str::to_owned).collect());
            cols = record.len();
            continue;
        }
        for (col, (cell, value)) in record.iter().zip(&parsed).enumerate() {
            match value {
                Some(v) if v.is_finite() => values.push(*v),
                _ => {
                    return Err(CliError::input(format!(
                        "{shown}: line {}, column {}: {cell:?} is not a finite number",
                        line + 1,
                        col + 1
                    )))
                }
            }
        }
        cols = record.len();
        rows += 1;
    }
    if cols == 0 {
        return Err(CliError::input(format!("{shown}: no columns (need p >= 1)")));
    }
    if rows == 0 {
        return Err(CliError::input(format!("{shown}: no data rows")));
    }
    Ok(CsvMatrix {
        header,
        rows,
        cols,
        values,
    })
}

pub fn read_sample(path: &Path) -> Result<Sample, CliError> {
    read_matrix(path)?.into_sample()
}

/// A vector stored either as a single row or as a single column.
pub fn read_vector(path: &Path) -> Result<Vec<f64>, CliError> {
    let m = read_matrix(path)?;
    if m.rows == 1 || m.cols == 1 {
        Ok(m.values)
    } else {
        Err(CliError::input(format!(
            "{}: expected a single row or column, found {}x{}",
            path.display(),
            m.rows,
            m.cols
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn header_is_detected() {
        let f = file("a,b\n1,2\n3,4.5\n");
        let m = read_matrix(f.path()).unwrap();
        assert_eq!(m.header, Some(vec!["a".into(), "b".into()]));
        assert_eq!((m.rows, m.cols), (2, 2));
        assert_eq!(m.values, vec![1.0, 2.0, 3.0, 4.5]);

        let g = file("1, 2\n3,4\n\n");
        let m = read_matrix(g.path()).unwrap();
        assert_eq!(m.header, None);
        assert_eq!(m.rows, 2);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        for bad in ["1,2\n3\n", "1,2\n3,x\n", "1,NaN\n", "a,b\n", ""] {
            let f = file(bad);
            assert!(matches!(read_matrix(f.path()), Err(CliError::Input(_))), "{bad:?}");
        }
        let ragged = file("1,2\n3\n");
        let msg = read_matrix(ragged.path()).unwrap_err().to_string();
        assert!(msg.contains("ragged"), "{msg}");
        assert!(read_matrix(Path::new("/definitely/not/here.csv")).is_err());
    }

    #[test]
    fn vectors_as_row_or_column() {
        assert_eq!(read_vector(file("1,2,3\n").path()).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(read_vector(file("mu\n1\n2\n3\n").path()).unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(read_vector(file("1,2\n3,4\n").path()).is_err());
    }
}
