use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Observations in rows, coordinates in columns. All entries are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    data: DMatrix<f64>,
}

impl Sample {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidSample {
                what: format!("empty sample ({}x{})", data.nrows(), data.ncols()),
            });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            let (row, col) = (idx % data.nrows(), idx / data.nrows());
            return Err(Error::InvalidSample {
                what: format!("non-finite value at row {row}, column {col}"),
            });
        }
        Ok(Self { data })
    }

    /// Builds a sample from row-major values.
    pub fn from_rows(n: usize, p: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n * p {
            return Err(Error::DimensionMismatch {
                what: format!("{} values for a {n}x{p} sample", values.len()),
            });
        }
        Self::new(DMatrix::from_row_slice(n, p, values))
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.data.as_slice()[j * n..(j + 1) * n]
    }

    /// New sample made of the given rows, in order.
    pub fn select_rows(&self, rows: &[usize]) -> Sample {
        Sample {
            data: self.data.select_rows(rows.iter()),
        }
    }

    /// Stacks the rows of `self` on top of the rows of `other`.
    pub fn stack(&self, other: &Sample) -> Result<Sample> {
        if self.p() != other.p() {
            return Err(Error::DimensionMismatch {
                what: format!("cannot stack p={} with p={}", self.p(), other.p()),
            });
        }
        let (n1, n2) = (self.n(), other.n());
        let data = DMatrix::from_fn(n1 + n2, self.p(), |i, j| {
            if i < n1 {
                self.data[(i, j)]
            } else {
                other.data[(i - n1, j)]
            }
        });
        Ok(Sample { data })
    }
}

/// Mean and centered sum of squares of one column, plus the largest magnitude
/// seen (used to decide whether the spread is numerically zero).
pub(crate) struct ColumnSummary {
    pub mean: f64,
    pub sum_sq: f64,
    pub max_abs: f64,
}

pub(crate) fn summarize(col: &[f64]) -> ColumnSummary {
    let n = col.len() as f64;
    let mean = col.iter().sum::<f64>() / n;
    let sum_sq = col.iter().map(|v| (v - mean) * (v - mean)).sum();
    let max_abs = col.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    ColumnSummary {
        mean,
        sum_sq,
        max_abs,
    }
}

/// A centered sum of squares indistinguishable from rounding noise.
pub(crate) fn is_negligible_spread(sum_sq: f64, max_abs: f64, count: usize) -> bool {
    let noise = 16.0 * f64::EPSILON * max_abs;
    sum_sq <= count as f64 * noise * noise
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(Sample::from_rows(2, 1, &[1.0, f64::NAN]).is_err());
        assert!(Sample::from_rows(0, 1, &[]).is_err());
        assert!(Sample::from_rows(2, 2, &[1.0]).is_err());
    }

    #[test]
    fn columns_and_stacking() {
        let a = Sample::from_rows(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(a.column(1), &[2.0, 4.0]);
        let b = Sample::from_rows(1, 2, &[5.0, 6.0]).unwrap();
        let s = a.stack(&b).unwrap();
        assert_eq!(s.n(), 3);
        assert_eq!(s.column(0), &[1.0, 3.0, 5.0]);
        assert_eq!(s.select_rows(&[2, 0]).column(1), &[6.0, 2.0]);
    }

    #[test]
    fn constant_column_is_negligible() {
        let s = summarize(&[0.1, 0.1, 0.1]);
        assert!(is_negligible_spread(s.sum_sq, s.max_abs, 3));
        let s = summarize(&[0.1, 0.1, 0.1000001]);
        assert!(!is_negligible_spread(s.sum_sq, s.max_abs, 3));
    }
}
