use std::ops::Range;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Vector};

/// Observations stacked as rows: one row per time step, one column per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    data: Matrix,
}

impl TimeSeries {
    pub fn new(data: Matrix) -> Result<Self> {
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            // column-major storage
            let (row, col) = (pos % data.nrows(), pos / data.nrows());
            return Err(Error::InvalidArgument(format!(
                "non-finite observation at row {}, column {}",
                row + 1,
                col + 1
            )));
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Self::new(Matrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix {
        self.data
    }

    pub fn column_means(&self) -> Vector {
        let n = self.nrows().max(1) as f64;
        Vector::from_iterator(self.ncols(), self.data.column_iter().map(|c| c.sum() / n))
    }

    /// Rows minus `mean`.
    pub fn centered(&self, mean: &Vector) -> Result<Matrix> {
        if mean.len() != self.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "series has {} columns, mean has {}",
                self.ncols(),
                mean.len()
            )));
        }
        let mut out = self.data.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            col.add_scalar_mut(-mean[j]);
        }
        Ok(out)
    }

    pub fn rows(&self, range: Range<usize>) -> TimeSeries {
        let len = range.end - range.start;
        TimeSeries {
            data: self.data.rows(range.start, len).into_owned(),
        }
    }
}

impl TryFrom<Matrix> for TimeSeries {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        TimeSeries::new(m)
    }
}
