use serde::{Deserialize, Serialize};

use super::{DecorrelateError, Result};

/// Column-stochastic matrix; `T[i][j]` is the probability of mapping source
/// cell `j` to target cell `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixDoc", into = "MatrixDoc")]
pub struct TransformMatrix {
    rows: usize,
    cols: usize,
    /// Column-major.
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixDoc {
    rows: usize,
    cols: usize,
    matrix: Vec<Vec<f64>>,
}

impl From<TransformMatrix> for MatrixDoc {
    fn from(t: TransformMatrix) -> Self {
        MatrixDoc {
            rows: t.rows,
            cols: t.cols,
            matrix: t.to_rows(),
        }
    }
}

impl TryFrom<MatrixDoc> for TransformMatrix {
    type Error = DecorrelateError;

    fn try_from(doc: MatrixDoc) -> Result<Self> {
        let t = TransformMatrix::from_rows(&doc.matrix)?;
        if t.rows != doc.rows || t.cols != doc.cols {
            return Err(DecorrelateError::Dimension(format!(
                "declared {}x{}, found {}x{}",
                doc.rows, doc.cols, t.rows, t.cols
            )));
        }
        Ok(t)
    }
}

impl TransformMatrix {
    pub fn identity(n: usize) -> Self {
        Self::stacked_identity(n, n, 0)
    }

    /// `rows × n` matrix with an identity block starting at row `offset`.
    pub fn stacked_identity(rows: usize, n: usize, offset: usize) -> Self {
        assert!(offset + n <= rows, "identity block does not fit");
        let mut data = vec![0.0; rows * n];
        for j in 0..n {
            data[j * rows + offset + j] = 1.0;
        }
        TransformMatrix { rows, cols: n, data }
    }

    /// Every column equal to `profile`.
    pub fn constant_columns(profile: &[f64], cols: usize) -> Result<Self> {
        let rows = profile.len();
        Self::from_column_major(rows, cols, profile.repeat(cols))
    }

    /// Validates non-negativity and unit column sums (within 1e-9).
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(DecorrelateError::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        let t = TransformMatrix { rows, cols, data };
        t.check_stochastic(1e-9)?;
        Ok(t)
    }

    pub fn from_rows(matrix: &[Vec<f64>]) -> Result<Self> {
        let rows = matrix.len();
        let cols = matrix.first().map_or(0, Vec::len);
        if matrix.iter().any(|r| r.len() != cols) {
            return Err(DecorrelateError::Dimension("ragged matrix".into()));
        }
        let mut data = vec![0.0; rows * cols];
        for (i, row) in matrix.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                data[j * rows + i] = *v;
            }
        }
        Self::from_column_major(rows, cols, data)
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        TransformMatrix { rows, cols, data }
    }

    pub fn check_stochastic(&self, tol: f64) -> Result<()> {
        for j in 0..self.cols {
            let col = self.column(j);
            if col.iter().any(|v| !(*v >= -tol) || !v.is_finite()) {
                return Err(DecorrelateError::NotStochastic(format!("column {j} has a negative entry")));
            }
            let s: f64 = col.iter().sum();
            if (s - 1.0).abs() > tol {
                return Err(DecorrelateError::NotStochastic(format!("column {j} sums to {s}")));
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub(crate) fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// `T x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (j, xj) in x.iter().enumerate().take(self.cols) {
            for (o, t) in out.iter_mut().zip(self.column(j)) {
                *o += t * xj;
            }
        }
        out
    }

    /// `Tᵀ y`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        (0..self.cols)
            .map(|j| self.column(j).iter().zip(y).map(|(t, v)| t * v).sum())
            .collect()
    }

    /// `θ A + (1 - θ) B`.
    pub fn mix(a: &Self, b: &Self, theta: f64) -> Result<Self> {
        if a.rows != b.rows || a.cols != b.cols {
            return Err(DecorrelateError::Dimension("mixing matrices of different shape".into()));
        }
        let data = a
            .data
            .iter()
            .zip(&b.data)
            .map(|(x, y)| theta * x + (1.0 - theta) * y)
            .collect();
        Ok(TransformMatrix::from_raw(a.rows, a.cols, data))
    }
}
