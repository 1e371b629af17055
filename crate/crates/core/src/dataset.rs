use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("dataset has no observations")]
    Empty,
    #[error("row {row} has {got} inputs, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },
    #[error("{0} targets for {1} rows")]
    LengthMismatch(usize, usize),
}

/// Observations `X` (n × m, row-major) and targets `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    n_vars: usize,
    names: Vec<String>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, y: Vec<f64>, names: Vec<String>) -> Result<Dataset, DatasetError> {
        if rows.is_empty() {
            return Err(DatasetError::Empty);
        }
        if rows.len() != y.len() {
            return Err(DatasetError::LengthMismatch(y.len(), rows.len()));
        }
        let m = names.len();
        let mut x = Vec::with_capacity(rows.len() * m);
        for (row, (r, t)) in rows.iter().zip(&y).enumerate() {
            if r.len() != m {
                return Err(DatasetError::RaggedRow { row, got: r.len(), expected: m });
            }
            if r.iter().chain(std::iter::once(t)).any(|v| !v.is_finite()) {
                return Err(DatasetError::NonFinite { row });
            }
            x.extend_from_slice(r);
        }
        Ok(Dataset { x, y, n_vars: m, names })
    }

    /// Single-input convenience constructor.
    pub fn from_columns(x: &[f64], y: &[f64], name: &str) -> Result<Dataset, DatasetError> {
        Dataset::new(x.iter().map(|&v| vec![v]).collect(), y.to_vec(), vec![name.to_string()])
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.x[k * self.n_vars..(k + 1) * self.n_vars]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n()).map(move |k| self.row(k))
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    /// Copy with the targets replaced (same inputs).
    pub fn with_targets(&self, y: Vec<f64>) -> Result<Dataset, DatasetError> {
        if y.len() != self.n() {
            return Err(DatasetError::LengthMismatch(y.len(), self.n()));
        }
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(DatasetError::NonFinite { row });
        }
        Ok(Dataset { y, ..self.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_shape_and_values() {
        let names = vec!["a".to_string(), "b".to_string()];
        assert_eq!(Dataset::new(vec![], vec![], names.clone()), Err(DatasetError::Empty));
        assert_eq!(
            Dataset::new(vec![vec![1.0, 2.0], vec![1.0]], vec![0.0, 0.0], names.clone()),
            Err(DatasetError::RaggedRow { row: 1, got: 1, expected: 2 })
        );
        assert_eq!(
            Dataset::new(vec![vec![1.0, f64::NAN]], vec![0.0], names.clone()),
            Err(DatasetError::NonFinite { row: 0 })
        );
        let d = Dataset::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![5.0, 6.0], names).unwrap();
        assert_eq!(d.row(1), &[3.0, 4.0]);
        assert_eq!(d.column(0), vec![1.0, 3.0]);
    }
}
