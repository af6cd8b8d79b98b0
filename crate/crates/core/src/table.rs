//! Column-major feature matrix with a parallel binary label vector.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Label value for benign traffic.
pub const BENIGN: u8 = 0;
/// Label value for attack traffic.
pub const ATTACK: u8 = 1;

/// Column-major numeric table. Every stage of the pipeline consumes and produces one.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnarTable<T> {
    names: Vec<String>,
    columns: Vec<Vec<T>>,
    labels: Vec<u8>,
}

impl<T: Scalar> ColumnarTable<T> {
    pub fn new(names: Vec<String>, columns: Vec<Vec<T>>, labels: Vec<u8>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Contract(format!(
                "{} column names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Contract(format!("duplicate column name '{name}'")));
            }
        }
        let n = labels.len();
        if let Some((name, col)) = names.iter().zip(&columns).find(|(_, c)| c.len() != n) {
            return Err(Error::Contract(format!(
                "column '{name}' has {} values, expected {n}",
                col.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > ATTACK) {
            return Err(Error::Contract(format!("label {bad} is not binary")));
        }
        Ok(Self { names, columns, labels })
    }

    /// Builds a table from row-major data; convenient in tests and examples.
    pub fn from_rows(names: &[&str], rows: &[Vec<T>], labels: Vec<u8>) -> Result<Self> {
        let d = names.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); d];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Contract(format!("row {r} has {} values, expected {d}", row.len())));
            }
            for (col, &v) in columns.iter_mut().zip(row) {
                col.push(v);
            }
        }
        Self::new(names.iter().map(|s| s.to_string()).collect(), columns, labels)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<T>] {
        &self.columns
    }

    pub fn column(&self, index: usize) -> &[T] {
        &self.columns[index]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn value(&self, row: usize, col: usize) -> T {
        self.columns[col][row]
    }

    /// Copies row `row` into `out` (length `n_features`).
    pub fn row_into(&self, row: usize, out: &mut [T]) {
        for (o, col) in out.iter_mut().zip(&self.columns) {
            *o = col[row];
        }
    }

    pub fn row(&self, row: usize) -> Vec<T> {
        self.columns.iter().map(|c| c[row]).collect()
    }

    /// `[benign, attack]` row counts.
    pub fn class_counts(&self) -> [usize; 2] {
        let attacks = self.labels.iter().filter(|&&l| l == ATTACK).count();
        [self.labels.len() - attacks, attacks]
    }

    /// New table holding the given rows, in the order given.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let columns = self
            .columns
            .iter()
            .map(|c| rows.iter().map(|&r| c[r]).collect())
            .collect();
        let labels = rows.iter().map(|&r| self.labels[r]).collect();
        Self { names: self.names.clone(), columns, labels }
    }

    /// Keeps rows whose mask entry is `true`, preserving order.
    pub fn filter_rows(&self, keep: &[bool]) -> Self {
        let rows: Vec<usize> = keep.iter().enumerate().filter(|(_, &k)| k).map(|(i, _)| i).collect();
        self.select_rows(&rows)
    }

    /// New table holding the given feature columns, in the order given.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            names: cols.iter().map(|&c| self.names[c].clone()).collect(),
            columns: cols.iter().map(|&c| self.columns[c].clone()).collect(),
            labels: self.labels.clone(),
        }
    }

    /// Keeps the named columns in the order given; unknown names are a contract violation.
    pub fn select_named(&self, names: &[String]) -> Result<Self> {
        let cols = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::Contract(format!("column '{n}' not present in table")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&cols))
    }

    /// Replaces the feature values, keeping names and labels.
    pub fn with_columns(&self, columns: Vec<Vec<T>>) -> Result<Self> {
        Self::new(self.names.clone(), columns, self.labels.clone())
    }

    /// True when every cell is finite.
    pub fn all_finite(&self) -> bool {
        self.columns.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    /// Row-major copy of the features.
    pub fn to_row_major(&self) -> Vec<T> {
        let (n, d) = (self.n_rows(), self.n_features());
        let mut out = vec![T::zero(); n * d];
        for (j, col) in self.columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                out[i * d + j] = v;
            }
        }
        out
    }

    /// Converts the scalar type of every cell.
    pub fn cast<U: Scalar>(&self) -> ColumnarTable<U> {
        ColumnarTable {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| c.iter().map(|&v| U::of(v.as_f64())).collect())
                .collect(),
            labels: self.labels.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ColumnarTable<f64> {
        ColumnarTable::from_rows(
            &["a", "b"],
            &[vec![1.0, 10.0], vec![2.0, 20.0], vec![3.0, 30.0]],
            vec![0, 1, 1],
        )
        .unwrap()
    }

    #[test]
    fn rejects_ragged_and_duplicate_columns() {
        let err = ColumnarTable::<f64>::new(vec!["a".into()], vec![vec![1.0, 2.0]], vec![0]);
        assert!(matches!(err, Err(Error::Contract(_))));
        let err = ColumnarTable::<f64>::new(
            vec!["a".into(), "a".into()],
            vec![vec![1.0], vec![2.0]],
            vec![0],
        );
        assert!(matches!(err, Err(Error::Contract(_))));
        let err = ColumnarTable::<f64>::new(vec!["a".into()], vec![vec![1.0]], vec![2]);
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn row_and_column_selection() {
        let t = sample();
        assert_eq!(t.class_counts(), [1, 2]);
        let s = t.select_rows(&[2, 0]);
        assert_eq!(s.column(0), &[3.0, 1.0]);
        assert_eq!(s.labels(), &[1, 0]);
        let c = t.select_columns(&[1]);
        assert_eq!(c.names(), &["b".to_string()]);
        assert_eq!(t.to_row_major(), vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0]);
        assert_eq!(t.filter_rows(&[false, true, false]).row(0), vec![2.0, 20.0]);
    }
}
