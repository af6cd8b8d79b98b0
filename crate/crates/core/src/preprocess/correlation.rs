use serde::{Deserialize, Serialize};

use super::PreprocessReport;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::table::ColumnarTable;

/// Pearson product-moment correlation. Zero when either input has zero variance.
pub fn pearson_corr<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!("pearson_corr: lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Contract("pearson_corr needs at least two observations".into()));
    }
    let n = T::of_usize(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == T::zero() || syy == T::zero() {
        return Ok(T::zero());
    }
    Ok((sxy / (sxx * syy).sqrt()).max(-T::one()).min(T::one()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationDrop {
    pub kept: String,
    pub dropped: String,
    pub r: f64,
}

struct Centered<T> {
    values: Vec<T>,
    sq_norm: T,
}

fn center<T: Scalar>(col: &[T]) -> Centered<T> {
    let mean = col.iter().copied().sum::<T>() / T::of_usize(col.len());
    let values: Vec<T> = col.iter().map(|&x| x - mean).collect();
    let sq_norm = values.iter().map(|&v| v * v).sum::<T>();
    Centered { values, sq_norm }
}

fn centered_corr<T: Scalar>(a: &Centered<T>, b: &Centered<T>) -> T {
    if a.sq_norm == T::zero() || b.sq_norm == T::zero() {
        return T::zero();
    }
    let dot = a.values.iter().zip(&b.values).map(|(&x, &y)| x * y).sum::<T>();
    // sqrt(s*s) == s exactly, so identical columns give r = 1
    (dot / (a.sq_norm * b.sq_norm).sqrt()).max(-T::one()).min(T::one())
}

/// Drops the later column of every pair whose |r| exceeds `threshold`, scanning pairs
/// `(i, j)`, `i < j`, in ascending order and skipping columns already dropped.
pub fn correlation_filter<T: Scalar>(
    table: &ColumnarTable<T>,
    threshold: T,
) -> Result<(ColumnarTable<T>, PreprocessReport)> {
    let d = table.n_features();
    if d == 0 {
        return Err(Error::Contract("correlation filter needs at least one feature column".into()));
    }
    let mut report = PreprocessReport::default();
    if table.n_rows() < 2 {
        return Ok((table.clone(), report));
    }
    let centered: Vec<Centered<T>> = table.columns().iter().map(|c| center(c)).collect();
    let mut dropped = vec![false; d];
    for i in 0..d {
        if dropped[i] {
            continue;
        }
        for j in (i + 1)..d {
            if dropped[j] {
                continue;
            }
            let r = centered_corr(&centered[i], &centered[j]);
            if r.abs() > threshold {
                dropped[j] = true;
                report.columns_dropped_correlation.push(CorrelationDrop {
                    kept: table.names()[i].clone(),
                    dropped: table.names()[j].clone(),
                    r: r.as_f64(),
                });
            }
        }
    }
    let kept: Vec<usize> = (0..d).filter(|&j| !dropped[j]).collect();
    Ok((table.select_columns(&kept), report))
}
