use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::table::ColumnarTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnRange<T> {
    pub name: String,
    pub min_value: T,
    pub max_value: T,
}

/// Fitted per-column minima and maxima, keyed by column name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams<T> {
    pub columns: Vec<ColumnRange<T>>,
}

impl<T: Scalar> ScalerParams<T> {
    pub fn get(&self, name: &str) -> Option<&ColumnRange<T>> {
        self.columns.iter().find(|c| c.name == name)
    }
}

pub fn fit_scaler<T: Scalar>(table: &ColumnarTable<T>) -> ScalerParams<T> {
    let columns = table
        .names()
        .iter()
        .zip(table.columns())
        .map(|(name, col)| {
            let (min_value, max_value) = col.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
            ColumnRange { name: name.clone(), min_value, max_value }
        })
        .collect();
    ScalerParams { columns }
}

/// Min-max maps each column onto `[scale_min, scale_max]`. Zero-span columns map to `scale_min`.
pub fn apply_scaler<T: Scalar>(
    table: &ColumnarTable<T>,
    params: &ScalerParams<T>,
    scale_min: T,
    scale_max: T,
) -> Result<ColumnarTable<T>> {
    let width = scale_max - scale_min;
    let columns = table
        .names()
        .iter()
        .zip(table.columns())
        .map(|(name, col)| {
            let range = params
                .get(name)
                .ok_or_else(|| Error::Contract(format!("no scaler parameters for column '{name}'")))?;
            let span = range.max_value - range.min_value;
            Ok(if span > T::zero() {
                col.iter().map(|&x| (x - range.min_value) / span * width + scale_min).collect()
            } else {
                vec![scale_min; col.len()]
            })
        })
        .collect::<Result<Vec<Vec<T>>>>()?;
    table.with_columns(columns)
}
