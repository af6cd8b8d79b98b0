use super::PreprocessReport;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::table::ColumnarTable;

/// Population mean and standard deviation of a column.
pub fn mean_std<T: Scalar>(xs: &[T]) -> (T, T) {
    let n = T::of_usize(xs.len());
    let mean = xs.iter().copied().sum::<T>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
    (mean, var.sqrt())
}

/// Drops every row holding a cell whose standardized value exceeds `threshold` in
/// magnitude. Statistics come from the input table; zero-variance columns never
/// trigger a drop.
pub fn zscore_filter<T: Scalar>(
    table: &ColumnarTable<T>,
    threshold: T,
) -> Result<(ColumnarTable<T>, PreprocessReport)> {
    if table.is_empty() {
        return Err(Error::EmptyDataset { stage: "z-score filter (input)".into() });
    }
    if !(threshold > T::zero()) {
        return Err(Error::Contract("z-score threshold must be positive".into()));
    }
    let mut keep = vec![true; table.n_rows()];
    for col in table.columns() {
        let (mean, std) = mean_std(col);
        if std == T::zero() {
            continue;
        }
        for (k, &x) in keep.iter_mut().zip(col) {
            if ((x - mean) / std).abs() > threshold {
                *k = false;
            }
        }
    }
    let out = table.filter_rows(&keep);
    if out.is_empty() {
        return Err(Error::EmptyDataset { stage: "z-score filter".into() });
    }
    let report = PreprocessReport {
        rows_dropped_outlier: table.n_rows() - out.n_rows(),
        ..PreprocessReport::default()
    };
    Ok((out, report))
}
