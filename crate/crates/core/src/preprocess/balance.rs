use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PreprocessReport;
use crate::scalar::Scalar;
use crate::table::{ColumnarTable, ATTACK, BENIGN};

/// Undersamples the majority class, without replacement, down to the minority count.
/// Survivors keep their original order. Single-class input is returned unchanged with
/// a warning in the report.
pub fn balance<T: Scalar>(table: &ColumnarTable<T>, seed: u64) -> (ColumnarTable<T>, PreprocessReport) {
    let mut report = PreprocessReport::default();
    let [benign, attack] = table.class_counts();
    if benign == 0 || attack == 0 {
        let msg = "balancing skipped: single-class input".to_string();
        log::warn!("{msg}");
        report.warnings.push(msg);
        return (table.clone(), report);
    }
    if benign == attack {
        return (table.clone(), report);
    }
    let (majority, target) = if benign > attack { (BENIGN, attack) } else { (ATTACK, benign) };
    let majority_rows: Vec<usize> =
        table.labels().iter().enumerate().filter(|(_, &l)| l == majority).map(|(i, _)| i).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![true; table.n_rows()];
    for &r in &majority_rows {
        keep[r] = false;
    }
    for i in rand::seq::index::sample(&mut rng, majority_rows.len(), target) {
        keep[majority_rows[i]] = true;
    }
    let out = table.filter_rows(&keep);
    report.rows_dropped_balancing = table.n_rows() - out.n_rows();
    (out, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(benign: usize, attack: usize) -> ColumnarTable<f64> {
        let n = benign + attack;
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i >= benign)).collect();
        let col = (0..n).map(|i| i as f64).collect();
        ColumnarTable::new(vec!["id".into()], vec![col], labels).unwrap()
    }

    #[test]
    fn undersamples_majority_to_minority() {
        let (out, rep) = balance(&table(100, 10), 3);
        assert_eq!(out.class_counts(), [10, 10]);
        assert_eq!(rep.rows_dropped_balancing, 90);
        let ids = out.column(0);
        assert!(ids.windows(2).all(|w| w[0] < w[1]), "order preserved");
        assert!(ids.iter().rev().take(10).all(|&v| v >= 100.0), "all attacks kept");
    }

    #[test]
    fn balanced_input_is_a_fixed_point() {
        let t = table(50, 50);
        let (out, rep) = balance(&t, 3);
        assert_eq!(out, t);
        assert_eq!(rep.rows_dropped_balancing, 0);
    }

    #[test]
    fn same_seed_same_survivors() {
        let t = table(30, 200);
        let (a, _) = balance(&t, 9);
        let (b, _) = balance(&t, 9);
        assert_eq!(a.column(0), b.column(0));
        let (c, _) = balance(&t, 10);
        assert_ne!(a.column(0), c.column(0));
    }

    #[test]
    fn single_class_is_skipped_with_warning() {
        let t = table(5, 0);
        let (out, rep) = balance(&t, 1);
        assert_eq!(out, t);
        assert_eq!(rep.warnings.len(), 1);
    }
}
