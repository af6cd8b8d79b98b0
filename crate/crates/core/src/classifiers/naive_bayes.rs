use serde::{Deserialize, Serialize};

use super::{check_width, Classifier};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::table::ColumnarTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesConfig {
    /// Fraction of the largest feature variance added to every class variance.
    pub var_smoothing: f64,
}

impl Default for NaiveBayesConfig {
    fn default() -> Self {
        Self { var_smoothing: 1e-9 }
    }
}

/// Per-class Gaussian statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ClassStats<T> {
    pub log_prior: T,
    pub mean: Vec<T>,
    /// Population variance plus the smoothing epsilon.
    pub var: Vec<T>,
}

/// Gaussian naive Bayes over two classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GaussianNb<T> {
    pub(crate) classes: [ClassStats<T>; 2],
    pub(crate) epsilon: T,
    pub(crate) n_features: usize,
}

fn population_moments<T: Scalar>(values: impl Iterator<Item = T> + Clone) -> (T, T) {
    let mut n = 0usize;
    let mut sum = T::zero();
    for v in values.clone() {
        sum += v;
        n += 1;
    }
    let mean = sum / T::of_usize(n);
    let ss = values.map(|v| (v - mean) * (v - mean)).sum::<T>();
    (mean, ss / T::of_usize(n))
}

impl<T: Scalar> GaussianNb<T> {
    pub fn fit(train: &ColumnarTable<T>, config: &NaiveBayesConfig) -> Result<Self> {
        if !(config.var_smoothing > 0.0) {
            return Err(Error::Config(format!("var_smoothing must be positive, got {}", config.var_smoothing)));
        }
        let counts = train.class_counts();
        if counts.contains(&0) {
            return Err(Error::fit("nb", format!("both classes required, class counts {counts:?}")));
        }
        let labels = train.labels();
        let n = T::of_usize(train.n_rows());

        let max_var = train
            .columns()
            .iter()
            .map(|c| population_moments(c.iter().copied()).1)
            .fold(T::zero(), T::max);
        let epsilon = if max_var > T::zero() {
            T::of(config.var_smoothing) * max_var
        } else {
            T::of(config.var_smoothing)
        };

        let class_stats = |class: u8| {
            let mut mean = Vec::with_capacity(train.n_features());
            let mut var = Vec::with_capacity(train.n_features());
            for col in train.columns() {
                let members = col.iter().zip(labels).filter(|(_, &l)| l == class).map(|(&v, _)| v);
                let (m, v) = population_moments(members);
                mean.push(m);
                var.push(v + epsilon);
            }
            ClassStats { log_prior: (T::of_usize(counts[class as usize]) / n).ln(), mean, var }
        };
        Ok(Self { classes: [class_stats(0), class_stats(1)], epsilon, n_features: train.n_features() })
    }

    pub fn class_stats(&self, class: u8) -> &ClassStats<T> {
        &self.classes[class as usize]
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    /// Joint log-likelihood `log P(c) + Σ log N(x_j; μ_cj, σ²_cj)` of one sample.
    pub fn joint_log_likelihood(&self, class: u8, x: &[T]) -> T {
        let s = &self.classes[class as usize];
        let two_pi = T::of(std::f64::consts::TAU);
        let half = T::of(0.5);
        let mut jll = s.log_prior;
        for ((&xj, &m), &v) in x.iter().zip(&s.mean).zip(&s.var) {
            let d = xj - m;
            jll -= half * ((two_pi * v).ln() + d * d / v);
        }
        jll
    }

    /// Posterior probability of the attack class for one sample.
    pub fn score_one(&self, x: &[T]) -> Result<T> {
        if x.len() != self.n_features {
            return Err(Error::Contract(format!("expected {} features, got {}", self.n_features, x.len())));
        }
        let j0 = self.joint_log_likelihood(0, x);
        let j1 = self.joint_log_likelihood(1, x);
        Ok(T::one() / (T::one() + (j0 - j1).exp()))
    }
}

impl<T: Scalar> Classifier<T> for GaussianNb<T> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_scores(&self, x: &ColumnarTable<T>) -> Result<Vec<T>> {
        check_width(self.n_features, x)?;
        let mut row = vec![T::zero(); self.n_features];
        (0..x.n_rows())
            .map(|r| {
                x.row_into(r, &mut row);
                self.score_one(&row)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn six_rows() -> ColumnarTable<f64> {
        ColumnarTable::from_rows(
            &["a", "b"],
            &[vec![1.0, 2.0], vec![3.0, 1.0], vec![2.0, 3.0], vec![6.0, 5.0], vec![7.0, 7.0], vec![8.0, 6.0]],
            vec![0, 0, 0, 1, 1, 1],
        )
        .unwrap()
    }

    #[test]
    fn population_moments_of_two_points() {
        let t = ColumnarTable::from_rows(&["x"], &[vec![1.0], vec![3.0], vec![10.0], vec![12.0]], vec![0, 0, 1, 1])
            .unwrap();
        let m = GaussianNb::<f64>::fit(&t, &NaiveBayesConfig::default()).unwrap();
        let s = m.class_stats(0);
        assert_eq!(s.mean[0], 2.0);
        assert!((s.var[0] - m.epsilon() - 1.0).abs() < 1e-15);
        assert!((s.log_prior.exp() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn closed_form_posterior_oracle() {
        let t = six_rows();
        let eps_factor = 1e-9;
        let m = GaussianNb::<f64>::fit(&t, &NaiveBayesConfig { var_smoothing: eps_factor }).unwrap();

        // moments by hand: class 0 a = {1,3,2}, b = {2,1,3}; class 1 a = {6,7,8}, b = {5,7,6}
        // every class/feature has deviations {-1, 0, 1}, so variance = 2/3
        // whole-column variance of a = {1,3,2,6,7,8}: mean 4.5, Σd² = 41.5, var = 41.5/6
        // whole-column variance of b = {2,1,3,5,7,6}: mean 4, Σd² = 28, var = 28/6
        let eps = eps_factor * 41.5 / 6.0;
        let means = [[2.0, 2.0], [7.0, 6.0]];
        let var = 2.0 / 3.0 + eps;
        let density = |x: f64, mu: f64| (-(x - mu).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        for x in [[1.0, 2.0], [4.5, 4.0], [5.0, 3.5], [4.0, 4.5], [7.0, 6.0]] {
            let p0 = 0.5 * density(x[0], means[0][0]) * density(x[1], means[0][1]);
            let p1 = 0.5 * density(x[0], means[1][0]) * density(x[1], means[1][1]);
            let expected = p1 / (p0 + p1);
            let got = m.score_one(&x).unwrap();
            assert!((got - expected).abs() < 1e-9, "x={x:?}: {got} vs {expected}");
        }
    }

    #[test]
    fn symmetric_midpoint_scores_one_half() {
        let t = ColumnarTable::from_rows(&["x"], &[vec![-2.0], vec![-1.0], vec![1.0], vec![2.0]], vec![0, 0, 1, 1])
            .unwrap();
        let m = GaussianNb::<f64>::fit(&t, &NaiveBayesConfig::default()).unwrap();
        assert!((m.score_one(&[0.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(m.score_one(&[1.5]).unwrap() > 0.99);
    }

    #[test]
    fn constant_feature_gets_floor_variance() {
        let t = ColumnarTable::from_rows(
            &["c", "x"],
            &[vec![5.0, 0.0], vec![5.0, 1.0], vec![5.0, 9.0], vec![5.0, 10.0]],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let m = GaussianNb::<f64>::fit(&t, &NaiveBayesConfig::default()).unwrap();
        assert_eq!(m.class_stats(0).var[0], m.epsilon());
        assert!(m.epsilon() > 0.0);
        let scores = m.predict_scores(&t).unwrap();
        assert!(scores.iter().all(|s| s.is_finite()));
        assert_eq!(m.predict(&t).unwrap(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn single_class_is_a_fit_error() {
        let t = ColumnarTable::from_rows(&["x"], &[vec![1.0], vec![2.0]], vec![1, 1]).unwrap();
        assert!(matches!(GaussianNb::<f64>::fit(&t, &NaiveBayesConfig::default()), Err(Error::Fit { .. })));
    }

    #[test]
    fn argmax_invariant_under_uniform_prior_rescaling() {
        let t = six_rows();
        let m = GaussianNb::<f64>::fit(&t, &NaiveBayesConfig::default()).unwrap();
        let mut scaled = m.clone();
        for c in scaled.classes.iter_mut() {
            c.log_prior += 50.0f64.ln();
        }
        assert_eq!(m.predict(&t).unwrap(), scaled.predict(&t).unwrap());
        let far = ColumnarTable::from_rows(&["a", "b"], &[vec![1e3, -1e3]], vec![0]).unwrap();
        assert!(m.predict_scores(&far).unwrap()[0].is_finite());
    }

    #[test]
    fn width_mismatch_is_contract_error() {
        let m = GaussianNb::<f64>::fit(&six_rows(), &NaiveBayesConfig::default()).unwrap();
        assert!(matches!(m.score_one(&[1.0]), Err(Error::Contract(_))));
    }
}
