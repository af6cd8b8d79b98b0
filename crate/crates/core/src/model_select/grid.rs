use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::FoldPlan;
use crate::classifiers::{format_assignment, Algorithm, Assignment, Classifier, ModelSpec, ParamValue};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::table::ColumnarTable;

/// Candidate values per hyperparameter, in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub algorithm: Algorithm,
    pub params: IndexMap<String, Vec<ParamValue>>,
}

impl ParamGrid {
    pub fn new(algorithm: Algorithm, params: IndexMap<String, Vec<ParamValue>>) -> Result<Self> {
        let grid = Self { algorithm, params };
        grid.validate()?;
        Ok(grid)
    }

    /// The repository's stand-in grid for each algorithm.
    pub fn default_for(algorithm: Algorithm) -> Self {
        use ParamValue::{Float, Int, Text};
        let none = || Text("none".into());
        let pairs: Vec<(&str, Vec<ParamValue>)> = match algorithm {
            Algorithm::Rf => vec![
                ("n_trees", vec![Int(50), Int(100), Int(200)]),
                ("max_depth", vec![none(), Int(10), Int(20)]),
            ],
            Algorithm::Dt => vec![
                ("max_depth", vec![none(), Int(5), Int(10), Int(20)]),
                ("min_samples_split", vec![Int(2), Int(10)]),
            ],
            Algorithm::Gb => vec![
                ("rounds", vec![Int(50), Int(100)]),
                ("learning_rate", vec![Float(0.1), Float(0.3)]),
                ("max_depth", vec![Int(3), Int(6)]),
            ],
            Algorithm::Nb => vec![("var_smoothing", vec![Float(1e-9), Float(1e-8), Float(1e-7)])],
            Algorithm::Mlp => vec![
                ("learning_rate", vec![Float(1e-3), Float(1e-4)]),
                ("dropout", vec![Float(0.2), Float(0.3)]),
            ],
        };
        Self { algorithm, params: pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::Config(format!("grid for {} declares no parameters", self.algorithm)));
        }
        for (name, values) in &self.params {
            if values.is_empty() {
                return Err(Error::Config(format!("grid for {}: '{name}' has no values", self.algorithm)));
            }
        }
        for point in self.points() {
            ModelSpec::new(self.algorithm).with_params(point).validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.params.values().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lexicographic product of the value lists; the last parameter varies fastest.
    pub fn points(&self) -> Vec<Assignment> {
        let lists: Vec<(&String, &Vec<ParamValue>)> = self.params.iter().collect();
        let total = self.len();
        (0..total)
            .map(|mut idx| {
                let mut chosen = vec![0; lists.len()];
                for (slot, (_, values)) in chosen.iter_mut().zip(&lists).rev() {
                    *slot = idx % values.len();
                    idx /= values.len();
                }
                lists.iter().zip(chosen).map(|((name, values), i)| ((*name).clone(), values[i].clone())).collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub id: usize,
    pub params: Assignment,
    pub fold_accuracy: Vec<f64>,
    /// Mean validation accuracy; negative infinity when a fit failed.
    pub mean_accuracy: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub algorithm: Algorithm,
    pub points: Vec<GridPoint>,
    pub best: usize,
}

impl SearchResult {
    pub fn best_point(&self) -> &GridPoint {
        &self.points[self.best]
    }

    pub fn best_params(&self) -> &Assignment {
        &self.points[self.best].params
    }

    /// One row per grid point: id, assignment, per-fold accuracies, mean, error.
    pub fn to_csv(&self) -> String {
        let k = self.points.iter().map(|p| p.fold_accuracy.len()).max().unwrap_or(0);
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id".to_string(), "params".to_string()];
        header.extend((1..=k).map(|f| format!("fold_{f}")));
        header.extend(["mean_accuracy".to_string(), "best".to_string(), "error".to_string()]);
        w.write_record(&header).expect("in-memory write");
        for p in &self.points {
            let mut row = vec![p.id.to_string(), format_assignment(&p.params)];
            row.extend((0..k).map(|f| p.fold_accuracy.get(f).map_or(String::new(), |a| a.to_string())));
            row.push(p.mean_accuracy.to_string());
            row.push((p.id == self.best).to_string());
            row.push(p.error.clone().unwrap_or_default());
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

fn accuracy(truth: &[u8], pred: &[u8]) -> f64 {
    truth.iter().zip(pred).filter(|(a, b)| a == b).count() as f64 / truth.len().max(1) as f64
}

fn score_point<T: Scalar>(spec: &ModelSpec, train: &ColumnarTable<T>, plan: &FoldPlan) -> Result<Vec<f64>> {
    (0..plan.k)
        .map(|fold| {
            let (fit_rows, val_rows) = plan.split(fold);
            let fit = train.select_rows(&fit_rows);
            let val = train.select_rows(&val_rows);
            let model = spec.fit(&fit)?;
            Ok(accuracy(val.labels(), &model.predict(&val)?))
        })
        .collect()
}

/// Exhaustive grid search scored by mean k-fold validation accuracy. `base` supplies the
/// seed and the parallel flag; ties go to the lowest enumeration index.
pub fn grid_search<T: Scalar>(
    grid: &ParamGrid,
    base: &ModelSpec,
    train: &ColumnarTable<T>,
    plan: &FoldPlan,
    parallel: bool,
) -> Result<SearchResult> {
    if plan.fold_of.len() != train.n_rows() {
        return Err(Error::Contract(format!(
            "fold plan covers {} rows, training table has {}",
            plan.fold_of.len(),
            train.n_rows()
        )));
    }
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::Search(format!("empty grid for {}", grid.algorithm)));
    }
    let evaluate = |(id, params): (usize, &Assignment)| {
        let spec = ModelSpec { algorithm: grid.algorithm, params: params.clone(), ..base.clone() };
        match score_point(&spec, train, plan) {
            Ok(folds) => {
                let mean = folds.iter().sum::<f64>() / folds.len() as f64;
                GridPoint { id, params: params.clone(), fold_accuracy: folds, mean_accuracy: mean, error: None }
            }
            Err(e) => {
                log::warn!("{} grid point {id} ({}) failed: {e}", grid.algorithm, format_assignment(params));
                GridPoint {
                    id,
                    params: params.clone(),
                    fold_accuracy: Vec::new(),
                    mean_accuracy: f64::NEG_INFINITY,
                    error: Some(e.to_string()),
                }
            }
        }
    };
    let scored: Vec<GridPoint> = if parallel {
        points.par_iter().enumerate().map(evaluate).collect()
    } else {
        points.iter().enumerate().map(evaluate).collect()
    };
    let mut best: Option<usize> = None;
    for p in &scored {
        if p.error.is_none() && best.is_none_or(|b| p.mean_accuracy > scored[b].mean_accuracy) {
            best = Some(p.id);
        }
    }
    match best {
        Some(best) => Ok(SearchResult { algorithm: grid.algorithm, points: scored, best }),
        None => Err(Error::Search(format!(
            "all {} grid points for {} failed; first error: {}",
            scored.len(),
            grid.algorithm,
            scored[0].error.as_deref().unwrap_or("unknown")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_select::make_folds;

    fn separable(n: usize) -> ColumnarTable<f64> {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64, ((i * 7) % 5) as f64]).collect();
        let labels = (0..n).map(|i| u8::from(i * 2 >= n)).collect();
        ColumnarTable::from_rows(&["x", "noise"], &rows, labels).unwrap()
    }

    fn grid(alg: Algorithm, pairs: &[(&str, Vec<ParamValue>)]) -> ParamGrid {
        ParamGrid::new(alg, pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()).unwrap()
    }

    #[test]
    fn enumeration_is_lexicographic_last_fastest() {
        let g = grid(
            Algorithm::Gb,
            &[
                ("rounds", vec![ParamValue::Int(1), ParamValue::Int(2)]),
                ("max_depth", vec![ParamValue::Int(1), ParamValue::Int(2), ParamValue::Int(3)]),
            ],
        );
        let got: Vec<String> = g.points().iter().map(format_assignment).collect();
        assert_eq!(
            got,
            [
                "rounds=1;max_depth=1",
                "rounds=1;max_depth=2",
                "rounds=1;max_depth=3",
                "rounds=2;max_depth=1",
                "rounds=2;max_depth=2",
                "rounds=2;max_depth=3"
            ]
        );
    }

    #[test]
    fn default_grids_are_valid() {
        let sizes: Vec<usize> = Algorithm::ALL.iter().map(|&a| ParamGrid::default_for(a).len()).collect();
        assert_eq!(sizes, vec![3, 8, 9, 8, 4]);
        for a in Algorithm::ALL {
            ParamGrid::default_for(a).validate().unwrap();
        }
    }

    #[test]
    fn singleton_grid_equals_plain_cross_validation() {
        let t = separable(40);
        let plan = make_folds(t.labels(), 5, 1).unwrap();
        let g = grid(Algorithm::Dt, &[("max_depth", vec![ParamValue::Int(1)])]);
        let r = grid_search(&g, &ModelSpec::new(Algorithm::Dt), &t, &plan, false).unwrap();
        assert_eq!(r.best, 0);
        let spec = ModelSpec::new(Algorithm::Dt).with_params(g.points()[0].clone());
        let mut accs = Vec::new();
        for f in 0..5 {
            let (fit, val) = plan.split(f);
            let m = spec.fit(&t.select_rows(&fit)).unwrap();
            let v = t.select_rows(&val);
            accs.push(accuracy(v.labels(), &m.predict(&v).unwrap()));
        }
        assert_eq!(r.points[0].fold_accuracy, accs);
        assert_eq!(r.points[0].mean_accuracy, accs.iter().sum::<f64>() / 5.0);
    }

    #[test]
    fn strictly_better_point_wins() {
        let t = separable(60);
        let plan = make_folds(t.labels(), 3, 2).unwrap();
        // zero rounds can only predict the prior, one stump separates the classes
        let g = grid(Algorithm::Gb, &[("rounds", vec![ParamValue::Int(0), ParamValue::Int(20)])]);
        let r = grid_search(&g, &ModelSpec::new(Algorithm::Gb), &t, &plan, false).unwrap();
        assert_eq!(r.best, 1);
        assert!(r.points[1].mean_accuracy > r.points[0].mean_accuracy);
    }

    #[test]
    fn ties_resolve_to_smallest_index() {
        let t = separable(30);
        let plan = make_folds(t.labels(), 3, 4).unwrap();
        // both depths fit the single threshold exactly
        let g = grid(Algorithm::Dt, &[("max_depth", vec![ParamValue::Int(5), ParamValue::Int(3)])]);
        let r = grid_search(&g, &ModelSpec::new(Algorithm::Dt), &t, &plan, false).unwrap();
        let scores: Vec<f64> = r.points.iter().map(|p| p.mean_accuracy).collect();
        assert_eq!(scores[0], scores[1], "oracle: both points score identically");
        assert_eq!(r.best, 0);
    }

    #[test]
    fn failing_points_score_negative_infinity() {
        let t = separable(30);
        let plan = make_folds(t.labels(), 3, 4).unwrap();
        let g = grid(Algorithm::Mlp, &[("batch_size", vec![ParamValue::Int(8)]), ("max_epochs", vec![ParamValue::Int(1)])]);
        let mut bad = t.columns().to_vec();
        bad[0][3] = f64::INFINITY;
        let broken = t.with_columns(bad).unwrap();
        let err = grid_search(&g, &ModelSpec::new(Algorithm::Mlp), &broken, &plan, false).unwrap_err();
        assert!(matches!(err, Error::Search(_)), "{err}");

        let g = grid(Algorithm::Nb, &[("var_smoothing", vec![ParamValue::Float(1e-9)])]);
        let single = t.select_rows(&(0..15).collect::<Vec<_>>());
        let plan = FoldPlan { k: 3, fold_of: (0..15).map(|i| i % 3).collect(), stratified: false, seed: 0 };
        let err = grid_search(&g, &ModelSpec::new(Algorithm::Nb), &single, &plan, false).unwrap_err();
        assert!(matches!(err, Error::Search(_)));
    }

    #[test]
    fn parallel_and_serial_agree_bit_for_bit() {
        let t = separable(80);
        let plan = make_folds(t.labels(), 5, 8).unwrap();
        let g = ParamGrid::default_for(Algorithm::Dt);
        let a = grid_search(&g, &ModelSpec::new(Algorithm::Dt), &t, &plan, false).unwrap();
        let b = grid_search(&g, &ModelSpec::new(Algorithm::Dt), &t, &plan, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.to_csv().starts_with("id,params,fold_1,fold_2,fold_3,fold_4,fold_5,mean_accuracy,best,error\n"));
    }
}
