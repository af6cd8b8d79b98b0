//! The five benchmark classifiers behind one fit/score contract, plus hyperparameter
//! plumbing and model serialization.

pub mod boost;
pub mod forest;
pub(crate) mod growth;
pub mod mlp;
pub mod naive_bayes;
pub mod tree;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use boost::{BoostConfig, GradientBoosting};
pub use forest::{ForestConfig, RandomForest};
pub use growth::Node;
pub use mlp::{EpochStats, Mlp, MlpConfig};
pub use naive_bayes::{GaussianNb, NaiveBayesConfig};
pub use tree::{DecisionTree, TreeConfig};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::table::ColumnarTable;

/// Scores above this value are labelled attack.
pub const DECISION_THRESHOLD: f64 = 0.5;

pub trait Classifier<T: Scalar> {
    fn n_features(&self) -> usize;

    /// Attack score in `[0, 1]` per row.
    fn predict_scores(&self, x: &ColumnarTable<T>) -> Result<Vec<T>>;

    fn predict(&self, x: &ColumnarTable<T>) -> Result<Vec<u8>> {
        let cut = T::of(DECISION_THRESHOLD);
        Ok(self.predict_scores(x)?.into_iter().map(|s| u8::from(s > cut)).collect())
    }
}

pub(crate) fn check_width<T: Scalar>(expected: usize, x: &ColumnarTable<T>) -> Result<()> {
    if x.n_features() != expected {
        return Err(Error::Contract(format!("model expects {expected} features, table has {}", x.n_features())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Nb,
    Dt,
    Rf,
    Gb,
    Mlp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [Algorithm::Nb, Algorithm::Dt, Algorithm::Rf, Algorithm::Gb, Algorithm::Mlp];

    pub fn id(self) -> &'static str {
        match self {
            Algorithm::Nb => "nb",
            Algorithm::Dt => "dt",
            Algorithm::Rf => "rf",
            Algorithm::Gb => "gb",
            Algorithm::Mlp => "mlp",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Algorithm::Nb => "Gaussian Naive Bayes",
            Algorithm::Dt => "Decision Tree",
            Algorithm::Rf => "Random Forest",
            Algorithm::Gb => "Gradient Boosting",
            Algorithm::Mlp => "Neural Network",
        }
    }

    /// Every tunable hyperparameter with its default value, in canonical order.
    pub fn default_params(self) -> Assignment {
        use ParamValue::*;
        let pairs: Vec<(&str, ParamValue)> = match self {
            Algorithm::Nb => vec![("var_smoothing", Float(1e-9))],
            Algorithm::Dt => vec![("max_depth", Text("none".into())), ("min_samples_split", Int(2))],
            Algorithm::Rf => vec![
                ("n_trees", Int(100)),
                ("max_depth", Text("none".into())),
                ("min_samples_split", Int(2)),
                ("max_features", Text("sqrt".into())),
                ("bootstrap", Bool(true)),
            ],
            Algorithm::Gb => vec![
                ("rounds", Int(100)),
                ("learning_rate", Float(0.3)),
                ("max_depth", Int(6)),
                ("lambda", Float(1.0)),
                ("min_child_weight", Float(1.0)),
            ],
            Algorithm::Mlp => vec![
                ("learning_rate", Float(1e-3)),
                ("dropout", Float(0.3)),
                ("batch_size", Int(512)),
                ("max_epochs", Int(100)),
                ("patience", Int(5)),
                ("validation_fraction", Float(0.1)),
            ],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_', ' '], "").as_str() {
            "nb" | "gnb" | "naivebayes" | "gaussiannb" | "gaussiannaivebayes" => Ok(Algorithm::Nb),
            "dt" | "tree" | "decisiontree" => Ok(Algorithm::Dt),
            "rf" | "forest" | "randomforest" => Ok(Algorithm::Rf),
            "gb" | "gbdt" | "boost" | "xgb" | "xgboost" | "gradientboosting" => Ok(Algorithm::Gb),
            "mlp" | "nn" | "neuralnetwork" => Ok(Algorithm::Mlp),
            _ => Err(Error::Config(format!("unknown algorithm '{s}' (expected nb, dt, rf, gb or mlp)"))),
        }
    }
}

/// One hyperparameter value as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(x) => write!(f, "{x:?}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

/// Hyperparameter name → value, in declaration order.
pub type Assignment = IndexMap<String, ParamValue>;

/// Renders an assignment as `name=value;name=value`.
pub fn format_assignment(a: &Assignment) -> String {
    a.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

struct Params<'a> {
    algorithm: Algorithm,
    values: &'a Assignment,
}

impl Params<'_> {
    fn bad(&self, name: &str, want: &str) -> Error {
        Error::Config(format!(
            "{}: parameter '{name}' must be {want}, got {:?}",
            self.algorithm,
            self.values.get(name)
        ))
    }

    fn value(&self, name: &str) -> &ParamValue {
        &self.values[name]
    }

    fn float(&self, name: &str) -> Result<f64> {
        match self.value(name) {
            ParamValue::Float(x) if x.is_finite() => Ok(*x),
            ParamValue::Int(i) => Ok(*i as f64),
            _ => Err(self.bad(name, "a finite number")),
        }
    }

    fn count(&self, name: &str) -> Result<usize> {
        match self.value(name) {
            ParamValue::Int(i) if *i >= 0 => Ok(*i as usize),
            _ => Err(self.bad(name, "a non-negative integer")),
        }
    }

    fn depth(&self, name: &str) -> Result<Option<usize>> {
        match self.value(name) {
            ParamValue::Text(s) if matches!(s.to_ascii_lowercase().as_str(), "none" | "unlimited") => Ok(None),
            ParamValue::Int(i) if *i >= 1 => Ok(Some(*i as usize)),
            _ => Err(self.bad(name, "a positive integer or \"none\"")),
        }
    }

    fn flag(&self, name: &str) -> Result<bool> {
        match self.value(name) {
            ParamValue::Bool(b) => Ok(*b),
            _ => Err(self.bad(name, "true or false")),
        }
    }
}

/// An algorithm plus hyperparameter overrides; unspecified parameters take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub algorithm: Algorithm,
    #[serde(default)]
    pub params: Assignment,
    #[serde(default)]
    pub seed: u64,
    /// Allow ensemble members to be fitted on the thread pool.
    #[serde(default)]
    pub parallel: bool,
}

impl ModelSpec {
    pub fn new(algorithm: Algorithm) -> Self {
        Self { algorithm, params: Assignment::new(), seed: 0, parallel: false }
    }

    pub fn with_params(mut self, params: Assignment) -> Self {
        self.params = params;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Defaults overlaid with the overrides. Unknown names are a config error.
    pub fn resolved_params(&self) -> Result<Assignment> {
        let mut all = self.algorithm.default_params();
        for (k, v) in &self.params {
            match all.get_mut(k) {
                Some(slot) => *slot = v.clone(),
                None => {
                    let known: Vec<&str> = all.keys().map(String::as_str).collect();
                    return Err(Error::Config(format!(
                        "{}: unknown parameter '{k}' (known: {})",
                        self.algorithm,
                        known.join(", ")
                    )));
                }
            }
        }
        Ok(all)
    }

    /// Checks names and value types without fitting.
    pub fn validate(&self) -> Result<()> {
        self.build().map(|_| ())
    }

    fn build(&self) -> Result<Built> {
        let values = self.resolved_params()?;
        let p = Params { algorithm: self.algorithm, values: &values };
        Ok(match self.algorithm {
            Algorithm::Nb => {
                let var_smoothing = p.float("var_smoothing")?;
                if var_smoothing <= 0.0 {
                    return Err(p.bad("var_smoothing", "positive"));
                }
                Built::Nb(NaiveBayesConfig { var_smoothing })
            }
            Algorithm::Dt => Built::Dt(TreeConfig {
                max_depth: p.depth("max_depth")?,
                min_samples_split: p.count("min_samples_split")?.max(2),
            }),
            Algorithm::Rf => {
                let max_features = match p.value("max_features") {
                    ParamValue::Text(s) if s.eq_ignore_ascii_case("sqrt") => None,
                    ParamValue::Int(i) if *i >= 1 => Some(*i as usize),
                    _ => return Err(p.bad("max_features", "\"sqrt\" or a positive integer")),
                };
                let n_trees = p.count("n_trees")?;
                if n_trees == 0 {
                    return Err(p.bad("n_trees", "at least 1"));
                }
                Built::Rf(ForestConfig {
                    n_trees,
                    max_depth: p.depth("max_depth")?,
                    min_samples_split: p.count("min_samples_split")?.max(2),
                    max_features,
                    bootstrap: p.flag("bootstrap")?,
                    seed: self.seed,
                    parallel: self.parallel,
                })
            }
            Algorithm::Gb => {
                let cfg = BoostConfig {
                    rounds: p.count("rounds")?,
                    learning_rate: p.float("learning_rate")?,
                    max_depth: p.count("max_depth")?,
                    lambda: p.float("lambda")?,
                    min_child_weight: p.float("min_child_weight")?,
                };
                if cfg.learning_rate <= 0.0 || cfg.lambda < 0.0 || cfg.min_child_weight < 0.0 {
                    return Err(Error::Config(format!("gb: invalid parameters {cfg:?}")));
                }
                Built::Gb(cfg)
            }
            Algorithm::Mlp => {
                let cfg = MlpConfig {
                    learning_rate: p.float("learning_rate")?,
                    dropout: p.float("dropout")?,
                    batch_size: p.count("batch_size")?,
                    max_epochs: p.count("max_epochs")?,
                    patience: p.count("patience")?,
                    validation_fraction: p.float("validation_fraction")?,
                    seed: self.seed,
                    ..MlpConfig::default()
                };
                cfg.validate()?;
                Built::Mlp(cfg)
            }
        })
    }

    pub fn fit<T: Scalar>(&self, train: &ColumnarTable<T>) -> Result<TrainedModel<T>> {
        if train.is_empty() {
            return Err(Error::fit(self.algorithm.id(), "empty training set"));
        }
        Ok(match self.build()? {
            Built::Nb(c) => TrainedModel::Nb(GaussianNb::fit(train, &c)?),
            Built::Dt(c) => TrainedModel::Dt(DecisionTree::fit(train, &c)),
            Built::Rf(c) => TrainedModel::Rf(RandomForest::fit(train, &c)),
            Built::Gb(c) => TrainedModel::Gb(GradientBoosting::fit(train, &c)),
            Built::Mlp(c) => TrainedModel::Mlp(Mlp::fit(train, &c)?),
        })
    }
}

enum Built {
    Nb(NaiveBayesConfig),
    Dt(TreeConfig),
    Rf(ForestConfig),
    Gb(BoostConfig),
    Mlp(MlpConfig),
}

/// A fitted model of any of the five kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", rename_all = "lowercase")]
pub enum TrainedModel<T> {
    Nb(GaussianNb<T>),
    Dt(DecisionTree<T>),
    Rf(RandomForest<T>),
    Gb(GradientBoosting<T>),
    Mlp(Mlp<T>),
}

impl<T: Scalar> TrainedModel<T> {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            TrainedModel::Nb(_) => Algorithm::Nb,
            TrainedModel::Dt(_) => Algorithm::Dt,
            TrainedModel::Rf(_) => Algorithm::Rf,
            TrainedModel::Gb(_) => Algorithm::Gb,
            TrainedModel::Mlp(_) => Algorithm::Mlp,
        }
    }

    fn inner(&self) -> &dyn Classifier<T> {
        match self {
            TrainedModel::Nb(m) => m,
            TrainedModel::Dt(m) => m,
            TrainedModel::Rf(m) => m,
            TrainedModel::Gb(m) => m,
            TrainedModel::Mlp(m) => m,
        }
    }
}

impl<T: Scalar> Classifier<T> for TrainedModel<T> {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn predict_scores(&self, x: &ColumnarTable<T>) -> Result<Vec<T>> {
        self.inner().predict_scores(x)
    }
}

pub const MODEL_FORMAT: &str = "idsbench-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Versioned JSON envelope around a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelArtifact<T> {
    pub format: String,
    pub version: u32,
    pub scalar: String,
    pub algorithm: Algorithm,
    pub params: Assignment,
    pub feature_names: Vec<String>,
    pub model: TrainedModel<T>,
}

fn scalar_name<T: 'static>() -> &'static str {
    std::any::type_name::<T>()
}

impl<T: Scalar> ModelArtifact<T> {
    pub fn new(model: TrainedModel<T>, params: Assignment, feature_names: Vec<String>) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_FORMAT_VERSION,
            scalar: scalar_name::<T>().into(),
            algorithm: model.algorithm(),
            params,
            feature_names,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Model(e.to_string()))?;
        let format = value.get("format").and_then(|v| v.as_str()).unwrap_or_default();
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or_default();
        if format != MODEL_FORMAT || version != u64::from(MODEL_FORMAT_VERSION) {
            return Err(Error::Model(format!(
                "unsupported artifact '{format}' v{version} (expected '{MODEL_FORMAT}' v{MODEL_FORMAT_VERSION})"
            )));
        }
        let scalar = value.get("scalar").and_then(|v| v.as_str()).unwrap_or_default();
        if scalar != scalar_name::<T>() {
            return Err(Error::Model(format!("artifact stores {scalar} values, requested {}", scalar_name::<T>())));
        }
        serde_json::from_value(value).map_err(|e| Error::Model(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn toy(n: usize) -> ColumnarTable<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
        let labels = rows.iter().map(|r| u8::from(r[0] + r[1] > 1.0)).collect();
        ColumnarTable::from_rows(&["a", "b", "c"], &rows, labels).unwrap()
    }

    fn quick_spec(alg: Algorithm) -> ModelSpec {
        let mut p = Assignment::new();
        match alg {
            Algorithm::Rf => {
                p.insert("n_trees".into(), ParamValue::Int(5));
            }
            Algorithm::Gb => {
                p.insert("rounds".into(), ParamValue::Int(5));
            }
            Algorithm::Mlp => {
                p.insert("max_epochs".into(), ParamValue::Int(3));
                p.insert("batch_size".into(), ParamValue::Int(32));
            }
            _ => {}
        }
        ModelSpec::new(alg).with_params(p).with_seed(7)
    }

    #[test]
    fn every_model_round_trips_through_json() {
        let t = toy(120);
        for alg in Algorithm::ALL {
            let spec = quick_spec(alg);
            let model = spec.fit(&t).unwrap();
            let before = model.predict_scores(&t).unwrap();
            assert!(before.iter().all(|s| (0.0..=1.0).contains(s)), "{alg}");
            let labels = model.predict(&t).unwrap();
            let expected: Vec<u8> = before.iter().map(|&s| u8::from(s > 0.5)).collect();
            assert_eq!(labels, expected);

            let art = ModelArtifact::new(model, spec.resolved_params().unwrap(), t.names().to_vec());
            let back = ModelArtifact::<f64>::from_json(&art.to_json().unwrap()).unwrap();
            assert_eq!(back, art, "{alg}");
            assert_eq!(back.model.predict_scores(&t).unwrap(), before, "{alg}");
        }
    }

    #[test]
    fn artifact_file_round_trip_and_version_check() {
        let t = toy(60);
        let spec = ModelSpec::new(Algorithm::Dt);
        let art = ModelArtifact::new(spec.fit(&t).unwrap(), spec.resolved_params().unwrap(), t.names().to_vec());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dt.json");
        art.save(&path).unwrap();
        assert_eq!(ModelArtifact::<f64>::load(&path).unwrap(), art);
        assert!(matches!(ModelArtifact::<f32>::load(&path), Err(Error::Model(_))));
        let bumped = art.to_json().unwrap().replace("\"version\":1", "\"version\":99");
        assert!(matches!(ModelArtifact::<f64>::from_json(&bumped), Err(Error::Model(_))));
    }

    #[test]
    fn unknown_or_mistyped_parameters_are_config_errors() {
        let mut p = Assignment::new();
        p.insert("depth".into(), ParamValue::Int(3));
        assert!(matches!(ModelSpec::new(Algorithm::Dt).with_params(p).validate(), Err(Error::Config(_))));
        let mut p = Assignment::new();
        p.insert("max_depth".into(), ParamValue::Text("deep".into()));
        assert!(matches!(ModelSpec::new(Algorithm::Dt).with_params(p).validate(), Err(Error::Config(_))));
        for alg in Algorithm::ALL {
            ModelSpec::new(alg).validate().unwrap();
        }
    }

    #[test]
    fn param_values_parse_from_toml_and_format() {
        let v: IndexMap<String, Vec<ParamValue>> =
            toml::from_str("max_depth = [\"none\", 10]\nlr = [0.1, 1e-4]\nb = [true]").unwrap();
        assert_eq!(v["max_depth"], vec![ParamValue::Text("none".into()), ParamValue::Int(10)]);
        assert_eq!(v["lr"], vec![ParamValue::Float(0.1), ParamValue::Float(1e-4)]);
        assert_eq!(v["b"], vec![ParamValue::Bool(true)]);
        let mut a = Assignment::new();
        a.insert("n_trees".into(), ParamValue::Int(50));
        a.insert("max_depth".into(), ParamValue::Text("none".into()));
        a.insert("var_smoothing".into(), ParamValue::Float(1e-9));
        assert_eq!(format_assignment(&a), "n_trees=50;max_depth=none;var_smoothing=1e-9");
    }

    #[test]
    fn algorithm_ids_parse() {
        for alg in Algorithm::ALL {
            assert_eq!(alg.id().parse::<Algorithm>().unwrap(), alg);
        }
        assert_eq!("Random Forest".parse::<Algorithm>().unwrap(), Algorithm::Rf);
        assert!("svm".parse::<Algorithm>().is_err());
    }
}
