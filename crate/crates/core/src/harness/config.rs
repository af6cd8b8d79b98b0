use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::classifiers::{Algorithm, ParamValue};
use crate::error::{Error, Result};
use crate::ingest::{DatasetPreset, Schema};
use crate::model_select::ParamGrid;
use crate::preprocess::PreprocessConfig;

/// Environment variable naming the default data directory.
pub const DATA_DIR_ENV: &str = "IDSBENCH_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "data";
pub const DEFAULT_ROW_BUDGET: usize = 60_000;

/// The three experimentation scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scenario {
    /// No preprocessing, default hyperparameters.
    #[serde(rename = "CE1")]
    Ce1,
    /// Preprocessing, default hyperparameters.
    #[serde(rename = "CE2")]
    Ce2,
    /// Preprocessing, grid-searched hyperparameters.
    #[serde(rename = "CE3")]
    Ce3,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Ce1, Scenario::Ce2, Scenario::Ce3];

    pub fn id(self) -> &'static str {
        match self {
            Scenario::Ce1 => "CE1",
            Scenario::Ce2 => "CE2",
            Scenario::Ce3 => "CE3",
        }
    }

    pub fn preprocesses(self) -> bool {
        self != Scenario::Ce1
    }

    pub fn searches(self) -> bool {
        self == Scenario::Ce3
    }

    /// Parses `ce1`, `ce2`, `ce3` or `all`.
    pub fn parse_selection(s: &str) -> Result<Vec<Scenario>> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(Scenario::ALL.to_vec());
        }
        s.split(',').map(str::parse).collect()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ce1" => Ok(Scenario::Ce1),
            "ce2" => Ok(Scenario::Ce2),
            "ce3" => Ok(Scenario::Ce3),
            _ => Err(Error::Config(format!("unknown scenario '{s}' (expected ce1, ce2, ce3 or all)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub preset: DatasetPreset,
    /// Overrides the data directory from the environment.
    pub data_dir: Option<PathBuf>,
    /// Slice names or ids; empty selects every slice of the preset.
    pub slices: Vec<String>,
    /// Stratified row cap per slice; 0 disables the cap.
    pub row_budget: usize,
    /// Files for the custom preset, relative to the data directory unless absolute.
    pub files: Vec<PathBuf>,
    /// Schema for the custom preset.
    pub schema: Option<Schema>,
    /// Whether the custom dataset may be balanced.
    pub balance: bool,
}

impl Default for DatasetSection {
    fn default() -> Self {
        Self {
            preset: DatasetPreset::Kdd99,
            data_dir: None,
            slices: Vec::new(),
            row_budget: DEFAULT_ROW_BUDGET,
            files: Vec::new(),
            schema: None,
            balance: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub split: u64,
    pub folds: u64,
    pub model: u64,
    pub balance: u64,
    pub subsample: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self { split: 42, folds: 42, model: 42, balance: 42, subsample: 42 }
    }
}

impl Seeds {
    pub fn all(seed: u64) -> Self {
        Self { split: seed, folds: seed, model: seed, balance: seed, subsample: seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub scenarios: Vec<Scenario>,
    pub test_fraction: f64,
    pub k_folds: usize,
    /// Run grid points and ensemble members on the thread pool. Timings are then not comparable.
    pub parallel: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { scenarios: Scenario::ALL.to_vec(), test_fraction: 0.3, k_folds: 5, parallel: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub save_models: bool,
    pub markdown: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("results"), save_models: true, markdown: true }
    }
}

/// Declarative description of one benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub dataset: DatasetSection,
    pub preprocess: PreprocessConfig,
    pub algorithms: Vec<Algorithm>,
    /// Per-algorithm grids; algorithms without an entry use the built-in grid.
    pub grids: IndexMap<Algorithm, IndexMap<String, Vec<ParamValue>>>,
    pub seeds: Seeds,
    pub run: RunSection,
    pub output: OutputSection,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSection::default(),
            preprocess: PreprocessConfig::default(),
            algorithms: Algorithm::ALL.to_vec(),
            grids: IndexMap::new(),
            seeds: Seeds::default(),
            run: RunSection::default(),
            output: OutputSection::default(),
        }
    }
}

/// Command-line adjustments applied on top of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub scenarios: Option<Vec<Scenario>>,
    pub dataset: Option<DatasetPreset>,
    pub slice: Option<String>,
    pub row_budget: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl HarnessConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(s) = &o.scenarios {
            self.run.scenarios = s.clone();
        }
        if let Some(d) = o.dataset {
            if d != self.dataset.preset {
                self.dataset.slices.clear();
            }
            self.dataset.preset = d;
        }
        if let Some(s) = &o.slice {
            self.dataset.slices = vec![s.clone()];
        }
        if let Some(b) = o.row_budget {
            self.dataset.row_budget = b;
        }
        if let Some(seed) = o.seed {
            self.seeds = Seeds::all(seed);
        }
        if let Some(out) = &o.out {
            self.output.dir = out.clone();
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.preprocess.validate()?;
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        let unique: BTreeSet<_> = self.algorithms.iter().collect();
        if unique.len() != self.algorithms.len() {
            return Err(Error::Config("algorithms list contains duplicates".into()));
        }
        if self.run.scenarios.is_empty() {
            return Err(Error::Config("no scenarios selected".into()));
        }
        if !(self.run.test_fraction > 0.0 && self.run.test_fraction < 1.0) {
            return Err(Error::Config(format!("test_fraction must be in (0, 1), got {}", self.run.test_fraction)));
        }
        if self.run.k_folds < 2 {
            return Err(Error::Config(format!("k_folds must be at least 2, got {}", self.run.k_folds)));
        }
        for alg in &self.algorithms {
            self.grid(*alg)?;
        }
        match self.dataset.preset {
            DatasetPreset::Custom => {
                if self.dataset.files.is_empty() {
                    return Err(Error::Config("custom dataset needs dataset.files".into()));
                }
                self.schema().validate()?;
            }
            preset => {
                for s in &self.dataset.slices {
                    if preset.find_slice(s).is_none() {
                        let known: Vec<&str> = preset.slices().iter().map(|s| s.name).collect();
                        return Err(Error::Config(format!(
                            "unknown slice '{s}' for {preset} (known: {})",
                            known.join(", ")
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self, algorithm: Algorithm) -> Result<ParamGrid> {
        match self.grids.get(&algorithm) {
            Some(params) => ParamGrid::new(algorithm, params.clone()),
            None => Ok(ParamGrid::default_for(algorithm)),
        }
    }

    pub fn schema(&self) -> Schema {
        match (&self.dataset.schema, self.dataset.preset) {
            (Some(s), _) => s.clone(),
            (None, preset) => preset.schema(),
        }
    }

    /// Config value, else the environment variable, else `./data`.
    pub fn data_dir(&self) -> PathBuf {
        self.dataset
            .data_dir
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR))
    }
}
