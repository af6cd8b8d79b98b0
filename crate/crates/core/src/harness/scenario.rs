use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use indexmap::IndexMap;

use super::config::{HarnessConfig, Scenario};
use super::data;
use super::report::{file_stem, ParamSource, ReportRow, ScenarioReport, SliceSearch, SliceSummary, TimingRecord};
use crate::classifiers::{Algorithm, Classifier, ModelArtifact, ModelSpec, DECISION_THRESHOLD};
use crate::error::{Error, Result};
use crate::ingest::{load_many, DatasetPreset, IngestReport};
use crate::metrics::evaluate;
use crate::model_select::{grid_search, make_folds, stratified_split, stratified_subsample};
use crate::preprocess::{self, FitScope, PreprocessReport};
use crate::scalar::Scalar;
use crate::table::ColumnarTable;

/// A loaded evaluation slice, before the row budget is applied.
#[derive(Debug, Clone)]
pub struct SliceData<T> {
    pub name: String,
    pub table: ColumnarTable<T>,
    pub ingest: IngestReport,
    /// Whether the preprocessing pipeline may balance this slice.
    pub balance: bool,
}

/// A fitted model and the file name it is saved under.
#[derive(Debug, Clone)]
pub struct SavedModel<T> {
    pub file_name: String,
    pub artifact: ModelArtifact<T>,
}

#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub report: ScenarioReport,
    pub models: Vec<SavedModel<T>>,
}

impl<T: Scalar> RunOutput<T> {
    /// Writes the report files and, when enabled, every model under `models/`.
    pub fn write(&self, config: &HarnessConfig) -> Result<()> {
        let dir = &config.output.dir;
        self.report.write_all(dir, config.output.markdown)?;
        if config.output.save_models && !self.models.is_empty() {
            let models = dir.join("models");
            std::fs::create_dir_all(&models).map_err(|e| Error::io(&models, e))?;
            for m in &self.models {
                m.artifact.save(&models.join(&m.file_name))?;
            }
        }
        Ok(())
    }
}

pub fn fetch_hint(preset: DatasetPreset) -> String {
    format!("download it with `idsbench fetch-data --dataset {preset} --verify` or point IDSBENCH_DATA_DIR at it")
}

/// Reads every configured slice from the data directory.
pub fn load_slices<T: Scalar>(config: &HarnessConfig) -> Result<Vec<SliceData<T>>> {
    let dir = config.data_dir();
    let preset = config.dataset.preset;
    let schema = config.schema();
    let in_ingest = |e: Error| e.in_stage("ingest");

    if preset == DatasetPreset::Custom {
        let paths: Vec<PathBuf> = config
            .dataset
            .files
            .iter()
            .map(|f| if f.is_absolute() { f.clone() } else { dir.join(f) })
            .collect();
        for p in &paths {
            if !p.is_file() {
                return Err(Error::DataMissing { path: p.clone(), hint: "check dataset.files in the config".into() });
            }
        }
        let refs: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
        let (table, ingest) = load_many(&refs, &schema, None).map_err(in_ingest)?;
        return Ok(vec![SliceData { name: "all".into(), table, ingest, balance: config.dataset.balance }]);
    }

    let wanted: Vec<_> = if config.dataset.slices.is_empty() {
        preset.slices().iter().collect()
    } else {
        config
            .dataset
            .slices
            .iter()
            .map(|s| preset.find_slice(s).ok_or_else(|| Error::Config(format!("unknown slice '{s}'"))))
            .collect::<Result<_>>()?
    };
    let mut verified = BTreeSet::new();
    let mut out = Vec::with_capacity(wanted.len());
    for slice in wanted {
        let paths = slice
            .files
            .iter()
            .map(|f| data::resolve_file(&dir, f, &fetch_hint(preset)))
            .collect::<Result<Vec<_>>>()?;
        for p in &paths {
            if verified.insert(p.clone()) && !data::check_recorded(p)? {
                log::warn!("{} has no recorded checksum; run fetch-data --verify to pin one", p.display());
            }
        }
        let refs: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
        log::info!("loading slice '{}' from {} file(s)", slice.name, refs.len());
        let filter = slice.token_filter(&schema);
        let (table, ingest) = load_many(&refs, &schema, filter.as_ref()).map_err(in_ingest)?;
        out.push(SliceData { name: slice.name.to_string(), table, ingest, balance: slice.balance });
    }
    Ok(out)
}

/// Loads the configured data and runs every configured scenario on it.
pub fn run<T: Scalar>(config: &HarnessConfig) -> Result<RunOutput<T>> {
    config.validate()?;
    let slices = load_slices::<T>(config)?;
    run_slices(config, &slices)
}

struct Prepared<T> {
    train: ColumnarTable<T>,
    test: ColumnarTable<T>,
    preprocess: Option<PreprocessReport>,
}

fn stage(slice: &str, what: &str) -> impl Fn(Error) -> Error {
    let name = format!("{what} ({slice})");
    move |e: Error| e.in_stage(name.clone())
}

fn split<T: Scalar>(table: &ColumnarTable<T>, config: &HarnessConfig, slice: &str) -> Result<(ColumnarTable<T>, ColumnarTable<T>)> {
    let s = stratified_split(table.labels(), config.run.test_fraction, config.seeds.split).map_err(stage(slice, "split"))?;
    Ok((table.select_rows(&s.train_rows), table.select_rows(&s.test_rows)))
}

fn prepare_raw<T: Scalar>(table: &ColumnarTable<T>, config: &HarnessConfig, slice: &str) -> Result<Prepared<T>> {
    let (train, test) = split(table, config, slice)?;
    Ok(Prepared { train, test, preprocess: None })
}

fn prepare_preprocessed<T: Scalar>(
    table: &ColumnarTable<T>,
    config: &HarnessConfig,
    slice: &str,
    balance: bool,
) -> Result<Prepared<T>> {
    let mut pc = config.preprocess.clone();
    pc.balance = pc.balance && balance;
    pc.balance_seed = config.seeds.balance;
    let in_pre = stage(slice, "preprocess");
    match pc.fit_scope {
        FitScope::WholeDataset => {
            let p = preprocess::run(table, &pc).map_err(&in_pre)?;
            let (train, test) = split(&p.table, config, slice)?;
            Ok(Prepared { train, test, preprocess: Some(p.report) })
        }
        FitScope::TrainOnly => {
            let (raw_train, raw_test) = split(table, config, slice)?;
            let p = preprocess::run(&raw_train, &pc).map_err(&in_pre)?;
            let test = p.transform(&raw_test).map_err(&in_pre)?;
            Ok(Prepared { train: p.table, test, preprocess: Some(p.report) })
        }
    }
}

/// Runs the configured scenarios on already loaded slices.
pub fn run_slices<T: Scalar>(config: &HarnessConfig, slices: &[SliceData<T>]) -> Result<RunOutput<T>> {
    config.validate()?;
    let scenarios: BTreeSet<Scenario> = config.run.scenarios.iter().copied().collect();
    let mut report = ScenarioReport { dataset: config.dataset.preset.id().to_string(), ..Default::default() };
    let mut models = Vec::new();

    for slice in slices {
        let name = slice.name.as_str();
        let budget = config.dataset.row_budget;
        let table = if budget > 0 && slice.table.n_rows() > budget {
            slice.table.select_rows(&stratified_subsample(slice.table.labels(), budget, config.seeds.subsample))
        } else {
            slice.table.clone()
        };
        let raw = if scenarios.contains(&Scenario::Ce1) { Some(prepare_raw(&table, config, name)?) } else { None };
        let pre = if scenarios.iter().any(|s| s.preprocesses()) {
            Some(prepare_preprocessed(&table, config, name, slice.balance)?)
        } else {
            None
        };
        report.slices.push(SliceSummary {
            slice: slice.name.clone(),
            ingest: slice.ingest.clone(),
            rows_loaded: slice.table.n_rows(),
            rows_budgeted: table.n_rows(),
            n_features_raw: table.n_features(),
            balance_enabled: config.preprocess.balance && slice.balance,
            preprocess: pre.as_ref().and_then(|p| p.preprocess.clone()),
        });

        for &algorithm in &config.algorithms {
            for &scenario in &scenarios {
                let data = if scenario.preprocesses() { pre.as_ref() } else { raw.as_ref() }.expect("prepared above");
                log::info!("{name} / {scenario} / {algorithm}");
                let cell = run_cell(config, name, algorithm, scenario, data)?;
                report.rows.push(cell.row);
                if let Some(s) = cell.search {
                    report.searches.push(SliceSearch { slice: slice.name.clone(), result: s });
                }
                if let Some(m) = cell.model {
                    models.push(m);
                }
            }
        }
    }
    Ok(RunOutput { report, models })
}

struct Cell<T> {
    row: ReportRow,
    search: Option<crate::model_select::SearchResult>,
    model: Option<SavedModel<T>>,
}

fn run_cell<T: Scalar>(
    config: &HarnessConfig,
    slice: &str,
    algorithm: Algorithm,
    scenario: Scenario,
    data: &Prepared<T>,
) -> Result<Cell<T>> {
    let label = format!("{slice}, {scenario}, {algorithm}");
    let at = |what: &str| {
        let name = format!("{what} ({label})");
        move |e: Error| e.in_stage(name.clone())
    };
    let mut spec = ModelSpec::new(algorithm).with_seed(config.seeds.model);
    spec.parallel = config.run.parallel;

    let (param_source, search, search_seconds) = if scenario.searches() {
        let grid = config.grid(algorithm)?;
        let plan = make_folds(data.train.labels(), config.run.k_folds, config.seeds.folds).map_err(at("folds"))?;
        let t0 = Instant::now();
        let result = grid_search(&grid, &spec, &data.train, &plan, config.run.parallel).map_err(at("grid search"))?;
        let seconds = t0.elapsed().as_secs_f64();
        spec.params = result.best_params().clone();
        (ParamSource::Grid, Some(result), Some(seconds))
    } else {
        (ParamSource::Default, None, None)
    };
    let params = spec.resolved_params()?;

    let t0 = Instant::now();
    let model = spec.fit(&data.train).map_err(at("fit"))?;
    let fit_seconds = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let scores = model.predict_scores(&data.test).map_err(at("predict"))?;
    let predict_total_seconds = t0.elapsed().as_secs_f64();

    let cut = T::of(DECISION_THRESHOLD);
    let predicted: Vec<u8> = scores.iter().map(|&s| u8::from(s > cut)).collect();
    let metrics = evaluate(data.test.labels(), &predicted, &scores).map_err(at("evaluate"))?;

    let stage_seconds: IndexMap<String, f64> = match (&data.preprocess, scenario.preprocesses()) {
        (Some(p), true) => p.stage_seconds.iter().cloned().collect(),
        _ => IndexMap::new(),
    };
    let drops = data.preprocess.as_ref();
    let file_name = format!("{}_{}_{}.json", file_stem(slice), scenario.id().to_ascii_lowercase(), algorithm.id());
    let model_file = config.output.save_models.then(|| format!("models/{file_name}"));
    let n_test = data.test.n_rows();

    let row = ReportRow {
        slice: slice.to_string(),
        algorithm,
        scenario,
        metrics,
        timing: TimingRecord {
            fit_seconds,
            predict_total_seconds,
            predict_per_instance_seconds: predict_total_seconds / n_test as f64,
            preprocess_stage_seconds: stage_seconds,
            search_seconds,
        },
        params: params.clone(),
        param_source,
        n_train: data.train.n_rows(),
        n_test,
        n_features: data.train.n_features(),
        rows_dropped_outlier: drops.map_or(0, |p| p.rows_dropped_outlier),
        columns_dropped_correlation: drops.map_or(0, |p| p.columns_dropped_correlation.len()),
        rows_dropped_balancing: drops.map_or(0, |p| p.rows_dropped_balancing),
        model_file,
    };
    let model = config.output.save_models.then(|| SavedModel {
        file_name,
        artifact: ModelArtifact::new(model, params, data.train.names().to_vec()),
    });
    Ok(Cell { row, search, model })
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::classifiers::ParamValue;
    use crate::harness::config::Seeds;

    /// Two noisy Gaussian blobs with a duplicated column and a few planted outliers.
    pub(crate) fn toy_slice(n: usize, seed: u64) -> SliceData<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let y = u8::from(i % 3 == 0);
            let c = if y == 1 { 1.5 } else { -1.0 };
            let a: f64 = c + rng.gen_range(-1.5..1.5);
            let b: f64 = -c + rng.gen_range(-1.5..1.5);
            let noise: f64 = rng.gen_range(0.0..10.0);
            rows.push(vec![a, 2.0 * a + 1.0, b, noise]);
            labels.push(y);
        }
        rows[7][3] = 1e5;
        let table = ColumnarTable::from_rows(&["a", "a_copy", "b", "noise"], &rows, labels).unwrap();
        SliceData { name: "toy".into(), table, ingest: IngestReport::default(), balance: true }
    }

    pub(crate) fn toy_config(dir: &Path) -> HarnessConfig {
        let mut c = HarnessConfig::default();
        c.algorithms = vec![Algorithm::Nb, Algorithm::Dt, Algorithm::Gb];
        c.grids.insert(Algorithm::Gb, [("rounds".to_string(), vec![ParamValue::Int(5), ParamValue::Int(20)])].into_iter().collect());
        c.preprocess.zscore_threshold = 5.0;
        c.output.dir = dir.to_path_buf();
        c
    }

    #[test]
    fn one_row_per_triple_and_scenario_semantics() {
        let dir = tempfile::tempdir().unwrap();
        let config = toy_config(dir.path());
        let out = run_slices(&config, &[toy_slice(300, 1)]).unwrap();
        let rep = &out.report;
        assert_eq!(rep.rows.len(), 3 * 3);
        for alg in &config.algorithms {
            for sc in Scenario::ALL {
                assert!(rep.row("toy", *alg, sc).is_some());
            }
            let ce1 = rep.row("toy", *alg, Scenario::Ce1).unwrap();
            assert!(ce1.timing.preprocess_stage_seconds.is_empty());
            assert_eq!(ce1.params, alg.default_params());
            assert_eq!(ce1.param_source, ParamSource::Default);
            let ce2 = rep.row("toy", *alg, Scenario::Ce2).unwrap();
            assert!(!ce2.timing.preprocess_stage_seconds.is_empty());
            assert_eq!(ce2.params, alg.default_params());
            assert!(ce2.n_features <= ce1.n_features);
            assert!(ce2.n_train + ce2.n_test <= ce1.n_train + ce1.n_test);
            let ce3 = rep.row("toy", *alg, Scenario::Ce3).unwrap();
            assert_eq!(ce3.param_source, ParamSource::Grid);
            let search = rep.searches.iter().find(|s| s.result.algorithm == *alg).unwrap();
            let mut expected = alg.default_params();
            for (k, v) in search.result.best_params() {
                expected.insert(k.clone(), v.clone());
            }
            assert_eq!(ce3.params, expected);
            assert!(ce3.timing.search_seconds.is_some());
        }
        let ce2 = rep.row("toy", Algorithm::Dt, Scenario::Ce2).unwrap();
        assert_eq!(ce2.columns_dropped_correlation, 1);
        assert_eq!(ce2.rows_dropped_outlier, 1);
        assert!(ce2.metrics.accuracy > 0.8);
        assert_eq!(out.models.len(), 9);
    }

    #[test]
    fn same_config_twice_gives_identical_csv() {
        let dir = tempfile::tempdir().unwrap();
        let config = toy_config(dir.path());
        let a = run_slices(&config, &[toy_slice(240, 2)]).unwrap();
        let b = run_slices(&config, &[toy_slice(240, 2)]).unwrap();
        assert_eq!(a.report.to_csv(), b.report.to_csv());
    }

    #[test]
    fn scenario_order_does_not_change_content() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = toy_config(dir.path());
        config.run.scenarios = vec![Scenario::Ce1, Scenario::Ce2];
        let a = run_slices(&config, &[toy_slice(200, 3)]).unwrap();
        config.run.scenarios = vec![Scenario::Ce2, Scenario::Ce1];
        let b = run_slices(&config, &[toy_slice(200, 3)]).unwrap();
        assert_eq!(a.report.to_csv(), b.report.to_csv());
        config.run.scenarios = vec![Scenario::Ce2];
        let only = run_slices(&config, &[toy_slice(200, 3)]).unwrap();
        for r in &only.report.rows {
            assert_eq!(ReportCsvRow::from(r), ReportCsvRow::from(a.report.row("toy", r.algorithm, r.scenario).unwrap()));
        }
    }

    #[test]
    fn row_budget_subsamples_stratified() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = toy_config(dir.path());
        config.algorithms = vec![Algorithm::Nb];
        config.run.scenarios = vec![Scenario::Ce1];
        config.dataset.row_budget = 90;
        let out = run_slices(&config, &[toy_slice(300, 4)]).unwrap();
        let s = &out.report.slices[0];
        assert_eq!((s.rows_loaded, s.rows_budgeted), (300, 90));
        let r = &out.report.rows[0];
        assert_eq!(r.n_train + r.n_test, 90);
    }

    #[test]
    fn seeds_flow_into_models_and_split() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = toy_config(dir.path());
        config.algorithms = vec![Algorithm::Dt];
        config.run.scenarios = vec![Scenario::Ce1];
        let a = run_slices(&config, &[toy_slice(200, 5)]).unwrap();
        config.seeds = Seeds::all(9);
        let b = run_slices(&config, &[toy_slice(200, 5)]).unwrap();
        assert_ne!(a.report.to_csv(), b.report.to_csv());
    }

    #[test]
    fn empty_preprocess_output_carries_stage() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = toy_config(dir.path());
        config.algorithms = vec![Algorithm::Nb];
        config.run.scenarios = vec![Scenario::Ce2];
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![f64::from(i), 3.0]).collect();
        let labels = (0..20).map(|i| u8::from(i % 2 == 0)).collect();
        let table = ColumnarTable::from_rows(&["x", "c"], &rows, labels).unwrap();
        let slice = SliceData { name: "flat".into(), table, ingest: IngestReport::default(), balance: true };
        config.preprocess.zscore_threshold = 1e-9;
        let err = run_slices(&config, &[slice]).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("preprocess (flat)"), "{err}");
    }

    #[test]
    fn write_emits_models_grids_and_preprocess_csvs() {
        let dir = tempfile::tempdir().unwrap();
        let config = toy_config(dir.path());
        let out = run_slices(&config, &[toy_slice(150, 6)]).unwrap();
        out.write(&config).unwrap();
        for f in ["report.csv", "timing.csv", "report.md", "report.json", "grid_toy_dt.csv", "preprocess_toy.csv"] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        let row = out.report.row("toy", Algorithm::Dt, Scenario::Ce3).unwrap();
        let path = dir.path().join(row.model_file.as_ref().unwrap());
        let loaded = ModelArtifact::<f64>::load(&path).unwrap();
        let test = &toy_slice(150, 6).table;
        let saved = &out.models.iter().find(|m| path.ends_with(&m.file_name)).unwrap().artifact;
        let cols = test.select_named(&loaded.feature_names);
        if let Ok(cols) = cols {
            assert_eq!(loaded.model.predict_scores(&cols).unwrap(), saved.model.predict_scores(&cols).unwrap());
        }
    }

    #[test]
    fn missing_data_file_hints_at_fetch() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = HarnessConfig::default();
        config.dataset.data_dir = Some(dir.path().to_path_buf());
        let err = run::<f64>(&config).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("fetch-data"), "{err}");
    }

    use super::super::report::ReportCsvRow;
}
