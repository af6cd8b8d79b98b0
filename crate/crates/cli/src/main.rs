use std::fs::File;
use std::io::{self, BufWriter, Read};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use idsbench::harness::{self, compare_scenarios, data, HarnessConfig, Overrides, Scenario, ScenarioReport, DATA_DIR_ENV};
use idsbench::ingest::{verify_file, DatasetPreset, RemoteFile};
use idsbench::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "idsbench", version, about = "Intrusion-detection classifier benchmark")]
struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "info")]
    log: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the configured scenarios and write reports.
    Run {
        /// TOML config file; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// ce1, ce2, ce3 or all.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        dataset: Option<String>,
        /// Single slice to run, by name or id.
        #[arg(long)]
        slice: Option<String>,
        /// Per-slice row cap; 0 disables it.
        #[arg(long)]
        row_budget: Option<usize>,
        /// Sets every seed (split, folds, model, balancing, subsample).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = DATA_DIR_ENV)]
        data_dir: Option<PathBuf>,
    },
    /// Compare scenario timings and metrics of finished runs.
    Compare {
        /// Directory holding report.json, or whose subdirectories do.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Download dataset files into the data directory.
    FetchData {
        #[arg(long)]
        dataset: String,
        /// Check field and row counts and the recorded SHA-256 digest.
        #[arg(long)]
        verify: bool,
        #[arg(long, env = DATA_DIR_ENV, default_value = harness::config::DEFAULT_DATA_DIR)]
        data_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new().parse_filters(&cli.log).format_timestamp(None).init();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run { config, scenario, dataset, slice, row_budget, seed, out, data_dir } => {
            let mut cfg = match &config {
                Some(path) => HarnessConfig::load(path)?,
                None => HarnessConfig::default(),
            };
            let overrides = Overrides {
                scenarios: scenario.as_deref().map(Scenario::parse_selection).transpose()?,
                dataset: dataset.as_deref().map(str::parse).transpose()?,
                slice,
                row_budget,
                seed,
                out,
            };
            cfg.apply(&overrides)?;
            if cfg.dataset.data_dir.is_none() {
                cfg.dataset.data_dir = data_dir;
            }
            run(&cfg)
        }
        Command::Compare { input } => compare(&input),
        Command::FetchData { dataset, verify, data_dir } => fetch(dataset.parse()?, verify, &data_dir),
    }
}

fn run(cfg: &HarnessConfig) -> Result<()> {
    let output = harness::run::<f64>(cfg)?;
    output.write(cfg)?;
    let dir = &cfg.output.dir;
    println!("wrote {} report rows to {}", output.report.rows.len(), dir.display());
    if cfg.run.scenarios.len() > 1 {
        let comparison = compare_scenarios(std::slice::from_ref(&output.report))?;
        write_comparison(dir, &comparison)?;
        println!("{}", comparison.to_markdown());
    }
    Ok(())
}

fn write_comparison(dir: &Path, comparison: &harness::Comparison) -> Result<()> {
    let put = |name: &str, text: String| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|source| Error::Io { path, source })
    };
    put("comparison.csv", comparison.to_csv())?;
    put("comparison.md", comparison.to_markdown())
}

fn read_report(path: &Path) -> Result<ScenarioReport> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    ScenarioReport::from_json(&text)
}

fn compare(dir: &Path) -> Result<()> {
    let direct = dir.join(harness::report::REPORT_JSON);
    let mut paths = Vec::new();
    if direct.is_file() {
        paths.push(direct);
    } else {
        let entries = std::fs::read_dir(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
        let mut subdirs: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        subdirs.sort();
        paths.extend(subdirs.into_iter().map(|d| d.join(harness::report::REPORT_JSON)).filter(|p| p.is_file()));
    }
    if paths.is_empty() {
        return Err(Error::DataMissing { path: dir.join(harness::report::REPORT_JSON), hint: "run `idsbench run` first".into() });
    }
    let reports = paths.iter().map(|p| read_report(p)).collect::<Result<Vec<_>>>()?;
    let comparison = compare_scenarios(&reports)?;
    write_comparison(dir, &comparison)?;
    println!("{}", comparison.to_markdown());
    Ok(())
}

fn download(file: &RemoteFile, dest: &Path) -> Result<()> {
    let net = |e: ureq::Error| Error::Io { path: dest.to_path_buf(), source: io::Error::other(format!("{}: {e}", file.url)) };
    log::info!("downloading {}", file.url);
    let response = ureq::get(file.url).call().map_err(net)?;
    let body = response.into_body().into_reader();
    let mut reader: Box<dyn Read> =
        if file.gzipped { Box::new(flate2::read::GzDecoder::new(body)) } else { Box::new(body) };
    let partial = dest.with_extension("part");
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| Error::Io { path: path.clone(), source }
    };
    let mut out = BufWriter::new(File::create(&partial).map_err(io_err(&partial))?);
    io::copy(&mut reader, &mut out).map_err(io_err(&partial))?;
    drop(out);
    std::fs::rename(&partial, dest).map_err(io_err(dest))
}

fn fetch(preset: DatasetPreset, verify: bool, dir: &Path) -> Result<()> {
    if preset == DatasetPreset::Custom {
        return Err(Error::Config("custom datasets are not downloadable".into()));
    }
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    for file in preset.files() {
        let dest = dir.join(file.file_name);
        if dest.is_file() {
            log::info!("{} already present", dest.display());
        } else {
            download(file, &dest)?;
        }
        if verify {
            let recorded = data::recorded_checksum(&dest)?;
            let report = verify_file(&dest, file, recorded.as_deref())?;
            if recorded.is_none() {
                data::record_checksum(&dest, &report.sha256)?;
            }
            println!("{}: ok ({} rows, {} fields, sha256 {})", dest.display(), report.rows, report.fields, report.sha256);
        }
    }
    Ok(())
}
