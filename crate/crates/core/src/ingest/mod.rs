//! Initial treatment of raw flow-record CSV files: type coercion, timestamp conversion,
//! removal of unusable rows and columns, and label binarization.

mod labels;
pub mod presets;
mod timestamp;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use labels::binarize_labels;
pub use presets::{DatasetPreset, RemoteFile, SliceSpec};
pub use timestamp::{convert_timestamp, DAY_FIRST};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::table::ColumnarTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    /// Expected header. Required when `has_header` is false; otherwise, when non-empty,
    /// the file header must match it exactly.
    pub column_names: Vec<String>,
    pub has_header: bool,
    pub label_column: String,
    pub benign_tokens: BTreeSet<String>,
    pub timestamp_columns: Vec<String>,
    /// strftime-style layout of the timestamp columns.
    pub timestamp_format: String,
    pub drop_columns: Vec<String>,
    pub drop_constant_columns: bool,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            column_names: Vec::new(),
            has_header: true,
            label_column: "Label".into(),
            benign_tokens: ["Benign", "BENIGN", "normal."].iter().map(|s| s.to_string()).collect(),
            timestamp_columns: Vec::new(),
            timestamp_format: DAY_FIRST.into(),
            drop_columns: Vec::new(),
            drop_constant_columns: true,
        }
    }
}

impl Schema {
    pub fn validate(&self) -> Result<()> {
        if self.drop_columns.contains(&self.label_column) {
            return Err(Error::Config(format!(
                "label column '{}' is listed in drop_columns",
                self.label_column
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.column_names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Config(format!("duplicate column name '{dup}' in schema")));
        }
        if !self.has_header && self.column_names.is_empty() {
            return Err(Error::Config("headerless schema needs column_names".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_dropped_malformed: usize,
    pub rows_dropped_nonfinite: usize,
    /// Rows outside the requested attack slice; zero for unsliced loads.
    pub rows_excluded_slice: usize,
    pub columns_dropped: Vec<String>,
    pub label_histogram: BTreeMap<String, usize>,
    pub warnings: Vec<String>,
}

impl IngestReport {
    fn merge(&mut self, other: IngestReport) {
        self.rows_read += other.rows_read;
        self.rows_dropped_malformed += other.rows_dropped_malformed;
        self.rows_dropped_nonfinite += other.rows_dropped_nonfinite;
        self.rows_excluded_slice += other.rows_excluded_slice;
        for c in other.columns_dropped {
            if !self.columns_dropped.contains(&c) {
                self.columns_dropped.push(c);
            }
        }
        for (k, v) in other.label_histogram {
            *self.label_histogram.entry(k).or_default() += v;
        }
        self.warnings.extend(other.warnings);
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    Label,
    Dropped,
    Timestamp,
    Numeric,
}

enum CellError {
    Malformed,
    NonFinite,
}

fn open_reader(path: &Path) -> Result<Box<dyn Read>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let gz = path.extension().is_some_and(|e| e == "gz");
    Ok(if gz {
        Box::new(flate2::read::GzDecoder::new(BufReader::new(file)))
    } else {
        Box::new(BufReader::new(file))
    })
}

/// Loads every row of `path` under `schema`.
pub fn load_csv<T: Scalar>(path: &Path, schema: &Schema) -> Result<(ColumnarTable<T>, IngestReport)> {
    load_csv_sliced(path, schema, None)
}

/// Like [`load_csv`], keeping only rows whose label token (compared case- and
/// punctuation-insensitively) is in `token_filter`.
pub fn load_csv_sliced<T: Scalar>(
    path: &Path,
    schema: &Schema,
    token_filter: Option<&BTreeSet<String>>,
) -> Result<(ColumnarTable<T>, IngestReport)> {
    let (names, columns, raw_labels, mut report) = read_raw(path, schema, token_filter)?;
    finish(names, columns, raw_labels, schema, &mut report)?.map_or_else(
        || Err(Error::EmptyDataset { stage: format!("ingest of {}", path.display()) }),
        |table| Ok((table, report)),
    )
}

/// Loads several files sharing one layout and concatenates them in the order given.
pub fn load_many<T: Scalar>(
    paths: &[&Path],
    schema: &Schema,
    token_filter: Option<&BTreeSet<String>>,
) -> Result<(ColumnarTable<T>, IngestReport)> {
    let mut report = IngestReport::default();
    let mut names: Option<Vec<String>> = None;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels = Vec::new();
    for path in paths {
        let (n, c, l, r) = read_raw(path, schema, token_filter)?;
        match &names {
            None => {
                names = Some(n);
                columns = c;
            }
            Some(existing) => {
                // files may order or name columns differently; align by name
                for (dst, name) in columns.iter_mut().zip(existing) {
                    let src = n.iter().position(|x| x == name).ok_or_else(|| {
                        Error::Config(format!("column '{name}' missing from {}", path.display()))
                    })?;
                    dst.extend_from_slice(&c[src]);
                }
            }
        }
        raw_labels.extend(l);
        report.merge(r);
    }
    let names = names.ok_or_else(|| Error::Config("no input files".into()))?;
    finish(names, columns, raw_labels, schema, &mut report)?.map_or_else(
        || Err(Error::EmptyDataset { stage: "ingest".into() }),
        |table| Ok((table, report)),
    )
}

type RawColumns = (Vec<String>, Vec<Vec<f64>>, Vec<String>, IngestReport);

fn read_raw(path: &Path, schema: &Schema, token_filter: Option<&BTreeSet<String>>) -> Result<RawColumns> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open_reader(path)?);
    let mut records = reader.records();

    let header: Vec<String> = if schema.has_header {
        match records.next() {
            Some(rec) => rec.map_err(|e| Error::csv(path, e))?.iter().map(str::to_string).collect(),
            None => return Err(Error::EmptyDataset { stage: format!("ingest of {}", path.display()) }),
        }
    } else {
        schema.column_names.clone()
    };
    if schema.has_header && !schema.column_names.is_empty() && header != schema.column_names {
        return Err(Error::Config(format!("header of {} does not match schema", path.display())));
    }

    let label_idx = header.iter().position(|h| *h == schema.label_column).ok_or_else(|| {
        Error::Config(format!("label column '{}' not found in {}", schema.label_column, path.display()))
    })?;
    let roles: Vec<Role> = header
        .iter()
        .enumerate()
        .map(|(i, h)| {
            if i == label_idx {
                Role::Label
            } else if schema.drop_columns.contains(h) {
                Role::Dropped
            } else if schema.timestamp_columns.contains(h) {
                Role::Timestamp
            } else {
                Role::Numeric
            }
        })
        .collect();

    let mut report = IngestReport::default();
    let feature_idx: Vec<usize> =
        (0..header.len()).filter(|&i| matches!(roles[i], Role::Numeric | Role::Timestamp)).collect();
    report.columns_dropped =
        (0..header.len()).filter(|&i| roles[i] == Role::Dropped).map(|i| header[i].clone()).collect();
    let names: Vec<String> = feature_idx.iter().map(|&i| header[i].clone()).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); feature_idx.len()];
    let mut raw_labels = Vec::new();
    let mut row = vec![0.0; feature_idx.len()];

    for rec in records {
        let rec = match rec {
            Ok(r) => r,
            // undecodable bytes or a broken quote: the row is unusable
            Err(e) if !e.is_io_error() => {
                report.rows_read += 1;
                report.rows_dropped_malformed += 1;
                continue;
            }
            Err(e) => return Err(Error::csv(path, e)),
        };
        report.rows_read += 1;
        if rec.len() != header.len() {
            report.rows_dropped_malformed += 1;
            continue;
        }
        let token = &rec[label_idx];
        if token.is_empty() {
            report.rows_dropped_malformed += 1;
            continue;
        }
        if let Some(keep) = token_filter {
            if !keep.contains(&presets::normalize(token)) {
                report.rows_excluded_slice += 1;
                continue;
            }
        }
        let mut failure = None;
        for (slot, &i) in row.iter_mut().zip(&feature_idx) {
            match parse_cell(&rec[i], roles[i], &schema.timestamp_format) {
                Ok(v) => *slot = v,
                Err(CellError::Malformed) => {
                    failure = Some(CellError::Malformed);
                    break;
                }
                Err(CellError::NonFinite) => failure = Some(CellError::NonFinite),
            }
        }
        match failure {
            Some(CellError::Malformed) => report.rows_dropped_malformed += 1,
            Some(CellError::NonFinite) => report.rows_dropped_nonfinite += 1,
            None => {
                for (col, &v) in columns.iter_mut().zip(&row) {
                    col.push(v);
                }
                raw_labels.push(token.to_string());
            }
        }
    }
    Ok((names, columns, raw_labels, report))
}

fn parse_cell(raw: &str, role: Role, timestamp_format: &str) -> Result<f64, CellError> {
    let value = if role == Role::Timestamp {
        convert_timestamp(raw, timestamp_format).ok_or(CellError::Malformed)?
    } else {
        raw.parse::<f64>().map_err(|_| CellError::Malformed)?
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(CellError::NonFinite)
    }
}

fn finish<T: Scalar>(
    mut names: Vec<String>,
    mut columns: Vec<Vec<f64>>,
    raw_labels: Vec<String>,
    schema: &Schema,
    report: &mut IngestReport,
) -> Result<Option<ColumnarTable<T>>> {
    if raw_labels.is_empty() {
        return Ok(None);
    }
    if schema.drop_constant_columns {
        let mut kept_names = Vec::with_capacity(names.len());
        let mut kept_cols = Vec::with_capacity(columns.len());
        for (name, col) in names.into_iter().zip(columns) {
            if col.iter().all(|&v| v == col[0]) {
                log::info!("dropping constant column '{name}'");
                report.columns_dropped.push(name);
            } else {
                kept_names.push(name);
                kept_cols.push(col);
            }
        }
        names = kept_names;
        columns = kept_cols;
    }
    if names.is_empty() {
        return Err(Error::EmptyDataset { stage: "ingest (no usable feature columns)".into() });
    }
    for token in &raw_labels {
        *report.label_histogram.entry(token.clone()).or_default() += 1;
    }
    let labels = binarize_labels(&raw_labels, &schema.benign_tokens);
    if labels.iter().all(|&l| l == labels[0]) {
        report.warnings.push("single-class dataset".into());
    }
    let columns = columns.into_iter().map(|c| c.into_iter().map(T::of).collect()).collect();
    ColumnarTable::new(names, columns, labels).map(Some)
}

/// Result of a structural check on a downloaded dataset file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub rows: usize,
    pub fields: usize,
    pub sha256: String,
}

/// Checks field and row counts against the manifest, and the SHA-256 digest against
/// `expected_sha256` when one is pinned.
pub fn verify_file(path: &Path, manifest: &RemoteFile, expected_sha256: Option<&str>) -> Result<VerifyReport> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut hasher = Sha256::new();
    let mut line = Vec::new();
    let (mut rows, mut fields) = (0usize, None);
    let fail = |reason: String| Error::Verify { path: path.to_path_buf(), reason };
    loop {
        line.clear();
        let n = reader.read_until(b'\n', &mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&line);
        let text = String::from_utf8_lossy(&line);
        let text = text.trim_end();
        if text.is_empty() {
            continue;
        }
        let count = text.split(',').count();
        if fields.is_none() {
            fields = Some(count);
            if !manifest.expected_fields.contains(&count) {
                return Err(fail(format!("{count} fields, expected one of {:?}", manifest.expected_fields)));
            }
            if manifest.has_header {
                continue;
            }
        }
        rows += 1;
    }
    let sha256 = hex::encode(hasher.finalize());
    if let Some(expected) = manifest.expected_rows {
        if rows != expected {
            return Err(fail(format!("{rows} data rows, expected {expected}")));
        }
    }
    if let Some(expected) = expected_sha256 {
        if !expected.eq_ignore_ascii_case(&sha256) {
            return Err(fail(format!("sha256 {sha256} does not match pinned {expected}")));
        }
    }
    Ok(VerifyReport { rows, fields: fields.unwrap_or(0), sha256 })
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn write_csv(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    fn schema() -> Schema {
        Schema { drop_constant_columns: false, ..Schema::default() }
    }

    #[test]
    fn nonfinite_rows_are_dropped() {
        let f = write_csv("a,b,Label\n1,2,Benign\n3,Infinity,DDoS\n5,6,DDoS\n");
        let (t, r) = load_csv::<f64>(f.path(), &schema()).unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(r.rows_dropped_nonfinite, 1);
        assert_eq!(r.rows_read, 3);
        assert_eq!(t.column(1), &[2.0, 6.0]);
        assert_eq!(t.labels(), &[0, 1]);
    }

    #[test]
    fn quoted_numbers_are_parsed() {
        let f = write_csv("Dst Port,b,Label\n\"80\",1,Benign\n\"443\",2,Bot\n");
        let (t, _) = load_csv::<f64>(f.path(), &schema()).unwrap();
        assert_eq!(t.column(0), &[80.0, 443.0]);
    }

    #[test]
    fn header_only_is_empty_dataset() {
        let f = write_csv("a,b,Label\n");
        assert!(matches!(load_csv::<f64>(f.path(), &schema()), Err(Error::EmptyDataset { .. })));
    }

    #[test]
    fn missing_label_column_is_config_error() {
        let f = write_csv("a,b\n1,2\n");
        let err = load_csv::<f64>(f.path(), &schema()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn unreadable_file_is_io_error() {
        let err = load_csv::<f64>(Path::new("/nonexistent/file.csv"), &schema()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn malformed_rows_and_repeated_headers_are_counted() {
        let csv = "Dst Port,Timestamp,Label\n\
                   80,14/02/2018 08:31:01,Benign\n\
                   Dst Port,Timestamp,Label\n\
                   22,not a date,Bot\n\
                   21,14/02/2018 08:32:01\n\
                   443,14/02/2018 08:33:01,Bot\n";
        let f = write_csv(csv);
        let schema = Schema { timestamp_columns: vec!["Timestamp".into()], ..schema() };
        let (t, r) = load_csv::<f64>(f.path(), &schema).unwrap();
        assert_eq!(r.rows_read, 5);
        assert_eq!(r.rows_dropped_malformed, 3);
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.column(1), &[1_518_597_061.0, 1_518_597_181.0]);
        assert_eq!(r.rows_read, t.n_rows() + r.rows_dropped_malformed + r.rows_dropped_nonfinite);
    }

    #[test]
    fn drop_and_constant_columns_leave_header_order() {
        let f = write_csv("x,id,c,y,Label\n1,a,7,4,Benign\n2,b,7,5,Bot\n3,c,7,9,Bot\n");
        let schema = Schema { drop_columns: vec!["id".into()], ..Schema::default() };
        let (t, r) = load_csv::<f64>(f.path(), &schema).unwrap();
        assert_eq!(t.names(), &["x".to_string(), "y".to_string()]);
        assert_eq!(r.columns_dropped, vec!["id".to_string(), "c".to_string()]);
        assert_eq!(r.label_histogram.get("Bot"), Some(&2));
    }

    #[test]
    fn headerless_kdd_rows_with_symbolic_columns() {
        let mut line = vec!["0"; 42];
        line[1] = "tcp";
        line[2] = "http";
        line[3] = "SF";
        line[41] = "normal.";
        let mut attack = line.clone();
        attack[41] = "smurf.";
        attack[4] = "1032";
        let text = format!("{}\n{}\n", line.join(","), attack.join(","));
        let f = write_csv(&text);
        let (t, r) = load_csv::<f64>(f.path(), &DatasetPreset::Kdd99.schema()).unwrap();
        assert_eq!(t.labels(), &[0, 1]);
        assert_eq!(t.names(), &["src_bytes".to_string()]);
        assert!(r.columns_dropped.contains(&"protocol_type".to_string()));
    }

    #[test]
    fn slice_filter_keeps_benign_and_listed_attacks() {
        let f = write_csv("a,Label\n1,Benign\n2,DoS attacks-Hulk\n3,DoS attacks-SlowHTTPTest\n4,Benign\n");
        let slice = DatasetPreset::Cicids2018.find_slice("DoS Hulk").unwrap();
        let sch = schema();
        let keep = slice.token_filter(&sch).unwrap();
        let (t, r) = load_csv_sliced::<f64>(f.path(), &sch, Some(&keep)).unwrap();
        assert_eq!(t.column(0), &[1.0, 2.0, 4.0]);
        assert_eq!(r.rows_excluded_slice, 1);
    }

    #[test]
    fn gzip_input_is_transparent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv.gz");
        let mut enc = flate2::write::GzEncoder::new(File::create(&path).unwrap(), flate2::Compression::fast());
        enc.write_all(b"a,Label\n1,Benign\n2,Bot\n").unwrap();
        enc.finish().unwrap();
        let (t, _) = load_csv::<f32>(&path, &schema()).unwrap();
        assert_eq!(t.column(0), &[1.0f32, 2.0]);
    }

    #[test]
    fn reload_is_identical() {
        let f = write_csv("a,b,Label\n1,2,Benign\n3,4,Bot\n5,NaN,Bot\n");
        let first = load_csv::<f64>(f.path(), &schema()).unwrap();
        let second = load_csv::<f64>(f.path(), &schema()).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn schema_rejects_dropping_the_label() {
        let s = Schema { drop_columns: vec!["Label".into()], ..Schema::default() };
        assert!(s.validate().is_err());
    }

    #[test]
    fn verify_checks_fields_rows_and_digest() {
        let f = write_csv("1,2,normal.\n3,4,smurf.\n");
        let manifest = RemoteFile {
            file_name: "x",
            url: "",
            gzipped: false,
            has_header: false,
            expected_fields: &[3],
            expected_rows: Some(2),
        };
        let ok = verify_file(f.path(), &manifest, None).unwrap();
        assert_eq!((ok.rows, ok.fields), (2, 3));
        assert!(verify_file(f.path(), &manifest, Some(&ok.sha256)).is_ok());
        assert!(verify_file(f.path(), &manifest, Some("00")).is_err());
        let wrong_rows = RemoteFile { expected_rows: Some(3), ..manifest };
        assert!(matches!(verify_file(f.path(), &wrong_rows, None), Err(Error::Verify { .. })));
    }
}
