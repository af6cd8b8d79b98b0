//! Dataset presets: schemas, attack slices, download locations and structural manifests.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::timestamp::DAY_FIRST;
use super::Schema;
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetPreset {
    Cicids2018,
    Kdd99,
    Custom,
}

impl DatasetPreset {
    pub fn id(self) -> &'static str {
        match self {
            DatasetPreset::Cicids2018 => "cicids2018",
            DatasetPreset::Kdd99 => "kdd99",
            DatasetPreset::Custom => "custom",
        }
    }

    /// Schema for the preset. `Custom` yields the generic default, to be overridden by config.
    pub fn schema(self) -> Schema {
        match self {
            DatasetPreset::Cicids2018 => cicids2018_schema(),
            DatasetPreset::Kdd99 => kdd99_schema(),
            DatasetPreset::Custom => Schema::default(),
        }
    }

    pub fn slices(self) -> &'static [SliceSpec] {
        match self {
            DatasetPreset::Cicids2018 => CICIDS2018_SLICES,
            DatasetPreset::Kdd99 => KDD99_SLICES,
            DatasetPreset::Custom => &[],
        }
    }

    pub fn find_slice(self, name: &str) -> Option<&'static SliceSpec> {
        let wanted = normalize(name);
        self.slices()
            .iter()
            .find(|s| normalize(s.name) == wanted || normalize(s.id) == wanted)
    }

    pub fn files(self) -> Vec<&'static RemoteFile> {
        match self {
            DatasetPreset::Cicids2018 => CICIDS2018_FILES.iter().collect(),
            DatasetPreset::Kdd99 => vec![&KDD99_FILE],
            DatasetPreset::Custom => Vec::new(),
        }
    }
}

impl fmt::Display for DatasetPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for DatasetPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match normalize(s).as_str() {
            "cicids2018" | "cseicids2018" | "csecicids2018" => Ok(DatasetPreset::Cicids2018),
            "kdd99" | "kddcup99" | "kdd1999" => Ok(DatasetPreset::Kdd99),
            "custom" => Ok(DatasetPreset::Custom),
            _ => Err(Error::Config(format!("unknown dataset preset '{s}'"))),
        }
    }
}

/// Lowercased alphanumerics only, so "DoS Hulk", "dos-hulk" and "DOS_HULK" compare equal.
pub(crate) fn normalize(s: &str) -> String {
    s.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

/// One evaluation slice: benign rows plus the rows of the listed attack tokens,
/// read from one or more day files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SliceSpec {
    pub id: &'static str,
    pub name: &'static str,
    pub files: &'static [&'static str],
    /// Attack tokens kept in the slice; empty means every row of the files.
    pub attack_tokens: &'static [&'static str],
    pub balance: bool,
}

impl SliceSpec {
    /// Token filter for [`super::load_csv_sliced`]: benign tokens plus the slice's attacks.
    pub fn token_filter(&self, schema: &Schema) -> Option<BTreeSet<String>> {
        if self.attack_tokens.is_empty() {
            return None;
        }
        let mut keep: BTreeSet<String> = schema.benign_tokens.iter().map(|t| normalize(t)).collect();
        keep.extend(self.attack_tokens.iter().map(|t| normalize(t)));
        Some(keep)
    }
}

/// Download location plus the structural facts checked by `fetch-data --verify`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RemoteFile {
    pub file_name: &'static str,
    pub url: &'static str,
    pub gzipped: bool,
    pub has_header: bool,
    pub expected_fields: &'static [usize],
    pub expected_rows: Option<usize>,
}

pub const KDD99_COLUMNS: [&str; 42] = [
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
    "label",
];

fn kdd99_schema() -> Schema {
    Schema {
        column_names: KDD99_COLUMNS.iter().map(|s| s.to_string()).collect(),
        has_header: false,
        label_column: "label".into(),
        // symbolic attributes; no one-hot encoding in this pipeline
        drop_columns: vec!["protocol_type".into(), "service".into(), "flag".into()],
        ..Schema::default()
    }
}

fn cicids2018_schema() -> Schema {
    Schema {
        column_names: Vec::new(),
        has_header: true,
        label_column: "Label".into(),
        timestamp_columns: vec!["Timestamp".into()],
        timestamp_format: DAY_FIRST.into(),
        // only present in the 20-02-2018 export
        drop_columns: vec!["Flow ID".into(), "Src IP".into(), "Src Port".into(), "Dst IP".into()],
        ..Schema::default()
    }
}

const KDD99_FILE: RemoteFile = RemoteFile {
    file_name: "kddcup.data_10_percent",
    url: "http://kdd.ics.uci.edu/databases/kddcup99/kddcup.data_10_percent.gz",
    gzipped: true,
    has_header: false,
    expected_fields: &[42],
    expected_rows: Some(494_021),
};

const KDD99_SLICES: &[SliceSpec] = &[SliceSpec {
    id: "all",
    name: "all",
    files: &["kddcup.data_10_percent"],
    attack_tokens: &[],
    balance: true,
}];

macro_rules! cic_file {
    ($name:literal) => {
        RemoteFile {
            file_name: $name,
            url: concat!(
                "https://cse-cic-ids2018.s3.ca-central-1.amazonaws.com/",
                "Processed%20Traffic%20Data%20for%20ML%20Algorithms/",
                $name
            ),
            gzipped: false,
            has_header: true,
            expected_fields: &[80, 84],
            expected_rows: None,
        }
    };
}

const WED_14_02: &str = "Wednesday-14-02-2018_TrafficForML_CICFlowMeter.csv";
const THU_15_02: &str = "Thursday-15-02-2018_TrafficForML_CICFlowMeter.csv";
const FRI_16_02: &str = "Friday-16-02-2018_TrafficForML_CICFlowMeter.csv";
const TUE_20_02: &str = "Tuesday-20-02-2018_TrafficForML_CICFlowMeter.csv";
const WED_21_02: &str = "Wednesday-21-02-2018_TrafficForML_CICFlowMeter.csv";
const THU_22_02: &str = "Thursday-22-02-2018_TrafficForML_CICFlowMeter.csv";
const FRI_23_02: &str = "Friday-23-02-2018_TrafficForML_CICFlowMeter.csv";
const WED_28_02: &str = "Wednesday-28-02-2018_TrafficForML_CICFlowMeter.csv";
const THU_01_03: &str = "Thursday-01-03-2018_TrafficForML_CICFlowMeter.csv";
const FRI_02_03: &str = "Friday-02-03-2018_TrafficForML_CICFlowMeter.csv";

const CICIDS2018_FILES: [RemoteFile; 10] = [
    cic_file!("Wednesday-14-02-2018_TrafficForML_CICFlowMeter.csv"),
    cic_file!("Thursday-15-02-2018_TrafficForML_CICFlowMeter.csv"),
    cic_file!("Friday-16-02-2018_TrafficForML_CICFlowMeter.csv"),
    cic_file!("Tuesday-20-02-2018_TrafficForML_CICFlowMeter.csv"),
    cic_file!("Wednesday-21-02-2018_TrafficForML_CICFlowMeter.csv"),
    cic_file!("Thursday-22-02-2018_TrafficForML_CICFlowMeter.csv"),
    cic_file!("Friday-23-02-2018_TrafficForML_CICFlowMeter.csv"),
    cic_file!("Wednesday-28-02-2018_TrafficForML_CICFlowMeter.csv"),
    cic_file!("Thursday-01-03-2018_TrafficForML_CICFlowMeter.csv"),
    cic_file!("Friday-02-03-2018_TrafficForML_CICFlowMeter.csv"),
];

const CICIDS2018_SLICES: &[SliceSpec] = &[
    SliceSpec { id: "botnet", name: "BotNet", files: &[FRI_02_03], attack_tokens: &["Bot"], balance: true },
    SliceSpec {
        id: "ddos-hoic",
        name: "DDoS HOIC",
        files: &[WED_21_02],
        attack_tokens: &["DDOS attack-HOIC"],
        balance: true,
    },
    SliceSpec {
        id: "ddos-loic-http",
        name: "DDoS LOIC HTTP",
        files: &[TUE_20_02],
        attack_tokens: &["DDoS attacks-LOIC-HTTP"],
        balance: true,
    },
    SliceSpec {
        id: "ddos-loic-udp",
        name: "DDoS LOIC UDP",
        files: &[WED_21_02],
        attack_tokens: &["DDOS attack-LOIC-UDP"],
        balance: false,
    },
    SliceSpec {
        id: "dos-goldeneye",
        name: "DoS GoldenEye",
        files: &[THU_15_02],
        attack_tokens: &["DoS attacks-GoldenEye"],
        balance: true,
    },
    SliceSpec {
        id: "dos-hulk",
        name: "DoS Hulk",
        files: &[FRI_16_02],
        attack_tokens: &["DoS attacks-Hulk"],
        balance: true,
    },
    SliceSpec {
        id: "dos-slowhttptest",
        name: "DoS SlowHTTPTest",
        files: &[FRI_16_02],
        attack_tokens: &["DoS attacks-SlowHTTPTest"],
        balance: true,
    },
    SliceSpec {
        id: "dos-slowloris",
        name: "DoS Slowloris",
        files: &[THU_15_02],
        attack_tokens: &["DoS attacks-Slowloris"],
        balance: false,
    },
    SliceSpec {
        id: "ftp-bruteforce",
        name: "FTP BruteForce",
        files: &[WED_14_02],
        attack_tokens: &["FTP-BruteForce"],
        balance: true,
    },
    SliceSpec {
        id: "infilteration",
        name: "Infilteration",
        files: &[WED_28_02, THU_01_03],
        attack_tokens: &["Infilteration"],
        balance: true,
    },
    SliceSpec {
        id: "ssh-bruteforce",
        name: "SSH BruteForce",
        files: &[WED_14_02],
        attack_tokens: &["SSH-Bruteforce"],
        balance: true,
    },
    SliceSpec {
        id: "bruteforce-web-xss",
        name: "BruteForce Web XSS",
        files: &[THU_22_02, FRI_23_02],
        attack_tokens: &["Brute Force -Web", "Brute Force -XSS"],
        balance: true,
    },
];
