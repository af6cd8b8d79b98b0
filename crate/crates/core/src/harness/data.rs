//! Locating dataset files and the trust-on-first-use checksum kept beside them.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const CHECKSUM_SUFFIX: &str = ".sha256";

/// Finds `name` or `name.gz` under `dir`.
pub fn resolve_file(dir: &Path, name: &str, fetch_hint: &str) -> Result<PathBuf> {
    let plain = dir.join(name);
    if plain.is_file() {
        return Ok(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.is_file() {
        return Ok(gz);
    }
    Err(Error::DataMissing { path: plain, hint: fetch_hint.to_string() })
}

pub fn checksum_path(file: &Path) -> PathBuf {
    let mut s = file.as_os_str().to_owned();
    s.push(CHECKSUM_SUFFIX);
    PathBuf::from(s)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = reader.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Digest recorded next to `file`, if any.
pub fn recorded_checksum(file: &Path) -> Result<Option<String>> {
    let side = checksum_path(file);
    match std::fs::read_to_string(&side) {
        Ok(text) => Ok(text.split_whitespace().next().map(str::to_ascii_lowercase)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(Error::io(side, e)),
    }
}

pub fn record_checksum(file: &Path, digest: &str) -> Result<()> {
    let side = checksum_path(file);
    let name = file.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    std::fs::write(&side, format!("{digest}  {name}\n")).map_err(|e| Error::io(side, e))
}

/// Compares the file against its recorded digest. Returns false when nothing is recorded.
pub fn check_recorded(file: &Path) -> Result<bool> {
    let Some(expected) = recorded_checksum(file)? else {
        return Ok(false);
    };
    let actual = sha256_file(file)?;
    if actual != expected {
        return Err(Error::Verify {
            path: file.to_path_buf(),
            reason: format!("sha256 {actual} differs from recorded {expected}"),
        });
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolves_plain_then_gz_and_hints_when_missing() {
        let dir = tempfile::tempdir().unwrap();
        let err = resolve_file(dir.path(), "x.csv", "run fetch-data").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("run fetch-data"));
        std::fs::write(dir.path().join("x.csv.gz"), b"").unwrap();
        assert!(resolve_file(dir.path(), "x.csv", "").unwrap().ends_with("x.csv.gz"));
        std::fs::write(dir.path().join("x.csv"), b"").unwrap();
        assert!(resolve_file(dir.path(), "x.csv", "").unwrap().ends_with("x.csv"));
    }

    #[test]
    fn checksum_round_trip_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("d.csv");
        std::fs::write(&f, b"abc").unwrap();
        assert!(!check_recorded(&f).unwrap());
        let digest = sha256_file(&f).unwrap();
        assert_eq!(digest, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        record_checksum(&f, &digest).unwrap();
        assert!(check_recorded(&f).unwrap());
        std::fs::write(&f, b"abd").unwrap();
        assert_eq!(check_recorded(&f).unwrap_err().exit_code(), 2);
    }
}
