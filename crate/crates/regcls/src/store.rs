//! Append-only JSON-lines result files.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, IoContext, Result};
use crate::trial::{TrialResult, TrialSpec};

pub const TRIALS_FILE: &str = "trials.jsonl";
pub const FAILURES_FILE: &str = "failures.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub fingerprint: String,
    pub spec: TrialSpec,
    pub error: String,
}

/// Serializes writes from concurrent trials into the results directory.
#[derive(Debug)]
pub struct ResultStore {
    dir: PathBuf,
    trials: Mutex<File>,
    failures: Mutex<File>,
}

fn open_append(path: &Path) -> Result<File> {
    OpenOptions::new().create(true).append(true).open(path).at(path)
}

fn append_line<T: Serialize>(file: &Mutex<File>, value: &T, path: &Path) -> Result<()> {
    let mut line = serde_json::to_vec(value)?;
    line.push(b'\n');
    let mut f = file.lock().unwrap_or_else(|e| e.into_inner());
    f.write_all(&line).at(path)?;
    f.flush().at(path)
}

impl ResultStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).at(&dir)?;
        Ok(Self {
            trials: Mutex::new(open_append(&dir.join(TRIALS_FILE))?),
            failures: Mutex::new(open_append(&dir.join(FAILURES_FILE))?),
            dir,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn append(&self, result: &TrialResult) -> Result<()> {
        append_line(&self.trials, result, &self.dir.join(TRIALS_FILE))
    }

    pub fn append_failure(&self, failure: &TrialFailure) -> Result<()> {
        append_line(&self.failures, failure, &self.dir.join(FAILURES_FILE))
    }
}

/// Reads a JSON-lines file. A torn final line (no trailing newline) from an
/// interrupted run is skipped; any other malformed line is an error.
fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e).at(path),
    };
    let mut reader = BufReader::new(file);
    let mut out = Vec::new();
    let mut buf = String::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_line(&mut buf).at(path)? == 0 {
            break;
        }
        line_no += 1;
        let complete = buf.ends_with('\n');
        let text = buf.trim();
        if text.is_empty() {
            continue;
        }
        match serde_json::from_str(text) {
            Ok(v) => out.push(v),
            Err(_) if !complete => break,
            Err(source) => return Err(HarnessError::Record { path: path.to_owned(), line: line_no, source }),
        }
    }
    Ok(out)
}

/// Stored results, first record per fingerprint, sorted by fingerprint.
pub fn load_results(dir: &Path) -> Result<Vec<TrialResult>> {
    let mut seen = BTreeSet::new();
    let mut out: Vec<TrialResult> = read_lines::<TrialResult>(&dir.join(TRIALS_FILE))?
        .into_iter()
        .filter(|r| seen.insert(r.fingerprint.clone()))
        .collect();
    out.sort_by(|a, b| a.fingerprint.cmp(&b.fingerprint));
    Ok(out)
}

pub fn load_failures(dir: &Path) -> Result<Vec<TrialFailure>> {
    read_lines(&dir.join(FAILURES_FILE))
}

pub fn completed_fingerprints(dir: &Path) -> Result<BTreeSet<String>> {
    Ok(load_results(dir)?.into_iter().map(|r| r.fingerprint).collect())
}
