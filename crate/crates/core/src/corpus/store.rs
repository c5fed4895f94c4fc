//! Prepared-corpus directory: `train.jsonl`, `test.jsonl` and `manifest.json`.
//!
//! Each example line carries `text, bug, enhancement, question, owner, repo,
//! number, duplicated_from` with the label slots as 0/1 and
//! `duplicated_from` either null or `owner/repo#number`.

use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::example::LabeledExample;
use super::oversample::OversampleReport;
use super::split::CorpusSplit;
use super::{CorpusError, CorpusStats};
use crate::issue::SourceRef;
use crate::labels::LabelVector;

pub const CORPUS_FORMAT_VERSION: u32 = 1;
pub const TRAIN_FILE: &str = "train.jsonl";
pub const TEST_FILE: &str = "test.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn file_name(self) -> &'static str {
        match self {
            Split::Train => TRAIN_FILE,
            Split::Test => TEST_FILE,
        }
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}` (expected train or test)")),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExampleLine {
    text: String,
    bug: u8,
    enhancement: u8,
    question: u8,
    owner: String,
    repo: String,
    number: u64,
    duplicated_from: Option<String>,
}

impl From<&LabeledExample> for ExampleLine {
    fn from(ex: &LabeledExample) -> Self {
        let [bug, enhancement, question] = ex.labels.slots().map(u8::from);
        Self {
            text: ex.text.clone(),
            bug,
            enhancement,
            question,
            owner: ex.source.owner.clone(),
            repo: ex.source.repo.clone(),
            number: ex.source.number,
            duplicated_from: ex.duplicated_from.as_ref().map(ToString::to_string),
        }
    }
}

impl ExampleLine {
    fn into_example(self) -> Result<LabeledExample, String> {
        let slot = |name: &str, v: u8| match v {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(format!("`{name}` must be 0 or 1, got {other}")),
        };
        let labels = LabelVector::new(
            slot("bug", self.bug)?,
            slot("enhancement", self.enhancement)?,
            slot("question", self.question)?,
        );
        if self.text != self.text.to_lowercase() {
            return Err("text is not lowercase".into());
        }
        let duplicated_from = self
            .duplicated_from
            .map(|s| SourceRef::from_str(&s))
            .transpose()?;
        Ok(LabeledExample {
            text: self.text,
            labels,
            source: SourceRef::new(self.owner, self.repo, self.number),
            duplicated_from,
        })
    }
}

fn to_line(ex: &LabeledExample) -> String {
    serde_json::to_string(&ExampleLine::from(ex)).expect("example serializes")
}

/// Content hash (hex SHA-256) of the serialized examples, in order.
pub fn fingerprint(examples: &[LabeledExample]) -> String {
    let mut hasher = Sha256::new();
    for ex in examples {
        hasher.update(to_line(ex).as_bytes());
        hasher.update(b"\n");
    }
    hex::encode(hasher.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format_version: u32,
    pub split_seed: u64,
    pub split_ratio: f64,
    pub train_examples: usize,
    pub test_examples: usize,
    pub train_fingerprint: String,
    pub test_fingerprint: String,
    pub oversample_report: Option<OversampleReport>,
    pub stats: Option<CorpusStats>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_examples(path: &Path, examples: &[LabeledExample]) -> Result<(), CorpusError> {
    let mut out = String::new();
    for ex in examples {
        out.push_str(&to_line(ex));
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn read_examples(path: &Path) -> Result<Vec<LabeledExample>, CorpusError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let corrupt = |reason: String| CorpusError::Corrupt {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let parsed: ExampleLine = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
        out.push(parsed.into_example().map_err(corrupt)?);
    }
    Ok(out)
}

/// Writes the split into `dir`, creating it if needed.
pub fn write_corpus(
    dir: &Path,
    split: &CorpusSplit,
    stats: Option<&CorpusStats>,
) -> Result<CorpusManifest, CorpusError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_examples(&dir.join(TRAIN_FILE), &split.train)?;
    write_examples(&dir.join(TEST_FILE), &split.test)?;
    let manifest = CorpusManifest {
        format_version: CORPUS_FORMAT_VERSION,
        split_seed: split.split_seed,
        split_ratio: split.split_ratio,
        train_examples: split.train.len(),
        test_examples: split.test.len(),
        train_fingerprint: fingerprint(&split.train),
        test_fingerprint: fingerprint(&split.test),
        oversample_report: split.oversample_report.clone(),
        stats: stats.cloned(),
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<CorpusManifest, CorpusError> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: CorpusManifest = serde_json::from_str(&text).map_err(|e| CorpusError::Corrupt {
        path: path.clone(),
        line: e.line(),
        reason: e.to_string(),
    })?;
    if manifest.format_version > CORPUS_FORMAT_VERSION {
        return Err(CorpusError::Corrupt {
            path,
            line: 1,
            reason: format!(
                "corpus format {} is newer than supported {CORPUS_FORMAT_VERSION}",
                manifest.format_version
            ),
        });
    }
    Ok(manifest)
}

/// Reads one side of a prepared corpus.
pub fn read_split(dir: &Path, split: Split) -> Result<Vec<LabeledExample>, CorpusError> {
    read_examples(&dir.join(split.file_name()))
}

pub fn read_corpus(dir: &Path) -> Result<(CorpusSplit, CorpusManifest), CorpusError> {
    let manifest = read_manifest(dir)?;
    let split = CorpusSplit {
        train: read_split(dir, Split::Train)?,
        test: read_split(dir, Split::Test)?,
        split_seed: manifest.split_seed,
        split_ratio: manifest.split_ratio,
        oversample_report: manifest.oversample_report.clone(),
    };
    Ok((split, manifest))
}

/// Path of one split file inside a corpus directory.
pub fn split_path(dir: &Path, split: Split) -> PathBuf {
    dir.join(split.file_name())
}
