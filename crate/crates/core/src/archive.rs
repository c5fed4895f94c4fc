//! Line-delimited JSON archive of raw issue records.
//!
//! Each line is one JSON object with the fields
//! `owner, repo, number, title, body, labels, created_at, is_pull_request,
//! language, stars`. JSON string escaping keeps embedded newlines on a single
//! physical line, so bodies round-trip byte-exact. Writers append and skip any
//! `(owner, repo, number)` already present, which makes resumed crawls safe.

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::issue::{IssueRecord, RepoRef, SourceRef};

#[derive(Debug, thiserror::Error)]
pub enum ArchiveError {
    #[error("archive {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("archive {path} line {line}: {reason}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("record {position} rejected: {reason}")]
    Malformed { position: usize, reason: String },
}

/// On-disk shape of a record.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArchiveLine {
    owner: String,
    repo: String,
    number: u64,
    title: String,
    body: String,
    labels: Vec<String>,
    created_at: DateTime<Utc>,
    is_pull_request: bool,
    #[serde(default)]
    language: String,
    #[serde(default)]
    stars: u64,
}

impl From<&IssueRecord> for ArchiveLine {
    fn from(r: &IssueRecord) -> Self {
        Self {
            owner: r.repo.owner.clone(),
            repo: r.repo.name.clone(),
            number: r.issue_number,
            title: r.title.clone(),
            body: r.body.clone(),
            labels: r.raw_labels.clone(),
            created_at: r.created_at,
            is_pull_request: r.is_pull_request,
            language: r.repo.primary_language.clone(),
            stars: r.repo.star_count,
        }
    }
}

impl ArchiveLine {
    fn into_record(self) -> Result<IssueRecord, String> {
        let repo = RepoRef::new(self.owner, self.repo, self.language, self.stars)
            .map_err(|e| e.to_string())?;
        if self.number == 0 {
            return Err("issue number must be positive".into());
        }
        Ok(IssueRecord {
            repo,
            issue_number: self.number,
            title: self.title,
            body: self.body,
            raw_labels: self.labels,
            created_at: self.created_at,
            is_pull_request: self.is_pull_request,
        })
    }
}

/// Summary of an ingestion run. The fetch pipeline fills in the language
/// list; a bare [`write_archive`] call leaves it empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestionManifest {
    pub languages: Vec<String>,
    pub repos_per_language: Option<u32>,
    /// Lines written in this run, keyed by `owner/repo`.
    pub fetched_counts: BTreeMap<String, u64>,
    pub records_written: u64,
    pub duplicates_skipped: u64,
    pub pull_requests: u64,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

impl IngestionManifest {
    pub fn total(&self) -> u64 {
        self.fetched_counts.values().sum()
    }

    /// Sidecar path used by [`write_manifest`]: `<archive>.manifest.json`.
    pub fn path_for(archive: &Path) -> PathBuf {
        let mut name = archive.as_os_str().to_owned();
        name.push(".manifest.json");
        PathBuf::from(name)
    }
}

pub fn write_manifest(manifest: &IngestionManifest, path: &Path) -> Result<(), ArchiveError> {
    let io_err = |source| ArchiveError::Io {
        path: path.to_path_buf(),
        source,
    };
    let json = serde_json::to_string_pretty(manifest).map_err(|e| io_err(e.into()))?;
    std::fs::write(path, json + "\n").map_err(io_err)
}

/// Single writer over an archive file. Opening loads the keys already on disk.
pub struct ArchiveWriter {
    path: PathBuf,
    out: BufWriter<File>,
    seen: HashSet<SourceRef>,
    position: usize,
    manifest: IngestionManifest,
}

impl ArchiveWriter {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ArchiveError> {
        let path = path.as_ref().to_path_buf();
        let started_at = Utc::now();
        let mut seen = HashSet::new();
        if path.exists() {
            for record in read_archive(&path)? {
                seen.insert(record?.source());
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|source| ArchiveError::Io {
                path: path.clone(),
                source,
            })?;
        Ok(Self {
            path,
            out: BufWriter::new(file),
            seen,
            position: 0,
            manifest: IngestionManifest {
                languages: Vec::new(),
                repos_per_language: None,
                fetched_counts: BTreeMap::new(),
                records_written: 0,
                duplicates_skipped: 0,
                pull_requests: 0,
                started_at,
                finished_at: started_at,
            },
        })
    }

    /// Appends the record unless its key is already present. Returns whether a
    /// line was written.
    pub fn write(&mut self, record: &IssueRecord) -> Result<bool, ArchiveError> {
        self.position += 1;
        let position = self.position;
        record
            .repo
            .validate()
            .map_err(|e| ArchiveError::Malformed {
                position,
                reason: e.to_string(),
            })?;
        if record.issue_number == 0 {
            return Err(ArchiveError::Malformed {
                position,
                reason: "issue number must be positive".into(),
            });
        }
        if !self.seen.insert(record.source()) {
            self.manifest.duplicates_skipped += 1;
            return Ok(false);
        }
        let line = serde_json::to_string(&ArchiveLine::from(record)).map_err(|e| {
            ArchiveError::Malformed {
                position,
                reason: e.to_string(),
            }
        })?;
        writeln!(self.out, "{line}").map_err(|source| ArchiveError::Io {
            path: self.path.clone(),
            source,
        })?;
        *self
            .manifest
            .fetched_counts
            .entry(record.repo.full_name())
            .or_default() += 1;
        self.manifest.records_written += 1;
        if record.is_pull_request {
            self.manifest.pull_requests += 1;
        }
        Ok(true)
    }

    pub fn finish(mut self) -> Result<IngestionManifest, ArchiveError> {
        self.out.flush().map_err(|source| ArchiveError::Io {
            path: self.path.clone(),
            source,
        })?;
        self.manifest.finished_at = Utc::now();
        Ok(self.manifest)
    }
}

/// Appends `records` to the archive at `path`, deduplicating by
/// `(owner, repo, number)` against both the file and the input.
pub fn write_archive<I>(records: I, path: impl AsRef<Path>) -> Result<IngestionManifest, ArchiveError>
where
    I: IntoIterator<Item = IssueRecord>,
{
    let mut writer = ArchiveWriter::open(path)?;
    for record in records {
        writer.write(&record)?;
    }
    writer.finish()
}

/// Streaming reader; yields one record per non-blank line.
pub struct ArchiveReader {
    path: PathBuf,
    lines: io::Lines<BufReader<File>>,
    line: usize,
}

impl Iterator for ArchiveReader {
    type Item = Result<IssueRecord, ArchiveError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let raw = self.lines.next()?;
            self.line += 1;
            let raw = match raw {
                Ok(raw) => raw,
                Err(source) => {
                    return Some(Err(ArchiveError::Io {
                        path: self.path.clone(),
                        source,
                    }))
                }
            };
            if raw.trim().is_empty() {
                continue;
            }
            let corrupt = |reason: String| ArchiveError::Corrupt {
                path: self.path.clone(),
                line: self.line,
                reason,
            };
            let parsed = serde_json::from_str::<ArchiveLine>(&raw)
                .map_err(|e| corrupt(e.to_string()))
                .and_then(|l| l.into_record().map_err(corrupt));
            return Some(parsed);
        }
    }
}

pub fn read_archive(path: impl AsRef<Path>) -> Result<ArchiveReader, ArchiveError> {
    let path = path.as_ref().to_path_buf();
    let file = File::open(&path).map_err(|source| ArchiveError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(ArchiveReader {
        path,
        lines: BufReader::new(file).lines(),
        line: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn record(n: u64, body: &str) -> IssueRecord {
        IssueRecord {
            repo: RepoRef::new("octo", "widgets", "Rust", 10).unwrap(),
            issue_number: n,
            title: format!("issue {n}"),
            body: body.into(),
            raw_labels: vec!["bug".into()],
            created_at: Utc.with_ymd_and_hms(2021, 3, 1, 12, 0, 0).unwrap(),
            is_pull_request: false,
        }
    }

    fn read_all(path: &Path) -> Vec<IssueRecord> {
        read_archive(path).unwrap().map(Result::unwrap).collect()
    }

    #[test]
    fn counts_match_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        let m = write_archive((1..=3).map(|n| record(n, "b")), &path).unwrap();
        assert_eq!(m.records_written, 3);
        assert_eq!(m.total(), 3);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn rewriting_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        write_archive((1..=3).map(|n| record(n, "b")), &path).unwrap();
        let second = write_archive((1..=3).map(|n| record(n, "b")), &path).unwrap();
        assert_eq!(second.records_written, 0);
        assert_eq!(second.duplicates_skipped, 3);
        assert_eq!(read_all(&path).len(), 3);
    }

    #[test]
    fn newlines_in_body_survive() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        let body = "line one\nline two\r\n\n```\ncode\n```\t\u{2028}end";
        write_archive([record(1, body)], &path).unwrap();
        assert_eq!(read_all(&path)[0].body, body);
    }

    #[test]
    fn empty_file_reads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(read_all(&path).is_empty());
    }

    #[test]
    fn corrupt_line_names_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        std::fs::write(&path, "{\"owner\": 3}\n").unwrap();
        let err = read_archive(&path).unwrap().next().unwrap().unwrap_err();
        match err {
            ArchiveError::Corrupt { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            read_archive(dir.path().join("nope.jsonl")),
            Err(ArchiveError::Io { .. })
        ));
    }

    #[test]
    fn malformed_record_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.jsonl");
        let mut bad = record(2, "b");
        bad.repo.owner.clear();
        let err = write_archive([record(1, "b"), bad], &path).unwrap_err();
        assert!(matches!(err, ArchiveError::Malformed { position: 2, .. }));
    }
}
