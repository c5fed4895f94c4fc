//! Layered run configuration: command-line flags over a TOML file over a
//! named preset over built-in defaults.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::CliError;

pub const PRESETS: &[(&str, &str)] = &[
    ("paper-2021", include_str!("../presets/paper-2021.toml")),
    ("desk", include_str!("../presets/desk.toml")),
];

/// Settings for `fetch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FetchSection {
    pub languages: Vec<String>,
    pub repos_per_language: u32,
    pub page_size: u32,
    pub workers: usize,
}

impl Default for FetchSection {
    fn default() -> Self {
        let d = triage_ingest::FetchOptions::default();
        Self {
            languages: Vec::new(),
            repos_per_language: d.repos_per_language,
            page_size: d.page_size,
            workers: d.workers,
        }
    }
}

/// Settings for `prepare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepareSection {
    pub ratio: f64,
    pub seed: u64,
    pub oversample: bool,
    pub sample: Option<usize>,
}

impl Default for PrepareSection {
    fn default() -> Self {
        let d = triage_core::corpus::PrepareOptions::default();
        Self {
            ratio: d.ratio,
            seed: d.seed,
            oversample: d.oversample,
            sample: d.sample,
        }
    }
}

/// The merged preset and config file, before flags are applied.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    table: Table,
}

fn parse(text: &str, origin: &str) -> Result<Table, CliError> {
    text.parse::<Table>()
        .map_err(|e| CliError::Usage(format!("{origin}: {e}")))
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    pub fn load(preset: Option<&str>, file: Option<&Path>) -> Result<Self, CliError> {
        let mut table = Table::new();
        if let Some(name) = preset {
            let Some((_, text)) = PRESETS.iter().find(|(n, _)| *n == name) else {
                let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
                return Err(CliError::Usage(format!(
                    "unknown preset `{name}` (known: {})",
                    known.join(", ")
                )));
            };
            table = parse(text, &format!("preset {name}"))?;
        }
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
            merge(&mut table, parse(&text, &path.display().to_string())?);
        }
        Ok(Self { table })
    }

    /// `defaults`, overlaid with the `[name]` table, overlaid with `flags`.
    /// Keys that `T` does not know are rejected.
    pub fn section<T>(&self, name: &str, defaults: T, flags: Table) -> Result<T, CliError>
    where
        T: Serialize + DeserializeOwned,
    {
        let mut merged = match Value::try_from(&defaults) {
            Ok(Value::Table(t)) => t,
            _ => Table::new(),
        };
        let mut overlay = match self.table.get(name) {
            Some(Value::Table(t)) => t.clone(),
            Some(_) => return Err(CliError::Usage(format!("[{name}] must be a table"))),
            None => Table::new(),
        };
        merge(&mut overlay, flags);
        let keys: Vec<String> = overlay.keys().cloned().collect();
        merge(&mut merged, overlay);
        let value: T = Value::Table(merged)
            .try_into()
            .map_err(|e| CliError::Usage(format!("[{name}]: {e}")))?;
        if let Ok(Value::Table(back)) = Value::try_from(&value) {
            if let Some(unknown) = keys.iter().find(|k| !back.contains_key(*k)) {
                return Err(CliError::Usage(format!("[{name}]: unknown key `{unknown}`")));
            }
        }
        Ok(value)
    }
}

/// Collects the flags that were given into a table for [`RunConfig::section`].
#[derive(Default)]
pub struct Flags(Table);

impl Flags {
    pub fn set<V: Serialize>(mut self, key: &str, value: Option<V>) -> Self {
        if let Some(v) = value {
            if let Ok(v) = Value::try_from(v) {
                self.0.insert(key.to_string(), v);
            }
        }
        self
    }

    pub fn into_table(self) -> Table {
        self.0
    }
}
