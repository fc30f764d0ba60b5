//! Append-only JSON-lines store replayed into memory at open.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::MemoryError;

pub const SCHEMA_VERSION: u32 = 1;

/// A record together with its store-assigned id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stored<R> {
    pub id: u64,
    #[serde(flatten)]
    pub record: R,
}

#[derive(Serialize)]
struct LineOut<'a, R> {
    schema_version: u32,
    id: u64,
    #[serde(flatten)]
    record: &'a R,
}

#[derive(Deserialize)]
struct LineIn<R> {
    schema_version: u32,
    id: u64,
    #[serde(flatten)]
    record: R,
}

/// Readers take cheap [`snapshot`](JsonlStore::snapshot)s; appends after a
/// snapshot is taken do not show up in it.
#[derive(Debug)]
pub struct JsonlStore<R> {
    path: Option<PathBuf>,
    file: Option<File>,
    records: Arc<Vec<Stored<R>>>,
    next_id: u64,
    max_records: Option<usize>,
}

impl<R> JsonlStore<R>
where
    R: Serialize + DeserializeOwned + Clone,
{
    /// A store without a backing file.
    pub fn in_memory() -> Self {
        Self { path: None, file: None, records: Arc::new(Vec::new()), next_id: 1, max_records: None }
    }

    /// Opens (or creates) the log at `path` and replays it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, MemoryError> {
        let path = path.as_ref().to_path_buf();
        let io_err = |e: std::io::Error| MemoryError::Io { path: path.display().to_string(), source: e };
        let mut records = Vec::new();
        let mut next_id = 1;
        if path.exists() {
            let reader = BufReader::new(File::open(&path).map_err(io_err)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line.map_err(io_err)?;
                if line.trim().is_empty() {
                    continue;
                }
                let corrupt = |reason: String| MemoryError::Corrupt {
                    path: path.display().to_string(),
                    line: i + 1,
                    reason,
                };
                let parsed: LineIn<R> = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                if parsed.schema_version != SCHEMA_VERSION {
                    return Err(corrupt(format!("unsupported schema_version {}", parsed.schema_version)));
                }
                if parsed.id < next_id {
                    return Err(corrupt(format!("id {} is not increasing", parsed.id)));
                }
                next_id = parsed.id + 1;
                records.push(Stored { id: parsed.id, record: parsed.record });
            }
        } else if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(io_err)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err)?;
        Ok(Self { path: Some(path), file: Some(file), records: Arc::new(records), next_id, max_records: None })
    }

    pub fn with_max_records(mut self, max: usize) -> Self {
        self.max_records = Some(max);
        self
    }

    /// Appends `record` and returns its id. Ids are strictly increasing.
    pub fn append(&mut self, record: R) -> Result<u64, MemoryError> {
        if self.max_records.is_some_and(|max| self.records.len() >= max) {
            return Err(MemoryError::StorageFull { capacity: self.max_records.unwrap_or_default() });
        }
        let id = self.next_id;
        if let Some(file) = self.file.as_mut() {
            let line = serde_json::to_string(&LineOut { schema_version: SCHEMA_VERSION, id, record: &record })
                .map_err(|e| MemoryError::Encode(e.to_string()))?;
            let path = self.path.as_deref().unwrap_or(Path::new("")).display().to_string();
            writeln!(file, "{line}")
                .and_then(|_| file.sync_data())
                .map_err(|source| MemoryError::Io { path, source })?;
        }
        Arc::make_mut(&mut self.records).push(Stored { id, record });
        self.next_id += 1;
        Ok(id)
    }

    pub fn get(&self, id: u64) -> Option<&Stored<R>> {
        self.records.binary_search_by_key(&id, |s| s.id).ok().map(|i| &self.records[i])
    }

    pub fn snapshot(&self) -> Arc<Vec<Stored<R>>> {
        Arc::clone(&self.records)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }
}
