use std::path::{Path, PathBuf};

use log::warn;

use super::source::{infer_cell, open_source, SourceError, SourceSpec};
use crate::measures::SecondaryStream;
use crate::monitor::{ReferenceTable, DEFAULT_ROW_KEY};

#[derive(Debug, thiserror::Error)]
pub enum ReferenceError {
    #[error("cannot read reference `{id}` from {}: {source}", path.display())]
    Read {
        id: String,
        path: PathBuf,
        source: csv::Error,
    },
    #[error("reference `{id}` has no key column `{key}`")]
    MissingKey { id: String, key: String },
}

/// Loads a CSV baseline keyed by `key`. A row keyed `*` is the fallback row;
/// a repeated key replaces the earlier row.
pub fn load_reference(path: &Path, id: &str, key: &str) -> Result<ReferenceTable, ReferenceError> {
    let read_err = |source| ReferenceError::Read {
        id: id.to_string(),
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(read_err)?;
    let header: Vec<String> = reader.headers().map_err(read_err)?.iter().map(str::to_string).collect();
    let key_at = header
        .iter()
        .position(|h| h == key)
        .ok_or_else(|| ReferenceError::MissingKey {
            id: id.to_string(),
            key: key.to_string(),
        })?;
    let columns: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != key_at)
        .map(|(_, h)| h.clone())
        .collect();
    let mut table = ReferenceTable::new(id, key, columns);
    for record in reader.records() {
        let record = record.map_err(read_err)?;
        let raw_key = record.get(key_at).unwrap_or("").trim();
        let row = (0..header.len())
            .filter(|&i| i != key_at)
            .map(|i| infer_cell(record.get(i).unwrap_or("").trim()))
            .collect();
        let replaced = if raw_key == DEFAULT_ROW_KEY {
            table.set_default(row)
        } else {
            table.insert(&infer_cell(raw_key), row)
        };
        if replaced {
            warn!("reference `{id}`: duplicate key `{raw_key}`, keeping the last row");
        }
    }
    Ok(table)
}

/// Reads a whole secondary stream into memory for pane-aligned matching.
pub fn load_stream(spec: &SourceSpec) -> Result<SecondaryStream, SourceError> {
    let elements = open_source(spec)?.collect::<Result<Vec<_>, _>>()?;
    Ok(SecondaryStream::new(elements))
}
