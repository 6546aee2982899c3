use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::ProtocolError;
use crate::vault::EnrollmentRecord;

/// Where a server keeps its enrollment records.
pub trait RecordStore {
    fn load(&self, user_id: &str) -> Result<Option<EnrollmentRecord>, ProtocolError>;
    /// Replaces any existing record for the same user. Must be atomic.
    fn save(&mut self, record: &EnrollmentRecord) -> Result<(), ProtocolError>;
}

/// Ids are restricted so they can double as file names.
pub fn validate_user_id(user_id: &str) -> Result<(), ProtocolError> {
    let ok = !user_id.is_empty()
        && user_id.len() <= 64
        && !user_id.starts_with('.')
        && user_id.bytes().all(|b| b.is_ascii_alphanumeric() || b"._-".contains(&b));
    if ok {
        Ok(())
    } else {
        Err(ProtocolError::InvalidUserId(user_id.to_string()))
    }
}

#[derive(Debug, Default, Clone)]
pub struct MemoryStore {
    records: BTreeMap<String, EnrollmentRecord>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl RecordStore for MemoryStore {
    fn load(&self, user_id: &str) -> Result<Option<EnrollmentRecord>, ProtocolError> {
        Ok(self.records.get(user_id).cloned())
    }

    fn save(&mut self, record: &EnrollmentRecord) -> Result<(), ProtocolError> {
        self.records.insert(record.user_id.clone(), record.clone());
        Ok(())
    }
}

/// One `<user_id>.vvr` file per user.
#[derive(Debug, Clone)]
pub struct DirStore {
    root: PathBuf,
}

impl DirStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ProtocolError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, user_id: &str) -> Result<PathBuf, ProtocolError> {
        validate_user_id(user_id)?;
        Ok(self.root.join(format!("{user_id}.vvr")))
    }
}

fn io_err(path: &Path, e: std::io::Error) -> ProtocolError {
    ProtocolError::Store(format!("{}: {e}", path.display()))
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path)
}

impl RecordStore for DirStore {
    fn load(&self, user_id: &str) -> Result<Option<EnrollmentRecord>, ProtocolError> {
        let path = self.path_for(user_id)?;
        match fs::read(&path) {
            Ok(bytes) => {
                let rec = EnrollmentRecord::from_bytes(&bytes)?;
                if rec.user_id != user_id {
                    return Err(ProtocolError::Store(format!("{} holds a record for {:?}", path.display(), rec.user_id)));
                }
                Ok(Some(rec))
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err(&path, e)),
        }
    }

    fn save(&mut self, record: &EnrollmentRecord) -> Result<(), ProtocolError> {
        let path = self.path_for(&record.user_id)?;
        write_atomic(&path, &record.to_bytes()).map_err(|e| io_err(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn user_id_rules() {
        for ok in ["alice", "spk-01", "a.b_c"] {
            validate_user_id(ok).unwrap();
        }
        for bad in ["", ".hidden", "a/b", "../x", "sp ace", &"x".repeat(65)] {
            assert!(validate_user_id(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn dir_store_missing_is_none() {
        let dir = tempfile::tempdir().unwrap();
        let store = DirStore::open(dir.path()).unwrap();
        assert_eq!(store.load("nobody").unwrap(), None);
        assert!(store.load("../etc").is_err());
    }
}
