//! All-or-nothing output staging.
//!
//! Commands collect every output in memory and commit at the very end, so a
//! failing run leaves no files behind.

use std::io::Write;
use std::path::{Path, PathBuf};

use fcnet::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path, bytes: &[u8]) -> Self {
        FileDigest {
            path: path.to_path_buf(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        }
    }

    pub fn of_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::of(path, &bytes))
    }
}

#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.files.push((path.into(), bytes.into()));
    }

    pub fn digests(&self) -> Vec<FileDigest> {
        self.files
            .iter()
            .map(|(p, b)| FileDigest::of(p, b))
            .collect()
    }

    /// Writes every file to a temporary sibling first and renames them into
    /// place only once all writes succeeded. A failed rename removes the
    /// files already renamed.
    pub fn commit(self) -> Result<()> {
        let mut staged = Vec::with_capacity(self.files.len());
        for (path, bytes) in &self.files {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
                _ => PathBuf::from("."),
            };
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(|e| Error::io(&dir, e))?;
            tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
            tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
            staged.push((tmp, path));
        }
        let mut done: Vec<&PathBuf> = Vec::new();
        for (tmp, path) in staged {
            if let Err(e) = tmp.persist(path) {
                for p in done {
                    let _ = std::fs::remove_file(p);
                }
                return Err(Error::io(path, e.error));
            }
            done.push(path);
        }
        Ok(())
    }
}

/// `path` with its extension replaced by `suffix`, e.g. `report.json` →
/// `report.roc.csv` for suffix `roc.csv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_writes_everything() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::default();
        out.add(dir.path().join("a/x.txt"), "one");
        out.add(dir.path().join("y.txt"), "two");
        out.commit().unwrap();
        assert_eq!(
            std::fs::read_to_string(dir.path().join("a/x.txt")).unwrap(),
            "one"
        );
        assert_eq!(
            std::fs::read_to_string(dir.path().join("y.txt")).unwrap(),
            "two"
        );
    }

    #[test]
    fn failed_commit_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "").unwrap();
        let mut out = Outputs::default();
        out.add(dir.path().join("ok.txt"), "fine");
        // A directory cannot be created beneath a regular file.
        out.add(blocker.join("nested.txt"), "never");
        assert!(out.commit().is_err());
        assert!(!dir.path().join("ok.txt").exists());
    }

    #[test]
    fn digest_of_known_bytes() {
        let d = FileDigest::of(Path::new("x"), b"abc");
        assert_eq!(
            d.sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(
            sibling(Path::new("r/report.json"), "roc.csv"),
            Path::new("r/report.roc.csv")
        );
    }
}
