//! Output files that are removed again if the command fails.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// Tracks files written by a command. Dropping it without [`Outputs::commit`]
/// deletes them.
#[derive(Debug, Default)]
pub struct Outputs {
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes `contents` through a temporary file and a rename, so readers
    /// never see a half-written file.
    pub fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        let io_err = |source| CliError::Io { path: path.to_path_buf(), source };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err)?;
        }
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".partial");
        let tmp = PathBuf::from(tmp);
        fs::write(&tmp, contents).map_err(|source| CliError::Io { path: tmp.clone(), source })?;
        if let Err(source) = fs::rename(&tmp, path) {
            let _ = fs::remove_file(&tmp);
            return Err(io_err(source));
        }
        self.written.push(path.to_path_buf());
        log::info!("wrote {}", path.display());
        Ok(())
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = fs::remove_file(p);
            }
        }
    }
}

/// `dir/stem.suffix` next to `path`, e.g. `run.csv` to `run.report.csv`.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

pub fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_outputs_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        {
            let mut out = Outputs::new();
            out.write(&a, "x").unwrap();
            assert!(a.exists());
        }
        assert!(!a.exists());
        let mut out = Outputs::new();
        out.write(&a, "y").unwrap();
        out.commit();
        assert_eq!(fs::read_to_string(&a).unwrap(), "y");
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar(Path::new("out/run.csv"), "report.csv"), PathBuf::from("out/run.report.csv"));
        assert_eq!(sidecar(Path::new("data.json"), "truth.json"), PathBuf::from("data.truth.json"));
    }
}
