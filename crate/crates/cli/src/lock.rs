use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::CliError;

pub const LOCK_NAME: &str = ".gazelabel.lock";

/// Exclusive claim on an output directory, released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
    _file: File,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<DirLock, CliError> {
        let path = dir.join(LOCK_NAME);
        let mut file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| {
                if e.kind() == std::io::ErrorKind::AlreadyExists {
                    CliError::Runtime(format!(
                        "{} is locked by another run (remove {} if that run is gone)",
                        dir.display(),
                        path.display()
                    ))
                } else {
                    CliError::Runtime(format!("{}: {e}", path.display()))
                }
            })?;
        let _ = writeln!(file, "{}", std::process::id());
        Ok(DirLock { path, _file: file })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}
