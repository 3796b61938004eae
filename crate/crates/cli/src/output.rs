use std::path::{Path, PathBuf};

/// Tracks files and directories a command creates; unless committed, they
/// are removed when the guard drops.
#[derive(Debug, Default)]
pub struct OutputGuard {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl OutputGuard {
    pub fn new() -> Self {
        Self::default()
    }

    /// Create `dir` (and parents), remembering the topmost directory that did
    /// not exist yet.
    pub fn dir(&mut self, dir: &Path) -> std::io::Result<PathBuf> {
        let mut first_missing = None;
        let mut cur = Some(dir);
        while let Some(p) = cur {
            if p.as_os_str().is_empty() || p.exists() {
                break;
            }
            first_missing = Some(p.to_path_buf());
            cur = p.parent();
        }
        std::fs::create_dir_all(dir)?;
        if let Some(p) = first_missing {
            self.dirs.push(p);
        }
        Ok(dir.to_path_buf())
    }

    /// Remember a file about to be written. Only files are removed on
    /// failure, so a directory already sitting at `path` survives.
    pub fn file(&mut self, path: PathBuf) -> PathBuf {
        self.files.push(path.clone());
        path
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in self.files.iter().rev() {
            if p.is_file() {
                let _ = std::fs::remove_file(p);
            }
        }
        for p in self.dirs.iter().rev() {
            let _ = std::fs::remove_dir_all(p);
        }
    }
}
