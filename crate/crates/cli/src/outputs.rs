use std::path::{Path, PathBuf};

/// Tracks files and directories a command creates and removes them again
/// unless the command finishes and calls `commit`.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `path` and returns it.
    pub fn file(&mut self, path: impl AsRef<Path>) -> PathBuf {
        let p = path.as_ref().to_path_buf();
        self.files.push(p.clone());
        p
    }

    /// Creates `dir` (and parents), remembering it when it did not exist.
    pub fn dir(&mut self, dir: impl AsRef<Path>) -> std::io::Result<PathBuf> {
        let d = dir.as_ref().to_path_buf();
        let mut missing = Vec::new();
        let mut cur = Some(d.as_path());
        while let Some(c) = cur {
            if c.as_os_str().is_empty() || c.exists() {
                break;
            }
            missing.push(c.to_path_buf());
            cur = c.parent();
        }
        std::fs::create_dir_all(&d)?;
        self.dirs.extend(missing);
        Ok(d)
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
        // Innermost first; only directories that are now empty go away.
        for d in &self.dirs {
            let _ = std::fs::remove_dir(d);
        }
    }
}
