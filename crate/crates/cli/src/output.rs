//! Output directory that removes what it wrote unless the run completes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub struct OutputDir {
    root: PathBuf,
    created_root: bool,
    written: Vec<PathBuf>,
    committed: bool,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        let created_root = !root.exists();
        fs::create_dir_all(root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            created_root,
            written: Vec::new(),
            committed: false,
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        self.written.push(path.clone());
        fs::File::create(&path)
            .and_then(|mut f| f.write_all(contents))
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_str(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        self.write(name, contents.as_bytes())
    }

    /// Writes a CSV table through the `csv` crate.
    pub fn write_csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(header)?;
        for row in rows {
            wtr.write_record(row)?;
        }
        let bytes = wtr.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
        self.write(name, &bytes)
    }

    /// Writes a CSV produced by a callback on an in-memory buffer.
    pub fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<PathBuf> {
        let mut buf = Vec::new();
        f(&mut buf).with_context(|| format!("rendering {name}"))?;
        self.write(name, &buf)
    }

    pub fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_str(name, &text)
    }

    pub fn commit(mut self) -> PathBuf {
        self.committed = true;
        self.root.clone()
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
        if self.created_root {
            // only succeeds when nothing else was put there
            let _ = fs::remove_dir(&self.root);
        }
    }
}

/// Shortest representation that parses back to the same value.
pub fn num(v: f64) -> String {
    v.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_output_is_removed() {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().join("run");
        {
            let mut out = OutputDir::create(&root).unwrap();
            out.write_str("a.csv", "x\n").unwrap();
            assert!(root.join("a.csv").exists());
        }
        assert!(!root.exists());
    }

    #[test]
    fn existing_files_survive_cleanup() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("keep.txt"), "k").unwrap();
        {
            let mut out = OutputDir::create(tmp.path()).unwrap();
            out.write_str("b.csv", "y\n").unwrap();
        }
        assert!(tmp.path().join("keep.txt").exists());
        assert!(!tmp.path().join("b.csv").exists());
    }

    #[test]
    fn committed_output_stays() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(&tmp.path().join("r")).unwrap();
        out.write_csv("t.csv", &["a", "b"], [vec![num(1.5), num(f64::INFINITY)]])
            .unwrap();
        let root = out.commit();
        assert_eq!(
            fs::read_to_string(root.join("t.csv")).unwrap(),
            "a,b\n1.5,inf\n"
        );
    }
}
