//! Tab-separated tables and the staging directory they are written through.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Columns of numbers; every value is written with `f64`'s shortest
/// round-trip formatting so reruns are byte-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join("\t");
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push('\t');
                }
                write!(out, "{v}").expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }
}

/// `0`/`1` column value.
pub fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Collects outputs in a hidden directory inside `out` and moves them into
/// place only on [`Staging::commit`]. Dropping without committing removes
/// everything written, and `out` itself if this run created it.
pub struct Staging {
    out: PathBuf,
    dir: PathBuf,
    created_out: bool,
    files: Vec<String>,
    committed: bool,
}

impl Staging {
    pub fn new(out: &Path) -> Result<Self, CliError> {
        let created_out = !out.exists();
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        let dir = out.join(format!(".cavkin-staging-{}", std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        }
        fs::create_dir(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self {
            out: out.to_path_buf(),
            dir,
            created_out,
            files: Vec::new(),
            committed: false,
        })
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        self.write_text(name, &table.render())
    }

    /// Names written so far, in order.
    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn commit(mut self) -> Result<Vec<PathBuf>, CliError> {
        let mut placed = Vec::with_capacity(self.files.len());
        for name in &self.files {
            let from = self.dir.join(name);
            let to = self.out.join(name);
            if let Some(parent) = to.parent() {
                fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            fs::rename(&from, &to).map_err(|e| CliError::io(&to, e))?;
            placed.push(to);
        }
        fs::remove_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        self.committed = true;
        Ok(placed)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        let _ = fs::remove_dir_all(&self.dir);
        if self.created_out {
            // only succeeds if nothing else was put there meanwhile
            let _ = fs::remove_dir(&self.out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_render_shortest_round_trip() {
        let mut t = Table::new(["t", "x"]);
        t.push(vec![0.1, 1.0 / 3.0]);
        t.push(vec![2.0, f64::NAN]);
        assert_eq!(t.render(), "t\tx\n0.1\t0.3333333333333333\n2\tNaN\n");
    }

    #[test]
    fn dropped_staging_leaves_nothing() {
        let root = tempfile::tempdir().unwrap();
        let out = root.path().join("run");
        {
            let mut s = Staging::new(&out).unwrap();
            s.write_text("a.tsv", "x\n").unwrap();
        }
        assert!(!out.exists());
    }

    #[test]
    fn committed_files_land_in_out() {
        let root = tempfile::tempdir().unwrap();
        let mut s = Staging::new(root.path()).unwrap();
        s.write_text("sub/a.tsv", "x\n").unwrap();
        let placed = s.commit().unwrap();
        assert_eq!(placed, vec![root.path().join("sub/a.tsv")]);
        let left: Vec<_> = fs::read_dir(root.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(left, vec![std::ffi::OsString::from("sub")]);
    }
}
