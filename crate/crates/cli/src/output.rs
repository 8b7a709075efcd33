//! Output directories with atomic file commits and a run manifest.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

pub const MANIFEST: &str = "manifest.json";

/// Files are written as `<name>.partial` and renamed on [`OutputDir::commit`]. Dropping
/// the directory without committing removes every partial file.
pub struct OutputDir {
    root: PathBuf,
    pending: Vec<PathBuf>,
    committed: bool,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create {}", root.display()))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            pending: Vec::new(),
            committed: false,
        })
    }

    /// Opens `<name>.partial` for writing.
    pub fn writer(&mut self, name: &str) -> Result<BufWriter<File>> {
        let partial = self.root.join(format!("{name}.partial"));
        let file = File::create(&partial).with_context(|| format!("cannot write {}", partial.display()))?;
        self.pending.push(partial);
        Ok(BufWriter::new(file))
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let mut w = self.writer(name)?;
        w.write_all(contents.as_bytes())?;
        w.flush()?;
        Ok(())
    }

    /// Renames every partial file into place, then writes the manifest.
    pub fn commit(mut self, manifest: &Manifest<impl Serialize>) -> Result<()> {
        for partial in std::mem::take(&mut self.pending) {
            let done = strip_partial(&partial).expect("partial files end in .partial");
            fs::rename(&partial, &done).with_context(|| format!("cannot finalize {}", done.display()))?;
        }
        let text = serde_json::to_string_pretty(manifest)? + "\n";
        let path = self.root.join(MANIFEST);
        let partial = self.root.join(format!("{MANIFEST}.partial"));
        fs::write(&partial, text)?;
        fs::rename(&partial, &path)?;
        self.committed = true;
        Ok(())
    }
}

fn strip_partial(path: &Path) -> Option<PathBuf> {
    let name = path.file_name()?.to_str()?.strip_suffix(".partial")?;
    Some(path.with_file_name(name))
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.pending {
                let _ = fs::remove_file(p);
            }
        }
    }
}

/// Everything needed to rerun a command.
#[derive(Serialize)]
pub struct Manifest<A: Serialize> {
    pub command: String,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub flags: A,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub duration_secs: f64,
}

impl<A: Serialize> Manifest<A> {
    pub fn new(command: &str, seed: Option<u64>, flags: A, started: Instant) -> Self {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            seed,
            flags,
            inputs: Vec::new(),
            outputs: Vec::new(),
            duration_secs: started.elapsed().as_secs_f64(),
        }
    }

    pub fn inputs(mut self, paths: &[&Path]) -> Self {
        self.inputs = paths.iter().map(|p| p.display().to_string()).collect();
        self
    }

    pub fn outputs(mut self, names: &[&str]) -> Self {
        self.outputs = names.iter().map(|s| s.to_string()).collect();
        self
    }
}
