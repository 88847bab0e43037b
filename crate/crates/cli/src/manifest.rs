use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use overlap_harness::write_json;
use serde::Serialize;

use crate::error::{CmdResult, Failure};

pub const VERSION: &str = env!("OVERLAP_LAB_VERSION");
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Complete,
    Aborted,
}

/// Record of one command invocation, written before any computation and
/// rewritten when the command finishes.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub config_hash: Option<String>,
    pub seeds: Vec<u64>,
    /// Unix seconds; absent in canonical mode.
    pub started: Option<u64>,
    pub finished: Option<u64>,
    pub status: Status,
    /// Paths relative to the output directory, sorted.
    pub artifacts: Vec<String>,
    pub version: String,
    #[serde(skip)]
    dir: PathBuf,
    #[serde(skip)]
    canonical: bool,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl RunManifest {
    /// Creates `dir` and writes the initial manifest into it.
    pub fn start(
        dir: &Path,
        command: Vec<String>,
        config_hash: Option<String>,
        seeds: Vec<u64>,
        canonical: bool,
    ) -> CmdResult<Self> {
        let m = Self {
            command,
            config_hash,
            seeds,
            started: (!canonical).then(now),
            finished: None,
            status: Status::Running,
            artifacts: vec![MANIFEST_FILE.to_string()],
            version: VERSION.to_string(),
            dir: dir.to_path_buf(),
            canonical,
        };
        m.write()?;
        Ok(m)
    }

    pub fn add(&mut self, path: &Path) {
        let rel = path.strip_prefix(&self.dir).unwrap_or(path);
        let s = rel.to_string_lossy().replace('\\', "/");
        if !self.artifacts.contains(&s) {
            self.artifacts.push(s);
        }
    }

    pub fn add_all(&mut self, paths: &[PathBuf]) {
        paths.iter().for_each(|p| self.add(p));
    }

    pub fn finish(&mut self, status: Status) -> CmdResult<()> {
        self.status = status;
        self.finished = (!self.canonical).then(now);
        self.artifacts.sort();
        self.write()
    }

    fn write(&self) -> CmdResult<()> {
        write_json(&self.dir.join(MANIFEST_FILE), self).map_err(Failure::usage)?;
        Ok(())
    }
}
