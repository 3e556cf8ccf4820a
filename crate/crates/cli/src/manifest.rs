//! Run manifest: config hash, seed, version, timing, statuses and the
//! content hash of every artifact. Written when a run starts and rewritten
//! when it ends.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Running,
    Pass,
    Fail,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentStatus {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub subcommand: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub threads: usize,
    pub started_unix: u64,
    pub wall_clock_s: Option<f64>,
    pub experiments: Vec<ExperimentStatus>,
    pub artifacts: Vec<Artifact>,
}

/// Owns the output directory; every file of a run goes through here.
pub struct ArtifactWriter {
    dir: PathBuf,
    manifest: RunManifest,
    clock: Instant,
}

impl ArtifactWriter {
    pub fn start(dir: &Path, subcommand: &str, rendered_config: &str, master_seed: u64, threads: usize) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let manifest = RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            config_sha256: sha256_hex(rendered_config.as_bytes()),
            master_seed,
            threads,
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            wall_clock_s: None,
            experiments: vec![ExperimentStatus { name: subcommand.to_string(), status: Status::Running, detail: String::new() }],
            artifacts: Vec::new(),
        };
        let mut w = Self { dir: dir.to_path_buf(), manifest, clock: Instant::now() };
        w.write("config.txt", rendered_config.as_bytes())?;
        w.flush_manifest()?;
        Ok(w)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Writes `name` under the output directory and records its hash.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.manifest.artifacts.retain(|a| a.path != name);
        self.manifest.artifacts.push(Artifact { path: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn set_status(&mut self, name: &str, status: Status, detail: &str) {
        let e = ExperimentStatus { name: name.to_string(), status, detail: detail.to_string() };
        match self.manifest.experiments.iter_mut().find(|x| x.name == name) {
            Some(x) => *x = e,
            None => self.manifest.experiments.push(e),
        }
    }

    fn flush_manifest(&self) -> io::Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest).map_err(io::Error::other)?;
        fs::write(self.dir.join(MANIFEST_FILE), text + "\n")
    }

    pub fn finish(mut self) -> io::Result<RunManifest> {
        self.manifest.wall_clock_s = Some(self.clock.elapsed().as_secs_f64());
        self.flush_manifest()?;
        Ok(self.manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_lists_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ArtifactWriter::start(dir.path(), "fit", "seed = 1\n", 1, 1).unwrap();
        let early: RunManifest = serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(early.experiments[0].status, Status::Running);
        assert!(early.wall_clock_s.is_none());
        w.write("a.csv", b"x\n").unwrap();
        w.set_status("fit", Status::Pass, "");
        let m = w.finish().unwrap();
        assert_eq!(m.artifacts.len(), 2);
        assert_eq!(m.artifacts[1].sha256, sha256_hex(b"x\n"));
        let back: RunManifest = serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(back.experiments[0].status, Status::Pass);
        assert!(back.wall_clock_s.is_some());
    }
}
