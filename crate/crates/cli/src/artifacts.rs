//! Output files of one run and the manifest describing them.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Serialize)]
struct ArtifactEntry {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: &'a ExperimentConfig,
    config_hash: String,
    seeds: &'a BTreeMap<String, u64>,
    versions: BTreeMap<&'static str, &'static str>,
    /// Excluded from reproducibility comparisons.
    timestamp: String,
    artifacts: Vec<ArtifactEntry>,
    results: &'a BTreeMap<String, Value>,
}

/// Tracks written files so that a failed run leaves nothing behind.
pub struct Run {
    command: String,
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
    pub seeds: BTreeMap<String, u64>,
    pub results: BTreeMap<String, Value>,
}

impl Run {
    pub fn new(command: &str, dir: PathBuf) -> Result<Self, CliError> {
        let created_dir = !dir.exists();
        fs::create_dir_all(&dir).map_err(|e| {
            CliError::Config(format!(
                "cannot create output directory {}: {e}",
                dir.display()
            ))
        })?;
        Ok(Run {
            command: command.to_string(),
            dir,
            created_dir,
            written: Vec::new(),
            seeds: BTreeMap::new(),
            results: BTreeMap::new(),
        })
    }

    pub fn seed(&mut self, name: &str, seed: u64) {
        self.seeds.insert(name.to_string(), seed);
    }

    pub fn result<T: Serialize>(&mut self, name: &str, value: &T) {
        let v = serde_json::to_value(value).expect("result serializes");
        self.results.insert(name.to_string(), v);
    }

    /// Creates `name` in the output directory and hands a buffered writer to `f`.
    pub fn write<F>(&mut self, name: &str, f: F) -> Result<PathBuf, CliError>
    where
        F: FnOnce(&mut BufWriter<fs::File>) -> Result<(), CliError>,
    {
        let path = self.dir.join(name);
        let file = fs::File::create(&path)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))?;
        self.written.push(path.clone());
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush()?;
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(
        &mut self,
        name: &str,
        value: &T,
    ) -> Result<PathBuf, CliError> {
        self.write(name, |w| Ok(celldiv::io::write_json(w, value)?))
    }

    /// Writes the manifest and consumes the run.
    pub fn finish(mut self, config: &ExperimentConfig) -> Result<PathBuf, CliError> {
        let mut artifacts = Vec::new();
        for p in &self.written {
            let bytes = fs::read(p)?;
            artifacts.push(ArtifactEntry {
                path: p.file_name().unwrap().to_string_lossy().into_owned(),
                sha256: hex::encode(Sha256::digest(&bytes)),
            });
        }
        let versions = BTreeMap::from([
            ("celldiv", celldiv::VERSION),
            ("celldiv-cli", env!("CARGO_PKG_VERSION")),
            ("config_format", "1"),
        ]);
        let manifest = Manifest {
            command: &self.command,
            config,
            config_hash: config.hash(),
            seeds: &self.seeds,
            versions,
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            artifacts,
            results: &self.results,
        };
        let manifest = serde_json::to_value(&manifest).expect("manifest serializes");
        let path = self.write_json(MANIFEST, &manifest)?;
        self.written.clear();
        Ok(path)
    }

    /// Removes everything this run wrote.
    pub fn abort(mut self) {
        for p in self.written.drain(..) {
            let _ = fs::remove_file(&p);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}
