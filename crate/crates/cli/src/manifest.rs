//! Run manifests written beside every output of a mutating command.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;

use crate::error::CliResult;
use crate::output::write_json_file;

#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: Vec<String>,
    pub config_sha256: Option<String>,
    pub seed: u64,
    pub workers: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicon_version: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index_fingerprint: Option<String>,
    pub provider_fingerprints: BTreeMap<String, String>,
    pub inputs: Vec<InputFile>,
    pub outputs: Vec<PathBuf>,
    pub started_at: String,
    pub finished_at: String,
}

fn stamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Collects provenance while a command runs.
pub struct ManifestBuilder {
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn start(config_sha256: Option<String>, seed: u64, workers: usize) -> Self {
        Self {
            manifest: RunManifest {
                tool: "framescout",
                tool_version: env!("CARGO_PKG_VERSION"),
                command: std::env::args().collect(),
                config_sha256,
                seed,
                workers,
                lexicon_version: None,
                index_fingerprint: None,
                provider_fingerprints: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                started_at: stamp(Utc::now()),
                finished_at: String::new(),
            },
        }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<&mut Self> {
        self.manifest.inputs.push(InputFile {
            path: path.to_path_buf(),
            sha256: framescout::jsonl::file_sha256(path)?,
        });
        Ok(self)
    }

    pub fn lexicon_version(&mut self, v: &str) -> &mut Self {
        self.manifest.lexicon_version = Some(v.to_string());
        self
    }

    pub fn index_fingerprint(&mut self, v: &str) -> &mut Self {
        self.manifest.index_fingerprint = Some(v.to_string());
        self
    }

    pub fn provider(&mut self, role: &str, fingerprint: String) -> &mut Self {
        self.manifest.provider_fingerprints.insert(role.to_string(), fingerprint);
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.manifest.outputs.push(path.to_path_buf());
        self
    }

    /// Writes the manifest to `path` with the finish time filled in.
    pub fn finish(&mut self, path: &Path) -> CliResult<()> {
        self.manifest.finished_at = stamp(Utc::now());
        write_json_file(path, &self.manifest)
    }
}

/// `<file>.manifest.json` beside a file output.
pub fn beside(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}
