//! Run manifests: what a command was asked to do and which inputs it read.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const TOOL_VERSION: &str = concat!("zsl ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: BTreeMap<String, serde_json::Value>,
    /// Input name → SHA-256 of the file contents (hex).
    pub inputs: BTreeMap<String, String>,
    pub version: String,
    /// SHA-256 over the fields above; equal digests mean equal runs.
    pub digest: String,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let mut file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl RunManifest {
    /// `config` must serialize to a JSON object.
    pub fn new(
        subcommand: &str,
        config: &impl Serialize,
        inputs: &[(&str, &Path)],
    ) -> Result<Self, CliError> {
        let config =
            match serde_json::to_value(config).map_err(|e| CliError::Usage(e.to_string()))? {
                serde_json::Value::Object(map) => map.into_iter().collect(),
                other => BTreeMap::from([("value".to_string(), other)]),
            };
        let mut digests = BTreeMap::new();
        for (name, path) in inputs {
            digests.insert(name.to_string(), sha256_file(path)?);
        }
        let mut m = RunManifest {
            subcommand: subcommand.to_string(),
            config,
            inputs: digests,
            version: TOOL_VERSION.to_string(),
            digest: String::new(),
        };
        m.digest = m.compute_digest();
        Ok(m)
    }

    fn compute_digest(&self) -> String {
        let body = serde_json::json!({
            "subcommand": self.subcommand,
            "config": self.config,
            "inputs": self.inputs,
            "version": self.version,
        });
        hex::encode(Sha256::digest(body.to_string().as_bytes()))
    }

    /// Conventional location next to a primary output file.
    pub fn path_for(output: &Path) -> PathBuf {
        let mut name = output
            .file_name()
            .map(|n| n.to_os_string())
            .unwrap_or_default();
        name.push(".run.json");
        output.with_file_name(name)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| CliError::Usage(e.to_string()))?;
        write_atomic(path, |w| {
            w.write_all(format!("{text}\n").as_bytes())
                .map_err(|e| CliError::io(path, e))
        })
    }

    /// The manifest at `path`, if it exists and parses.
    pub fn read(path: &Path) -> Option<Self> {
        let text = std::fs::read_to_string(path).ok()?;
        serde_json::from_str(&text).ok()
    }
}

/// Writes through a sibling temporary file and renames it into place, so a
/// reader never sees a half-written output.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
{
    let mut tmp_name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let file = File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    let mut out = BufWriter::new(file);
    write(&mut out)?;
    out.flush().map_err(|e| CliError::io(&tmp, e))?;
    drop(out);
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}
