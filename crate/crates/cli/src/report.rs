//! Artifact writing: 17-digit CSV/JSON, content hashes and the manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use parisi_core::MixtureSpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "MANIFEST.json";

/// Round-trip exact float text: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Short hash of the mixture, used in artifact names.
pub fn spec_hash(spec: &MixtureSpec) -> String {
    let canonical: Vec<String> = spec.coefficients().iter().map(|(p, c)| format!("{p}:{}", fmt_f64(*c))).collect();
    sha256_hex(canonical.join(";").as_bytes())[..12].to_string()
}

/// A CSV row with a fixed header; parsing back goes through serde.
pub trait CsvRow: DeserializeOwned {
    const HEADER: &'static [&'static str];
    fn fields(&self) -> Vec<String>;
}

pub fn csv_bytes<R: CsvRow>(rows: &[R]) -> Vec<u8> {
    let mut out = R::HEADER.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.fields().join(","));
        out.push('\n');
    }
    out.into_bytes()
}

pub fn parse_csv<R: CsvRow>(bytes: &[u8]) -> Result<Vec<R>, CliError> {
    let mut reader = csv::Reader::from_reader(bytes);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != R::HEADER {
        return Err(CliError::Config(format!("unexpected CSV header {header:?}")));
    }
    Ok(reader.deserialize().collect::<Result<Vec<R>, _>>()?)
}

/// Pretty JSON with every float at 17 significant digits.
pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let value = serde_json::to_value(value).expect("artifact types serialize");
    let mut out = String::new();
    write_value(&value, 0, &mut out);
    out.push('\n');
    out.into_bytes()
}

fn write_value(v: &Value, depth: usize, out: &mut String) {
    let pad = |d: usize| "  ".repeat(d);
    match v {
        Value::Number(n) if n.is_f64() => out.push_str(&fmt_f64(n.as_f64().expect("checked f64"))),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                write_value(item, depth + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push(']');
        }
        Value::Object(map) => {
            out.push_str("{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                out.push_str(&pad(depth + 1));
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(item, depth + 1, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(depth));
            out.push('}');
        }
        other => out.push_str(&other.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub sha256: String,
    pub command: String,
    pub seed: u64,
    pub spec_hash: String,
    pub input_hash: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub files: BTreeMap<String, FileEntry>,
    /// effective configuration per input hash
    pub configs: BTreeMap<String, Value>,
}

/// Collects the artifacts of one invocation and writes them in one go.
pub struct Emitter {
    dir: PathBuf,
    command: String,
    spec_hash: String,
    input_hash: String,
    config: Value,
    pending: Vec<(String, u64, Vec<u8>)>,
}

impl Emitter {
    pub fn new(dir: &Path, command: &str, spec: &MixtureSpec, config: &impl Serialize) -> Self {
        let config = serde_json::to_value(config).expect("config serializes");
        let input_hash = sha256_hex(&json_bytes(&config));
        Emitter {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            spec_hash: spec_hash(spec),
            input_hash,
            config,
            pending: Vec::new(),
        }
    }

    pub fn stem(&self, seed: u64) -> String {
        format!("{}-{}-{}", self.command, self.spec_hash, seed)
    }

    pub fn csv<R: CsvRow>(&mut self, seed: u64, rows: &[R]) -> String {
        let name = format!("{}.csv", self.stem(seed));
        self.pending.push((name.clone(), seed, csv_bytes(rows)));
        name
    }

    pub fn json<T: Serialize>(&mut self, seed: u64, value: &T) -> String {
        let name = format!("{}.json", self.stem(seed));
        self.pending.push((name.clone(), seed, json_bytes(value)));
        name
    }

    /// Summary across seeds, named `<command>-<spec-hash>-merged.json`.
    pub fn merged<T: Serialize>(&mut self, value: &T, first_seed: u64) -> String {
        let name = format!("{}-{}-merged.json", self.command, self.spec_hash);
        self.pending.push((name.clone(), first_seed, json_bytes(value)));
        name
    }

    pub fn finish(self) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(&self.dir)?;
        let manifest_path = self.dir.join(MANIFEST);
        let mut manifest: Manifest = match std::fs::read(&manifest_path) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map_err(|e| CliError::Config(format!("unreadable {}: {e}", manifest_path.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Manifest::default(),
            Err(e) => return Err(e.into()),
        };
        let mut written = Vec::new();
        for (name, seed, bytes) in &self.pending {
            let path = self.dir.join(name);
            std::fs::write(&path, bytes)?;
            manifest.files.insert(
                name.clone(),
                FileEntry {
                    sha256: sha256_hex(bytes),
                    command: self.command.clone(),
                    seed: *seed,
                    spec_hash: self.spec_hash.clone(),
                    input_hash: self.input_hash.clone(),
                },
            );
            written.push(path);
        }
        manifest.configs.insert(self.input_hash.clone(), self.config.clone());
        std::fs::write(&manifest_path, json_bytes(&manifest))?;
        written.push(manifest_path);
        Ok(written)
    }
}
