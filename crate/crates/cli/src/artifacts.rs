//! Artifact I/O: stamped JSONL streams, JSON summaries and run manifests.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use claimpref::seed::sha256_hex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

/// Attach `config_hash` unless the record already carries its own.
fn stamp<T: Serialize>(record: &T, config_hash: &str) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(record)?;
    if let serde_json::Value::Object(map) = &mut v {
        if !map.contains_key("config_hash") {
            // keep the stamp first so it is visible at the start of each line
            let mut stamped = serde_json::Map::with_capacity(map.len() + 1);
            stamped.insert("config_hash".into(), config_hash.into());
            stamped.append(map);
            *map = stamped;
        }
    }
    Ok(v)
}

/// Write one JSON object per line, each stamped with `config_hash`.
pub fn write_jsonl<'a, T, I>(path: &Path, records: I, config_hash: &str) -> Result<usize>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let mut w = create(path)?;
    let mut n = 0;
    for record in records {
        serde_json::to_writer(&mut w, &stamp(record, config_hash)?)?;
        w.write_all(b"\n")?;
        n += 1;
    }
    w.flush()?;
    Ok(n)
}

/// Read a JSONL stream; blank lines are skipped and unknown keys (such as the stamp) ignored.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: T =
            serde_json::from_str(&line).with_context(|| format!("{}:{}: malformed record", path.display(), i + 1))?;
        out.push(rec);
    }
    Ok(out)
}

/// Pretty JSON object `{ "config_hash": ..., <fields of value> }`.
pub fn write_json<T: Serialize>(path: &Path, value: &T, config_hash: &str) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &stamp(value, config_hash)?)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Fail with a hint naming the subcommand that produces `path`.
pub fn require(path: &Path, produced_by: &str) -> Result<()> {
    if !path.exists() {
        bail!("missing {}; run `claimpref {produced_by}` first", path.display());
    }
    Ok(())
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).with_context(|| format!("hashing {}", path.display()))?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub elapsed_ms: u128,
}

/// Collects inputs and outputs of one subcommand and writes its manifest.
pub struct Run {
    command: String,
    config_hash: String,
    seed: u64,
    started: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn start(command: &str, config_hash: &str, seed: u64) -> Self {
        Self {
            command: command.to_owned(),
            config_hash: config_hash.to_owned(),
            seed,
            started: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_owned());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_owned());
    }

    /// Write `<work_dir>/manifests/<command>.json` and return its path.
    pub fn finish(self, work_dir: &Path) -> Result<PathBuf> {
        let digest = |paths: &[PathBuf]| -> Result<Vec<FileDigest>> {
            paths.iter().map(|p| Ok(FileDigest { path: p.clone(), sha256: file_sha256(p)? })).collect()
        };
        let manifest = Manifest {
            command: self.command.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            config_hash: self.config_hash,
            seed: self.seed,
            inputs: digest(&self.inputs)?,
            outputs: digest(&self.outputs)?,
            elapsed_ms: self.started.elapsed().as_millis(),
        };
        let path = work_dir.join("manifests").join(format!("{}.json", self.command));
        let mut w = create(&path)?;
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(path)
    }
}
