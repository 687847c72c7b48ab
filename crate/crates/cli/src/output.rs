//! Everything a command writes goes through [`OutputDir`], which stamps the
//! config hash into each file and records it in `manifest.json`.

use anyhow::{Context, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::config::{config_error, CommandKind};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub kind: &'static str,
    pub description: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'static str,
    config_hash: &'a str,
    files: Vec<&'a ManifestEntry>,
}

#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    hash: String,
    command: CommandKind,
    files: BTreeMap<String, ManifestEntry>,
}

impl OutputDir {
    pub fn create(root: &Path, hash: &str, command: CommandKind) -> Result<Self> {
        std::fs::create_dir_all(root)
            .map_err(|e| config_error(format!("cannot create output directory {}: {e}", root.display())))?;
        let probe = root.join(".write-test");
        std::fs::write(&probe, b"")
            .map_err(|e| config_error(format!("output directory {} is not writable: {e}", root.display())))?;
        std::fs::remove_file(&probe)?;
        Ok(Self {
            root: root.to_path_buf(),
            hash: hash.to_string(),
            command,
            files: BTreeMap::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn write_raw(&mut self, name: &str, kind: &'static str, description: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.register(name, kind, description);
        Ok(path)
    }

    /// Records a file written by other means.
    pub fn register(&mut self, name: &str, kind: &'static str, description: &str) {
        self.files.insert(
            name.to_string(),
            ManifestEntry {
                path: name.to_string(),
                kind,
                description: description.to_string(),
            },
        );
    }

    /// CSV with a leading `# config_hash=...` comment line.
    pub fn csv(
        &mut self,
        name: &str,
        description: &str,
        write: impl FnOnce(&mut Vec<u8>) -> cla_core::Result<()>,
    ) -> Result<PathBuf> {
        let mut buf = format!("# config_hash={}\n", self.hash).into_bytes();
        write(&mut buf)?;
        self.write_raw(name, "csv", description, &buf)
    }

    /// JSON object with a `config_hash` field; non-object values are wrapped
    /// as `{"config_hash": .., "data": ..}`.
    pub fn json<T: Serialize>(&mut self, name: &str, description: &str, value: &T) -> Result<PathBuf> {
        let v = serde_json::to_value(value)?;
        let mut obj = serde_json::Map::new();
        obj.insert("config_hash".into(), self.hash.clone().into());
        match v {
            serde_json::Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("data".into(), other);
            }
        }
        let mut bytes = serde_json::to_vec_pretty(&serde_json::Value::Object(obj))?;
        bytes.push(b'\n');
        self.write_raw(name, "json", description, &bytes)
    }

    /// JSON lines, each object carrying `config_hash`.
    pub fn jsonl<T: Serialize>(&mut self, name: &str, description: &str, rows: &[T]) -> Result<PathBuf> {
        let mut bytes = Vec::new();
        for r in rows {
            let mut obj = serde_json::Map::new();
            obj.insert("config_hash".into(), self.hash.clone().into());
            if let serde_json::Value::Object(m) = serde_json::to_value(r)? {
                obj.extend(m);
            }
            serde_json::to_writer(&mut bytes, &obj)?;
            bytes.push(b'\n');
        }
        self.write_raw(name, "jsonl", description, &bytes)
    }

    /// SVG with an XML comment carrying the hash ahead of the root element.
    pub fn svg(&mut self, name: &str, description: &str, svg: &str) -> Result<PathBuf> {
        let text = format!("<!-- config_hash={} -->\n{svg}", self.hash);
        self.write_raw(name, "svg", description, text.as_bytes())
    }

    /// Plain text with a `# config_hash=...` first line.
    pub fn text(&mut self, name: &str, description: &str, body: &str) -> Result<PathBuf> {
        let text = format!("# config_hash={}\n{body}", self.hash);
        self.write_raw(name, "text", description, text.as_bytes())
    }

    /// Binary model container; the hash lives in the manifest entry.
    pub fn model(&mut self, name: &str, description: &str, net: &cla_core::NetworkSpec) -> Result<PathBuf> {
        let bytes = cla_core::netcore::save_model(net);
        self.write_raw(name, "model", description, &bytes)
    }

    /// Writes `manifest.json` listing every file in name order.
    pub fn finish(self) -> Result<PathBuf> {
        let manifest = Manifest {
            command: self.command.name(),
            config_hash: &self.hash,
            files: self.files.values().collect(),
        };
        let path = self.root.join("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes)?;
        Ok(path)
    }
}

/// Reads a CSV of `x0, x1, ...` columns, skipping `#` comment lines.
pub fn read_samples_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    reader
        .records()
        .map(|r| {
            let r = r?;
            r.iter()
                .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad number `{v}` in {}", path.display())))
                .collect()
        })
        .collect()
}
