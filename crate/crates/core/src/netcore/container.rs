//! Binary model container.
//!
//! Layout:
//!
//! ```text
//! b"CLAPROBE"            8 bytes
//! version                u32 little-endian (1)
//! manifest length        u32 little-endian
//! manifest               UTF-8 JSON
//! payload                f64 little-endian, row-major, in manifest order
//! ```
//!
//! Tensor offsets in the manifest are byte offsets from the payload start.

use serde::{Deserialize, Serialize};
use std::path::Path;

use super::layer::{Activation, LayerKind, LayerSpec};
use super::network::{NetworkSpec, Role};
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CLAPROBE";
pub const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    role: Role,
    latent_dim: usize,
    layers: Vec<LayerEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerEntry {
    kind: String,
    activation: Activation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    padding: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input_hw: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    factor: Option<usize>,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

pub fn save_model(net: &NetworkSpec) -> Vec<u8> {
    let mut payload: Vec<u8> = Vec::new();
    let mut push = |name: &str, t: &Tensor| {
        let entry = TensorEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            offset: payload.len(),
        };
        for v in t.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        entry
    };
    let layers = net
        .layers
        .iter()
        .map(|layer| {
            let mut entry = LayerEntry {
                kind: layer.kind_name().to_string(),
                activation: layer.activation,
                stride: None,
                padding: None,
                input_hw: None,
                factor: None,
                tensors: Vec::new(),
            };
            match &layer.kind {
                LayerKind::Dense { weight, bias } => {
                    entry.tensors = vec![push("weight", weight), push("bias", bias)];
                }
                LayerKind::Conv2d {
                    weight,
                    bias,
                    stride,
                    padding,
                    input_hw,
                } => {
                    entry.stride = Some(*stride);
                    entry.padding = Some(*padding);
                    entry.input_hw = Some([input_hw.0, input_hw.1]);
                    entry.tensors = vec![push("weight", weight), push("bias", bias)];
                }
                LayerKind::UpsampleNearest { factor } => entry.factor = Some(*factor),
            }
            entry
        })
        .collect();
    let manifest = Manifest {
        role: net.role,
        latent_dim: net.latent_dim,
        layers,
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let mut out = Vec::with_capacity(16 + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    out
}

fn read_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    let b = bytes.get(at..at + 4).ok_or_else(|| Error::Truncated {
        what: what.to_string(),
    })?;
    Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
}

pub fn load_model(bytes: &[u8]) -> Result<NetworkSpec> {
    match bytes.get(..8) {
        Some(m) if m == MAGIC => {}
        Some(m) => {
            return Err(Error::BadMagic(format!(
                "expected {:?}, found {:?}",
                String::from_utf8_lossy(MAGIC),
                String::from_utf8_lossy(m)
            )))
        }
        None => {
            return Err(Error::Truncated {
                what: "magic".into(),
            })
        }
    }
    let version = read_u32(bytes, 8, "version")?;
    if version != VERSION {
        return Err(Error::Version {
            found: version,
            expected: VERSION,
        });
    }
    let len = read_u32(bytes, 12, "manifest length")? as usize;
    let json = bytes.get(16..16 + len).ok_or_else(|| Error::Truncated {
        what: "manifest".into(),
    })?;
    let manifest: Manifest =
        serde_json::from_slice(json).map_err(|e| Error::Manifest(e.to_string()))?;
    let payload = &bytes[16 + len..];

    let tensor = |layer: usize, entry: &LayerEntry, name: &str| -> Result<Tensor> {
        let t = entry
            .tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Manifest(format!("layer {layer} has no {name} tensor")))?;
        let count: usize = t.shape.iter().product();
        let what = || format!("layer {layer} {name}");
        let end = count
            .checked_mul(8)
            .and_then(|n| n.checked_add(t.offset))
            .ok_or_else(|| Error::Manifest(format!("{} size overflows", what())))?;
        let raw = payload
            .get(t.offset..end)
            .ok_or_else(|| Error::Truncated { what: what() })?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Tensor::new(t.shape.clone(), data)
    };

    let mut layers = Vec::with_capacity(manifest.layers.len());
    for (i, entry) in manifest.layers.iter().enumerate() {
        let l = i + 1;
        let missing = |field: &str| Error::Manifest(format!("layer {l} is missing {field}"));
        let kind = match entry.kind.as_str() {
            "dense" => LayerKind::Dense {
                weight: tensor(l, entry, "weight")?,
                bias: tensor(l, entry, "bias")?,
            },
            "conv2d" => {
                let hw = entry.input_hw.ok_or_else(|| missing("input_hw"))?;
                LayerKind::Conv2d {
                    weight: tensor(l, entry, "weight")?,
                    bias: tensor(l, entry, "bias")?,
                    stride: entry.stride.ok_or_else(|| missing("stride"))?,
                    padding: entry.padding.ok_or_else(|| missing("padding"))?,
                    input_hw: (hw[0], hw[1]),
                }
            }
            "upsample_nearest" => LayerKind::UpsampleNearest {
                factor: entry.factor.ok_or_else(|| missing("factor"))?,
            },
            other => return Err(Error::Manifest(format!("layer {l}: unknown kind {other:?}"))),
        };
        layers.push(LayerSpec {
            kind,
            activation: entry.activation,
        });
    }
    NetworkSpec::new(manifest.role, manifest.latent_dim, layers)
}

pub fn write_model(path: impl AsRef<Path>, net: &NetworkSpec) -> Result<()> {
    std::fs::write(path, save_model(net))?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<NetworkSpec> {
    load_model(&std::fs::read(path)?)
}
