//! Checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "NSTN1"                      5 bytes magic
//! u32 header_len
//! header                       key=value lines (model config + metadata)
//! u64 param_count
//! f32 x param_count            canonical tensor order
//! [u8; 32]                     SHA-256 of every preceding byte
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::params::{ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::kv;

pub const MAGIC: &[u8; 5] = b"NSTN1";
const FORMAT_VERSION: u32 = 1;

const CONFIG_KEYS: [&str; 8] =
    ["format", "layers", "hidden", "heads", "mlp_hidden", "use_layernorm", "gine_neighbor_variant", "seed"];

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams<f32>,
    /// Free-form provenance (training steps, base checkpoint digest, ...).
    pub meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(params: ModelParams<f32>) -> Self {
        Checkpoint { params, meta: BTreeMap::new() }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.params.config
    }

    fn header(&self) -> String {
        let c = &self.params.config;
        let mut map: BTreeMap<String, String> = self.meta.iter().map(|(k, v)| (format!("meta.{k}"), v.clone())).collect();
        map.insert("format".into(), FORMAT_VERSION.to_string());
        map.insert("layers".into(), c.layers.to_string());
        map.insert("hidden".into(), c.hidden.to_string());
        map.insert("heads".into(), c.heads.to_string());
        map.insert("mlp_hidden".into(), c.mlp_hidden.to_string());
        map.insert("use_layernorm".into(), c.use_layernorm.to_string());
        map.insert("gine_neighbor_variant".into(), c.gine_neighbor_variant.to_string());
        map.insert("seed".into(), c.seed.to_string());
        kv::render(&map)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = self.header();
        let flat = self.params.flat();
        let mut out = Vec::with_capacity(MAGIC.len() + 12 + header.len() + 4 * flat.len() + 32);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&(flat.len() as u64).to_le_bytes());
        for v in flat {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |msg: &str| Error::Checkpoint(msg.to_string());
        if bytes.len() < MAGIC.len() + 4 + 8 + 32 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(bad("missing NSTN1 magic"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(bad("checksum mismatch"));
        }
        let mut pos = MAGIC.len();
        let header_len = u32::from_le_bytes(body[pos..pos + 4].try_into().unwrap()) as usize;
        pos += 4;
        let header = body.get(pos..pos + header_len).ok_or_else(|| bad("truncated header"))?;
        let header = std::str::from_utf8(header).map_err(|_| bad("header is not utf-8"))?;
        pos += header_len;
        let map = kv::parse(header)?;
        let format: u32 = kv::get(&map, "format")?;
        if format != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {format}")));
        }
        let config = ModelConfig {
            layers: kv::get(&map, "layers")?,
            hidden: kv::get(&map, "hidden")?,
            heads: kv::get(&map, "heads")?,
            mlp_hidden: kv::get(&map, "mlp_hidden")?,
            use_layernorm: kv::get(&map, "use_layernorm")?,
            gine_neighbor_variant: kv::get(&map, "gine_neighbor_variant")?,
            seed: kv::get(&map, "seed")?,
        };
        let mut params = ModelParams::<f32>::zeros(&config)?;

        let count_bytes = body.get(pos..pos + 8).ok_or_else(|| bad("truncated parameter count"))?;
        let count = u64::from_le_bytes(count_bytes.try_into().unwrap()) as usize;
        pos += 8;
        if count != params.param_count() || body.len() - pos != 4 * count {
            return Err(Error::Checkpoint(format!(
                "parameter block holds {} bytes for count {count}, architecture needs {}",
                body.len() - pos,
                params.param_count()
            )));
        }
        let values: Vec<f32> =
            body[pos..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        params.load_flat(&values)?;
        if !params.is_finite() {
            return Err(bad("non-finite parameter"));
        }
        let meta = map
            .into_iter()
            .filter(|(k, _)| !CONFIG_KEYS.contains(&k.as_str()))
            .filter_map(|(k, v)| k.strip_prefix("meta.").map(|k| (k.to_string(), v)))
            .collect();
        Ok(Checkpoint { params, meta })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Hex SHA-256 of the serialized checkpoint.
    pub fn digest(&self) -> String {
        let d = Sha256::digest(self.to_bytes());
        d.iter().map(|b| format!("{b:02x}")).collect()
    }
}
