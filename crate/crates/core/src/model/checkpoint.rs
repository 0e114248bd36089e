use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Component, DecoderModel, Tokenizer, TransformerConfig};
use crate::tensor::Precision;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"TRACECKP";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    config: TransformerConfig,
    vocab: Vec<String>,
    step: u64,
    num_params: usize,
    components: Vec<(Component, Vec<(usize, usize)>)>,
    #[serde(default)]
    extra: serde_json::Value,
}

/// A model, its tokenizer, and the step it was saved at. `extra` carries
/// caller-defined metadata (the trainer stores its config there).
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: DecoderModel,
    pub tokenizer: Tokenizer,
    pub step: u64,
    pub extra: serde_json::Value,
}

/// Layout: magic, `u32` version, `u64` manifest length, JSON manifest, then
/// the flat parameters as little-endian `f32`.
pub fn save_checkpoint(
    path: &Path,
    model: &DecoderModel,
    tokenizer: &Tokenizer,
    step: u64,
    extra: &serde_json::Value,
) -> Result<()> {
    let manifest = Manifest {
        config: model.config().clone(),
        vocab: tokenizer.vocab().to_vec(),
        step,
        num_params: model.num_params(),
        components: model.component_ranges(),
        extra: extra.clone(),
    };
    let json = serde_json::to_vec(&manifest)
        .map_err(|e| Error::Data(format!("cannot serialize checkpoint manifest: {e}")))?;
    let mut buf = Vec::with_capacity(20 + json.len() + 4 * model.num_params());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for &p in model.params() {
        buf.extend_from_slice(&(p as f32).to_le_bytes());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::Data(format!("{}: {m}", path.display()));
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(&format!("unsupported checkpoint version {version}")));
    }
    let mlen = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(20..20 + mlen).ok_or_else(|| bad("truncated manifest"))?;
    let manifest: Manifest =
        serde_json::from_slice(body).map_err(|e| bad(&format!("bad manifest: {e}")))?;
    let tokenizer = Tokenizer::from_vocab(manifest.vocab)?;
    let block = &bytes[20 + mlen..];
    if block.len() != 4 * manifest.num_params {
        return Err(bad("parameter block length does not match manifest"));
    }
    let flat: Vec<f64> = block
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    let mut model = DecoderModel::new(manifest.config, tokenizer.len(), 0)?
        .with_precision(Precision::F32);
    if model.num_params() != manifest.num_params {
        return Err(bad("parameter count does not match the stored config"));
    }
    model.set_params(&flat)?;
    Ok(Checkpoint {
        model,
        tokenizer,
        step: manifest.step,
        extra: manifest.extra,
    })
}
