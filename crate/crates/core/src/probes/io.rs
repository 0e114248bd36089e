use std::fs;
use std::path::Path;

use super::logreg::ProbeModel;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"TRACEPRB";
const VERSION: u32 = 1;

/// Layout: magic, `u32` version, `u64` manifest length, JSON manifest
/// (layer, stack, label set, labels, d_model), then weights and bias as
/// little-endian `f32`.
pub fn save_probe(probe: &ProbeModel, path: &Path) -> Result<()> {
    let json = serde_json::to_vec(probe).map_err(|e| Error::Data(e.to_string()))?;
    let mut buf = Vec::with_capacity(20 + json.len() + 4 * (probe.weights.len() + probe.bias.len()));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    for v in probe.weights.iter().chain(&probe.bias) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_probe(path: &Path) -> Result<ProbeModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::Data(format!("{}: {m}", path.display()));
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(bad("not a probe file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(&format!("unsupported probe version {version}")));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(20..20 + len).ok_or_else(|| bad("truncated manifest"))?;
    let mut probe: ProbeModel =
        serde_json::from_slice(body).map_err(|e| bad(&format!("bad manifest: {e}")))?;
    let k = probe.labels.len();
    let floats: Vec<f32> = bytes[20 + len..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if !(bytes.len() - 20 - len).is_multiple_of(4) || floats.len() != k * (probe.d_model + 1) {
        return Err(bad("weight block does not match the manifest"));
    }
    probe.bias = floats[k * probe.d_model..].to_vec();
    probe.weights = floats[..k * probe.d_model].to_vec();
    Ok(probe)
}
