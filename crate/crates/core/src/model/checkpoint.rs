//! Binary checkpoint format (all integers little-endian u32):
//!
//! ```text
//! "OSR1" | version | tensor count
//! per tensor: name length | name (UTF-8) | rows | cols | rows*cols f32, row-major
//! JSON length | JSON metadata (geometry, task, training config)
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::degrade::DegradationSpec;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::rnn::{RnnCell, RnnModel, TENSOR_NAMES};
use crate::model::train::TrainConfig;
use crate::patching::PatchGeometry;

pub const MAGIC: &[u8; 4] = b"OSR1";
pub const VERSION: u32 = 1;

/// Everything needed to run a trained model besides its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub geometry: PatchGeometry,
    /// Network output is added to the (upsampled) input.
    pub residual: bool,
    /// Forward model the network was trained to invert.
    pub degradation: DegradationSpec,
    pub config: TrainConfig,
}

impl ModelMeta {
    pub fn from_config(cfg: &TrainConfig) -> Result<Self> {
        Ok(ModelMeta {
            geometry: cfg.geometry()?,
            residual: cfg.residual,
            degradation: cfg.degradation(),
            config: cfg.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub model: RnnModel,
    pub meta: ModelMeta,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::format(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode(tm: &TrainedModel) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION as usize)?;
    let tensors = tm.model.tensors();
    put_u32(&mut out, tensors.len())?;
    for (name, t) in TENSOR_NAMES.iter().zip(tensors) {
        put_u32(&mut out, name.len())?;
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, t.rows())?;
        put_u32(&mut out, t.cols())?;
        for &v in t.as_slice() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let json = serde_json::to_vec(&tm.meta).map_err(|e| Error::format(e.to_string()))?;
    put_u32(&mut out, json.len())?;
    out.extend_from_slice(&json);
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(format!("truncated checkpoint at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

pub fn decode(bytes: &[u8]) -> Result<TrainedModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::format("not a checkpoint (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::format(format!(
            "checkpoint version {version}, expected {VERSION}"
        )));
    }
    let count = r.u32()?;
    if count != TENSOR_NAMES.len() {
        return Err(Error::format(format!("expected 4 tensors, found {count}")));
    }
    let mut tensors = Vec::with_capacity(count);
    for expected in TENSOR_NAMES {
        let len = r.u32()?;
        let name = std::str::from_utf8(r.take(len)?).map_err(|e| Error::format(e.to_string()))?;
        if name != expected {
            return Err(Error::format(format!("expected tensor {expected}, found {name}")));
        }
        let rows = r.u32()?;
        let cols = r.u32()?;
        let n = rows
            .checked_mul(cols)
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::format(format!("bad shape {rows}x{cols} for {name}")))?;
        let raw = r.take(n.checked_mul(4).ok_or_else(|| Error::format("tensor too large"))?)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        tensors.push(Matrix::from_vec(rows, cols, data)?);
    }
    let len = r.u32()?;
    let meta: ModelMeta =
        serde_json::from_slice(r.take(len)?).map_err(|e| Error::format(format!("metadata: {e}")))?;
    if r.pos != bytes.len() {
        return Err(Error::format("trailing bytes after checkpoint"));
    }
    let mut it = tensors.into_iter();
    let (w_zy, w_zz, b, w_xz) = (
        it.next().expect("4 tensors"),
        it.next().expect("4 tensors"),
        it.next().expect("4 tensors"),
        it.next().expect("4 tensors"),
    );
    let model = RnnModel::new(RnnCell::new(w_zy, w_zz, b)?, w_xz, meta.geometry)
        .map_err(|e| Error::format(format!("inconsistent checkpoint: {e}")))?;
    Ok(TrainedModel { model, meta })
}

pub fn save_checkpoint(tm: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, encode(tm)?).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn sample() -> TrainedModel {
        let cfg = TrainConfig {
            n_n: 12,
            patch_rows: 7,
            patch_cols: 7,
            ..TrainConfig::default()
        };
        let mut rng = Rng::new(5);
        let mut model = RnnModel::init(cfg.geometry().unwrap(), cfg.n_n, &mut rng);
        for v in model.cell.b.as_mut_slice() {
            *v = rng.uniform(-1.0, 1.0);
        }
        model.round_to_f32();
        TrainedModel {
            model,
            meta: ModelMeta::from_config(&cfg).unwrap(),
        }
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let tm = sample();
        let a = encode(&tm).unwrap();
        let back = decode(&a).unwrap();
        assert_eq!(back, tm);
        assert_eq!(encode(&back).unwrap(), a);
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.osr");
        let tm = sample();
        save_checkpoint(&tm, &p).unwrap();
        let first = std::fs::read(&p).unwrap();
        save_checkpoint(&load_checkpoint(&p).unwrap(), &p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), first);
    }

    #[test]
    fn corrupt_inputs_are_format_errors() {
        let good = encode(&sample()).unwrap();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(Error::Format(_))));
        let mut bad = good.clone();
        bad[4] = 9;
        assert!(matches!(decode(&bad), Err(Error::Format(_))));
        for cut in [3, 10, 40, good.len() - 1] {
            assert!(matches!(decode(&good[..cut]), Err(Error::Format(_))), "cut {cut}");
        }
    }
}
