//! Versioned little-endian checkpoint files.
//!
//! ```text
//! "JM3DCKPT"  u32 version
//! u64 len, TOML header {dim, parents, [config]}
//! u32 count, then per parameter:
//!     u32 name_len, name, u8 decay, u32 rank, rank × u32 dims, f64 values
//! u64 optimizer step, then first moments, then second moments (f64, store order)
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::optim::AdamState;
use super::trainer::Model;
use crate::alignment::AlignmentHeads;
use crate::autodiff::{ParamStore, Tensor};
use crate::encoders::PointEncoderParams;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"JM3DCKPT";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    dim: usize,
    parents: Vec<String>,
    config: TrainConfig,
}

pub fn to_bytes(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let header = toml::to_string(&Header {
        dim: model.dim,
        parents: model.parents.clone(),
        config: model.config.clone(),
    })
    .expect("header serializes");
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(header.as_bytes());

    let entries = model.store.entries();
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for e in entries {
        out.extend_from_slice(&(e.name.len() as u32).to_le_bytes());
        out.extend_from_slice(e.name.as_bytes());
        out.push(e.decay as u8);
        out.extend_from_slice(&(e.value.rank() as u32).to_le_bytes());
        for &d in e.value.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in e.value.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&model.adam.step.to_le_bytes());
    for t in model.adam.m.iter().chain(&model.adam.v) {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self
            .take(n.checked_mul(8).ok_or_else(|| Error::Checkpoint("size overflow".into()))?)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let hlen = r.u64()? as usize;
    let header = std::str::from_utf8(r.take(hlen)?)
        .map_err(|e| Error::Checkpoint(format!("header is not UTF-8: {e}")))?;
    let header: Header =
        toml::from_str(header).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    header.config.validate()?;

    let count = r.u32()? as usize;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let nlen = r.u32()? as usize;
        let name = String::from_utf8(r.take(nlen)?.to_vec())
            .map_err(|e| Error::Checkpoint(format!("parameter name is not UTF-8: {e}")))?;
        let decay = match r.take(1)?[0] {
            0 => false,
            1 => true,
            b => return Err(Error::Checkpoint(format!("bad decay flag {b} for {name}"))),
        };
        let rank = r.u32()? as usize;
        let shape: Vec<usize> = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_>>()?;
        let len = shape.iter().product();
        let value = Tensor::new(shape, r.f64s(len)?)
            .map_err(|e| Error::Checkpoint(format!("parameter {name}: {e}")))?;
        if store.find(&name).is_some() {
            return Err(Error::Checkpoint(format!("duplicate parameter {name}")));
        }
        store.register(name, value, decay);
    }
    let step = r.u64()?;
    let mut moments = Vec::with_capacity(2 * count);
    for _ in 0..2 {
        for e in store.entries() {
            moments.push(Tensor::new(e.value.shape().to_vec(), r.f64s(e.value.len())?)?);
        }
    }
    if r.at != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after optimizer state",
            bytes.len() - r.at
        )));
    }
    let v = moments.split_off(count);
    let encoder = PointEncoderParams::from_store(&store)?;
    let heads = AlignmentHeads::from_store(&store, header.config.learn_temperature)?;
    if encoder.dim != header.dim {
        return Err(Error::Checkpoint(format!(
            "encoder width {} disagrees with header dim {}",
            encoder.dim, header.dim
        )));
    }
    if heads.parents != header.parents.len() {
        return Err(Error::Checkpoint("classifier width disagrees with parent list".into()));
    }
    Ok(Model {
        config: header.config,
        dim: header.dim,
        parents: header.parents,
        store,
        encoder,
        heads,
        adam: AdamState { step, m: moments, v },
    })
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Model> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> Model {
        let cfg = TrainConfig {
            hidden: 4,
            cls_hidden: 3,
            tau_init: 0.1,
            ..TrainConfig::default()
        };
        let mut m = Model::init(&cfg, 5, vec!["bed".into(), "bottle".into()]).unwrap();
        m.adam.step = 7;
        m.adam.m[0].data_mut()[1] = 0.25;
        m.adam.v[2].data_mut()[0] = 1e-9;
        m
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let m = model();
        let bytes = to_bytes(&m);
        let back = from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(to_bytes(&back), bytes);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.ckpt");
        save(&m, &p).unwrap();
        assert_eq!(load(&p).unwrap(), m);
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = to_bytes(&model());
        assert!(matches!(from_bytes(&bytes[..bytes.len() - 1]), Err(Error::Checkpoint(_))));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(from_bytes(&extra), Err(Error::Checkpoint(_))));
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(from_bytes(&magic), Err(Error::Checkpoint(_))));
        let mut ver = bytes;
        ver[8] = 9;
        assert!(matches!(from_bytes(&ver), Err(Error::Checkpoint(_))));
    }
}
