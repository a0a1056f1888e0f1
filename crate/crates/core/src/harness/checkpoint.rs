//! Checkpoint container.
//!
//! Little-endian binary layout:
//!
//! ```text
//! magic  "MOGA1"                       5 bytes
//! count  u64                           number of manifest entries
//! entry  u32 name_len | name utf-8 | u32 ndim | u64 dims… | u64 offset
//! ...    (entries sorted by name; offset is from payload start)
//! blob   raw f64 little-endian payloads, in manifest order
//! ```
//!
//! Model hyperparameters travel as scalar tensors under the `meta.`
//! prefix, so one format covers weights and configuration and files are
//! byte-deterministic for identical contents.

use crate::error::{Error, Result};
use crate::moga::GateNoise;
use crate::numkit::Tensor;
use crate::streammem::{Conditioning, Model, ModelConfig};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 5] = b"MOGA1";

pub fn write_tensors(path: &Path, tensors: &BTreeMap<String, Tensor>) -> Result<()> {
    let mut manifest = Vec::new();
    let mut offset = 0u64;
    for (name, t) in tensors {
        manifest.push((name.clone(), t.shape.clone(), offset));
        offset += (t.numel() * 8) as u64;
    }

    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&(manifest.len() as u64).to_le_bytes())?;
    for (name, shape, off) in &manifest {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(shape.len() as u32).to_le_bytes())?;
        for &d in shape {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        w.write_all(&off.to_le_bytes())?;
    }
    for t in tensors.values() {
        for v in &t.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensors(path: &Path) -> Result<BTreeMap<String, Tensor>> {
    let mut file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open checkpoint {}: {e}", path.display())))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    if bytes.len() < 13 || &bytes[..5] != MAGIC {
        return Err(Error::Data(format!("{} is not a MOGA1 checkpoint", path.display())));
    }
    let mut pos = 5usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            return Err(Error::Data("truncated checkpoint".into()));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    let read_u64 = |pos: &mut usize| -> Result<u64> {
        Ok(u64::from_le_bytes(take(pos, 8)?.try_into().unwrap()))
    };
    let read_u32 = |pos: &mut usize| -> Result<u32> {
        Ok(u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()))
    };

    let count = read_u64(&mut pos)? as usize;
    let mut manifest = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = read_u32(&mut pos)? as usize;
        let name = String::from_utf8(take(&mut pos, name_len)?.to_vec())
            .map_err(|_| Error::Data("bad tensor name in checkpoint".into()))?;
        let ndim = read_u32(&mut pos)? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(read_u64(&mut pos)? as usize);
        }
        let offset = read_u64(&mut pos)? as usize;
        manifest.push((name, shape, offset));
    }

    let payload = &bytes[pos..];
    let mut out = BTreeMap::new();
    for (name, shape, offset) in manifest {
        let numel: usize = shape.iter().product();
        let end = offset + numel * 8;
        if end > payload.len() {
            return Err(Error::Data(format!("checkpoint tensor `{name}` out of bounds")));
        }
        let data: Vec<f64> = payload[offset..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.insert(name, Tensor::new(shape, data));
    }
    Ok(out)
}

fn meta_scalar(v: f64) -> Tensor {
    Tensor::scalar(v)
}

fn cfg_to_meta(cfg: &ModelConfig) -> BTreeMap<String, Tensor> {
    let mut m = BTreeMap::new();
    m.insert("meta.version".into(), meta_scalar(1.0));
    m.insert("meta.image_size".into(), meta_scalar(cfg.image_size as f64));
    m.insert("meta.patch".into(), meta_scalar(cfg.patch as f64));
    m.insert("meta.feature_dim".into(), meta_scalar(cfg.feature_dim as f64));
    m.insert("meta.memory_frames".into(), meta_scalar(cfg.memory_frames as f64));
    m.insert("meta.max_objects".into(), meta_scalar(cfg.max_objects as f64));
    m.insert("meta.rank".into(), meta_scalar(cfg.rank as f64));
    m.insert("meta.tau".into(), meta_scalar(cfg.tau));
    m.insert("meta.ema_lambda".into(), meta_scalar(cfg.ema_lambda));
    let cond = match cfg.conditioning {
        Conditioning::Full => 0.0,
        Conditioning::MemoryOnly => 1.0,
        Conditioning::NoConditioning => 2.0,
    };
    m.insert("meta.conditioning".into(), meta_scalar(cond));
    let noise = match cfg.gate_noise {
        GateNoise::Gumbel => 0.0,
        GateNoise::Logistic => 1.0,
    };
    m.insert("meta.gate_noise".into(), meta_scalar(noise));
    m
}

fn meta_from(tensors: &BTreeMap<String, Tensor>) -> Result<ModelConfig> {
    let get = |k: &str| -> Result<f64> {
        tensors
            .get(k)
            .map(|t| t.item())
            .ok_or_else(|| Error::Data(format!("checkpoint missing `{k}`")))
    };
    let conditioning = match get("meta.conditioning")? as i64 {
        0 => Conditioning::Full,
        1 => Conditioning::MemoryOnly,
        2 => Conditioning::NoConditioning,
        v => return Err(Error::Data(format!("bad meta.conditioning {v}"))),
    };
    let gate_noise = match get("meta.gate_noise")? as i64 {
        0 => GateNoise::Gumbel,
        1 => GateNoise::Logistic,
        v => return Err(Error::Data(format!("bad meta.gate_noise {v}"))),
    };
    Ok(ModelConfig {
        image_size: get("meta.image_size")? as usize,
        patch: get("meta.patch")? as usize,
        feature_dim: get("meta.feature_dim")? as usize,
        memory_frames: get("meta.memory_frames")? as usize,
        max_objects: get("meta.max_objects")? as usize,
        rank: get("meta.rank")? as usize,
        tau: get("meta.tau")?,
        conditioning,
        gate_noise,
        ema_lambda: get("meta.ema_lambda")?,
    })
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let mut tensors = cfg_to_meta(&model.cfg);
    for (name, t) in model.named_params() {
        tensors.insert(name, t.clone());
    }
    write_tensors(path, &tensors)
}

pub fn load_model(path: &Path) -> Result<Model> {
    let tensors = read_tensors(path)?;
    let cfg = meta_from(&tensors)?;
    let mut model = Model::new(cfg, 0)?;
    let params: BTreeMap<String, Tensor> = tensors
        .into_iter()
        .filter(|(k, _)| !k.starts_with("meta."))
        .collect();
    model.load_params(&params)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streammem::ModelConfig;

    fn small_cfg() -> ModelConfig {
        ModelConfig { image_size: 16, patch: 4, feature_dim: 8, rank: 4, ..Default::default() }
    }

    #[test]
    fn model_checkpoint_round_trips_bitexactly() {
        let model = Model::new(small_cfg(), 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();

        assert_eq!(loaded.cfg.feature_dim, 8);
        assert_eq!(loaded.cfg.rank, 4);
        for ((na, ta), (nb, tb)) in model.named_params().iter().zip(loaded.named_params().iter())
        {
            assert_eq!(na, nb);
            assert_eq!(ta.shape, tb.shape);
            let bits_a: Vec<u64> = ta.data.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = tb.data.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b, "{na}");
        }
    }

    #[test]
    fn checkpoint_bytes_are_deterministic() {
        let model = Model::new(small_cfg(), 9).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ckpt");
        let b = dir.path().join("b.ckpt");
        save_model(&model, &a).unwrap();
        save_model(&model, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn junk_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"not a checkpoint at all").unwrap();
        assert!(load_model(&path).is_err());
    }
}
