//! Trained-smoother checkpoints: a versioned binary container of named
//! f64 tensors followed by a JSON metadata trailer.
//!
//! Layout: magic, format version, tensor count, then per tensor
//! (name, rank, dims, little-endian f64 payload), then a length-prefixed
//! JSON blob. Complex spectral weights are stored with a trailing
//! dimension of 2 (re, im).

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::fno::{FnoConfig, FnoParams};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"NMGCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    /// Hash of the problem the smoothers were trained on.
    pub problem_hash: u64,
    /// Total grid levels of the training hierarchy.
    pub num_levels: usize,
    pub seed: u64,
    /// One config per smoother, finest level first.
    pub configs: Vec<FnoConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HashPolicy {
    /// Mismatched problem hash is an error.
    Strict,
    /// Mismatch is tolerated (caller is warned via the returned flag).
    Warn,
}

struct Tensor {
    name: String,
    dims: Vec<u64>,
    data: Vec<f64>,
}

fn write_tensor(w: &mut impl Write, t: &Tensor) -> Result<()> {
    let name = t.name.as_bytes();
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name)?;
    w.write_all(&(t.dims.len() as u32).to_le_bytes())?;
    for &d in &t.dims {
        w.write_all(&d.to_le_bytes())?;
    }
    for &v in &t.data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::CorruptCheckpoint(format!("truncated while reading {what}")))
}

fn read_u32(r: &mut impl Read, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

fn read_tensor(r: &mut impl Read) -> Result<Tensor> {
    let name_len = read_u32(r, "tensor name length")? as usize;
    if name_len > 4096 {
        return Err(Error::CorruptCheckpoint("implausible tensor name".into()));
    }
    let mut name = vec![0u8; name_len];
    read_exact(r, &mut name, "tensor name")?;
    let name = String::from_utf8(name)
        .map_err(|_| Error::CorruptCheckpoint("tensor name not utf-8".into()))?;
    let rank = read_u32(r, "tensor rank")? as usize;
    if rank > 8 {
        return Err(Error::CorruptCheckpoint("implausible tensor rank".into()));
    }
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        dims.push(read_u64(r, "tensor dims")?);
    }
    let count: u64 = dims.iter().product::<u64>().max(1);
    if count > (1 << 32) {
        return Err(Error::CorruptCheckpoint("implausible tensor size".into()));
    }
    let mut data = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let mut b = [0u8; 8];
        read_exact(r, &mut b, &format!("payload of {name}"))?;
        data.push(f64::from_le_bytes(b));
    }
    Ok(Tensor { name, dims, data })
}

fn tensors_of(level: usize, config: &FnoConfig, params: &FnoParams) -> Vec<Tensor> {
    let c = config.channels as u64;
    let mut out = vec![
        Tensor {
            name: format!("level{level}/lift_w"),
            dims: vec![c],
            data: params.lift_w.clone(),
        },
        Tensor {
            name: format!("level{level}/lift_b"),
            dims: vec![c],
            data: params.lift_b.clone(),
        },
    ];
    for (i, l) in params.layers.iter().enumerate() {
        let mt = (l.r.len() as u64) / (c * c);
        let kt = (l.w.len() as u64) / (c * c);
        let mut r_flat = Vec::with_capacity(l.r.len() * 2);
        for z in &l.r {
            r_flat.push(z.re);
            r_flat.push(z.im);
        }
        out.push(Tensor {
            name: format!("level{level}/layer{i}/r"),
            dims: vec![c, c, mt, 2],
            data: r_flat,
        });
        out.push(Tensor {
            name: format!("level{level}/layer{i}/w"),
            dims: vec![c, c, kt],
            data: l.w.clone(),
        });
        out.push(Tensor {
            name: format!("level{level}/layer{i}/bias"),
            dims: vec![c],
            data: l.bias.clone(),
        });
    }
    out.push(Tensor {
        name: format!("level{level}/proj_w"),
        dims: vec![c],
        data: params.proj_w.clone(),
    });
    out.push(Tensor {
        name: format!("level{level}/proj_b"),
        dims: vec![],
        data: vec![params.proj_b],
    });
    out
}

pub fn save_checkpoint(
    path: &Path,
    models: &[(FnoConfig, FnoParams)],
    problem_hash: u64,
    num_levels: usize,
    seed: u64,
) -> Result<()> {
    let meta = CheckpointMeta {
        format_version: FORMAT_VERSION,
        problem_hash,
        num_levels,
        seed,
        configs: models.iter().map(|(c, _)| c.clone()).collect(),
    };
    let mut tensors = Vec::new();
    for (l, (config, params)) in models.iter().enumerate() {
        tensors.extend(tensors_of(l, config, params));
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for t in &tensors {
        write_tensor(&mut w, t)?;
    }
    let json = serde_json::to_vec(&meta)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    w.flush()?;
    Ok(())
}

fn take(tensors: &mut Vec<Tensor>, name: &str) -> Result<Tensor> {
    let pos = tensors
        .iter()
        .position(|t| t.name == name)
        .ok_or_else(|| Error::CorruptCheckpoint(format!("missing tensor {name}")))?;
    Ok(tensors.remove(pos))
}

/// Load a checkpoint. If `expected_hash` is set, the stored problem hash
/// is compared: `Strict` errors on mismatch, `Warn` reports it through the
/// returned flag. Returns (models, metadata, hash_mismatch).
pub fn load_checkpoint(
    path: &Path,
    expected_hash: Option<u64>,
    policy: HashPolicy,
) -> Result<(Vec<(FnoConfig, FnoParams)>, CheckpointMeta, bool)> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    read_exact(&mut r, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::CorruptCheckpoint("bad magic".into()));
    }
    let version = read_u32(&mut r, "format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::CheckpointVersion {
            file: version,
            supported: FORMAT_VERSION,
        });
    }
    let count = read_u32(&mut r, "tensor count")? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        tensors.push(read_tensor(&mut r)?);
    }
    let json_len = read_u64(&mut r, "metadata length")? as usize;
    let mut json = vec![0u8; json_len];
    read_exact(&mut r, &mut json, "metadata")?;
    let meta: CheckpointMeta = serde_json::from_slice(&json)
        .map_err(|e| Error::CorruptCheckpoint(format!("metadata: {e}")))?;

    let mut mismatch = false;
    if let Some(expected) = expected_hash {
        if meta.problem_hash != expected {
            match policy {
                HashPolicy::Strict => {
                    return Err(Error::CheckpointHashMismatch {
                        file: meta.problem_hash,
                        expected,
                    })
                }
                HashPolicy::Warn => mismatch = true,
            }
        }
    }

    let mut models = Vec::with_capacity(meta.configs.len());
    for (l, config) in meta.configs.iter().enumerate() {
        config.validate().map_err(|e| {
            Error::CorruptCheckpoint(format!("level {l} config invalid: {e}"))
        })?;
        let mut params = FnoParams::zeros(config);
        params.lift_w = take(&mut tensors, &format!("level{l}/lift_w"))?.data;
        params.lift_b = take(&mut tensors, &format!("level{l}/lift_b"))?.data;
        for i in 0..config.layers {
            let r = take(&mut tensors, &format!("level{l}/layer{i}/r"))?;
            if r.data.len() % 2 != 0 || r.data.len() / 2 != params.layers[i].r.len() {
                return Err(Error::CorruptCheckpoint(format!(
                    "spectral tensor size at level {l} layer {i}"
                )));
            }
            params.layers[i].r = r
                .data
                .chunks_exact(2)
                .map(|p| Complex64::new(p[0], p[1]))
                .collect();
            params.layers[i].w = take(&mut tensors, &format!("level{l}/layer{i}/w"))?.data;
            params.layers[i].bias = take(&mut tensors, &format!("level{l}/layer{i}/bias"))?.data;
        }
        params.proj_w = take(&mut tensors, &format!("level{l}/proj_w"))?.data;
        let pb = take(&mut tensors, &format!("level{l}/proj_b"))?;
        params.proj_b = *pb
            .data
            .first()
            .ok_or_else(|| Error::CorruptCheckpoint("empty proj_b".into()))?;
        if !params.all_finite() {
            return Err(Error::CorruptCheckpoint(format!(
                "non-finite parameters at level {l}"
            )));
        }
        models.push((config.clone(), params));
    }
    Ok((models, meta, mismatch))
}
