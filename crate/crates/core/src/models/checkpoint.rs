//! Binary checkpoint format.
//!
//! ```text
//! "PSEG"  u32 version  u32 tensor_count
//! per tensor: u32 name_len, name bytes, u32 rank, rank x u32 dims, f32 payload
//! u64 iterations  u64 seed
//! ```
//!
//! All integers and floats are little-endian.

use std::path::Path;

use super::{AtrousMini, AtrousMiniConfig, FcnMini, FcnMiniConfig, Model};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"PSEG";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub tensors: Vec<NamedTensor>,
    pub iterations: u64,
    pub seed: u64,
}

impl Checkpoint {
    pub fn from_model(model: &Model, iterations: u64, seed: u64) -> Self {
        let mut tensors = Vec::with_capacity(2 * model.layers().len());
        for l in model.layers() {
            let w = &l.params.weights;
            tensors.push(NamedTensor {
                name: l.weight_name(),
                dims: w.dims().to_vec(),
                data: w.data().iter().map(|&v| v as f32).collect(),
            });
            tensors.push(NamedTensor {
                name: l.bias_name(),
                dims: vec![l.params.bias.len()],
                data: l.params.bias.iter().map(|&v| v as f32).collect(),
            });
        }
        Self {
            tensors,
            iterations,
            seed,
        }
    }

    pub fn tensor(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.dims.len() as u32).to_le_bytes());
            for &d in &t.dims {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.iterations.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, at: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::format("not a checkpoint file (bad magic)"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::format(format!(
                "checkpoint version mismatch: file has {version}, expected {CHECKPOINT_VERSION}"
            )));
        }
        let count = r.u32()? as usize;
        let mut tensors: Vec<NamedTensor> = Vec::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::format("checkpoint tensor name is not UTF-8"))?;
            if tensors.iter().any(|t| t.name == name) {
                return Err(Error::format(format!("duplicate tensor `{name}` in checkpoint")));
            }
            let rank = r.u32()? as usize;
            let dims = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let n: usize = dims.iter().product();
            let data = r
                .take(n.checked_mul(4).ok_or_else(|| Error::format("tensor too large"))?)?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect();
            tensors.push(NamedTensor { name, dims, data });
        }
        let iterations = r.u64()?;
        let seed = r.u64()?;
        if r.at != bytes.len() {
            return Err(Error::format(format!(
                "{} trailing bytes after checkpoint",
                bytes.len() - r.at
            )));
        }
        Ok(Self {
            tensors,
            iterations,
            seed,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    fn dims_of(&self, name: &str) -> Result<&[usize]> {
        self.tensor(name)
            .map(|t| t.dims.as_slice())
            .ok_or_else(|| Error::format(format!("checkpoint has no tensor `{name}`")))
    }

    /// Rebuild a model whose architecture is inferred from tensor names and
    /// shapes, then load the stored parameters.
    pub fn build_model(&self, input_size: usize) -> Result<Model> {
        let first = self
            .tensors
            .first()
            .ok_or_else(|| Error::format("checkpoint has no tensors"))?;
        let mut model = if first.name.starts_with("fcn.") {
            let enc = self.dims_of("fcn.enc1a.weight")?;
            let score = self.dims_of("fcn.score_pool5.weight")?;
            Model::Fcn(FcnMini::new(
                FcnMiniConfig {
                    input_size,
                    base_channels: enc[0],
                    num_classes: score[0],
                },
                0,
            )?)
        } else if first.name.starts_with("atrous.") {
            let stem = self.dims_of("atrous.stem.weight")?;
            let score = self.dims_of("atrous.score.weight")?;
            let blocks = self
                .tensors
                .iter()
                .filter(|t| t.name.starts_with("atrous.s1b") && t.name.ends_with(".conv1.weight"))
                .count();
            Model::Atrous(AtrousMini::new(
                AtrousMiniConfig {
                    input_size,
                    base_channels: stem[0],
                    blocks_per_stage: blocks,
                    num_classes: score[0],
                    ..AtrousMiniConfig::default()
                },
                0,
            )?)
        } else {
            return Err(Error::format(format!(
                "cannot infer architecture from tensor `{}`",
                first.name
            )));
        };
        model.load_params(self)?;
        Ok(model)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format("unexpected end of checkpoint"))?;
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
}

impl Model {
    /// Copy parameters from `ckpt`, which must list exactly this model's
    /// tensors in order with matching shapes.
    pub fn load_params(&mut self, ckpt: &Checkpoint) -> Result<()> {
        let expected = 2 * self.layers().len();
        for (i, l) in self.layers_mut().iter_mut().enumerate() {
            let wname = l.weight_name();
            let bname = l.bias_name();
            let w = ckpt.tensors.get(2 * i).ok_or_else(|| {
                Error::shape(format!("checkpoint is missing tensor `{wname}`"))
            })?;
            let b = ckpt.tensors.get(2 * i + 1).ok_or_else(|| {
                Error::shape(format!("checkpoint is missing tensor `{bname}`"))
            })?;
            let wdims = l.params.weights.dims().to_vec();
            check_tensor(w, &wname, &wdims)?;
            check_tensor(b, &bname, &[l.params.bias.len()])?;
            for (dst, &src) in l.params.weights.data_mut().iter_mut().zip(&w.data) {
                *dst = f64::from(src);
            }
            for (dst, &src) in l.params.bias.iter_mut().zip(&b.data) {
                *dst = f64::from(src);
            }
        }
        if ckpt.tensors.len() != expected {
            return Err(Error::shape(format!(
                "checkpoint has {} tensors, model expects {expected}; first extra is `{}`",
                ckpt.tensors.len(),
                ckpt.tensors[expected.min(ckpt.tensors.len() - 1)].name
            )));
        }
        Ok(())
    }
}

fn check_tensor(t: &NamedTensor, name: &str, dims: &[usize]) -> Result<()> {
    if t.name != name {
        return Err(Error::shape(format!(
            "tensor `{}` found where `{name}` {dims:?} was expected",
            t.name
        )));
    }
    if t.dims != dims || t.data.len() != dims.iter().product::<usize>() {
        return Err(Error::shape(format!(
            "tensor `{name}` has shape {:?}, expected {dims:?}",
            t.dims
        )));
    }
    Ok(())
}

pub fn save_checkpoint(model: &Model, path: &Path, iterations: u64, seed: u64) -> Result<()> {
    Checkpoint::from_model(model, iterations, seed).write(path)
}

/// Load a checkpoint and rebuild its model for `input_size x input_size` input.
pub fn load_checkpoint(path: &Path, input_size: usize) -> Result<(Model, Checkpoint)> {
    let ckpt = Checkpoint::read(path)?;
    let model = ckpt.build_model(input_size)?;
    Ok((model, ckpt))
}
