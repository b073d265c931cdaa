//! Binary model checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! b"LDFM"  u32 version (=1)  u32 n_items
//! repeated tensor: u8 rank, rank × u32 dims, prod(dims) × f64 row-major
//! ```
//!
//! Tensor order: for each hidden layer `weight, bias, gamma, beta,
//! running_mean, running_var`, then the output `weight, bias`. The number of
//! hidden layers follows from the tensor count.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{BatchNorm, Dense, HiddenLayer, ModelParams};
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LDFM";
const VERSION: u32 = 1;

pub fn write_checkpoint(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.n_items as u32).to_le_bytes());
    let put2 = |out: &mut Vec<u8>, a: &Array2<f64>| {
        out.push(2);
        for d in [a.nrows(), a.ncols()] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        a.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    };
    let put1 = |out: &mut Vec<u8>, a: &Array1<f64>| {
        out.push(1);
        out.extend_from_slice(&(a.len() as u32).to_le_bytes());
        a.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    };
    for h in &params.hidden {
        put2(&mut out, &h.dense.weight);
        put1(&mut out, &h.dense.bias);
        put1(&mut out, &h.norm.gamma);
        put1(&mut out, &h.norm.beta);
        put1(&mut out, &h.norm.running_mean);
        put1(&mut out, &h.norm.running_var);
    }
    put2(&mut out, &params.output.weight);
    put1(&mut out, &params.output.bias);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Checkpoint(format!(
                "truncated: need {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            ))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn tensor(&mut self) -> Result<(Vec<usize>, Vec<f64>)> {
        let rank = self.take(1)?[0] as usize;
        let dims = (0..rank)
            .map(|_| self.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let count = dims.iter().product::<usize>();
        let payload = self.take(count.checked_mul(8).ok_or_else(|| Error::Checkpoint("tensor too large".into()))?)?;
        let data = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok((dims, data))
    }
}

fn matrix((dims, data): (Vec<usize>, Vec<f64>)) -> Result<Array2<f64>> {
    match dims.as_slice() {
        &[r, c] => Ok(Array2::from_shape_vec((r, c), data).expect("length checked")),
        _ => Err(Error::Checkpoint(format!("expected rank-2 tensor, got dims {dims:?}"))),
    }
}

fn vector((dims, data): (Vec<usize>, Vec<f64>)) -> Result<Array1<f64>> {
    match dims.as_slice() {
        &[_] => Ok(Array1::from(data)),
        _ => Err(Error::Checkpoint(format!("expected rank-1 tensor, got dims {dims:?}"))),
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<ModelParams> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let n_items = cur.u32()? as usize;
    let mut tensors = Vec::new();
    while cur.pos < bytes.len() {
        tensors.push(cur.tensor()?);
    }
    if tensors.len() < 2 || (tensors.len() - 2) % 6 != 0 {
        return Err(Error::Checkpoint(format!("unexpected tensor count {}", tensors.len())));
    }
    let layers = (tensors.len() - 2) / 6;
    let mut all = tensors.into_iter();
    let mut hidden = Vec::with_capacity(layers);
    for _ in 0..layers {
        let dense = Dense {
            weight: matrix(all.next().expect("count checked"))?,
            bias: vector(all.next().expect("count checked"))?,
        };
        let norm = BatchNorm {
            gamma: vector(all.next().expect("count checked"))?,
            beta: vector(all.next().expect("count checked"))?,
            running_mean: vector(all.next().expect("count checked"))?,
            running_var: vector(all.next().expect("count checked"))?,
        };
        hidden.push(HiddenLayer { dense, norm });
    }
    let output = Dense {
        weight: matrix(all.next().expect("count checked"))?,
        bias: vector(all.next().expect("count checked"))?,
    };
    let params = ModelParams {
        n_items,
        hidden,
        output,
        rng_seed: 0,
    };
    params
        .validate()
        .map_err(|e| Error::Checkpoint(e.to_string()))?;
    Ok(params)
}

pub fn save_checkpoint(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_checkpoint(params)).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint. The initialization seed is not stored in the file
/// and comes back as 0.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    read_checkpoint(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
