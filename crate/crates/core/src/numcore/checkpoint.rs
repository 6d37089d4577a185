//! Binary checkpoint format.
//!
//! All integers and floats are little-endian. A checkpoint file is
//!
//! ```text
//! magic      8 bytes   "DIAGCKPT"
//! version    u32       1
//! step       u64       global training step at save time
//! entries    u32       number of named entries
//! entry*     name_len u16, name utf-8, kind u8, payload
//! ```
//!
//! Entry kinds:
//!
//! * `0` network: `n_dims u32`, `dims u32 × n_dims`, `hidden u8`, `output u8`,
//!   then for each layer its `out × in` weight matrix in row-major order
//!   followed by its `out` biases, all `f64`.
//! * `1` Adam state: `step u64`, `lr beta1 beta2 eps f64`, `n_dims u32`,
//!   `dims u32 × n_dims`, then the first-moment blocks and the second-moment
//!   blocks laid out like network parameters.
//!
//! Activation codes: 0 identity, 1 relu, 2 sigmoid, 3 tanh.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};

use super::{Activation, AdamConfig, AdamState, Dense, DenseGrad, Gradients, Mlp};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"DIAGCKPT";
const VERSION: u32 = 1;
const MAX_DIMS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Network(Mlp),
    Adam(AdamState),
}

/// A set of named networks and optimizer states.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub step: u64,
    pub entries: BTreeMap<String, Entry>,
}

impl Checkpoint {
    pub fn new(step: u64) -> Self {
        Checkpoint { step, entries: BTreeMap::new() }
    }

    pub fn insert_network(&mut self, name: &str, net: &Mlp) {
        self.entries.insert(name.to_owned(), Entry::Network(net.clone()));
    }

    pub fn insert_adam(&mut self, name: &str, state: &AdamState) {
        self.entries.insert(name.to_owned(), Entry::Adam(state.clone()));
    }

    pub fn network(&self, name: &str) -> Result<&Mlp> {
        match self.entries.get(name) {
            Some(Entry::Network(n)) => Ok(n),
            _ => Err(Error::Format(format!("checkpoint has no network named {name:?}"))),
        }
    }

    pub fn adam(&self, name: &str) -> Result<&AdamState> {
        match self.entries.get(name) {
            Some(Entry::Adam(a)) => Ok(a),
            _ => Err(Error::Format(format!("checkpoint has no optimizer state named {name:?}"))),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, entry) in &self.entries {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            match entry {
                Entry::Network(net) => {
                    out.push(0);
                    encode_network(net, &mut out);
                }
                Entry::Adam(state) => {
                    out.push(1);
                    encode_adam(state, &mut out);
                }
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Format("bad checkpoint magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let step = r.u64()?;
        let count = r.u32()? as usize;
        let mut entries = BTreeMap::new();
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::Format("entry name is not utf-8".into()))?
                .to_owned();
            let entry = match r.u8()? {
                0 => Entry::Network(decode_network(&mut r)?),
                1 => Entry::Adam(decode_adam(&mut r)?),
                k => return Err(Error::Format(format!("unknown entry kind {k}"))),
            };
            if entries.insert(name.clone(), entry).is_some() {
                return Err(Error::Format(format!("duplicate entry {name:?}")));
            }
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - r.pos)));
        }
        Ok(Checkpoint { step, entries })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.encode())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::decode(&std::fs::read(path)?)
    }
}

fn encode_dims(dims: &[usize], out: &mut Vec<u8>) {
    out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
}

fn encode_blocks<'a>(blocks: impl Iterator<Item = (&'a Array2<f64>, &'a Array1<f64>)>, out: &mut Vec<u8>) {
    for (w, b) in blocks {
        for v in w.iter().chain(b.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

fn encode_network(net: &Mlp, out: &mut Vec<u8>) {
    encode_dims(&net.dims(), out);
    out.push(net.hidden_activation().code());
    out.push(net.output_activation().code());
    encode_blocks(net.layers().iter().map(|l| (&l.weight, &l.bias)), out);
}

fn encode_adam(state: &AdamState, out: &mut Vec<u8>) {
    out.extend_from_slice(&state.step.to_le_bytes());
    let c = state.config;
    for v in [c.lr, c.beta1, c.beta2, c.eps] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let mut dims = vec![state.m.layers[0].weight.ncols()];
    dims.extend(state.m.layers.iter().map(|l| l.weight.nrows()));
    encode_dims(&dims, out);
    encode_blocks(state.m.layers.iter().map(|l| (&l.weight, &l.bias)), out);
    encode_blocks(state.v.layers.iter().map(|l| (&l.weight, &l.bias)), out);
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated checkpoint: need {n} bytes at offset {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn dims(&mut self) -> Result<Vec<usize>> {
        let n = self.u32()? as usize;
        if !(2..=MAX_DIMS).contains(&n) {
            return Err(Error::Format(format!("implausible layer count {n}")));
        }
        let dims = (0..n).map(|_| self.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if dims.contains(&0) {
            return Err(Error::Format("zero-width layer".into()));
        }
        Ok(dims)
    }

    /// Reads parameter blocks for `dims`, refusing sizes the input cannot hold.
    fn blocks(&mut self, dims: &[usize]) -> Result<Vec<(Array2<f64>, Array1<f64>)>> {
        let total = dims
            .windows(2)
            .try_fold(0usize, |acc, w| w[0].checked_mul(w[1])?.checked_add(w[1])?.checked_add(acc))
            .ok_or_else(|| Error::Format("parameter count overflows".into()))?;
        if total.checked_mul(8).is_none_or(|bytes| bytes > self.remaining()) {
            return Err(Error::Format(format!("truncated checkpoint: {total} parameters declared")));
        }
        dims.windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let weight = (0..fan_in * fan_out).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
                let bias = (0..fan_out).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
                let weight =
                    Array2::from_shape_vec((fan_out, fan_in), weight).map_err(|e| Error::Format(e.to_string()))?;
                Ok((weight, Array1::from(bias)))
            })
            .collect()
    }

    fn activation(&mut self) -> Result<Activation> {
        let code = self.u8()?;
        Activation::from_code(code).ok_or_else(|| Error::Format(format!("unknown activation code {code}")))
    }
}

fn decode_network(r: &mut Reader<'_>) -> Result<Mlp> {
    let dims = r.dims()?;
    let hidden = r.activation()?;
    let output = r.activation()?;
    let layers = r.blocks(&dims)?.into_iter().map(|(weight, bias)| Dense { weight, bias }).collect();
    Mlp::from_layers(layers, hidden, output)
}

fn decode_adam(r: &mut Reader<'_>) -> Result<AdamState> {
    let step = r.u64()?;
    let config = AdamConfig { lr: r.f64()?, beta1: r.f64()?, beta2: r.f64()?, eps: r.f64()? };
    let dims = r.dims()?;
    let to_grads = |blocks: Vec<(Array2<f64>, Array1<f64>)>| Gradients {
        layers: blocks.into_iter().map(|(weight, bias)| DenseGrad { weight, bias }).collect(),
    };
    let m = to_grads(r.blocks(&dims)?);
    let v = to_grads(r.blocks(&dims)?);
    Ok(AdamState { config, step, m, v })
}
