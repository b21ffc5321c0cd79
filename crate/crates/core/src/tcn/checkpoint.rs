//! Flat binary checkpoint: `TCN1`, version (u32), tensor count (u32), then
//! per tensor the name length (u32), UTF-8 name, rank (u32), dims (u32 each)
//! and row-major float64 data. All integers and floats are little-endian.
//!
//! Besides parameters a checkpoint carries two metadata tensors, `meta.kind`
//! and `meta.config`, from which the architecture is rebuilt on load.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::layers::Parameters;
use super::TcnBlockSpec;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TCN1";
pub const VERSION: u32 = 1;
pub(crate) const KIND_GENERATOR: f64 = 0.0;
pub(crate) const KIND_DISCRIMINATOR: f64 = 1.0;
const META_KIND: &str = "meta.kind";
const META_CONFIG: &str = "meta.config";

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub version: u32,
    pub tensors: Vec<Tensor>,
}

pub(crate) trait ConfigCodec: Sized {
    fn encode(&self) -> Vec<f64>;
    fn decode(v: &[f64]) -> Result<Self>;
}

impl TcnBlockSpec {
    pub(crate) fn encode_into(&self, v: &mut Vec<f64>) {
        v.extend([
            self.kernel_size as f64,
            self.filters as f64,
            self.convs_per_block as f64,
            if self.causal { 1.0 } else { 0.0 },
            self.dilations.len() as f64,
        ]);
        v.extend(self.dilations.iter().map(|&d| d as f64));
    }

    pub(crate) fn decode_from(next: &mut dyn FnMut() -> Result<f64>) -> Result<Self> {
        let kernel_size = next()? as usize;
        let filters = next()? as usize;
        let convs_per_block = next()? as usize;
        let causal = next()? != 0.0;
        let n = next()? as usize;
        let dilations = (0..n).map(|_| next().map(|d| d as usize)).collect::<Result<_>>()?;
        Ok(Self {
            kernel_size,
            filters,
            dilations,
            causal,
            convs_per_block,
        })
    }
}

fn read_u32(bytes: &[u8], pos: &mut usize) -> Result<u32> {
    let end = *pos + 4;
    let b = bytes
        .get(*pos..end)
        .ok_or_else(|| Error::Format("truncated checkpoint".into()))?;
    *pos = end;
    Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
}

impl Checkpoint {
    pub(crate) fn from_model<C: ConfigCodec, M: Parameters>(kind: f64, cfg: &C, model: &M) -> Self {
        let config = cfg.encode();
        let mut tensors = vec![
            Tensor {
                name: META_KIND.into(),
                dims: vec![1],
                data: vec![kind],
            },
            Tensor {
                name: META_CONFIG.into(),
                dims: vec![config.len()],
                data: config,
            },
        ];
        model.visit("", &mut |name, p| {
            tensors.push(Tensor {
                name: name.to_string(),
                dims: p.value.shape().to_vec(),
                data: p.value.iter().copied().collect(),
            })
        });
        Self {
            version: VERSION,
            tensors,
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub(crate) fn config<C: ConfigCodec>(&self, kind: f64) -> Result<C> {
        let k = self
            .get(META_KIND)
            .and_then(|t| t.data.first().copied())
            .ok_or_else(|| Error::Format("checkpoint has no meta.kind".into()))?;
        if k != kind {
            return Err(Error::Format(format!(
                "checkpoint holds model kind {k}, expected {kind}"
            )));
        }
        let cfg = self
            .get(META_CONFIG)
            .ok_or_else(|| Error::Format("checkpoint has no meta.config".into()))?;
        C::decode(&cfg.data)
    }

    pub(crate) fn load_into<M: Parameters>(&self, model: &mut M) -> Result<()> {
        let mut err = None;
        let mut seen = 0;
        model.visit_mut("", &mut |name, p| {
            if err.is_some() {
                return;
            }
            match self.get(name) {
                Some(t) if t.dims == p.value.shape() => {
                    p.value = Array2::from_shape_vec(p.value.raw_dim(), t.data.clone())
                        .expect("dims checked");
                    seen += 1;
                }
                Some(t) => {
                    err = Some(Error::Format(format!(
                        "tensor {name} has dims {:?}, model expects {:?}",
                        t.dims,
                        p.value.shape()
                    )))
                }
                None => err = Some(Error::Format(format!("checkpoint is missing {name}"))),
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        if seen + 2 != self.tensors.len() {
            return Err(Error::Format("checkpoint has unexpected extra tensors".into()));
        }
        model.zero_grad();
        Ok(())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&self.version.to_le_bytes())?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for t in &self.tensors {
            let name = t.name.as_bytes();
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name)?;
            w.write_all(&(t.dims.len() as u32).to_le_bytes())?;
            for &d in &t.dims {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            for v in &t.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return Err(Error::Format("missing TCN1 magic".into()));
        }
        let mut pos = 4;
        let version = read_u32(&bytes, &mut pos)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let count = read_u32(&bytes, &mut pos)? as usize;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let len = read_u32(&bytes, &mut pos)? as usize;
            let name = bytes
                .get(pos..pos + len)
                .ok_or_else(|| Error::Format("truncated tensor name".into()))?;
            let name = String::from_utf8(name.to_vec())
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            pos += len;
            let rank = read_u32(&bytes, &mut pos)? as usize;
            let dims = (0..rank)
                .map(|_| read_u32(&bytes, &mut pos).map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = dims.iter().product();
            let raw = bytes
                .get(pos..pos + 8 * n)
                .ok_or_else(|| Error::Format(format!("truncated data for {name}")))?;
            pos += 8 * n;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            tensors.push(Tensor { name, dims, data });
        }
        if pos != bytes.len() {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        Ok(Self { version, tensors })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}
