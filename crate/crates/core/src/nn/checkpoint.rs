//! Binary model checkpoints.
//!
//! Layout, all integers little-endian:
//! `"PCNN"`, version `u16`, flags `u16` (bit 0 = residual), layer count `u32`,
//! then per layer a tag byte and its `u32` hyper-parameters, then every
//! parameter tensor as an element count `u32` followed by `f32` values.

use std::path::Path;

use super::layers::{Layer, LayerSpec};
use super::model::Model;
use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PCNN";
const VERSION: u16 = 1;

fn put_u32s(out: &mut Vec<u8>, vals: &[usize]) {
    for &v in vals {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
}

pub fn model_to_bytes<T: Scalar>(model: &Model<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&u16::from(model.residual()).to_le_bytes());
    put_u32s(&mut out, &[model.layers().len()]);
    for l in model.layers() {
        match *l.spec() {
            LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding } => {
                out.push(1);
                put_u32s(&mut out, &[in_channels, out_channels, kernel[0], kernel[1], stride[0], stride[1], padding[0], padding[1]]);
            }
            LayerSpec::Conv3d { in_channels, out_channels, kernel, stride, padding } => {
                out.push(2);
                put_u32s(&mut out, &[in_channels, out_channels]);
                put_u32s(&mut out, &kernel);
                put_u32s(&mut out, &stride);
                put_u32s(&mut out, &padding);
            }
            LayerSpec::Relu => out.push(3),
            LayerSpec::GlobalAvgPool => out.push(4),
            LayerSpec::Linear { in_features, out_features } => {
                out.push(5);
                put_u32s(&mut out, &[in_features, out_features]);
            }
        }
    }
    for p in model.layers().iter().flat_map(|l| l.params()) {
        put_u32s(&mut out, &[p.len()]);
        for v in p.data() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::InvalidCheckpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn arr<const N: usize>(&mut self) -> Result<[usize; N]> {
        let mut a = [0; N];
        for v in &mut a {
            *v = self.u32()?;
        }
        Ok(a)
    }
}

pub fn model_from_bytes<T: Scalar>(buf: &[u8]) -> Result<Model<T>> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::InvalidCheckpoint("bad magic".into()));
    }
    let version = c.u16()?;
    if version != VERSION {
        return Err(Error::InvalidCheckpoint(format!("unsupported version {version}")));
    }
    let flags = c.u16()?;
    if flags > 1 {
        return Err(Error::InvalidCheckpoint(format!("unknown flags {flags:#x}")));
    }
    let n = c.u32()?;
    if n > 4096 {
        return Err(Error::InvalidCheckpoint(format!("implausible layer count {n}")));
    }
    let mut specs = Vec::with_capacity(n);
    for _ in 0..n {
        let spec = match c.u8()? {
            1 => {
                let [i, o, k0, k1, s0, s1, p0, p1] = c.arr::<8>()?;
                LayerSpec::Conv2d { in_channels: i, out_channels: o, kernel: [k0, k1], stride: [s0, s1], padding: [p0, p1] }
            }
            2 => {
                let [i, o] = c.arr::<2>()?;
                LayerSpec::Conv3d { in_channels: i, out_channels: o, kernel: c.arr()?, stride: c.arr()?, padding: c.arr()? }
            }
            3 => LayerSpec::Relu,
            4 => LayerSpec::GlobalAvgPool,
            5 => {
                let [i, o] = c.arr::<2>()?;
                LayerSpec::Linear { in_features: i, out_features: o }
            }
            t => return Err(Error::InvalidCheckpoint(format!("unknown layer tag {t}"))),
        };
        specs.push(spec);
    }
    let mut layers = Vec::with_capacity(n);
    for spec in specs {
        let mut params = Vec::new();
        for shape in spec.param_shapes() {
            let len = c.u32()?;
            if len != shape.iter().product::<usize>() {
                return Err(Error::InvalidCheckpoint(format!("parameter blob of {len} values for shape {shape:?}")));
            }
            let raw = c.take(len * 4)?;
            let data = raw.chunks_exact(4).map(|b| T::from_f64(f64::from(f32::from_le_bytes(b.try_into().expect("4"))))).collect();
            params.push(Tensor::new(shape, data)?);
        }
        layers.push(Layer::with_params(spec, params)?);
    }
    if c.pos != buf.len() {
        return Err(Error::InvalidCheckpoint(format!("{} trailing bytes", buf.len() - c.pos)));
    }
    Model::from_layers(layers, flags & 1 == 1).map_err(|e| Error::InvalidCheckpoint(e.to_string()))
}

pub fn save_model<T: Scalar>(model: &Model<T>, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, model_to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<Model<T>> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&buf)
}
