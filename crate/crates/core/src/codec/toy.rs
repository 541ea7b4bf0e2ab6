//! Intra-only 8x8 DCT codec.
//!
//! Each plane is level-shifted, split into 8x8 blocks (chroma is edge-padded
//! to a multiple of eight), transformed with an orthonormal DCT-II and
//! quantized with a uniform step `2^((qp - 4) / 6)` scaled to the container
//! depth. Levels are zigzag-scanned; per block the stream holds the count of
//! coefficients up to the last non-zero one as `ue(v)`, followed by those
//! levels as `se(v)`. An all-zero block costs one bit.
//!
//! Because every quantized magnitude is non-increasing in the step size and
//! every code length is non-decreasing in magnitude, the bit count of a fixed
//! input can only fall as QP rises.

use std::sync::OnceLock;

use super::bits::{BitReader, BitWriter};
use super::{EncodedStream, HostCodec, QpValue, StreamInfo};
use crate::error::{Error, Result};
use crate::frames::{ChromaFormat, FrameRate, Plane, VideoFrame, VideoSequence};

const MAGIC: &[u8; 4] = b"TOY1";
pub const TOY_HEADER_LEN: usize = 28;
const B: usize = 8;

const ZIGZAG: [usize; 64] = [
    0, 1, 8, 16, 9, 2, 3, 10, 17, 24, 32, 25, 18, 11, 4, 5, 12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6, 7, 14,
    21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51, 58, 59, 52, 45, 38, 31, 39, 46, 53, 60,
    61, 54, 47, 55, 62, 63,
];

fn dct_matrix() -> &'static [[f64; B]; B] {
    static M: OnceLock<[[f64; B]; B]> = OnceLock::new();
    M.get_or_init(|| {
        let mut m = [[0.0; B]; B];
        for (k, row) in m.iter_mut().enumerate() {
            let c = if k == 0 { (1.0 / B as f64).sqrt() } else { (2.0 / B as f64).sqrt() };
            for (n, v) in row.iter_mut().enumerate() {
                *v = c * ((2 * n + 1) as f64 * k as f64 * std::f64::consts::PI / (2 * B) as f64).cos();
            }
        }
        m
    })
}

fn fdct(block: &[f64; 64]) -> [f64; 64] {
    let m = dct_matrix();
    let mut tmp = [0.0; 64];
    for r in 0..B {
        for k in 0..B {
            tmp[r * B + k] = (0..B).map(|n| m[k][n] * block[r * B + n]).sum();
        }
    }
    let mut out = [0.0; 64];
    for c in 0..B {
        for k in 0..B {
            out[k * B + c] = (0..B).map(|n| m[k][n] * tmp[n * B + c]).sum();
        }
    }
    out
}

fn idct(coef: &[f64; 64]) -> [f64; 64] {
    let m = dct_matrix();
    let mut tmp = [0.0; 64];
    for c in 0..B {
        for n in 0..B {
            tmp[n * B + c] = (0..B).map(|k| m[k][n] * coef[k * B + c]).sum();
        }
    }
    let mut out = [0.0; 64];
    for r in 0..B {
        for n in 0..B {
            out[r * B + n] = (0..B).map(|k| m[k][n] * tmp[r * B + k]).sum();
        }
    }
    out
}

/// Quantizer step for `qp` at the given container depth. At 8 bits and
/// `qp = 4` the step is exactly one.
pub fn qstep(qp: QpValue, container_bit_depth: u8) -> f64 {
    let exp = (f64::from(qp.get()) - 4.0) / 6.0 + f64::from(container_bit_depth) - 8.0;
    exp.exp2()
}

fn padded(n: usize) -> usize {
    n.div_ceil(B) * B
}

fn encode_plane(w: &mut BitWriter, plane: &Plane, offset: f64, step: f64) {
    let (pw, ph) = (plane.width(), plane.height());
    let mut block = [0.0; 64];
    for by in (0..padded(ph)).step_by(B) {
        for bx in (0..padded(pw)).step_by(B) {
            for y in 0..B {
                for x in 0..B {
                    let s = plane.get((bx + x).min(pw - 1), (by + y).min(ph - 1));
                    block[y * B + x] = f64::from(s) - offset;
                }
            }
            let coef = fdct(&block);
            let mut levels = [0i32; 64];
            let mut last = 0;
            for (i, &z) in ZIGZAG.iter().enumerate() {
                levels[i] = (coef[z] / step).round() as i32;
                if levels[i] != 0 {
                    last = i + 1;
                }
            }
            w.put_ue(last as u32);
            for &l in &levels[..last] {
                w.put_se(l);
            }
        }
    }
}

fn decode_plane(r: &mut BitReader, pw: usize, ph: usize, offset: f64, step: f64, max: f64) -> Result<Plane> {
    let mut data = vec![0u16; pw * ph];
    for by in (0..padded(ph)).step_by(B) {
        for bx in (0..padded(pw)).step_by(B) {
            let last = r.get_ue()? as usize;
            if last > 64 {
                return Err(Error::CorruptPayload(format!("coefficient count {last} exceeds 64")));
            }
            let mut coef = [0.0; 64];
            for &z in &ZIGZAG[..last] {
                coef[z] = f64::from(r.get_se()?) * step;
            }
            let rec = idct(&coef);
            for y in 0..B.min(ph.saturating_sub(by)) {
                for x in 0..B.min(pw.saturating_sub(bx)) {
                    let v = (rec[y * B + x] + offset).round().clamp(0.0, max);
                    data[(by + y) * pw + bx + x] = v as u16;
                }
            }
        }
    }
    Plane::new(pw, ph, data)
}

pub fn toy_encode(seq: &VideoSequence, qp: QpValue) -> Result<EncodedStream> {
    let first = seq.first().ok_or(Error::EmptySequence)?;
    let (w, h) = (first.width(), first.height());
    if w % B != 0 || h % B != 0 {
        return Err(Error::NotBlockAligned { width: w, height: h });
    }
    let cbd = first.container_bit_depth();
    let ebd = first.effective_bit_depth();
    let fps = seq.frame_rate();

    let mut out = Vec::with_capacity(TOY_HEADER_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&[cbd, ebd, qp.get(), 0]);
    out.extend_from_slice(&fps.num.to_le_bytes());
    out.extend_from_slice(&fps.den.to_le_bytes());
    out.extend_from_slice(&(seq.len() as u32).to_le_bytes());
    debug_assert_eq!(out.len(), TOY_HEADER_LEN);

    let step = qstep(qp, cbd);
    let offset = f64::from(1u32 << (ebd - 1));
    let mut bw = BitWriter::new();
    for frame in seq.frames() {
        for plane in frame.planes() {
            encode_plane(&mut bw, plane, offset, step);
        }
    }
    out.extend(bw.finish());
    let bits = out.len() as u64 * 8;
    Ok(EncodedStream { payload: out, bits })
}

pub fn toy_decode(payload: &[u8]) -> Result<VideoSequence> {
    if payload.len() < TOY_HEADER_LEN {
        return Err(Error::CorruptPayload(format!("payload of {} bytes is shorter than the header", payload.len())));
    }
    if &payload[..4] != MAGIC {
        return Err(Error::CorruptPayload("bad magic".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(payload[o..o + 4].try_into().unwrap());
    let (w, h) = (u32_at(4) as usize, u32_at(8) as usize);
    let (cbd, ebd, qp) = (payload[12], payload[13], payload[14]);
    let fps = FrameRate::new(u32_at(16), u32_at(20)).map_err(|_| Error::CorruptPayload("bad frame rate".into()))?;
    let count = u32_at(24) as usize;
    if w == 0 || h == 0 || w % B != 0 || h % B != 0 || !matches!(cbd, 8 | 10) || ebd == 0 || ebd > cbd {
        return Err(Error::CorruptPayload(format!("bad stream parameters {w}x{h} depth {ebd}/{cbd}")));
    }
    let qp = QpValue::new(i32::from(qp)).map_err(|_| Error::CorruptPayload(format!("bad qp {qp}")))?;

    let step = qstep(qp, cbd);
    let offset = f64::from(1u32 << (ebd - 1));
    let max = f64::from((1u32 << ebd) - 1);
    let (cw, ch) = ChromaFormat::Yuv420.chroma_dims(w, h);
    let mut r = BitReader::new(&payload[TOY_HEADER_LEN..]);
    let mut frames = Vec::with_capacity(count);
    for _ in 0..count {
        let y = decode_plane(&mut r, w, h, offset, step, max)?;
        let u = decode_plane(&mut r, cw, ch, offset, step, max)?;
        let v = decode_plane(&mut r, cw, ch, offset, step, max)?;
        frames.push(VideoFrame::new([y, u, v], cbd, ebd)?);
    }
    if r.bit_pos().div_ceil(8) != payload.len() - TOY_HEADER_LEN {
        return Err(Error::CorruptPayload("trailing bytes after last frame".into()));
    }
    VideoSequence::new(frames, fps)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ToyCodec;

impl HostCodec for ToyCodec {
    fn name(&self) -> &str {
        "toy"
    }

    fn encode(&self, seq: &VideoSequence, qp: QpValue) -> Result<EncodedStream> {
        toy_encode(seq, qp)
    }

    fn decode(&self, payload: &[u8], info: &StreamInfo) -> Result<VideoSequence> {
        let seq = toy_decode(payload)?;
        let got = StreamInfo::of(&seq)?;
        if got != *info {
            return Err(Error::GeometryMismatch(format!("decoded stream {got:?}, expected {info:?}")));
        }
        Ok(seq)
    }
}
