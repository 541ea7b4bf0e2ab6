//! Separable Lanczos3 resampling by a factor of two.
//!
//! Pixel centres are aligned: output pixel `i` of a 2x decimation sits at
//! source coordinate `2i + 0.5`, and output pixel `o` of a 2x interpolation
//! sits at `o/2 - 0.25`. Decimation stretches the kernel by the scale factor
//! (support of six source pixels on each side). Source indices outside the
//! plane are clamped to the edge, taps are normalized to sum to one, and the
//! filtered value is rounded half-up and clipped to the effective range.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::frames::{ChromaFormat, Plane, VideoFrame};

const LOBES: f64 = 3.0;

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// `sinc(x) * sinc(x / 3)` on `|x| < 3`, zero elsewhere.
pub fn lanczos3_weight(x: f64) -> f64 {
    if x.abs() >= LOBES {
        0.0
    } else {
        sinc(x) * sinc(x / LOBES)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Down,
    Up,
}

/// Normalized taps of one output sample: clamped source indices and weights.
#[derive(Clone, Debug)]
pub struct Taps {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

/// Filter taps for every output position along one axis.
pub fn filter_taps(in_len: usize, out_len: usize, direction: Direction) -> Vec<Taps> {
    let (stretch, to_source): (f64, fn(usize) -> f64) = match direction {
        Direction::Down => (2.0, |o| 2.0 * o as f64 + 0.5),
        Direction::Up => (1.0, |o| o as f64 / 2.0 - 0.25),
    };
    let radius = LOBES * stretch;
    (0..out_len)
        .map(|o| {
            let centre = to_source(o);
            let first = (centre - radius).floor() as isize;
            let last = (centre + radius).ceil() as isize;
            let mut indices = Vec::new();
            let mut weights = Vec::new();
            for j in first..=last {
                let w = lanczos3_weight((j as f64 - centre) / stretch);
                if w != 0.0 {
                    indices.push(j.clamp(0, in_len as isize - 1) as usize);
                    weights.push(w);
                }
            }
            let sum: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= sum);
            Taps { indices, weights }
        })
        .collect()
}

fn resample_plane(plane: &Plane, out_w: usize, out_h: usize, direction: Direction, max: u16) -> Plane {
    let (w, h) = (plane.width(), plane.height());
    let htaps = filter_taps(w, out_w, direction);
    let vtaps = filter_taps(h, out_h, direction);
    let src = plane.data();

    let mut rows = vec![0.0f64; out_w * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        let dst = &mut rows[y * out_w..(y + 1) * out_w];
        for (d, t) in dst.iter_mut().zip(&htaps) {
            *d = t.indices.iter().zip(&t.weights).map(|(&i, &k)| f64::from(line[i]) * k).sum();
        }
    }

    let max = f64::from(max);
    let mut out = vec![0u16; out_w * out_h];
    for (oy, t) in vtaps.iter().enumerate() {
        let dst = &mut out[oy * out_w..(oy + 1) * out_w];
        for (ox, d) in dst.iter_mut().enumerate() {
            let v: f64 = t.indices.iter().zip(&t.weights).map(|(&i, &k)| rows[i * out_w + ox] * k).sum();
            *d = (v + 0.5).floor().clamp(0.0, max) as u16;
        }
    }
    Plane::new(out_w, out_h, out).expect("resampled plane geometry")
}

fn resample_frame(frame: &VideoFrame, out_w: usize, out_h: usize, direction: Direction) -> VideoFrame {
    let (cw, ch) = ChromaFormat::Yuv420.chroma_dims(out_w, out_h);
    let max = frame.max_value();
    let [y, u, v] = frame.planes();
    let planes = [
        resample_plane(y, out_w, out_h, direction, max),
        resample_plane(u, cw, ch, direction, max),
        resample_plane(v, cw, ch, direction, max),
    ];
    VideoFrame::from_parts_unchecked(planes, frame.container_bit_depth(), frame.effective_bit_depth())
}

/// Halves the resolution. Luma dimensions must be even; chroma is resampled
/// on its own grid to `ceil(luma / 2)`.
pub fn spatial_down(frame: &VideoFrame) -> Result<VideoFrame> {
    let (w, h) = (frame.width(), frame.height());
    if w % 2 != 0 || h % 2 != 0 {
        return Err(Error::OddDimensions { width: w, height: h });
    }
    Ok(resample_frame(frame, w / 2, h / 2, Direction::Down))
}

/// Doubles the resolution.
pub fn spatial_up(frame: &VideoFrame) -> Result<VideoFrame> {
    Ok(resample_frame(frame, frame.width() * 2, frame.height() * 2, Direction::Up))
}
