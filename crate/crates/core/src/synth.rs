//! Deterministic synthetic test content.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::frames::{ChromaFormat, FrameRate, Plane, VideoFrame, VideoSequence};

fn frame_from_fn(
    width: usize,
    height: usize,
    bit_depth: u8,
    f: impl Fn(usize, f64, f64) -> f64,
) -> VideoFrame {
    let max = f64::from((1u32 << bit_depth) - 1);
    let (cw, ch) = ChromaFormat::Yuv420.chroma_dims(width, height);
    let plane = |idx: usize, pw: usize, ph: usize, scale: f64| {
        let data = (0..pw * ph)
            .map(|i| {
                let (x, y) = ((i % pw) as f64 * scale, (i / pw) as f64 * scale);
                (f(idx, x, y) * max).round().clamp(0.0, max) as u16
            })
            .collect();
        Plane::new(pw, ph, data).expect("synthetic plane")
    };
    VideoFrame::new(
        [plane(0, width, height, 1.0), plane(1, cw, ch, 2.0), plane(2, cw, ch, 2.0)],
        bit_depth,
        bit_depth,
    )
    .expect("synthetic frame")
}

/// Independent uniform samples on every plane.
pub fn noise_frame(width: usize, height: usize, bit_depth: u8, seed: u64) -> VideoFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max = 1u32 << bit_depth;
    let (cw, ch) = ChromaFormat::Yuv420.chroma_dims(width, height);
    let mut plane = |w: usize, h: usize| {
        Plane::new(w, h, (0..w * h).map(|_| rng.random_range(0..max) as u16).collect()).unwrap()
    };
    let y = plane(width, height);
    let u = plane(cw, ch);
    let v = plane(cw, ch);
    VideoFrame::new([y, u, v], bit_depth, bit_depth).unwrap()
}

/// Smooth sinusoidal chart with periods of 24 pixels and more.
pub fn low_frequency_chart(width: usize, height: usize, bit_depth: u8, phase: f64) -> VideoFrame {
    let tau = std::f64::consts::TAU;
    frame_from_fn(width, height, bit_depth, |plane, x, y| match plane {
        0 => {
            0.5 + 0.2 * ((x + phase) * tau / 48.0).sin() * (y * tau / 64.0).cos()
                + 0.15 * ((x + 2.0 * y + phase) * tau / 96.0).sin()
        }
        1 => 0.5 + 0.1 * (x * tau / 80.0).cos(),
        _ => 0.5 + 0.1 * (y * tau / 72.0).sin(),
    })
}

/// Diagonal luma ramp with gently drifting chroma.
pub fn gradient_sequence(width: usize, height: usize, frames: usize, fps: u32) -> VideoSequence {
    let frames = (0..frames)
        .map(|t| {
            let shift = t as f64 * 0.5;
            frame_from_fn(width, height, 8, move |plane, x, y| {
                let span = (width + height) as f64;
                match plane {
                    0 => 0.1 + 0.8 * (x + y + shift) / (span + 32.0),
                    1 => 0.4 + 0.2 * x / width as f64,
                    _ => 0.6 - 0.2 * y / height as f64,
                }
            })
        })
        .collect();
    VideoSequence::new(frames, FrameRate::new(fps, 1).unwrap()).unwrap()
}

/// Mid-grey base with static fine-grained texture plus per-frame noise.
pub fn textured_noise_sequence(width: usize, height: usize, frames: usize, fps: u32, seed: u64) -> VideoSequence {
    let tex = noise_frame(width, height, 8, seed);
    let frames = (0..frames)
        .map(|t| {
            let jitter = noise_frame(width, height, 8, seed.wrapping_add(1 + t as u64));
            let mix = |a: &Plane, b: &Plane| {
                let data = a
                    .data()
                    .iter()
                    .zip(b.data())
                    .map(|(&s, &n)| (32 + u32::from(s) * 5 / 8 + u32::from(n) / 8) as u16)
                    .collect();
                Plane::new(a.width(), a.height(), data).unwrap()
            };
            let p = tex.planes();
            let q = jitter.planes();
            VideoFrame::new([mix(&p[0], &q[0]), mix(&p[1], &q[1]), mix(&p[2], &q[2])], 8, 8).unwrap()
        })
        .collect();
    VideoSequence::new(frames, FrameRate::new(fps, 1).unwrap()).unwrap()
}

/// Sinusoidal chart translating two pixels per frame.
pub fn moving_pattern_sequence(width: usize, height: usize, frames: usize, fps: u32) -> VideoSequence {
    let frames = (0..frames).map(|t| low_frequency_chart(width, height, 8, 2.0 * t as f64)).collect();
    VideoSequence::new(frames, FrameRate::new(fps, 1).unwrap()).unwrap()
}

/// Sharp high-contrast stripes with a short period (about 3 pixels).
pub fn fine_stripes_frame(width: usize, height: usize, bit_depth: u8, phase: f64) -> VideoFrame {
    frame_from_fn(width, height, bit_depth, |plane, x, y| match plane {
        0 => 0.5 + 0.4 * ((x + phase) * 2.1 + y * 0.7).sin(),
        _ => 0.5,
    })
}

/// Sequence of identical frames.
pub fn still_sequence(frame: VideoFrame, frames: usize, fps: u32) -> VideoSequence {
    VideoSequence::new(vec![frame; frames], FrameRate::new(fps, 1).unwrap()).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(noise_frame(16, 16, 10, 9), noise_frame(16, 16, 10, 9));
        assert_ne!(noise_frame(16, 16, 10, 9), noise_frame(16, 16, 10, 10));
        let a = textured_noise_sequence(16, 16, 3, 30, 4);
        assert_eq!(a, textured_noise_sequence(16, 16, 3, 30, 4));
        assert_eq!(moving_pattern_sequence(32, 16, 4, 30).len(), 4);
        assert_eq!(gradient_sequence(32, 16, 4, 30).width(), 32);
    }
}
