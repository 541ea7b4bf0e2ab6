use super::{Plane, VideoFrame};
use crate::error::{Error, Result};

/// Value reported when two planes are identical. A finite cap keeps rate
/// curves and their interpolants well defined.
pub const PSNR_CAP_DB: f64 = 100.0;

/// PSNR between two planes of equal size, in dB, capped at [`PSNR_CAP_DB`].
pub fn psnr_plane(a: &Plane, b: &Plane, peak: f64) -> Result<f64> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::GeometryMismatch(format!(
            "plane {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let sse: u64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = i64::from(x) - i64::from(y);
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(PSNR_CAP_DB);
    }
    let mse = sse as f64 / a.data().len() as f64;
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanePsnr {
    pub y: f64,
    pub u: f64,
    pub v: f64,
}

impl PlanePsnr {
    pub fn yuv(&self) -> f64 {
        combine_psnr_yuv(self.y, self.u, self.v)
    }
}

/// 6:1:1 weighting of the per-plane values.
pub fn combine_psnr_yuv(y: f64, u: f64, v: f64) -> f64 {
    (6.0 * y + u + v) / 8.0
}

pub fn plane_psnrs(a: &VideoFrame, b: &VideoFrame) -> Result<PlanePsnr> {
    if a.width() != b.width()
        || a.height() != b.height()
        || a.container_bit_depth() != b.container_bit_depth()
    {
        return Err(Error::GeometryMismatch(format!(
            "frame {}x{}@{} vs {}x{}@{}",
            a.width(),
            a.height(),
            a.container_bit_depth(),
            b.width(),
            b.height(),
            b.container_bit_depth()
        )));
    }
    let peak = a.peak();
    Ok(PlanePsnr {
        y: psnr_plane(a.y(), b.y(), peak)?,
        u: psnr_plane(a.u(), b.u(), peak)?,
        v: psnr_plane(a.v(), b.v(), peak)?,
    })
}

/// Combined-plane PSNR of one frame pair. The peak is the container-scale
/// maximum so that frames at a reduced effective depth are still measured
/// against the original signal range.
pub fn psnr_yuv(a: &VideoFrame, b: &VideoFrame) -> Result<f64> {
    Ok(plane_psnrs(a, b)?.yuv())
}

/// Arithmetic mean of per-frame [`psnr_yuv`].
pub fn sequence_psnr_yuv(a: &[VideoFrame], b: &[VideoFrame]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::GeometryMismatch(format!("{} frames vs {} frames", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        total += psnr_yuv(x, y)?;
    }
    Ok(total / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_planes_hit_cap() {
        let p = Plane::filled(3, 3, 7);
        assert_eq!(psnr_plane(&p, &p, 255.0).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn full_scale_error_is_zero_db() {
        let a = Plane::filled(1, 1, 0);
        let b = Plane::filled(1, 1, 255);
        assert_eq!(psnr_plane(&a, &b, 255.0).unwrap(), 0.0);
    }

    #[test]
    fn unit_error_everywhere() {
        let a = Plane::new(2, 2, vec![10, 20, 30, 40]).unwrap();
        let b = Plane::new(2, 2, vec![11, 19, 31, 39]).unwrap();
        let expected = 10.0 * (255.0f64 * 255.0).log10();
        let got = psnr_plane(&a, &b, 255.0).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 48.13).abs() < 0.005);
    }

    #[test]
    fn mismatched_planes() {
        let a = Plane::filled(2, 2, 0);
        let b = Plane::filled(2, 3, 0);
        assert!(matches!(psnr_plane(&a, &b, 255.0), Err(Error::GeometryMismatch(_))));
    }

    #[test]
    fn weighting() {
        assert_eq!(combine_psnr_yuv(40.0, 42.0, 44.0), 40.75);
    }

    #[test]
    fn identical_frames_are_capped() {
        let f = VideoFrame::filled(8, 8, 8, [1, 2, 3]).unwrap();
        assert_eq!(psnr_yuv(&f, &f).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn weighted_combination_matches_hand_computation() {
        let a = VideoFrame::filled(4, 4, 8, [100, 100, 100]).unwrap();
        let mut planes = a.clone().into_planes();
        // Y: one sample off by 4 -> MSE 1; U: one of four off by 2 -> MSE 1; V: all off by 1.
        planes[0].set(0, 0, 104);
        planes[1].set(1, 1, 102);
        for v in planes[2].data_mut() {
            *v = 101;
        }
        let b = VideoFrame::new(planes, 8, 8).unwrap();
        let psnr1 = 10.0 * (255.0f64 * 255.0).log10();
        let got = psnr_yuv(&a, &b).unwrap();
        assert!((got - psnr1).abs() < 1e-12);
        assert_eq!(psnr_yuv(&b, &a).unwrap(), got);
    }
}
