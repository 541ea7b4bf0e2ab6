//! Planar YUV 4:2:0 frames and sequences.
//!
//! Samples are stored as `u16` regardless of the container bit depth. A frame
//! carries two depths: the container depth (bits per stored sample, 8 or 10)
//! and the effective bit depth, the number of low bits that actually carry
//! signal. Bit-depth adaptation lowers the latter while leaving the former
//! alone.

mod psnr;
mod raw;
mod y4m;

pub use psnr::{combine_psnr_yuv, plane_psnrs, psnr_plane, psnr_yuv, sequence_psnr_yuv, PlanePsnr, PSNR_CAP_DB};
pub use raw::{read_raw, read_sidecar, write_raw, RawVideoInfo};
pub use y4m::{read_y4m, read_y4m_from, write_y4m, write_y4m_to, FRAME_MARKER};

use crate::error::{Error, Result};

/// One 2-D sample array.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<u16>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<u16>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!("empty plane {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::InvalidFrame(format!(
                "plane {width}x{height} needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Plane { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u16) -> Self {
        assert!(width > 0 && height > 0, "plane dimensions must be positive");
        Plane { width, height, data: vec![value; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u16] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u16] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u16> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u16 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u16) {
        self.data[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[u16] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn max_sample(&self) -> u16 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    pub fn map(&self, f: impl Fn(u16) -> u16) -> Plane {
        Plane {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copies the `w`x`h` window whose top-left corner is `(x, y)`.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<Plane> {
        if x + w > self.width || y + h > self.height || w == 0 || h == 0 {
            return Err(Error::GeometryMismatch(format!(
                "crop {w}x{h}+{x}+{y} outside {}x{} plane",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(w * h);
        for row in y..y + h {
            data.extend_from_slice(&self.data[row * self.width + x..row * self.width + x + w]);
        }
        Ok(Plane { width: w, height: h, data })
    }
}

/// Chroma subsampling layout. Only 4:2:0 is supported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum ChromaFormat {
    #[default]
    Yuv420,
}

impl ChromaFormat {
    pub fn chroma_dims(self, width: usize, height: usize) -> (usize, usize) {
        match self {
            ChromaFormat::Yuv420 => (width.div_ceil(2), height.div_ceil(2)),
        }
    }
}

/// Index of a plane within a frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PlaneId {
    Y = 0,
    U = 1,
    V = 2,
}

impl PlaneId {
    pub const ALL: [PlaneId; 3] = [PlaneId::Y, PlaneId::U, PlaneId::V];
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VideoFrame {
    planes: [Plane; 3],
    chroma_format: ChromaFormat,
    container_bit_depth: u8,
    effective_bit_depth: u8,
}

impl VideoFrame {
    /// Builds a frame and checks every invariant: chroma geometry, the
    /// depth ordering, and that no sample exceeds the effective bit depth.
    pub fn new(
        planes: [Plane; 3],
        container_bit_depth: u8,
        effective_bit_depth: u8,
    ) -> Result<Self> {
        if !matches!(container_bit_depth, 8 | 10) {
            return Err(Error::InvalidFrame(format!(
                "container bit depth {container_bit_depth} not in {{8, 10}}"
            )));
        }
        if effective_bit_depth == 0 || effective_bit_depth > container_bit_depth {
            return Err(Error::InvalidFrame(format!(
                "effective bit depth {effective_bit_depth} outside 1..={container_bit_depth}"
            )));
        }
        let (cw, ch) = ChromaFormat::Yuv420.chroma_dims(planes[0].width, planes[0].height);
        for p in &planes[1..] {
            if p.width != cw || p.height != ch {
                return Err(Error::InvalidFrame(format!(
                    "chroma plane {}x{} does not match {cw}x{ch} for luma {}x{}",
                    p.width, p.height, planes[0].width, planes[0].height
                )));
            }
        }
        let limit = 1u32 << effective_bit_depth;
        for p in &planes {
            if u32::from(p.max_sample()) >= limit {
                return Err(Error::InvalidFrame(format!(
                    "sample {} exceeds effective bit depth {effective_bit_depth}",
                    p.max_sample()
                )));
            }
        }
        Ok(VideoFrame {
            planes,
            chroma_format: ChromaFormat::Yuv420,
            container_bit_depth,
            effective_bit_depth,
        })
    }

    /// Frame with every sample of each plane set to the given value.
    pub fn filled(width: usize, height: usize, bit_depth: u8, yuv: [u16; 3]) -> Result<Self> {
        let (cw, ch) = ChromaFormat::Yuv420.chroma_dims(width, height);
        VideoFrame::new(
            [
                Plane::filled(width, height, yuv[0]),
                Plane::filled(cw, ch, yuv[1]),
                Plane::filled(cw, ch, yuv[2]),
            ],
            bit_depth,
            bit_depth,
        )
    }

    pub(crate) fn from_parts_unchecked(
        planes: [Plane; 3],
        container_bit_depth: u8,
        effective_bit_depth: u8,
    ) -> Self {
        debug_assert!(VideoFrame::new(planes.clone(), container_bit_depth, effective_bit_depth).is_ok());
        VideoFrame { planes, chroma_format: ChromaFormat::Yuv420, container_bit_depth, effective_bit_depth }
    }

    pub fn width(&self) -> usize {
        self.planes[0].width
    }

    pub fn height(&self) -> usize {
        self.planes[0].height
    }

    pub fn chroma_format(&self) -> ChromaFormat {
        self.chroma_format
    }

    pub fn container_bit_depth(&self) -> u8 {
        self.container_bit_depth
    }

    pub fn effective_bit_depth(&self) -> u8 {
        self.effective_bit_depth
    }

    /// Largest representable sample at the effective bit depth.
    pub fn max_value(&self) -> u16 {
        ((1u32 << self.effective_bit_depth) - 1) as u16
    }

    /// Peak used for PSNR: the container-scale maximum.
    pub fn peak(&self) -> f64 {
        f64::from((1u32 << self.container_bit_depth) - 1)
    }

    pub fn plane(&self, id: PlaneId) -> &Plane {
        &self.planes[id as usize]
    }

    pub fn planes(&self) -> &[Plane; 3] {
        &self.planes
    }

    pub fn y(&self) -> &Plane {
        &self.planes[0]
    }

    pub fn u(&self) -> &Plane {
        &self.planes[1]
    }

    pub fn v(&self) -> &Plane {
        &self.planes[2]
    }

    pub fn into_planes(self) -> [Plane; 3] {
        self.planes
    }

    /// Same samples, relabelled with a new effective bit depth. Samples above
    /// the new range are clipped.
    pub fn with_effective_bit_depth(mut self, ebd: u8) -> Result<Self> {
        if ebd == 0 || ebd > self.container_bit_depth {
            return Err(Error::InvalidFrame(format!(
                "effective bit depth {ebd} outside 1..={}",
                self.container_bit_depth
            )));
        }
        let max = ((1u32 << ebd) - 1) as u16;
        for p in &mut self.planes {
            for v in p.data_mut() {
                *v = (*v).min(max);
            }
        }
        self.effective_bit_depth = ebd;
        Ok(self)
    }

    /// Crops luma at `(x, y)` with size `w`x`h`; chroma follows on its own
    /// grid. Offsets and sizes must be even.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<VideoFrame> {
        if !x.is_multiple_of(2) || !y.is_multiple_of(2) || !w.is_multiple_of(2) || !h.is_multiple_of(2) {
            return Err(Error::GeometryMismatch(format!(
                "4:2:0 crop {w}x{h}+{x}+{y} must use even offsets and sizes"
            )));
        }
        let luma = self.planes[0].crop(x, y, w, h)?;
        let u = self.planes[1].crop(x / 2, y / 2, w / 2, h / 2)?;
        let v = self.planes[2].crop(x / 2, y / 2, w / 2, h / 2)?;
        Ok(VideoFrame {
            planes: [luma, u, v],
            chroma_format: self.chroma_format,
            container_bit_depth: self.container_bit_depth,
            effective_bit_depth: self.effective_bit_depth,
        })
    }

    pub fn same_format(&self, other: &VideoFrame) -> bool {
        self.width() == other.width()
            && self.height() == other.height()
            && self.container_bit_depth == other.container_bit_depth
            && self.effective_bit_depth == other.effective_bit_depth
    }

    /// Number of stored samples over all three planes.
    pub fn sample_count(&self) -> usize {
        self.planes.iter().map(|p| p.data.len()).sum()
    }
}

/// Frames per second as a reduced-or-not rational number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FrameRate {
    pub num: u32,
    pub den: u32,
}

impl FrameRate {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidFrame(format!("frame rate {num}/{den} must be positive")));
        }
        Ok(FrameRate { num, den })
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }

    /// Frames in one second, rounded up.
    pub fn frames_per_second_ceil(self) -> usize {
        (self.num as usize).div_ceil(self.den as usize)
    }

    /// Parses `30`, `30:1` or `30000/1001`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::MalformedHeader(format!("bad frame rate {s:?}"));
        let (n, d) = match s.split_once([':', '/']) {
            Some((n, d)) => (n.parse().map_err(|_| bad())?, d.parse().map_err(|_| bad())?),
            None => (s.parse().map_err(|_| bad())?, 1),
        };
        FrameRate::new(n, d).map_err(|_| bad())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VideoSequence {
    frames: Vec<VideoFrame>,
    frame_rate: FrameRate,
}

impl VideoSequence {
    /// All frames must share geometry and both bit depths. An empty frame
    /// list is allowed here; writers reject it.
    pub fn new(frames: Vec<VideoFrame>, frame_rate: FrameRate) -> Result<Self> {
        if let Some(first) = frames.first() {
            for (i, f) in frames.iter().enumerate().skip(1) {
                if !first.same_format(f) {
                    return Err(Error::GeometryMismatch(format!(
                        "frame {i} is {}x{} @{}/{} bits, frame 0 is {}x{} @{}/{} bits",
                        f.width(),
                        f.height(),
                        f.effective_bit_depth(),
                        f.container_bit_depth(),
                        first.width(),
                        first.height(),
                        first.effective_bit_depth(),
                        first.container_bit_depth()
                    )));
                }
            }
        }
        Ok(VideoSequence { frames, frame_rate })
    }

    pub fn frames(&self) -> &[VideoFrame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<VideoFrame> {
        self.frames
    }

    pub fn frame_rate(&self) -> FrameRate {
        self.frame_rate
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn first(&self) -> Option<&VideoFrame> {
        self.frames.first()
    }

    pub fn width(&self) -> usize {
        self.frames.first().map_or(0, VideoFrame::width)
    }

    pub fn height(&self) -> usize {
        self.frames.first().map_or(0, VideoFrame::height)
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.frames.len() as f64 / self.frame_rate.as_f64()
    }

    /// Frames in `range`, sharing this sequence's frame rate.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<VideoSequence> {
        if range.start > range.end || range.end > self.frames.len() {
            return Err(Error::GeometryMismatch(format!(
                "frame range {range:?} outside 0..{}",
                self.frames.len()
            )));
        }
        Ok(VideoSequence { frames: self.frames[range].to_vec(), frame_rate: self.frame_rate })
    }

    /// Applies `f` to every frame, keeping the frame rate.
    pub fn try_map(&self, f: impl Fn(&VideoFrame) -> Result<VideoFrame>) -> Result<VideoSequence> {
        let frames = self.frames.iter().map(f).collect::<Result<Vec<_>>>()?;
        VideoSequence::new(frames, self.frame_rate)
    }
}
