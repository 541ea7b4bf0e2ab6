//! Video-parameter adaptation: effective-bit-depth shifting, Lanczos3
//! resolution halving, and their non-learned inverses.

mod lanczos;

pub use lanczos::{filter_taps, lanczos3_weight, spatial_down, spatial_up, Direction, Taps};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::frames::{Plane, VideoFrame, VideoSequence};

/// The five coding modes. The discriminant is the one-byte flag written to
/// the bitstream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum AdaptationMode {
    /// Host codec only.
    M0 = 0,
    /// Effective bit depth reduced by one bit.
    M1 = 1,
    /// Resolution halved.
    M2 = 2,
    /// Resolution halved and effective bit depth reduced by one bit.
    M3 = 3,
    /// Format unchanged, decoder-side enhancement only.
    M4 = 4,
}

impl AdaptationMode {
    pub const ALL: [AdaptationMode; 5] =
        [AdaptationMode::M0, AdaptationMode::M1, AdaptationMode::M2, AdaptationMode::M3, AdaptationMode::M4];

    /// Modes the encoder compares against the unadapted anchor.
    pub const CANDIDATES: [AdaptationMode; 4] =
        [AdaptationMode::M1, AdaptationMode::M2, AdaptationMode::M3, AdaptationMode::M4];

    pub fn flag(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_flag(flag: u8) -> Result<Self> {
        AdaptationMode::ALL.get(usize::from(flag)).copied().ok_or(Error::InvalidModeFlag(flag))
    }

    pub fn resample_spec(self) -> ResampleSpec {
        ResampleSpec::for_mode(self)
    }

    /// True for every mode that has a decoder-side network.
    pub fn has_restoration(self) -> bool {
        self != AdaptationMode::M0
    }
}

impl fmt::Display for AdaptationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "M{}", self.flag())
    }
}

impl FromStr for AdaptationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s.trim().trim_start_matches(['M', 'm']);
        digits
            .parse::<u8>()
            .ok()
            .and_then(|d| AdaptationMode::from_flag(d).ok())
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?} (expected M0..M4)")))
    }
}

/// What a mode does to the signal format.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ResampleSpec {
    pub spatial_factor: usize,
    pub ebd_shift: u8,
}

impl ResampleSpec {
    pub fn for_mode(mode: AdaptationMode) -> Self {
        let (spatial_factor, ebd_shift) = match mode {
            AdaptationMode::M0 | AdaptationMode::M4 => (1, 0),
            AdaptationMode::M1 => (1, 1),
            AdaptationMode::M2 => (2, 0),
            AdaptationMode::M3 => (2, 1),
        };
        ResampleSpec { spatial_factor, ebd_shift }
    }

    /// Luma size of an adapted frame whose original is `width`x`height`.
    pub fn adapted_dims(&self, width: usize, height: usize) -> (usize, usize) {
        (width / self.spatial_factor, height / self.spatial_factor)
    }
}

fn map_planes(frame: &VideoFrame, f: impl Fn(u16) -> u16) -> [Plane; 3] {
    let [y, u, v] = frame.planes();
    [y.map(&f), u.map(&f), v.map(&f)]
}

/// Right-shifts every sample of all three planes, lowering the effective bit
/// depth by `shift_bits`.
pub fn ebd_down(frame: &VideoFrame, shift_bits: u8) -> Result<VideoFrame> {
    let ebd = frame.effective_bit_depth();
    if shift_bits >= ebd {
        return Err(Error::InvalidShift(format!(
            "shifting {shift_bits} bits would leave effective bit depth {ebd} below 1"
        )));
    }
    let planes = map_planes(frame, |v| v >> shift_bits);
    Ok(VideoFrame::from_parts_unchecked(planes, frame.container_bit_depth(), ebd - shift_bits))
}

/// Left-shifts every sample, raising the effective bit depth.
pub fn ebd_up(frame: &VideoFrame, shift_bits: u8) -> Result<VideoFrame> {
    let ebd = frame.effective_bit_depth() + shift_bits;
    if ebd > frame.container_bit_depth() {
        return Err(Error::InvalidShift(format!(
            "shifting up {shift_bits} bits would exceed container depth {}",
            frame.container_bit_depth()
        )));
    }
    let planes = map_planes(frame, |v| v << shift_bits);
    Ok(VideoFrame::from_parts_unchecked(planes, frame.container_bit_depth(), ebd))
}

/// Encoder-side format adaptation. M3 halves resolution first, then drops a
/// bit.
pub fn apply_mode(frame: &VideoFrame, mode: AdaptationMode) -> Result<VideoFrame> {
    let spec = mode.resample_spec();
    let mut out = if spec.spatial_factor == 2 { spatial_down(frame)? } else { frame.clone() };
    if spec.ebd_shift > 0 {
        out = ebd_down(&out, spec.ebd_shift)?;
    }
    Ok(out)
}

/// Decoder-side baseline inverse of [`apply_mode`]: bit shift back up, then
/// Lanczos3 upsampling.
pub fn invert_mode_baseline(frame: &VideoFrame, mode: AdaptationMode) -> Result<VideoFrame> {
    let spec = mode.resample_spec();
    let mut out = if spec.ebd_shift > 0 { ebd_up(frame, spec.ebd_shift)? } else { frame.clone() };
    if spec.spatial_factor == 2 {
        out = spatial_up(&out)?;
    }
    Ok(out)
}

pub fn apply_mode_seq(seq: &VideoSequence, mode: AdaptationMode) -> Result<VideoSequence> {
    seq.try_map(|f| apply_mode(f, mode))
}

pub fn invert_mode_baseline_seq(seq: &VideoSequence, mode: AdaptationMode) -> Result<VideoSequence> {
    seq.try_map(|f| invert_mode_baseline(f, mode))
}
