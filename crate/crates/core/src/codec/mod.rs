//! Host codecs wrapped by the adaptation pipeline.
//!
//! [`ToyCodec`] is a self-contained intra-only DCT codec with monotone
//! rate-distortion behaviour, good enough to exercise every pipeline path.
//! [`ExternalCodec`] drives real encoders and decoders as subprocesses.

mod bits;
mod external;
mod toy;

pub use bits::{BitReader, BitWriter};
pub use external::{CommandTemplate, ExternalCodec, IoFormat};
pub use toy::{qstep, toy_decode, toy_encode, ToyCodec, TOY_HEADER_LEN};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{FrameRate, VideoSequence};

/// Quantization parameter in `[0, 51]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "u8")]
pub struct QpValue(u8);

impl QpValue {
    pub const MAX: u8 = 51;

    pub fn new(qp: i32) -> Result<Self> {
        if (0..=i32::from(Self::MAX)).contains(&qp) {
            Ok(QpValue(qp as u8))
        } else {
            Err(Error::QpOutOfRange(qp))
        }
    }

    /// Saturates into range instead of failing.
    pub fn clamped(qp: i32) -> Self {
        QpValue(qp.clamp(0, i32::from(Self::MAX)) as u8)
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<i32> for QpValue {
    type Error = Error;

    fn try_from(v: i32) -> Result<Self> {
        QpValue::new(v)
    }
}

impl From<QpValue> for u8 {
    fn from(q: QpValue) -> u8 {
        q.0
    }
}

impl fmt::Display for QpValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// The four base QPs used for every rate sweep.
pub fn standard_qps() -> [QpValue; 4] {
    [22, 27, 32, 37].map(QpValue)
}

/// Format of the sequence a decoder is expected to produce. Codecs whose
/// bitstreams do not carry this (raw-output external decoders) rely on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamInfo {
    pub width: usize,
    pub height: usize,
    pub frame_rate: FrameRate,
    pub container_bit_depth: u8,
    pub effective_bit_depth: u8,
    pub frame_count: usize,
}

impl StreamInfo {
    pub fn of(seq: &VideoSequence) -> Result<Self> {
        let f = seq.first().ok_or(Error::EmptySequence)?;
        Ok(StreamInfo {
            width: f.width(),
            height: f.height(),
            frame_rate: seq.frame_rate(),
            container_bit_depth: f.container_bit_depth(),
            effective_bit_depth: f.effective_bit_depth(),
            frame_count: seq.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedStream {
    pub payload: Vec<u8>,
    pub bits: u64,
}

/// An encoder/decoder pair.
///
/// `decode(encode(s, qp))` must reproduce the geometry and both bit depths of
/// `s`. For fixed content the bit count must not increase with QP.
pub trait HostCodec: Send + Sync {
    fn name(&self) -> &str;

    fn encode(&self, seq: &VideoSequence, qp: QpValue) -> Result<EncodedStream>;

    fn decode(&self, payload: &[u8], info: &StreamInfo) -> Result<VideoSequence>;
}

impl<C: HostCodec + ?Sized> HostCodec for &C {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn encode(&self, seq: &VideoSequence, qp: QpValue) -> Result<EncodedStream> {
        (**self).encode(seq, qp)
    }

    fn decode(&self, payload: &[u8], info: &StreamInfo) -> Result<VideoSequence> {
        (**self).decode(payload, info)
    }
}

impl<C: HostCodec + ?Sized> HostCodec for Box<C> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn encode(&self, seq: &VideoSequence, qp: QpValue) -> Result<EncodedStream> {
        (**self).encode(seq, qp)
    }

    fn decode(&self, payload: &[u8], info: &StreamInfo) -> Result<VideoSequence> {
        (**self).decode(payload, info)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qp_range() {
        assert_eq!(QpValue::new(0).unwrap().get(), 0);
        assert_eq!(QpValue::new(51).unwrap().get(), 51);
        assert!(matches!(QpValue::new(52), Err(Error::QpOutOfRange(52))));
        assert!(QpValue::new(-1).is_err());
        assert_eq!(QpValue::clamped(-7).get(), 0);
        assert_eq!(QpValue::clamped(60).get(), 51);
    }
}
