//! Headerless planar YUV with a `key=value` sidecar describing geometry.
//!
//! ```text
//! width=1920
//! height=1080
//! fps=50
//! bit_depth=10
//! ```

use std::fs;
use std::path::Path;

use super::{FrameRate, Plane, VideoFrame, VideoSequence};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RawVideoInfo {
    pub width: usize,
    pub height: usize,
    pub frame_rate: FrameRate,
    pub bit_depth: u8,
    pub effective_bit_depth: u8,
}

impl RawVideoInfo {
    pub fn of(seq: &VideoSequence) -> Result<Self> {
        let f = seq.first().ok_or(Error::EmptySequence)?;
        Ok(RawVideoInfo {
            width: f.width(),
            height: f.height(),
            frame_rate: seq.frame_rate(),
            bit_depth: f.container_bit_depth(),
            effective_bit_depth: f.effective_bit_depth(),
        })
    }

    pub fn frame_bytes(&self) -> usize {
        let (cw, ch) = super::ChromaFormat::Yuv420.chroma_dims(self.width, self.height);
        let bps = if self.bit_depth == 8 { 1 } else { 2 };
        (self.width * self.height + 2 * cw * ch) * bps
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut width = None;
        let mut height = None;
        let mut fps = None;
        let mut bit_depth = None;
        let mut ebd = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::MalformedHeader(format!("sidecar line without '=': {line:?}")))?;
            let (k, v) = (k.trim(), v.trim());
            let num = |v: &str| v.parse::<usize>().map_err(|_| Error::MalformedHeader(format!("bad {k} value {v:?}")));
            match k {
                "width" => width = Some(num(v)?),
                "height" => height = Some(num(v)?),
                "fps" | "frame_rate" => fps = Some(FrameRate::parse(v)?),
                "bit_depth" | "bitdepth" => bit_depth = Some(num(v)? as u8),
                "effective_bit_depth" => ebd = Some(num(v)? as u8),
                _ => log::debug!("ignoring sidecar key {k}"),
            }
        }
        let missing = |k: &str| Error::MalformedHeader(format!("sidecar missing {k}"));
        let bit_depth = bit_depth.unwrap_or(8);
        if !matches!(bit_depth, 8 | 10) {
            return Err(Error::MalformedHeader(format!("unsupported bit depth {bit_depth}")));
        }
        Ok(RawVideoInfo {
            width: width.ok_or_else(|| missing("width"))?,
            height: height.ok_or_else(|| missing("height"))?,
            frame_rate: fps.ok_or_else(|| missing("fps"))?,
            bit_depth,
            effective_bit_depth: ebd.unwrap_or(bit_depth),
        })
    }

    pub fn to_sidecar(&self) -> String {
        let mut s = format!(
            "width={}\nheight={}\nfps={}/{}\nbit_depth={}\n",
            self.width, self.height, self.frame_rate.num, self.frame_rate.den, self.bit_depth
        );
        if self.effective_bit_depth != self.bit_depth {
            s.push_str(&format!("effective_bit_depth={}\n", self.effective_bit_depth));
        }
        s
    }
}

pub fn read_sidecar(path: impl AsRef<Path>) -> Result<RawVideoInfo> {
    let path = path.as_ref();
    RawVideoInfo::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub(crate) fn decode_raw(bytes: &[u8], info: &RawVideoInfo) -> Result<VideoSequence> {
    let frame_bytes = info.frame_bytes();
    if !bytes.len().is_multiple_of(frame_bytes) {
        return Err(Error::TruncatedFrame { frame: bytes.len() / frame_bytes });
    }
    let (cw, ch) = super::ChromaFormat::Yuv420.chroma_dims(info.width, info.height);
    let sizes = [(info.width, info.height), (cw, ch), (cw, ch)];
    let frames = bytes
        .chunks_exact(frame_bytes)
        .map(|chunk| {
            let mut off = 0;
            let planes = sizes.map(|(w, h)| {
                let n = w * h;
                let data: Vec<u16> = if info.bit_depth == 8 {
                    chunk[off..off + n].iter().map(|&b| u16::from(b)).collect()
                } else {
                    chunk[off..off + 2 * n].chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect()
                };
                off += if info.bit_depth == 8 { n } else { 2 * n };
                Plane { width: w, height: h, data }
            });
            VideoFrame::new(planes, info.bit_depth, info.effective_bit_depth)
        })
        .collect::<Result<Vec<_>>>()?;
    VideoSequence::new(frames, info.frame_rate)
}

pub fn read_raw(path: impl AsRef<Path>, info: &RawVideoInfo) -> Result<VideoSequence> {
    let path = path.as_ref();
    decode_raw(&fs::read(path).map_err(|e| Error::io(path, e))?, info)
}

pub(crate) fn encode_raw(seq: &VideoSequence) -> Vec<u8> {
    let mut out = Vec::new();
    for f in seq.frames() {
        super::y4m::write_planes(&mut out, f).expect("writing to a Vec cannot fail");
    }
    out
}

/// Writes the samples to `path` and, when `sidecar` is given, the matching
/// metadata file.
pub fn write_raw(seq: &VideoSequence, path: impl AsRef<Path>, sidecar: Option<&Path>) -> Result<()> {
    let path = path.as_ref();
    let info = RawVideoInfo::of(seq)?;
    fs::write(path, encode_raw(seq)).map_err(|e| Error::io(path, e))?;
    if let Some(sc) = sidecar {
        fs::write(sc, info.to_sidecar()).map_err(|e| Error::io(sc, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_parse_and_print() {
        let info = RawVideoInfo::parse("# clip\nwidth=64\nheight=32\nfps=30000/1001\nbit_depth=10\n").unwrap();
        assert_eq!(info.width, 64);
        assert_eq!(info.frame_rate, FrameRate { num: 30000, den: 1001 });
        assert_eq!(info.effective_bit_depth, 10);
        assert_eq!(RawVideoInfo::parse(&info.to_sidecar()).unwrap(), info);
        assert!(RawVideoInfo::parse("width=4\nfps=30").is_err());
    }

    #[test]
    fn raw_roundtrip_via_files() {
        let seq = VideoSequence::new(
            vec![VideoFrame::filled(8, 6, 10, [700, 1, 1023]).unwrap(); 2],
            FrameRate::new(25, 1).unwrap(),
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let yuv = dir.path().join("a.yuv");
        let meta = dir.path().join("a.txt");
        write_raw(&seq, &yuv, Some(&meta)).unwrap();
        let info = read_sidecar(&meta).unwrap();
        assert_eq!(read_raw(&yuv, &info).unwrap(), seq);
    }

    #[test]
    fn partial_frame_is_truncation() {
        let info = RawVideoInfo::parse("width=4\nheight=4\nfps=1").unwrap();
        assert!(matches!(decode_raw(&[0u8; 30], &info), Err(Error::TruncatedFrame { frame: 1 })));
    }
}
