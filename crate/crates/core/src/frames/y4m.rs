//! YUV4MPEG2 reader and writer.
//!
//! 8-bit streams use one byte per sample; `C420p10` streams use little-endian
//! 16-bit samples. When a frame's effective bit depth is below its container
//! depth the writer adds an `XEBD=<bits>` extension tag so that a roundtrip
//! restores the effective depth too. Readers that do not know the tag ignore
//! it, as the format requires.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{FrameRate, Plane, VideoFrame, VideoSequence};
use crate::error::{Error, Result};

const MAGIC: &str = "YUV4MPEG2";
pub const FRAME_MARKER: &[u8] = b"FRAME\n";

struct Header {
    width: usize,
    height: usize,
    frame_rate: FrameRate,
    bit_depth: u8,
    effective_bit_depth: Option<u8>,
}

fn parse_header(line: &str) -> Result<Header> {
    let mut tokens = line.split_ascii_whitespace();
    let magic = tokens.next().unwrap_or("");
    if magic != MAGIC {
        return Err(Error::MalformedMagic(magic.to_string()));
    }
    let mut width = None;
    let mut height = None;
    let mut frame_rate = None;
    let mut bit_depth = 8;
    let mut ebd = None;
    for tok in tokens {
        let (tag, val) = tok.split_at(1);
        match tag {
            "W" => width = Some(val.parse::<usize>().map_err(|_| Error::MalformedHeader(format!("bad width {val:?}")))?),
            "H" => height = Some(val.parse::<usize>().map_err(|_| Error::MalformedHeader(format!("bad height {val:?}")))?),
            "F" => frame_rate = Some(FrameRate::parse(val)?),
            "C" => {
                bit_depth = match val {
                    "420" | "420jpeg" | "420paldv" | "420mpeg2" => 8,
                    "420p10" => 10,
                    other => return Err(Error::UnsupportedChroma(other.to_string())),
                }
            }
            "I" => {
                if val != "p" && val != "?" {
                    return Err(Error::MalformedHeader(format!("interlaced streams unsupported (I{val})")));
                }
            }
            "X" => {
                if let Some(bits) = val.strip_prefix("EBD=") {
                    ebd = Some(bits.parse::<u8>().map_err(|_| Error::MalformedHeader(format!("bad XEBD {bits:?}")))?);
                }
            }
            _ => {}
        }
    }
    let width = width.ok_or_else(|| Error::MalformedHeader("missing W tag".into()))?;
    let height = height.ok_or_else(|| Error::MalformedHeader("missing H tag".into()))?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader(format!("empty frame size {width}x{height}")));
    }
    let frame_rate = frame_rate.ok_or_else(|| Error::MalformedHeader("missing F tag".into()))?;
    Ok(Header { width, height, frame_rate, bit_depth, effective_bit_depth: ebd })
}

fn read_line<R: BufRead>(r: &mut R, limit: usize) -> std::io::Result<Option<Vec<u8>>> {
    let mut buf = Vec::new();
    let n = r.take(limit as u64).read_until(b'\n', &mut buf)?;
    if n == 0 {
        return Ok(None);
    }
    Ok(Some(buf))
}

fn decode_plane(bytes: &[u8], width: usize, height: usize, bit_depth: u8) -> Plane {
    let data = if bit_depth == 8 {
        bytes.iter().map(|&b| u16::from(b)).collect()
    } else {
        bytes.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]])).collect()
    };
    Plane { width, height, data }
}

/// Reads a whole stream from any buffered reader.
pub fn read_y4m_from<R: BufRead>(mut r: R, path_hint: &Path) -> Result<VideoSequence> {
    let io = |e| Error::io(path_hint, e);
    let header_line = read_line(&mut r, 4096).map_err(io)?.unwrap_or_default();
    if !header_line.ends_with(b"\n") {
        let shown = String::from_utf8_lossy(&header_line);
        if !shown.starts_with(MAGIC) {
            return Err(Error::MalformedMagic(shown.split_ascii_whitespace().next().unwrap_or("").to_string()));
        }
        return Err(Error::MalformedHeader("unterminated header line".into()));
    }
    let header_text = std::str::from_utf8(&header_line[..header_line.len() - 1])
        .map_err(|_| Error::MalformedHeader("header is not ASCII".into()))?;
    let h = parse_header(header_text)?;
    let ebd = h.effective_bit_depth.unwrap_or(h.bit_depth);

    let (cw, ch) = super::ChromaFormat::Yuv420.chroma_dims(h.width, h.height);
    let bytes_per_sample = if h.bit_depth == 8 { 1 } else { 2 };
    let plane_bytes = [h.width * h.height, cw * ch, cw * ch].map(|n| n * bytes_per_sample);
    let frame_bytes: usize = plane_bytes.iter().sum();

    let mut frames = Vec::new();
    let mut payload = vec![0u8; frame_bytes];
    loop {
        let Some(marker) = read_line(&mut r, 1024).map_err(io)? else { break };
        if !marker.starts_with(b"FRAME") || !marker.ends_with(b"\n") {
            return Err(Error::TruncatedFrame { frame: frames.len() });
        }
        if let Err(e) = r.read_exact(&mut payload) {
            return Err(if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::TruncatedFrame { frame: frames.len() }
            } else {
                io(e)
            });
        }
        let (yb, rest) = payload.split_at(plane_bytes[0]);
        let (ub, vb) = rest.split_at(plane_bytes[1]);
        let planes = [
            decode_plane(yb, h.width, h.height, h.bit_depth),
            decode_plane(ub, cw, ch, h.bit_depth),
            decode_plane(vb, cw, ch, h.bit_depth),
        ];
        frames.push(VideoFrame::new(planes, h.bit_depth, ebd)?);
    }
    VideoSequence::new(frames, h.frame_rate)
}

pub fn read_y4m(path: impl AsRef<Path>) -> Result<VideoSequence> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_y4m_from(BufReader::new(file), path)
}

pub(crate) fn header_line(seq: &VideoSequence) -> Result<String> {
    let first = seq.first().ok_or(Error::EmptySequence)?;
    let chroma = match first.container_bit_depth() {
        8 => "C420jpeg",
        _ => "C420p10",
    };
    let fps = seq.frame_rate();
    let mut line = format!(
        "{MAGIC} W{} H{} F{}:{} Ip A1:1 {chroma}",
        first.width(),
        first.height(),
        fps.num,
        fps.den
    );
    if first.effective_bit_depth() != first.container_bit_depth() {
        line.push_str(&format!(" XEBD={}", first.effective_bit_depth()));
    }
    line.push('\n');
    Ok(line)
}

pub(crate) fn write_planes<W: Write>(w: &mut W, frame: &VideoFrame) -> std::io::Result<()> {
    for plane in frame.planes() {
        if frame.container_bit_depth() == 8 {
            let bytes: Vec<u8> = plane.data().iter().map(|&v| v as u8).collect();
            w.write_all(&bytes)?;
        } else {
            let mut bytes = Vec::with_capacity(plane.data().len() * 2);
            for &v in plane.data() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&bytes)?;
        }
    }
    Ok(())
}

pub fn write_y4m_to<W: Write>(mut w: W, seq: &VideoSequence, path_hint: &Path) -> Result<()> {
    let header = header_line(seq)?;
    let io = |e| Error::io(path_hint, e);
    w.write_all(header.as_bytes()).map_err(io)?;
    for frame in seq.frames() {
        w.write_all(FRAME_MARKER).map_err(io)?;
        write_planes(&mut w, frame).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_y4m(seq: &VideoSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_y4m_to(BufWriter::new(file), seq, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(bytes: &[u8]) -> Result<VideoSequence> {
        read_y4m_from(Cursor::new(bytes), Path::new("<mem>"))
    }

    fn encode(seq: &VideoSequence) -> Vec<u8> {
        let mut out = Vec::new();
        write_y4m_to(&mut out, seq, Path::new("<mem>")).unwrap();
        out
    }

    fn ramp_frame(w: usize, h: usize, depth: u8, ebd: u8, phase: u16) -> VideoFrame {
        let max = (1u32 << ebd) as u16;
        let mk = |pw: usize, ph: usize, k: u16| {
            let data = (0..pw * ph).map(|i| ((i as u16).wrapping_mul(7).wrapping_add(k + phase)) % max).collect();
            Plane::new(pw, ph, data).unwrap()
        };
        let (cw, ch) = (w.div_ceil(2), h.div_ceil(2));
        VideoFrame::new([mk(w, h, 0), mk(cw, ch, 1), mk(cw, ch, 2)], depth, ebd).unwrap()
    }

    #[test]
    fn two_frame_8bit_header_echo() {
        let mut bytes = b"YUV4MPEG2 W64 H64 F25:1 Ip A1:1 C420\n".to_vec();
        for _ in 0..2 {
            bytes.extend_from_slice(b"FRAME\n");
            bytes.extend(std::iter::repeat_n(16u8, 64 * 64 * 3 / 2));
        }
        let seq = parse(&bytes).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq.width(), 64);
        assert_eq!(seq.height(), 64);
        assert_eq!(seq.frame_rate(), FrameRate { num: 25, den: 1 });
        assert_eq!(seq.frames()[0].effective_bit_depth(), 8);
    }

    #[test]
    fn wrong_magic() {
        let err = parse(b"YUV4MPEG3 W2 H2 F1:1\n").unwrap_err();
        assert!(matches!(err, Error::MalformedMagic(ref m) if m == "YUV4MPEG3"), "{err:?}");
    }

    #[test]
    fn unsupported_chroma() {
        let err = parse(b"YUV4MPEG2 W2 H2 F1:1 C444\n").unwrap_err();
        assert!(matches!(err, Error::UnsupportedChroma(_)));
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = b"YUV4MPEG2 W4 H4 F1:1 C420\nFRAME\n".to_vec();
        bytes.extend_from_slice(&[0u8; 10]);
        assert!(matches!(parse(&bytes).unwrap_err(), Error::TruncatedFrame { frame: 0 }));
    }

    #[test]
    fn ten_bit_constant_roundtrip() {
        let seq = VideoSequence::new(
            vec![VideoFrame::filled(16, 8, 10, [512, 512, 512]).unwrap()],
            FrameRate::new(30, 1).unwrap(),
        )
        .unwrap();
        let back = parse(&encode(&seq)).unwrap();
        assert!(back.frames()[0].y().data().iter().all(|&v| v == 512));
        assert_eq!(back.frames()[0].container_bit_depth(), 10);
    }

    #[test]
    fn ten_bit_size_arithmetic() {
        let frames = (0..3).map(|i| ramp_frame(32, 16, 10, 10, i)).collect();
        let seq = VideoSequence::new(frames, FrameRate::new(30, 1).unwrap()).unwrap();
        let bytes = encode(&seq);
        let header = header_line(&seq).unwrap().len();
        assert_eq!(bytes.len(), header + 3 * (FRAME_MARKER.len() + 32 * 16 * 3 / 2 * 2));
    }

    #[test]
    fn effective_depth_survives_roundtrip() {
        let frames = (0..2).map(|i| ramp_frame(6, 6, 10, 9, i)).collect();
        let seq = VideoSequence::new(frames, FrameRate::new(50, 1).unwrap()).unwrap();
        let back = parse(&encode(&seq)).unwrap();
        assert_eq!(back, seq);
    }

    #[test]
    fn odd_dimensions_roundtrip() {
        let frames = (0..2).map(|i| ramp_frame(7, 5, 8, 8, i)).collect();
        let seq = VideoSequence::new(frames, FrameRate::new(24000, 1001).unwrap()).unwrap();
        assert_eq!(parse(&encode(&seq)).unwrap(), seq);
    }

    #[test]
    fn writing_empty_sequence_fails() {
        let seq = VideoSequence::new(vec![], FrameRate::new(30, 1).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let err = write_y4m(&seq, dir.path().join("x.y4m")).unwrap_err();
        assert!(matches!(err, Error::EmptySequence));
    }
}
