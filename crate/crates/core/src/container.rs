//! Bitstream container: a fixed header, a segment table carrying each
//! segment's mode flag and QPs, then the host-codec payloads back to back.
//! All multi-byte fields are little-endian. See FORMAT.md for a worked example.

use crate::adapt::AdaptationMode;
use crate::codec::QpValue;
use crate::error::{Error, Result};
use crate::frames::FrameRate;

pub const MAGIC: [u8; 4] = *b"VST3";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 32;
pub const SEGMENT_ENTRY_LEN: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContainerHeader {
    pub width: u32,
    pub height: u32,
    pub frame_rate: FrameRate,
    pub container_bit_depth: u8,
    /// Effective bit depth of the original (unadapted) source.
    pub effective_bit_depth: u8,
    pub frame_count: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub mode: AdaptationMode,
    pub qp_base: QpValue,
    pub qp_effective: QpValue,
    pub frame_count: u32,
    pub payload: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Container {
    header: ContainerHeader,
    segments: Vec<Segment>,
}

impl Container {
    pub fn new(header: ContainerHeader, segments: Vec<Segment>) -> Result<Self> {
        if !matches!(header.container_bit_depth, 8 | 10) {
            return Err(Error::InvalidContainer(format!("container bit depth {}", header.container_bit_depth)));
        }
        if header.effective_bit_depth == 0 || header.effective_bit_depth > header.container_bit_depth {
            return Err(Error::InvalidContainer(format!("effective bit depth {}", header.effective_bit_depth)));
        }
        if header.width == 0 || header.height == 0 {
            return Err(Error::InvalidContainer("zero frame size".into()));
        }
        if segments.is_empty() {
            return Err(Error::InvalidContainer("no segments".into()));
        }
        if let Some(i) = segments.iter().position(|s| s.frame_count == 0) {
            return Err(Error::InvalidContainer(format!("segment {i} has no frames")));
        }
        if let Some(i) = segments.iter().position(|s| u32::try_from(s.payload.len()).is_err()) {
            return Err(Error::InvalidContainer(format!("segment {i} payload exceeds 4 GiB")));
        }
        let sum: u64 = segments.iter().map(|s| u64::from(s.frame_count)).sum();
        if sum != u64::from(header.frame_count) {
            return Err(Error::SegmentSumMismatch { sum, expected: u64::from(header.frame_count) });
        }
        Ok(Container { header, segments })
    }

    pub fn header(&self) -> &ContainerHeader {
        &self.header
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn into_parts(self) -> (ContainerHeader, Vec<Segment>) {
        (self.header, self.segments)
    }

    /// Header plus segment table bytes.
    pub fn side_info_len(&self) -> usize {
        HEADER_LEN + SEGMENT_ENTRY_LEN * self.segments.len()
    }

    pub fn total_len(&self) -> usize {
        self.side_info_len() + self.segments.iter().map(|s| s.payload.len()).sum::<usize>()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(self.total_len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&[VERSION, h.container_bit_depth, h.effective_bit_depth, 0]);
        for v in [h.width, h.height, h.frame_rate.num, h.frame_rate.den, h.frame_count, self.segments.len() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for s in &self.segments {
            out.extend_from_slice(&[s.mode.flag(), s.qp_base.get(), s.qp_effective.get(), 0]);
            out.extend_from_slice(&s.frame_count.to_le_bytes());
            out.extend_from_slice(&(s.payload.len() as u32).to_le_bytes());
        }
        for s in &self.segments {
            out.extend_from_slice(&s.payload);
        }
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(Error::BadMagic(bytes[..4].try_into().expect("4 bytes")));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::Truncated { section: "header", offset: bytes.len() });
        }
        if bytes[4] != VERSION {
            return Err(Error::VersionMismatch(bytes[4]));
        }
        if bytes[7] != 0 {
            return Err(Error::InvalidContainer(format!("reserved header byte 0x{:02x}", bytes[7])));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let frame_rate = FrameRate::new(u32_at(16), u32_at(20)).map_err(|e| Error::InvalidContainer(e.to_string()))?;
        let header = ContainerHeader {
            width: u32_at(8),
            height: u32_at(12),
            frame_rate,
            container_bit_depth: bytes[5],
            effective_bit_depth: bytes[6],
            frame_count: u32_at(24),
        };
        let count = u32_at(28) as usize;
        let table_end = count
            .checked_mul(SEGMENT_ENTRY_LEN)
            .and_then(|n| n.checked_add(HEADER_LEN))
            .ok_or_else(|| Error::InvalidContainer(format!("segment count {count}")))?;
        if bytes.len() < table_end {
            return Err(Error::Truncated { section: "segment table", offset: bytes.len() });
        }
        let mut entries = Vec::with_capacity(count);
        for i in 0..count {
            let o = HEADER_LEN + i * SEGMENT_ENTRY_LEN;
            let mode = AdaptationMode::from_flag(bytes[o])?;
            let qp = |b: u8| QpValue::new(i32::from(b)).map_err(|_| Error::InvalidContainer(format!("segment {i} QP {b}")));
            let (qp_base, qp_effective) = (qp(bytes[o + 1])?, qp(bytes[o + 2])?);
            if bytes[o + 3] != 0 {
                return Err(Error::InvalidContainer(format!("reserved byte in segment {i}")));
            }
            entries.push((mode, qp_base, qp_effective, u32_at(o + 4), u32_at(o + 8) as usize));
        }
        let mut offset = table_end;
        let mut segments = Vec::with_capacity(count);
        for (i, (mode, qp_base, qp_effective, frame_count, len)) in entries.into_iter().enumerate() {
            if bytes.len() - offset < len {
                return Err(Error::TruncatedPayload { segment: i, offset: bytes.len() });
            }
            segments.push(Segment { mode, qp_base, qp_effective, frame_count, payload: bytes[offset..offset + len].to_vec() });
            offset += len;
        }
        if offset != bytes.len() {
            return Err(Error::InvalidContainer(format!("{} trailing bytes", bytes.len() - offset)));
        }
        Container::new(header, segments)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(frames: u32) -> ContainerHeader {
        ContainerHeader {
            width: 128,
            height: 64,
            frame_rate: FrameRate::new(30, 1).unwrap(),
            container_bit_depth: 10,
            effective_bit_depth: 10,
            frame_count: frames,
        }
    }

    fn seg(mode: AdaptationMode, frames: u32, payload: &[u8]) -> Segment {
        Segment {
            mode,
            qp_base: QpValue::new(32).unwrap(),
            qp_effective: QpValue::new(26).unwrap(),
            frame_count: frames,
            payload: payload.to_vec(),
        }
    }

    #[test]
    fn flag_bytes_in_table() {
        let c = Container::new(header(4), vec![seg(AdaptationMode::M0, 4, b"abc")]).unwrap();
        let b = c.to_bytes();
        assert_eq!(b[HEADER_LEN], 0x00);
        let c = Container::new(header(9), vec![seg(AdaptationMode::M2, 5, b"xy"), seg(AdaptationMode::M4, 4, b"z")]).unwrap();
        let b = c.to_bytes();
        assert_eq!(b[HEADER_LEN], 0x02);
        assert_eq!(b[HEADER_LEN + SEGMENT_ENTRY_LEN], 0x04);
        assert_eq!(b.len(), HEADER_LEN + 2 * SEGMENT_ENTRY_LEN + 3);
        assert_eq!(b.len(), c.total_len());
        assert_eq!(Container::parse(&b).unwrap(), c);
    }

    #[test]
    fn rejects_bad_flag_and_magic() {
        let c = Container::new(header(4), vec![seg(AdaptationMode::M1, 4, b"abc")]).unwrap();
        let good = c.to_bytes();
        let mut b = good.clone();
        b[HEADER_LEN] = 0x07;
        assert!(matches!(Container::parse(&b), Err(Error::InvalidModeFlag(7))));
        for i in 0..4 {
            let mut b = good.clone();
            b[i] ^= 0x20;
            assert!(matches!(Container::parse(&b), Err(Error::BadMagic(_))));
        }
        let mut b = good;
        b[4] = 2;
        assert!(matches!(Container::parse(&b), Err(Error::VersionMismatch(2))));
    }

    #[test]
    fn every_truncation_fails() {
        let c = Container::new(header(9), vec![seg(AdaptationMode::M3, 5, b"hello"), seg(AdaptationMode::M0, 4, b"world!")]).unwrap();
        let b = c.to_bytes();
        for cut in 0..b.len() {
            assert!(Container::parse(&b[..cut]).is_err(), "prefix {cut} parsed");
        }
        let last = Container::parse(&b[..b.len() - 1]);
        assert!(matches!(last, Err(Error::TruncatedPayload { segment: 1, offset }) if offset == b.len() - 1));
    }

    #[test]
    fn invariants() {
        assert!(matches!(
            Container::new(header(10), vec![seg(AdaptationMode::M0, 4, b"")]),
            Err(Error::SegmentSumMismatch { sum: 4, expected: 10 })
        ));
        assert!(Container::new(header(0), vec![]).is_err());
        let mut h = header(4);
        h.effective_bit_depth = 11;
        assert!(Container::new(h, vec![seg(AdaptationMode::M0, 4, b"")]).is_err());
    }
}
