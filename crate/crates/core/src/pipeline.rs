//! End-to-end encoder and decoder: per-window mode decisions, segmentation,
//! per-segment adaptation and host coding into a container, and the inverse
//! path with baseline or learned restoration.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::adapt::{apply_mode_seq, invert_mode_baseline_seq, AdaptationMode};
use crate::codec::{HostCodec, QpValue, StreamInfo};
use crate::container::{Container, ContainerHeader, Segment};
use crate::error::{Error, Result};
use crate::frames::{sequence_psnr_yuv, VideoFrame, VideoSequence};
use crate::metrics::{CurveKey, LabeledCurve, RateQualityCurve, RateQualityPoint, METRIC_PSNR_YUV};
use crate::qmo::{
    build_anchor_curve, merge_adjacent, oracle_select_mode, segment_sequence, ModeDecision, QmoNet,
    SegmentDescriptor, CLIP_FRAMES,
};
use crate::restore::{restore_sequence, ModelRegistry, RestorationModel, RestorationModelKey};

/// Where per-window mode decisions come from.
#[derive(Clone, Debug)]
pub enum ModeSource {
    /// Brute-force search against the unadapted rate-quality curve.
    Oracle,
    Model(Box<QmoNet>),
    Fixed(AdaptationMode),
}

/// Decoder-side inverse for adapted segments.
#[derive(Clone, Copy, Debug)]
pub enum Restoration<'a> {
    Baseline,
    Learned(&'a ModelRegistry),
}

fn wrap(seg: usize, frames: &std::ops::Range<usize>, e: Error) -> Error {
    Error::Segment { segment: seg, start: frames.start, end: frames.end, source: Box::new(e) }
}

fn oracle_mode(seq: &VideoSequence, qp_base: QpValue, codec: &dyn HostCodec) -> Result<AdaptationMode> {
    let anchor = build_anchor_curve(seq, codec, None)?;
    Ok(oracle_select_mode(seq, qp_base, codec, &anchor)?.mode)
}

/// One decision per 5-frame window; window `i` covers frames `5i..5i+5`.
///
/// The model sees exactly five frames, so a short last window is padded by
/// repeating its final frame.
pub fn window_decisions(
    seq: &VideoSequence,
    qp_base: QpValue,
    codec: &dyn HostCodec,
    source: &ModeSource,
) -> Result<Vec<ModeDecision>> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let windows: Vec<_> = (0..seq.len().div_ceil(CLIP_FRAMES))
        .map(|i| i * CLIP_FRAMES..((i + 1) * CLIP_FRAMES).min(seq.len()))
        .collect();
    windows
        .par_iter()
        .enumerate()
        .map(|(i, w)| {
            let d = match source {
                ModeSource::Fixed(mode) => ModeDecision::certain(*mode),
                ModeSource::Oracle => ModeDecision::certain(oracle_mode(&seq.slice(w.clone())?, qp_base, codec)?),
                ModeSource::Model(net) => {
                    let mut frames: Vec<VideoFrame> = seq.frames()[w.clone()].to_vec();
                    while frames.len() < CLIP_FRAMES {
                        frames.push(frames[frames.len() - 1].clone());
                    }
                    net.predict(&frames, qp_base)?
                }
            };
            log::debug!("window {i} (frames {w:?}): {} ({:.2})", d.mode, d.confidence);
            Ok(d)
        })
        .collect::<Result<Vec<_>>>()
}

/// Decisions, greedy segmentation, and for the oracle a second pass that
/// re-chooses each segment's mode on the whole segment and merges equal
/// neighbours.
pub fn plan_segments(
    seq: &VideoSequence,
    qp_base: QpValue,
    codec: &dyn HostCodec,
    source: &ModeSource,
) -> Result<Vec<SegmentDescriptor>> {
    let decisions = window_decisions(seq, qp_base, codec, source)?;
    let segments = segment_sequence(&decisions, seq.len(), seq.frame_rate(), qp_base)?;
    if !matches!(source, ModeSource::Oracle) || segments.len() == 1 && decisions.len() == 1 {
        return Ok(segments);
    }
    let refined = segments
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mode = oracle_mode(&seq.slice(s.frames.clone())?, qp_base, codec).map_err(|e| wrap(i, &s.frames, e))?;
            Ok(SegmentDescriptor::new(s.frames.clone(), mode, qp_base))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(merge_adjacent(refined))
}

#[derive(Clone, Debug)]
pub struct EncodeOutput {
    pub container: Container,
    pub segments: Vec<SegmentDescriptor>,
}

impl EncodeOutput {
    /// Payload plus side information, in bits.
    pub fn total_bits(&self) -> u64 {
        self.container.total_len() as u64 * 8
    }
}

/// Encodes already planned segments.
pub fn encode_segments(
    seq: &VideoSequence,
    segments: &[SegmentDescriptor],
    codec: &dyn HostCodec,
) -> Result<EncodeOutput> {
    let first = seq.first().ok_or(Error::EmptySequence)?;
    let coded = segments
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let run = || -> Result<Segment> {
                let adapted = apply_mode_seq(&seq.slice(s.frames.clone())?, s.mode)?;
                let stream = codec.encode(&adapted, s.qp_effective)?;
                Ok(Segment {
                    mode: s.mode,
                    qp_base: s.qp_base,
                    qp_effective: s.qp_effective,
                    frame_count: s.len() as u32,
                    payload: stream.payload,
                })
            };
            run().map_err(|e| wrap(i, &s.frames, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let header = ContainerHeader {
        width: first.width() as u32,
        height: first.height() as u32,
        frame_rate: seq.frame_rate(),
        container_bit_depth: first.container_bit_depth(),
        effective_bit_depth: first.effective_bit_depth(),
        frame_count: seq.len() as u32,
    };
    Ok(EncodeOutput { container: Container::new(header, coded)?, segments: segments.to_vec() })
}

pub fn encode_sequence(
    seq: &VideoSequence,
    qp_base: QpValue,
    codec: &dyn HostCodec,
    source: &ModeSource,
) -> Result<EncodeOutput> {
    let segments = plan_segments(seq, qp_base, codec, source)?;
    encode_segments(seq, &segments, codec)
}

/// Format of the host bitstream of one segment.
pub fn segment_stream_info(header: &ContainerHeader, seg: &Segment) -> StreamInfo {
    let spec = seg.mode.resample_spec();
    let (w, h) = spec.adapted_dims(header.width as usize, header.height as usize);
    StreamInfo {
        width: w,
        height: h,
        frame_rate: header.frame_rate,
        container_bit_depth: header.container_bit_depth,
        effective_bit_depth: header.effective_bit_depth - spec.ebd_shift,
        frame_count: seg.frame_count as usize,
    }
}

/// Decodes every segment, restores it to the original format and
/// concatenates the result.
pub fn decode_container(container: &Container, codec: &dyn HostCodec, restoration: Restoration<'_>) -> Result<VideoSequence> {
    let header = container.header();
    let mut ranges = Vec::with_capacity(container.segments().len());
    let mut start = 0usize;
    for s in container.segments() {
        ranges.push(start..start + s.frame_count as usize);
        start += s.frame_count as usize;
    }
    // Resolve and load every needed model before decoding anything.
    let mut models: HashMap<RestorationModelKey, RestorationModel> = HashMap::new();
    if let Restoration::Learned(reg) = restoration {
        for (i, s) in container.segments().iter().enumerate().filter(|(_, s)| s.mode.has_restoration()) {
            let key = reg.resolve(s.mode, s.qp_base).map_err(|e| wrap(i, &ranges[i], e))?;
            if let std::collections::hash_map::Entry::Vacant(v) = models.entry(key) {
                v.insert(reg.load(s.mode, s.qp_base).map_err(|e| wrap(i, &ranges[i], e))?);
            }
        }
    }
    let parts = container
        .segments()
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let run = || -> Result<VideoSequence> {
                let decoded = codec.decode(&s.payload, &segment_stream_info(header, s))?;
                match restoration {
                    Restoration::Learned(reg) if s.mode.has_restoration() => {
                        let key = reg.resolve(s.mode, s.qp_base)?;
                        restore_sequence(&decoded, s.mode, &models[&key])
                    }
                    _ => invert_mode_baseline_seq(&decoded, s.mode),
                }
            };
            run().map_err(|e| wrap(i, &ranges[i], e))
        })
        .collect::<Result<Vec<_>>>()?;
    let frames: Vec<VideoFrame> = parts.into_iter().flat_map(VideoSequence::into_frames).collect();
    VideoSequence::new(frames, header.frame_rate)
}

/// One operating point of a full encode/decode run.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub qp_base: QpValue,
    pub total_bits: u64,
    pub rate_bps: f64,
    pub psnr_yuv: f64,
    pub modes: Vec<(AdaptationMode, usize)>,
}

pub fn run_point(
    seq: &VideoSequence,
    qp_base: QpValue,
    codec: &dyn HostCodec,
    source: &ModeSource,
    restoration: Restoration<'_>,
) -> Result<SweepPoint> {
    let out = encode_sequence(seq, qp_base, codec, source)?;
    let recon = decode_container(&out.container, codec, restoration)?;
    let psnr_yuv = sequence_psnr_yuv(seq.frames(), recon.frames())?;
    let total_bits = out.total_bits();
    Ok(SweepPoint {
        qp_base,
        total_bits,
        rate_bps: total_bits as f64 / seq.duration(),
        psnr_yuv,
        modes: out.segments.iter().map(|s| (s.mode, s.len())).collect(),
    })
}

pub fn sweep(
    seq: &VideoSequence,
    qps: &[QpValue],
    codec: &dyn HostCodec,
    source: &ModeSource,
    restoration: Restoration<'_>,
) -> Result<Vec<SweepPoint>> {
    qps.iter().map(|&qp| run_point(seq, qp, codec, source, restoration)).collect()
}

/// Rate-quality curve of a sweep, ready for CSV output or BD metrics.
pub fn sweep_curve(codec_label: &str, sequence: &str, points: &[SweepPoint]) -> Result<LabeledCurve> {
    let pts = points
        .iter()
        .map(|p| RateQualityPoint::new(p.rate_bps, p.psnr_yuv, METRIC_PSNR_YUV).with_qp(p.qp_base.get()))
        .collect();
    Ok(LabeledCurve {
        key: CurveKey { codec: codec_label.into(), sequence: sequence.into(), metric: METRIC_PSNR_YUV.into() },
        curve: RateQualityCurve::new(pts)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{standard_qps, ToyCodec, TOY_HEADER_LEN};
    use crate::container::{HEADER_LEN, SEGMENT_ENTRY_LEN};
    use crate::synth;

    fn qp(v: i32) -> QpValue {
        QpValue::new(v).unwrap()
    }

    #[test]
    fn fixed_m0_is_transparent() {
        let seq = synth::moving_pattern_sequence(32, 32, 12, 10);
        let out = encode_sequence(&seq, qp(32), &ToyCodec, &ModeSource::Fixed(AdaptationMode::M0)).unwrap();
        let plain = ToyCodec.encode(&seq, qp(32)).unwrap();
        assert_eq!(out.container.segments().len(), 1);
        assert_eq!(out.container.segments()[0].payload, plain.payload);
        assert_eq!(out.total_bits(), (plain.payload.len() + HEADER_LEN + SEGMENT_ENTRY_LEN) as u64 * 8);
        let dec = decode_container(&out.container, &ToyCodec, Restoration::Baseline).unwrap();
        assert_eq!(dec, ToyCodec.decode(&plain.payload, &StreamInfo::of(&seq).unwrap()).unwrap());
        assert!(plain.payload.len() > TOY_HEADER_LEN);
    }

    #[test]
    fn baseline_m1_is_shifted_decode() {
        let seq = synth::gradient_sequence(32, 32, 6, 10);
        let out = encode_sequence(&seq, qp(27), &ToyCodec, &ModeSource::Fixed(AdaptationMode::M1)).unwrap();
        let s = &out.container.segments()[0];
        assert_eq!(s.qp_effective, qp(21));
        let raw = ToyCodec.decode(&s.payload, &segment_stream_info(out.container.header(), s)).unwrap();
        let dec = decode_container(&out.container, &ToyCodec, Restoration::Baseline).unwrap();
        for (a, b) in dec.frames().iter().zip(raw.frames()) {
            assert_eq!(a.y().data(), b.y().map(|v| v << 1).data());
        }
        assert_eq!(dec.frames()[0].effective_bit_depth(), 8);
    }

    #[test]
    fn geometry_restored_for_every_mode() {
        let seq = synth::textured_noise_sequence(32, 32, 7, 10, 2);
        for mode in AdaptationMode::ALL {
            let out = encode_sequence(&seq, qp(37), &ToyCodec, &ModeSource::Fixed(mode)).unwrap();
            let dec = decode_container(&out.container, &ToyCodec, Restoration::Baseline).unwrap();
            assert_eq!((dec.len(), dec.width(), dec.height()), (7, 32, 32));
            assert!(dec.frames()[0].same_format(&seq.frames()[0]));
            let parsed = Container::parse(&out.container.to_bytes()).unwrap();
            assert_eq!(parsed, out.container);
        }
    }

    #[test]
    fn missing_model_is_reported_before_decoding() {
        let seq = synth::gradient_sequence(32, 32, 5, 10);
        let out = encode_sequence(&seq, qp(27), &ToyCodec, &ModeSource::Fixed(AdaptationMode::M2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let reg = ModelRegistry::open(dir.path()).unwrap();
        let err = decode_container(&out.container, &ToyCodec, Restoration::Learned(&reg)).unwrap_err();
        assert_eq!(err.code(), "missing-model");
    }

    #[test]
    fn oracle_plans_cover_the_sequence() {
        let seq = synth::moving_pattern_sequence(32, 32, 22, 5);
        let segs = plan_segments(&seq, qp(37), &ToyCodec, &ModeSource::Oracle).unwrap();
        assert_eq!(segs.first().unwrap().frames.start, 0);
        assert_eq!(segs.last().unwrap().frames.end, 22);
        assert!(segs.windows(2).all(|w| w[0].frames.end == w[1].frames.start && w[0].mode != w[1].mode));
        let pts = sweep(&seq, &standard_qps(), &ToyCodec, &ModeSource::Oracle, Restoration::Baseline).unwrap();
        assert_eq!(pts.len(), 4);
        sweep_curve("oracle", "moving", &pts).unwrap();
    }
}
