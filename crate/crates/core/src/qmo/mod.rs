//! Quantization-mode optimization: choosing an adaptation mode per segment.
//!
//! [`oracle_select_mode`] picks the mode by brute force against an anchor
//! rate-quality curve. [`QmoNet`] learns to predict that choice from five
//! frames and the base QP, and [`segment_sequence`] turns per-window
//! predictions into segments.

mod dataset;
mod net;
mod oracle;

pub use dataset::{
    generate_qmo_dataset, plan_qmo_dataset, planned_sample_count, ClipRef, PlannedCrop, QmoDataset, QmoDatasetConfig,
    QmoSample, SourceDims,
};
pub use net::{clip_tensor, qmo_model_specs, train_qmo, train_qmo_with, QmoNet, QmoTrainConfig, QmoTrainReport};
pub use oracle::{
    build_anchor_curve, measure_mode, oracle_anchor_qps, oracle_select_mode, AnchorCurve, ModeGain, OracleChoice, RdPoint,
};

use std::ops::Range;

use crate::adapt::AdaptationMode;
use crate::codec::QpValue;
use crate::error::{Error, Result};
use crate::frames::FrameRate;

/// Frames per QMO decision window.
pub const CLIP_FRAMES: usize = 5;
/// Minimum softmax probability for a prediction to open a new segment.
pub const SPLIT_CONFIDENCE: f64 = 0.70;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeDecision {
    pub mode: AdaptationMode,
    pub confidence: f64,
}

impl ModeDecision {
    pub fn new(mode: AdaptationMode, confidence: f64) -> Self {
        ModeDecision { mode, confidence: confidence.clamp(0.0, 1.0) }
    }

    /// A decision taken with certainty, e.g. by the oracle or a fixed mode.
    pub fn certain(mode: AdaptationMode) -> Self {
        ModeDecision { mode, confidence: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentDescriptor {
    pub frames: Range<usize>,
    pub mode: AdaptationMode,
    pub qp_base: QpValue,
    pub qp_effective: QpValue,
}

impl SegmentDescriptor {
    pub fn new(frames: Range<usize>, mode: AdaptationMode, qp_base: QpValue) -> Self {
        SegmentDescriptor { frames, mode, qp_base, qp_effective: effective_qp(qp_base, mode) }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Host-codec QP for a mode: resampled content is coded finer so that the
/// bitrate stays close to the unadapted encode at `qp_base`.
pub fn effective_qp(qp_base: QpValue, mode: AdaptationMode) -> QpValue {
    let offset = match mode {
        AdaptationMode::M0 | AdaptationMode::M4 => 0,
        AdaptationMode::M1 | AdaptationMode::M2 => 6,
        AdaptationMode::M3 => 12,
    };
    QpValue::clamped(i32::from(qp_base.get()) - offset)
}

/// Greedy segmentation of per-window decisions (window `i` covers frames
/// `[5i, 5i+5)`). A new segment starts only when the mode changes, the new
/// prediction is at least 70% confident and the current segment already
/// lasts a second. The first segment uses the first decision's mode if it is
/// confident enough, M0 otherwise.
pub fn segment_sequence(
    decisions: &[ModeDecision],
    frame_count: usize,
    frame_rate: FrameRate,
    qp_base: QpValue,
) -> Result<Vec<SegmentDescriptor>> {
    let first = decisions.first().ok_or(Error::EmptyDecisions)?;
    let windows = frame_count.div_ceil(CLIP_FRAMES);
    if decisions.len() != windows {
        return Err(Error::ShapeMismatch(format!("{} decisions for {frame_count} frames ({windows} windows)", decisions.len())));
    }
    let min_len = frame_rate.frames_per_second_ceil();
    let mut mode = if first.confidence >= SPLIT_CONFIDENCE { first.mode } else { AdaptationMode::M0 };
    let mut start = 0;
    let mut out = Vec::new();
    for (i, d) in decisions.iter().enumerate().skip(1) {
        let f = i * CLIP_FRAMES;
        if d.mode != mode && d.confidence >= SPLIT_CONFIDENCE && f - start >= min_len {
            out.push(SegmentDescriptor::new(start..f, mode, qp_base));
            start = f;
            mode = d.mode;
        }
    }
    out.push(SegmentDescriptor::new(start..frame_count, mode, qp_base));
    Ok(out)
}

/// Joins neighbouring segments that ended up with the same mode.
pub fn merge_adjacent(segments: Vec<SegmentDescriptor>) -> Vec<SegmentDescriptor> {
    let mut out: Vec<SegmentDescriptor> = Vec::with_capacity(segments.len());
    for s in segments {
        match out.last_mut() {
            Some(last) if last.mode == s.mode && last.frames.end == s.frames.start && last.qp_base == s.qp_base => {
                last.frames.end = s.frames.end;
            }
            _ => out.push(s),
        }
    }
    out
}
