use crate::adapt::{apply_mode_seq, invert_mode_baseline_seq, AdaptationMode};
use crate::codec::{HostCodec, QpValue, StreamInfo};
use crate::error::{Error, Result};
use crate::frames::{sequence_psnr_yuv, VideoSequence};
use crate::metrics::Pchip;

use super::effective_qp;

/// One measured encode: payload bits over the clip duration, PSNR_YUV of the
/// reconstruction against the original.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RdPoint {
    pub rate_bps: f64,
    pub psnr_yuv: f64,
    pub bits: u64,
}

/// Encodes `seq` in `mode` at the mode's effective QP and measures the
/// baseline-inverted reconstruction.
pub fn measure_mode(seq: &VideoSequence, mode: AdaptationMode, qp_base: QpValue, codec: &dyn HostCodec) -> Result<RdPoint> {
    let adapted = apply_mode_seq(seq, mode)?;
    let stream = codec.encode(&adapted, effective_qp(qp_base, mode))?;
    let decoded = codec.decode(&stream.payload, &StreamInfo::of(&adapted)?)?;
    let restored = invert_mode_baseline_seq(&decoded, mode)?;
    Ok(RdPoint {
        rate_bps: stream.bits as f64 / seq.duration(),
        psnr_yuv: sequence_psnr_yuv(seq.frames(), restored.frames())?,
        bits: stream.bits,
    })
}

/// Unadapted rate-quality points of one clip and a cubic Hermite interpolant
/// of PSNR over log10(rate).
#[derive(Clone, Debug, PartialEq)]
pub struct AnchorCurve {
    points: Vec<(QpValue, RdPoint)>,
    interp: Pchip,
}

impl AnchorCurve {
    pub fn from_points(mut points: Vec<(QpValue, RdPoint)>) -> Result<Self> {
        points.sort_by(|a, b| a.1.rate_bps.total_cmp(&b.1.rate_bps));
        // A rate sweep should fall with QP; tolerate violations but keep the
        // interpolant a function.
        let mut by_qp = points.clone();
        by_qp.sort_by_key(|p| p.0);
        if by_qp.windows(2).any(|w| w[1].1.bits > w[0].1.bits) {
            log::warn!("anchor rate does not fall monotonically with QP");
        }
        points.dedup_by(|b, a| b.1.rate_bps == a.1.rate_bps);
        if points.len() < 3 {
            return Err(Error::InvalidSweep(format!("{} distinct anchor rates, need 3", points.len())));
        }
        if points.iter().any(|p| !(p.1.rate_bps > 0.0)) {
            return Err(Error::InvalidSweep("anchor rate must be positive".into()));
        }
        let interp = Pchip::new(
            points.iter().map(|p| p.1.rate_bps.log10()).collect(),
            points.iter().map(|p| p.1.psnr_yuv).collect(),
        )?;
        Ok(AnchorCurve { points, interp })
    }

    /// Points sorted by rate.
    pub fn points(&self) -> &[(QpValue, RdPoint)] {
        &self.points
    }

    /// Anchor PSNR at `rate_bps`, linearly extended beyond the measured range.
    pub fn psnr_at(&self, rate_bps: f64) -> f64 {
        self.interp.eval(rate_bps.log10())
    }

    pub fn gain(&self, p: &RdPoint) -> f64 {
        p.psnr_yuv - self.psnr_at(p.rate_bps)
    }
}

/// QPs of the oracle's anchor sweep. Adapted candidates code a quarter of
/// the samples or one bit less, so their rates fall well below the standard
/// sweep; extending it to both ends keeps comparisons inside measured data.
pub fn oracle_anchor_qps() -> Vec<QpValue> {
    [12, 17, 22, 27, 32, 37, 42, 47, 51].into_iter().map(QpValue::clamped).collect()
}

/// Anchor from M0 encodes of `seq` at each of `qps` (default:
/// [`oracle_anchor_qps`]).
pub fn build_anchor_curve(seq: &VideoSequence, codec: &dyn HostCodec, qps: Option<&[QpValue]>) -> Result<AnchorCurve> {
    let default_qps = oracle_anchor_qps();
    let qps = qps.unwrap_or(&default_qps);
    let mut distinct = qps.to_vec();
    distinct.sort();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InvalidSweep(format!("{} distinct QPs, need 3", distinct.len())));
    }
    let points = distinct
        .iter()
        .map(|&q| Ok((q, measure_mode(seq, AdaptationMode::M0, q, codec)?)))
        .collect::<Result<Vec<_>>>()?;
    AnchorCurve::from_points(points)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeGain {
    pub mode: AdaptationMode,
    pub point: RdPoint,
    pub gain_db: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleChoice {
    pub mode: AdaptationMode,
    /// M1..M4 in order.
    pub candidates: Vec<ModeGain>,
}

/// Brute-force mode choice: the candidate with the largest strictly
/// positive PSNR gain over the anchor at its own rate, else M0. Ties go to
/// the lower mode index.
pub fn oracle_select_mode(
    seq: &VideoSequence,
    qp_base: QpValue,
    codec: &dyn HostCodec,
    anchor: &AnchorCurve,
) -> Result<OracleChoice> {
    let mut candidates = Vec::with_capacity(4);
    for mode in AdaptationMode::CANDIDATES {
        let point = measure_mode(seq, mode, qp_base, codec)?;
        candidates.push(ModeGain { mode, point, gain_db: anchor.gain(&point) });
    }
    Ok(OracleChoice { mode: pick(&candidates), candidates })
}

fn pick(candidates: &[ModeGain]) -> AdaptationMode {
    let mut best = (AdaptationMode::M0, 0.0);
    for c in candidates {
        if c.gain_db > best.1 {
            best = (c.mode, c.gain_db);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::ToyCodec;
    use crate::synth;

    fn pt(rate: f64, psnr: f64) -> RdPoint {
        RdPoint { rate_bps: rate, psnr_yuv: psnr, bits: rate as u64 }
    }

    fn qp(v: i32) -> QpValue {
        QpValue::new(v).unwrap()
    }

    #[test]
    fn anchor_through_knots_and_lines() {
        let pts = vec![(qp(37), pt(1e3, 30.0)), (qp(32), pt(1e4, 33.0)), (qp(27), pt(1e5, 36.0)), (qp(22), pt(1e6, 39.0))];
        let a = AnchorCurve::from_points(pts).unwrap();
        for (_, p) in a.points() {
            assert_eq!(a.psnr_at(p.rate_bps), p.psnr_yuv);
        }
        // Collinear in (log-rate, PSNR): the interpolant is that line.
        for i in 0..=30 {
            let lr = 3.0 + i as f64 / 10.0;
            assert!((a.psnr_at(10f64.powf(lr)) - (30.0 + 3.0 * (lr - 3.0))).abs() < 1e-9);
        }
        // Linear past the ends.
        assert!((a.psnr_at(1e7) - 42.0).abs() < 1e-9);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![(qp(37), pt(1e3, 30.0)), (qp(32), pt(1e3, 31.0)), (qp(27), pt(1e5, 36.0))];
        assert!(matches!(AnchorCurve::from_points(pts), Err(Error::InvalidSweep(_))));
    }

    fn gain(mode: AdaptationMode, g: f64) -> ModeGain {
        ModeGain { mode, point: pt(1.0, 0.0), gain_db: g }
    }

    #[test]
    fn selection_rules() {
        use AdaptationMode::*;
        assert_eq!(pick(&[gain(M1, -0.1), gain(M2, -2.0), gain(M3, -0.5), gain(M4, 0.0)]), M0);
        assert_eq!(pick(&[gain(M1, 0.3), gain(M2, 0.3), gain(M3, 0.1), gain(M4, 0.0)]), M1);
        assert_eq!(pick(&[gain(M1, 0.3), gain(M2, 0.2), gain(M3, 0.7), gain(M4, 0.0)]), M3);
    }

    #[test]
    fn m0_reproduces_anchor_knot() {
        let seq = synth::gradient_sequence(32, 32, 5, 30);
        let a = build_anchor_curve(&seq, &ToyCodec, None).unwrap();
        let p = measure_mode(&seq, AdaptationMode::M0, qp(27), &ToyCodec).unwrap();
        assert_eq!(a.gain(&p), 0.0);
        // Baseline M4 is M0 with a no-op post-filter: zero gain, never chosen.
        let c = oracle_select_mode(&seq, qp(27), &ToyCodec, &a).unwrap();
        assert_eq!(c.candidates[3].gain_db, 0.0);
        assert_ne!(c.mode, AdaptationMode::M4);
    }

    #[test]
    fn smooth_content_selected_point_dominates() {
        let seq = synth::gradient_sequence(64, 64, 5, 30);
        let a = build_anchor_curve(&seq, &ToyCodec, None).unwrap();
        let c = oracle_select_mode(&seq, qp(37), &ToyCodec, &a).unwrap();
        let again = measure_mode(&seq, c.mode, qp(37), &ToyCodec).unwrap();
        assert!(a.gain(&again) >= 0.0);
    }
}
