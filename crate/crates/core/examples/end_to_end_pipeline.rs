//! Full encoder and decoder on a clip whose content changes halfway: oracle
//! mode decisions, segmentation, container bytes, decode with the baseline
//! inverse, and a two-point comparison against always coding unadapted.

use paracodec::adapt::AdaptationMode;
use paracodec::codec::{QpValue, ToyCodec};
use paracodec::container::Container;
use paracodec::frames::{sequence_psnr_yuv, FrameRate, VideoSequence};
use paracodec::pipeline::{decode_container, encode_sequence, ModeSource, Restoration};
use paracodec::synth;

fn main() -> paracodec::Result<()> {
    let smooth = synth::gradient_sequence(64, 64, 25, 25);
    let busy = synth::textured_noise_sequence(64, 64, 25, 25, 2);
    let seq = VideoSequence::new([smooth.into_frames(), busy.into_frames()].concat(), FrameRate::new(25, 1)?)?;

    for qp in [27, 37] {
        let qp = QpValue::new(qp)?;
        for (label, source) in [("oracle", ModeSource::Oracle), ("M0", ModeSource::Fixed(AdaptationMode::M0))] {
            let out = encode_sequence(&seq, qp, &ToyCodec, &source)?;
            let bytes = out.container.to_bytes();
            let decoded = decode_container(&Container::parse(&bytes)?, &ToyCodec, Restoration::Baseline)?;
            let plan: Vec<String> = out.segments.iter().map(|s| format!("{}..{} {}", s.frames.start, s.frames.end, s.mode)).collect();
            println!(
                "qp {qp} {label:>6}: {:>8} bits, PSNR_YUV {:.2} dB, segments [{}]",
                out.total_bits(),
                sequence_psnr_yuv(seq.frames(), decoded.frames())?,
                plan.join(", ")
            );
        }
    }
    Ok(())
}
