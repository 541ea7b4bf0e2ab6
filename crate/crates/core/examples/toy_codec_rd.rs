//! Rate-quality sweep of the built-in DCT codec on three synthetic clips.

use paracodec::codec::{HostCodec, QpValue, StreamInfo, ToyCodec};
use paracodec::frames::sequence_psnr_yuv;
use paracodec::synth;

fn main() -> paracodec::Result<()> {
    let clips = [
        ("gradient", synth::gradient_sequence(64, 64, 10, 25)),
        ("noise", synth::textured_noise_sequence(64, 64, 10, 25, 3)),
        ("moving", synth::moving_pattern_sequence(64, 64, 10, 25)),
    ];
    for (name, seq) in &clips {
        println!("{name}");
        for qp in [12, 22, 32, 42, 51] {
            let qp = QpValue::new(qp)?;
            let stream = ToyCodec.encode(seq, qp)?;
            let decoded = ToyCodec.decode(&stream.payload, &StreamInfo::of(seq)?)?;
            let bpp = stream.bits as f64 / (seq.len() * seq.width() * seq.height()) as f64;
            println!("  qp {qp:>2}: {bpp:.3} bits/pixel, PSNR_YUV {:.2} dB", sequence_psnr_yuv(seq.frames(), decoded.frames())?);
        }
    }
    Ok(())
}
