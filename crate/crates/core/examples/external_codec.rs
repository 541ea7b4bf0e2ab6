//! Drives a host codec through argv templates. `cp` stands in for a real
//! encoder/decoder pair, so the "bitstream" is the Y4M file itself and the
//! reconstruction is lossless.

use paracodec::adapt::AdaptationMode;
use paracodec::codec::{CommandTemplate, ExternalCodec, QpValue};
use paracodec::frames::sequence_psnr_yuv;
use paracodec::pipeline::{decode_container, encode_sequence, ModeSource, Restoration};
use paracodec::synth;

fn main() -> paracodec::Result<()> {
    let work = tempfile::tempdir().expect("temp dir");
    let codec = ExternalCodec::new(
        CommandTemplate::parse("cp {input} {output}")?,
        CommandTemplate::parse("cp {input} {output}")?,
        work.path(),
    );
    let seq = synth::moving_pattern_sequence(32, 32, 10, 25);
    let out = encode_sequence(&seq, QpValue::new(32)?, &codec, &ModeSource::Fixed(AdaptationMode::M2))?;
    let decoded = decode_container(&out.container, &codec, Restoration::Baseline)?;
    println!("{} bits; PSNR_YUV after M2 round trip {:.2} dB", out.total_bits(), sequence_psnr_yuv(seq.frames(), decoded.frames())?);

    let missing = ExternalCodec::new(CommandTemplate::parse("no-such-encoder {input}")?, CommandTemplate::parse("cp {input} {output}")?, work.path());
    match encode_sequence(&seq, QpValue::new(32)?, &missing, &ModeSource::Fixed(AdaptationMode::M0)) {
        Err(e) => println!("missing encoder reported as [{}]: {e}", e.code()),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
