//! Applies every adaptation mode to one frame and reports the adapted format
//! and the PSNR after the baseline inverse.

use paracodec::adapt::{apply_mode, invert_mode_baseline, AdaptationMode};
use paracodec::frames::psnr_yuv;
use paracodec::synth;

fn main() -> paracodec::Result<()> {
    let frame = synth::low_frequency_chart(128, 96, 10, 0.0);
    for mode in AdaptationMode::ALL {
        let adapted = apply_mode(&frame, mode)?;
        let back = invert_mode_baseline(&adapted, mode)?;
        println!(
            "{mode}: adapted {}x{} ebd {} -> baseline inverse PSNR_YUV {:.2} dB",
            adapted.width(),
            adapted.height(),
            adapted.effective_bit_depth(),
            psnr_yuv(&frame, &back)?
        );
    }
    Ok(())
}
