//! Brute-force mode choice on two contrasting clips: every candidate mode is
//! encoded and compared with the unadapted rate-quality curve at its rate.

use paracodec::codec::{QpValue, ToyCodec};
use paracodec::qmo::{build_anchor_curve, oracle_select_mode};
use paracodec::synth;

fn main() -> paracodec::Result<()> {
    let clips = [
        ("smooth gradient", synth::gradient_sequence(64, 64, 5, 25)),
        ("fine stripes", synth::still_sequence(synth::fine_stripes_frame(64, 64, 8, 0.0), 5, 25)),
    ];
    for (name, seq) in &clips {
        let anchor = build_anchor_curve(seq, &ToyCodec, None)?;
        for qp in [22, 37] {
            let choice = oracle_select_mode(seq, QpValue::new(qp)?, &ToyCodec, &anchor)?;
            let gains: Vec<String> = choice.candidates.iter().map(|c| format!("{} {:+.2}", c.mode, c.gain_db)).collect();
            println!("{name} @ qp {qp}: {} (gains dB: {})", choice.mode, gains.join(", "));
        }
    }
    Ok(())
}
