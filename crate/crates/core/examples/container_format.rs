//! Builds a two-segment container by hand, serializes it and parses it back.

use paracodec::adapt::AdaptationMode;
use paracodec::codec::QpValue;
use paracodec::container::{Container, ContainerHeader, Segment};
use paracodec::frames::FrameRate;
use paracodec::qmo::effective_qp;

fn main() -> paracodec::Result<()> {
    let header = ContainerHeader {
        width: 64,
        height: 32,
        frame_rate: FrameRate::new(25, 1)?,
        container_bit_depth: 8,
        effective_bit_depth: 8,
        frame_count: 40,
    };
    let qp = QpValue::new(32)?;
    let seg = |mode, frames, payload: &[u8]| Segment {
        mode,
        qp_base: qp,
        qp_effective: effective_qp(qp, mode),
        frame_count: frames,
        payload: payload.to_vec(),
    };
    let c = Container::new(header, vec![seg(AdaptationMode::M0, 25, b"abc"), seg(AdaptationMode::M3, 15, b"de")])?;
    let bytes = c.to_bytes();
    println!("{} bytes ({} side information)", bytes.len(), c.side_info_len());
    for (i, row) in bytes.chunks(16).enumerate() {
        let hex: Vec<String> = row.iter().map(|b| format!("{b:02x}")).collect();
        println!("{:04x}: {}", i * 16, hex.join(" "));
    }
    let parsed = Container::parse(&bytes)?;
    assert_eq!(parsed, c);
    for s in parsed.segments() {
        println!("{} frames, {}, qp {} -> {}", s.frame_count, s.mode, s.qp_base, s.qp_effective);
    }
    match Container::parse(&bytes[..bytes.len() - 1]) {
        Err(e) => println!("truncated input rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
