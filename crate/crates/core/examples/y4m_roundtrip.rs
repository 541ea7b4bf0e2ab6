//! Writes a synthetic clip as Y4M and raw planar files, reads both back and
//! checks they are bit-identical.

use paracodec::frames::{read_raw, read_sidecar, read_y4m, write_raw, write_y4m};
use paracodec::synth;

fn main() -> paracodec::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let seq = synth::moving_pattern_sequence(64, 48, 6, 25);

    let y4m = dir.path().join("clip.y4m");
    write_y4m(&seq, &y4m)?;
    let back = read_y4m(&y4m)?;
    println!("y4m: {} frames {}x{}, identical = {}", back.len(), back.width(), back.height(), back == seq);

    let raw = dir.path().join("clip.yuv");
    let sidecar = dir.path().join("clip.yuv.txt");
    write_raw(&seq, &raw, Some(&sidecar))?;
    let info = read_sidecar(&sidecar)?;
    let back = read_raw(&raw, &info)?;
    println!("raw: {} bytes per frame, identical = {}", info.frame_bytes(), back == seq);
    Ok(())
}
