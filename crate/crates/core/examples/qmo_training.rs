//! Labels a few crops with the oracle, then trains the mode-prediction
//! network on them and on a trivially separable two-class set.

use paracodec::codec::{QpValue, ToyCodec};
use paracodec::qmo::{clip_tensor, generate_qmo_dataset, train_qmo, QmoDatasetConfig, QmoTrainConfig};
use paracodec::synth;

fn main() -> paracodec::Result<()> {
    let sources = vec![synth::gradient_sequence(48, 48, 12, 25), synth::textured_noise_sequence(48, 48, 12, 25, 5)];
    let cfg = QmoDatasetConfig {
        crops_per_source: 2,
        crop_size: 32,
        crop_frames: 10,
        clips_per_qp: 1,
        min_source_frames: 10,
        ..Default::default()
    };
    let ds = generate_qmo_dataset(&sources, &[], &ToyCodec, &cfg)?;
    println!("{} labelled clips, label histogram M0..M4 {:?}", ds.len(), ds.label_histogram());
    let examples = ds
        .samples
        .iter()
        .map(|s| Ok((clip_tensor(&s.clip.frames(&sources)?, s.qp_base)?, s.label.index())))
        .collect::<paracodec::Result<Vec<_>>>()?;
    let (_, report) = train_qmo(&examples, &QmoTrainConfig { epochs: 5, batch_size: 4, ..Default::default() })?;
    println!("oracle labels: loss {:.3} -> {:.3}", report.initial_loss, report.epoch_losses.last().unwrap());

    // Flat dark clips are class 0, flat bright clips class 2.
    let qp = QpValue::new(27)?;
    let flat = |v: u16| synth::still_sequence(paracodec::frames::VideoFrame::filled(16, 16, 8, [v, 128, 128]).unwrap(), 5, 25);
    let separable = (0..16)
        .map(|i| {
            let bright = i % 2 == 1;
            let seq = flat(if bright { 200 + i as u16 } else { 30 + i as u16 });
            Ok((clip_tensor(seq.frames(), qp)?, if bright { 2 } else { 0 }))
        })
        .collect::<paracodec::Result<Vec<_>>>()?;
    let (_, report) = train_qmo(&separable, &QmoTrainConfig { epochs: 30, lr: 3e-3, batch_size: 8, seed: 1 })?;
    println!("separable set: training accuracy {:.0}%", 100.0 * report.train_accuracy);
    Ok(())
}
