//! Trains a small restoration network for one (mode, QP) pair, registers it
//! and compares learned and baseline reconstruction on unseen content.

use paracodec::adapt::{apply_mode_seq, AdaptationMode};
use paracodec::codec::{HostCodec, QpValue, StreamInfo, ToyCodec};
use paracodec::qmo::effective_qp;
use paracodec::frames::sequence_psnr_yuv;
use paracodec::restore::{
    degrade_sequence, generate_restoration_dataset, restore_sequence, train_restoration, ModelRegistry,
    RestorationDatasetConfig, RestorationModelKey, RestorationTrainConfig,
};
use paracodec::synth;

fn main() -> paracodec::Result<()> {
    let (mode, qp) = (AdaptationMode::M2, QpValue::new(37)?);
    let sources = vec![synth::gradient_sequence(96, 96, 3, 25), synth::moving_pattern_sequence(96, 96, 3, 25)];
    let pairs = generate_restoration_dataset(&sources, &ToyCodec, mode, qp, &RestorationDatasetConfig { patches: 64, patch_size: 32, seed: 0 })?;
    // A run this short starts from the identity so it cannot fall below baseline.
    let cfg = RestorationTrainConfig { epochs: 6, lr: 1e-3, zero_init_final: true, ..Default::default() };
    let (model, report) = train_restoration(&pairs, RestorationModelKey::new(mode, qp)?, &cfg)?;
    println!("loss {:.4} -> {:.4}", report.initial_loss, report.epoch_losses.last().unwrap());

    let held_out = synth::moving_pattern_sequence(64, 64, 2, 25);
    let baseline = degrade_sequence(&held_out, mode, qp, &ToyCodec)?;
    let adapted = apply_mode_seq(&held_out, mode)?;
    let stream = ToyCodec.encode(&adapted, effective_qp(qp, mode))?;
    let decoded = ToyCodec.decode(&stream.payload, &StreamInfo::of(&adapted)?)?;
    let learned = restore_sequence(&decoded, mode, &model)?;
    println!(
        "held-out PSNR_YUV: baseline {:.2} dB, learned {:.2} dB",
        sequence_psnr_yuv(held_out.frames(), baseline.frames())?,
        sequence_psnr_yuv(held_out.frames(), learned.frames())?
    );

    let dir = tempfile::tempdir().expect("temp dir");
    let mut registry = ModelRegistry::open(dir.path())?;
    registry.insert(&model)?;
    let key = registry.resolve(mode, QpValue::new(40)?)?;
    println!("request for {mode}@QP40 resolves to {key}");
    Ok(())
}
