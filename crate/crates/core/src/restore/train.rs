use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pyramid::{restoration_loss_grad, DEFAULT_LEVELS};
use super::{PatchPair, RestorationModel, RestorationModelKey};
use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RestorationTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub pyramid_levels: usize,
    /// Start from the exact identity (zero final layer) instead of a fully
    /// random network.
    pub zero_init_final: bool,
}

impl Default for RestorationTrainConfig {
    fn default() -> Self {
        RestorationTrainConfig { epochs: 50, lr: 1e-4, batch_size: 16, seed: 0, pyramid_levels: DEFAULT_LEVELS, zero_init_final: false }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestorationTrainReport {
    /// Loss of the untrained model over the whole set.
    pub initial_loss: f64,
    pub epoch_losses: Vec<f64>,
    pub learning_rates: Vec<f64>,
}

/// Step schedule: the base rate halves every 20 epochs (epochs count from 1).
pub fn lr_at_epoch(base: f64, epoch: usize) -> f64 {
    base * 0.5f64.powi((epoch.saturating_sub(1) / 20) as i32)
}

fn stack(pairs: &[PatchPair], idx: &[usize]) -> Result<(Tensor<f32>, Tensor<f64>)> {
    let x: Vec<_> = idx.iter().map(|&i| pairs[i].degraded.clone()).collect();
    let y: Vec<_> = idx.iter().map(|&i| pairs[i].target.cast::<f64>()).collect();
    Ok((Tensor::stack_batch(&x)?, Tensor::stack_batch(&y)?))
}

/// Mean restoration loss of `model` over `pairs`.
pub fn evaluate_loss(model: &RestorationModel, pairs: &[PatchPair], cfg: &RestorationTrainConfig) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let idx: Vec<usize> = (0..pairs.len()).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(cfg.batch_size.max(1)) {
        let (x, y) = stack(pairs, chunk)?;
        let out = model.net().forward(&x)?.cast::<f64>();
        total += restoration_loss_grad(&out, &y, cfg.pyramid_levels)?.0 * chunk.len() as f64;
    }
    Ok(total / pairs.len() as f64)
}

/// ADAM on the pyramid loss.
pub fn train_restoration(
    pairs: &[PatchPair],
    key: RestorationModelKey,
    cfg: &RestorationTrainConfig,
) -> Result<(RestorationModel, RestorationTrainReport)> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model =
        if cfg.zero_init_final { RestorationModel::identity(key, cfg.seed) } else { RestorationModel::new(key, cfg.seed) };
    let initial_loss = evaluate_loss(&model, pairs, cfg)?;
    log::info!("restoration {key}: initial loss {initial_loss:.6}");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let (mut epoch_losses, mut learning_rates) = (Vec::new(), Vec::new());
    for epoch in 1..=cfg.epochs {
        let lr = lr_at_epoch(cfg.lr, epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let (x, y) = stack(pairs, chunk)?;
            let out = model.net_mut().forward_train(&x)?.cast::<f64>();
            let (loss, grad) = restoration_loss_grad(&out, &y, cfg.pyramid_levels)?;
            let grads = model.net_mut().backward(&grad.cast::<f32>())?;
            model.net_mut().adam_step(&grads, lr)?;
            total += loss * chunk.len() as f64;
        }
        let mean = total / pairs.len() as f64;
        log::info!("restoration {key}: epoch {epoch}/{} lr {lr:e} loss {mean:.6}", cfg.epochs);
        epoch_losses.push(mean);
        learning_rates.push(lr);
    }
    Ok((model, RestorationTrainReport { initial_loss, epoch_losses, learning_rates }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapt::AdaptationMode;
    use crate::codec::QpValue;

    fn key() -> RestorationModelKey {
        RestorationModelKey::new(AdaptationMode::M4, QpValue::new(32).unwrap()).unwrap()
    }

    fn pair(seed: u32, offset: f32) -> PatchPair {
        let data: Vec<f32> = (0..64).map(|i| ((i * 7 + seed * 13) % 17) as f32 / 17.0).collect();
        let target = Tensor::new(vec![1, 1, 8, 8], data).unwrap();
        PatchPair { degraded: target.map(|v| v + offset), target }
    }

    #[test]
    fn schedule() {
        let lrs: Vec<f64> = [1, 20, 21, 40, 41, 50].iter().map(|&e| lr_at_epoch(1e-4, e)).collect();
        assert_eq!(lrs, [1e-4, 1e-4, 5e-5, 5e-5, 2.5e-5, 2.5e-5]);
    }

    #[test]
    fn clean_pairs_stay_at_zero() {
        let pairs: Vec<_> = (0..4).map(|s| pair(s, 0.0)).collect();
        let cfg = RestorationTrainConfig { epochs: 3, batch_size: 2, zero_init_final: true, ..Default::default() };
        let (_, report) = train_restoration(&pairs, key(), &cfg).unwrap();
        assert_eq!(report.initial_loss, 0.0);
        assert!(report.epoch_losses.iter().all(|&l| l < 1e-6), "{:?}", report.epoch_losses);
        assert!(train_restoration(&[], key(), &cfg).is_err());
    }

    #[test]
    fn learns_a_constant_offset() {
        let pairs: Vec<_> = (0..8).map(|s| pair(s, 0.1)).collect();
        let cfg = RestorationTrainConfig { epochs: 30, lr: 1e-3, batch_size: 4, seed: 3, pyramid_levels: 2, zero_init_final: true };
        let (model, report) = train_restoration(&pairs, key(), &cfg).unwrap();
        let last = *report.epoch_losses.last().unwrap();
        assert!(last < 0.5 * report.initial_loss, "{} -> {last}", report.initial_loss);
        assert!(evaluate_loss(&model, &pairs, &cfg).unwrap() < 0.5 * report.initial_loss);
    }
}
