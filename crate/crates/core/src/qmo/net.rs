use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModeDecision, CLIP_FRAMES};
use crate::adapt::AdaptationMode;
use crate::codec::QpValue;
use crate::error::{Error, Result};
use crate::frames::VideoFrame;
use crate::nn::{self, cross_entropy, softmax_rows, LayerSpec, Model, Tensor};

/// Three strided 3-D conv stages (16, 32, 64 channels), global pooling and a
/// five-way classifier.
pub fn qmo_model_specs() -> Vec<LayerSpec> {
    let stage = |i, o| LayerSpec::Conv3d { in_channels: i, out_channels: o, kernel: [3; 3], stride: [1, 2, 2], padding: [1; 3] };
    vec![
        stage(4, 16),
        LayerSpec::Relu,
        stage(16, 32),
        LayerSpec::Relu,
        stage(32, 64),
        LayerSpec::Relu,
        LayerSpec::GlobalAvgPool,
        LayerSpec::Linear { in_features: 64, out_features: 5 },
    ]
}

/// Network input `[1, 4, 5, H, W]`: Y, U and V (nearest-neighbour upsampled
/// to the luma grid) scaled to [0, 1], plus a constant plane of `qp / 51`.
pub fn clip_tensor(frames: &[VideoFrame], qp_base: QpValue) -> Result<Tensor<f32>> {
    if frames.len() != CLIP_FRAMES {
        return Err(Error::WrongFrameCount { expected: CLIP_FRAMES, got: frames.len() });
    }
    let (w, h) = (frames[0].width(), frames[0].height());
    if frames.iter().any(|f| !f.same_format(&frames[0])) {
        return Err(Error::GeometryMismatch("clip frames differ in format".into()));
    }
    let plane_len = w * h;
    let mut data = vec![0.0f32; 4 * CLIP_FRAMES * plane_len];
    let qp_plane = f32::from(qp_base.get()) / f32::from(QpValue::MAX);
    for (t, f) in frames.iter().enumerate() {
        let scale = 1.0 / f.peak() as f32;
        for c in 0..3 {
            let p = &f.planes()[c];
            let dst = &mut data[(c * CLIP_FRAMES + t) * plane_len..][..plane_len];
            for y in 0..h {
                for x in 0..w {
                    let v = if c == 0 { p.get(x, y) } else { p.get(x / 2, y / 2) };
                    dst[y * w + x] = f32::from(v) * scale;
                }
            }
        }
        data[(3 * CLIP_FRAMES + t) * plane_len..][..plane_len].fill(qp_plane);
    }
    Tensor::new(vec![1, 4, CLIP_FRAMES, h, w], data)
}

fn decisions(logits: &Tensor<f32>) -> Result<Vec<ModeDecision>> {
    Ok(softmax_rows(logits)?
        .into_iter()
        .map(|p| {
            let (k, &conf) = p.iter().enumerate().fold((0, &p[0]), |best, cur| if cur.1 > best.1 { cur } else { best });
            ModeDecision::new(AdaptationMode::ALL[k], conf)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct QmoNet {
    model: Model<f32>,
}

impl QmoNet {
    /// He-uniform convolutions; the classifier starts at zero so an untrained
    /// network is maximally uncertain.
    pub fn new(seed: u64) -> Self {
        let mut model = Model::new(&qmo_model_specs(), false, seed).expect("valid architecture");
        let last = model.layers_mut().last_mut().expect("non-empty");
        for p in last.params_mut() {
            p.data_mut().fill(0.0);
        }
        QmoNet { model }
    }

    pub fn from_model(model: Model<f32>) -> Result<Self> {
        if model.specs() != qmo_model_specs() || model.residual() {
            return Err(Error::InvalidCheckpoint("not a mode-prediction network".into()));
        }
        Ok(QmoNet { model })
    }

    pub fn model(&self) -> &Model<f32> {
        &self.model
    }

    pub fn model_mut(&mut self) -> &mut Model<f32> {
        &mut self.model
    }

    pub fn predict(&self, frames: &[VideoFrame], qp_base: QpValue) -> Result<ModeDecision> {
        let x = clip_tensor(frames, qp_base)?;
        Ok(decisions(&self.model.forward(&x)?)?[0])
    }

    /// Decisions for a batch of `[N, 4, 5, H, W]` inputs.
    pub fn predict_batch(&self, x: &Tensor<f32>) -> Result<Vec<ModeDecision>> {
        decisions(&self.model.forward(x)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        nn::save_model(&self.model, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_model(nn::load_model(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QmoTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for QmoTrainConfig {
    fn default() -> Self {
        QmoTrainConfig { epochs: 20, lr: 1e-3, batch_size: 16, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QmoTrainReport {
    pub epoch_losses: Vec<f64>,
    /// Loss of the untrained network over the whole set.
    pub initial_loss: f64,
    pub train_accuracy: f64,
}

/// Trains on in-memory `(input, label)` pairs.
pub fn train_qmo(examples: &[(Tensor<f32>, usize)], cfg: &QmoTrainConfig) -> Result<(QmoNet, QmoTrainReport)> {
    train_qmo_with(examples.len(), |i| Ok(examples[i].clone()), cfg)
}

/// Trains on `n` examples produced on demand by `fetch`, so large sets never
/// need to be resident at once.
pub fn train_qmo_with(
    n: usize,
    fetch: impl Fn(usize) -> Result<(Tensor<f32>, usize)>,
    cfg: &QmoTrainConfig,
) -> Result<(QmoNet, QmoTrainReport)> {
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let batch = cfg.batch_size.max(1);
    let mut net = QmoNet::new(cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let fetch_batch = |idx: &[usize]| -> Result<(Tensor<f32>, Vec<usize>)> {
        let (xs, ys): (Vec<_>, Vec<_>) = idx.iter().map(|&i| fetch(i)).collect::<Result<Vec<_>>>()?.into_iter().unzip();
        Ok((Tensor::stack_batch(&xs)?, ys))
    };
    let evaluate = |net: &QmoNet| -> Result<(f64, f64)> {
        let (mut loss, mut correct) = (0.0, 0usize);
        let all: Vec<usize> = (0..n).collect();
        for chunk in all.chunks(batch) {
            let (x, y) = fetch_batch(chunk)?;
            let logits = net.model.forward(&x)?;
            loss += cross_entropy(&logits, &y)?.0 * chunk.len() as f64;
            correct += decisions(&logits)?.iter().zip(&y).filter(|(d, &l)| d.mode.index() == l).count();
        }
        Ok((loss / n as f64, correct as f64 / n as f64))
    };
    let initial_loss = evaluate(&net)?.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let (x, y) = fetch_batch(chunk)?;
            let logits = net.model.forward_train(&x)?;
            let (loss, grad) = cross_entropy(&logits, &y)?;
            let grads = net.model.backward(&grad)?;
            net.model.adam_step(&grads, cfg.lr)?;
            total += loss * chunk.len() as f64;
        }
        let mean = total / n as f64;
        log::info!("qmo epoch {epoch}/{}: loss {mean:.5}", cfg.epochs);
        epoch_losses.push(mean);
    }
    let (_, train_accuracy) = evaluate(&net)?;
    Ok((net, QmoTrainReport { epoch_losses, initial_loss, train_accuracy }))
}
