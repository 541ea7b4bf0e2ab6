//! Decoder-side restoration: a compact residual CNN per (mode, base QP) that
//! refines the baseline inverse of each adapted segment, plus its training
//! loss, patch dataset and on-disk registry.

mod dataset;
mod pyramid;
mod train;

pub use dataset::{
    degrade_sequence, generate_restoration_dataset, plan_patches, PatchPair, PatchPlan, RestorationDatasetConfig,
};
pub use pyramid::{collapse_pyramid, laplacian_pyramid, restoration_loss, restoration_loss_grad, DEFAULT_LEVELS};
pub use train::{evaluate_loss, lr_at_epoch, train_restoration, RestorationTrainConfig, RestorationTrainReport};

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::adapt::{invert_mode_baseline, AdaptationMode};
use crate::codec::QpValue;
use crate::error::{Error, Result};
use crate::frames::{Plane, VideoFrame, VideoSequence};
use crate::nn::{self, LayerSpec, Model, Tensor};

pub const CHANNELS: usize = 32;
pub const CONV_LAYERS: usize = 8;

/// Identifies one trained network. There is none for M0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RestorationModelKey {
    mode: AdaptationMode,
    qp_base: QpValue,
}

impl RestorationModelKey {
    pub fn new(mode: AdaptationMode, qp_base: QpValue) -> Result<Self> {
        if !mode.has_restoration() {
            return Err(Error::NoModelForM0);
        }
        Ok(RestorationModelKey { mode, qp_base })
    }

    pub fn mode(self) -> AdaptationMode {
        self.mode
    }

    pub fn qp_base(self) -> QpValue {
        self.qp_base
    }

    pub fn file_name(self) -> String {
        format!("m{}_qp{}.ckpt", self.mode.flag(), self.qp_base)
    }
}

impl fmt::Display for RestorationModelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@QP{}", self.mode, self.qp_base)
    }
}

/// Eight 3x3 convolutions with 32 channels and ReLUs between them, applied
/// to one plane; the input is added back at the end.
pub fn restoration_model_specs() -> Vec<LayerSpec> {
    let mut specs = Vec::new();
    for i in 0..CONV_LAYERS {
        let cin = if i == 0 { 1 } else { CHANNELS };
        let cout = if i + 1 == CONV_LAYERS { 1 } else { CHANNELS };
        specs.push(LayerSpec::conv2d(cin, cout, 3, 1, 1));
        if i + 1 < CONV_LAYERS {
            specs.push(LayerSpec::Relu);
        }
    }
    specs
}

#[derive(Clone, Debug, PartialEq)]
pub struct RestorationModel {
    key: RestorationModelKey,
    net: Model<f32>,
}

impl RestorationModel {
    /// He-uniform initialization of every layer.
    pub fn new(key: RestorationModelKey, seed: u64) -> Self {
        let net = Model::new(&restoration_model_specs(), true, seed).expect("valid architecture");
        RestorationModel { key, net }
    }

    /// Like [`Self::new`] but with a zero final layer, so the untrained model
    /// is exactly the identity on its input.
    pub fn identity(key: RestorationModelKey, seed: u64) -> Self {
        let mut m = Self::new(key, seed);
        for p in m.net.layers_mut().last_mut().expect("non-empty").params_mut() {
            p.data_mut().fill(0.0);
        }
        m
    }

    pub fn from_model(key: RestorationModelKey, net: Model<f32>) -> Result<Self> {
        if net.specs() != restoration_model_specs() || !net.residual() {
            return Err(Error::InvalidCheckpoint(format!("{key}: not a restoration network")));
        }
        Ok(RestorationModel { key, net })
    }

    pub fn key(&self) -> RestorationModelKey {
        self.key
    }

    pub fn net(&self) -> &Model<f32> {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Model<f32> {
        &mut self.net
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        nn::save_model(&self.net, path)
    }

    pub fn load(key: RestorationModelKey, path: &Path) -> Result<Self> {
        Self::from_model(key, nn::load_model(path)?)
    }

    fn enhance_plane(&self, plane: &Plane, peak: f64, max: u16) -> Result<Plane> {
        let (w, h) = (plane.width(), plane.height());
        let scale = 1.0 / peak;
        let x = Tensor::new(vec![1, 1, h, w], plane.data().iter().map(|&v| (f64::from(v) * scale) as f32).collect())?;
        let y = self.net.forward(&x)?;
        let data = y.data().iter().map(|&v| (f64::from(v) * peak).round().clamp(0.0, f64::from(max)) as u16).collect();
        Plane::new(w, h, data)
    }
}

/// Baseline inverse of `mode` followed by per-plane CNN refinement, clipped
/// to the sample range.
pub fn restore_forward(decoded: &VideoFrame, mode: AdaptationMode, model: &RestorationModel) -> Result<VideoFrame> {
    if !mode.has_restoration() {
        return Err(Error::NoModelForM0);
    }
    if model.key.mode != mode {
        return Err(Error::ModelMismatch(format!("model {} applied to a {mode} segment", model.key)));
    }
    let base = invert_mode_baseline(decoded, mode)?;
    let (peak, max) = (base.peak(), base.max_value());
    let [y, u, v] = base.planes();
    let planes = [model.enhance_plane(y, peak, max)?, model.enhance_plane(u, peak, max)?, model.enhance_plane(v, peak, max)?];
    VideoFrame::new(planes, base.container_bit_depth(), base.effective_bit_depth())
}

/// [`restore_forward`] over a decoded segment, frames in parallel.
pub fn restore_sequence(decoded: &VideoSequence, mode: AdaptationMode, model: &RestorationModel) -> Result<VideoSequence> {
    let frames = decoded.frames().par_iter().map(|f| restore_forward(f, mode, model)).collect::<Result<Vec<_>>>()?;
    VideoSequence::new(frames, decoded.frame_rate())
}

const MANIFEST: &str = "manifest.txt";

/// Directory of checkpoints named `m<mode>_qp<qp>.ckpt` and a manifest
/// listing one `M<mode> <qp> <file>` line per available key.
#[derive(Clone, Debug)]
pub struct ModelRegistry {
    dir: PathBuf,
    keys: BTreeSet<RestorationModelKey>,
}

impl ModelRegistry {
    /// Opens `dir`; a missing directory or manifest is an empty registry.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        let manifest = dir.join(MANIFEST);
        let mut keys = BTreeSet::new();
        if manifest.exists() {
            let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
            for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let bad = || Error::Config(format!("{}:{}: malformed manifest line {line:?}", manifest.display(), n + 1));
                let mut it = line.split_whitespace();
                let mode: AdaptationMode = it.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                let qp = it.next().and_then(|q| q.parse::<i32>().ok()).ok_or_else(bad)?;
                let key = RestorationModelKey::new(mode, QpValue::new(qp)?)?;
                if it.next() != Some(key.file_name().as_str()) {
                    return Err(bad());
                }
                keys.insert(key);
            }
        }
        Ok(ModelRegistry { dir, keys })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn keys(&self) -> impl Iterator<Item = RestorationModelKey> + '_ {
        self.keys.iter().copied()
    }

    pub fn path_of(&self, key: RestorationModelKey) -> PathBuf {
        self.dir.join(key.file_name())
    }

    /// Writes the checkpoint and records it in the manifest, replacing any
    /// previous model for the same key.
    pub fn insert(&mut self, model: &RestorationModel) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path_of(model.key);
        model.save(&path)?;
        self.keys.insert(model.key);
        let manifest: String =
            self.keys.iter().map(|k| format!("{} {} {}\n", k.mode, k.qp_base, k.file_name())).collect();
        let mpath = self.dir.join(MANIFEST);
        fs::write(&mpath, manifest).map_err(|e| Error::io(&mpath, e))?;
        Ok(path)
    }

    /// The registered key for `mode` whose base QP is closest to `qp_base`
    /// (lower QP on ties).
    pub fn resolve(&self, mode: AdaptationMode, qp_base: QpValue) -> Result<RestorationModelKey> {
        if !mode.has_restoration() {
            return Err(Error::NoModelForM0);
        }
        self.keys
            .iter()
            .filter(|k| k.mode == mode)
            .min_by_key(|k| ((i32::from(k.qp_base.get()) - i32::from(qp_base.get())).abs(), k.qp_base))
            .copied()
            .ok_or(Error::MissingModel { mode: mode.to_string(), qp: qp_base.get() })
    }

    pub fn load(&self, mode: AdaptationMode, qp_base: QpValue) -> Result<RestorationModel> {
        let key = self.resolve(mode, qp_base)?;
        RestorationModel::load(key, &self.path_of(key))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapt::apply_mode;
    use crate::synth;

    fn qp(v: i32) -> QpValue {
        QpValue::new(v).unwrap()
    }

    #[test]
    fn architecture() {
        let specs = restoration_model_specs();
        assert_eq!(specs.iter().filter(|s| matches!(s, LayerSpec::Conv2d { .. })).count(), 8);
        assert_eq!(specs.len(), 15);
        assert!(matches!(RestorationModelKey::new(AdaptationMode::M0, qp(22)), Err(Error::NoModelForM0)));
        assert_eq!(RestorationModelKey::new(AdaptationMode::M3, qp(37)).unwrap().file_name(), "m3_qp37.ckpt");
    }

    #[test]
    fn zero_final_layer_is_baseline() {
        let frame = synth::noise_frame(32, 16, 8, 4);
        for mode in AdaptationMode::CANDIDATES {
            let model = RestorationModel::identity(RestorationModelKey::new(mode, qp(27)).unwrap(), 1);
            let decoded = apply_mode(&frame, mode).unwrap();
            let restored = restore_forward(&decoded, mode, &model).unwrap();
            assert_eq!(restored, invert_mode_baseline(&decoded, mode).unwrap(), "{mode}");
        }
        let f10 = synth::noise_frame(16, 16, 10, 5);
        let model = RestorationModel::identity(RestorationModelKey::new(AdaptationMode::M4, qp(22)).unwrap(), 2);
        assert_eq!(restore_forward(&f10, AdaptationMode::M4, &model).unwrap(), f10);
    }

    #[test]
    fn wrong_mode_rejected() {
        let frame = synth::noise_frame(16, 16, 8, 4);
        let model = RestorationModel::new(RestorationModelKey::new(AdaptationMode::M4, qp(27)).unwrap(), 1);
        assert!(matches!(restore_forward(&frame, AdaptationMode::M0, &model), Err(Error::NoModelForM0)));
        assert!(matches!(restore_forward(&frame, AdaptationMode::M1, &model), Err(Error::ModelMismatch(_))));
    }

    #[test]
    fn output_is_clipped() {
        let frame = synth::noise_frame(16, 16, 8, 4);
        let mut model = RestorationModel::identity(RestorationModelKey::new(AdaptationMode::M4, qp(27)).unwrap(), 1);
        // A large bias on the final layer pushes every sample past white.
        let last = model.net_mut().layers_mut().last_mut().unwrap();
        last.params_mut()[1].data_mut()[0] = 5.0;
        let out = restore_forward(&frame, AdaptationMode::M4, &model).unwrap();
        assert!(out.planes().iter().all(|p| p.data().iter().all(|&v| v == 255)));
    }

    #[test]
    fn registry_roundtrip_and_lookup() {
        let dir = tempfile::tempdir().unwrap();
        let mut reg = ModelRegistry::open(dir.path()).unwrap();
        assert!(matches!(reg.resolve(AdaptationMode::M2, qp(22)), Err(Error::MissingModel { .. })));
        for q in [22, 32] {
            reg.insert(&RestorationModel::new(RestorationModelKey::new(AdaptationMode::M2, qp(q)).unwrap(), 3)).unwrap();
        }
        let reg = ModelRegistry::open(dir.path()).unwrap();
        assert_eq!(reg.keys().count(), 2);
        assert_eq!(reg.resolve(AdaptationMode::M2, qp(26)).unwrap().qp_base(), qp(22));
        assert_eq!(reg.resolve(AdaptationMode::M2, qp(27)).unwrap().qp_base(), qp(22));
        assert_eq!(reg.resolve(AdaptationMode::M2, qp(28)).unwrap().qp_base(), qp(32));
        assert_eq!(reg.resolve(AdaptationMode::M2, qp(51)).unwrap().qp_base(), qp(32));
        assert!(matches!(reg.resolve(AdaptationMode::M0, qp(22)), Err(Error::NoModelForM0)));
        assert!(matches!(reg.resolve(AdaptationMode::M1, qp(22)), Err(Error::MissingModel { .. })));
        let m = reg.load(AdaptationMode::M2, qp(37)).unwrap();
        assert_eq!(m, RestorationModel::new(RestorationModelKey::new(AdaptationMode::M2, qp(32)).unwrap(), 3));
        let text = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
        assert_eq!(text, "M2 22 m2_qp22.ckpt\nM2 32 m2_qp32.ckpt\n");
    }
}
