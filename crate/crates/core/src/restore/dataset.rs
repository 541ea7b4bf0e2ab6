use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adapt::{apply_mode_seq, invert_mode_baseline_seq, AdaptationMode};
use crate::codec::{HostCodec, QpValue, StreamInfo};
use crate::error::{Error, Result};
use crate::frames::{Plane, VideoSequence};
use crate::nn::Tensor;
use crate::qmo::{effective_qp, SourceDims};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RestorationDatasetConfig {
    pub patches: usize,
    pub patch_size: usize,
    pub seed: u64,
}

impl Default for RestorationDatasetConfig {
    fn default() -> Self {
        RestorationDatasetConfig { patches: 50_000, patch_size: 96, seed: 0 }
    }
}

/// Co-located luma patches scaled to [0, 1], each `[1, 1, P, P]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchPair {
    pub degraded: Tensor<f32>,
    pub target: Tensor<f32>,
}

/// One planned crop. `transform` indexes the eight rotations and flips of
/// the square: bit 0 flips horizontally, bit 1 vertically, bit 2 transposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchPlan {
    pub source: usize,
    pub frame: usize,
    pub x: usize,
    pub y: usize,
    pub transform: u8,
}

pub fn plan_patches(sources: &[SourceDims], cfg: &RestorationDatasetConfig) -> Result<Vec<PatchPlan>> {
    if sources.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let p = cfg.patch_size;
    for (i, s) in sources.iter().enumerate() {
        if s.width < p || s.height < p || s.frames == 0 {
            return Err(Error::SourceTooSmall(format!(
                "source #{i} is {}x{} with {} frames; patches are {p}x{p}",
                s.width, s.height, s.frames
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok((0..cfg.patches)
        .map(|_| {
            let source = rng.random_range(0..sources.len());
            let s = &sources[source];
            PatchPlan {
                source,
                frame: rng.random_range(0..s.frames),
                x: rng.random_range(0..=s.width - p),
                y: rng.random_range(0..=s.height - p),
                transform: rng.random_range(0..8),
            }
        })
        .collect())
}

/// The decoder-side input for `mode`: adapt, encode at the effective QP,
/// decode and invert with the baseline filters.
pub fn degrade_sequence(
    seq: &VideoSequence,
    mode: AdaptationMode,
    qp_base: QpValue,
    codec: &dyn HostCodec,
) -> Result<VideoSequence> {
    let adapted = apply_mode_seq(seq, mode)?;
    let stream = codec.encode(&adapted, effective_qp(qp_base, mode))?;
    let decoded = codec.decode(&stream.payload, &StreamInfo::of(&adapted)?)?;
    invert_mode_baseline_seq(&decoded, mode)
}

fn patch(plane: &Plane, plan: &PatchPlan, size: usize, peak: f64) -> Tensor<f32> {
    let scale = 1.0 / peak;
    let mut data = Vec::with_capacity(size * size);
    for r in 0..size {
        for c in 0..size {
            let (mut u, mut v) = (c, r);
            if plan.transform & 4 != 0 {
                std::mem::swap(&mut u, &mut v);
            }
            if plan.transform & 1 != 0 {
                u = size - 1 - u;
            }
            if plan.transform & 2 != 0 {
                v = size - 1 - v;
            }
            data.push((f64::from(plane.get(plan.x + u, plan.y + v)) * scale) as f32);
        }
    }
    Tensor::new(vec![1, 1, size, size], data).expect("square patch")
}

/// Exactly `cfg.patches` pairs, deterministic in `cfg.seed`. Only sources
/// that receive at least one patch are encoded.
pub fn generate_restoration_dataset(
    sources: &[VideoSequence],
    codec: &dyn HostCodec,
    mode: AdaptationMode,
    qp_base: QpValue,
    cfg: &RestorationDatasetConfig,
) -> Result<Vec<PatchPair>> {
    if !mode.has_restoration() {
        return Err(Error::NoModelForM0);
    }
    let dims: Vec<SourceDims> = sources.iter().map(SourceDims::of).collect();
    let plan = plan_patches(&dims, cfg)?;
    let mut out: Vec<Option<PatchPair>> = vec![None; plan.len()];
    for (si, src) in sources.iter().enumerate() {
        if !plan.iter().any(|p| p.source == si) {
            continue;
        }
        let degraded = degrade_sequence(src, mode, qp_base, codec)?;
        log::debug!("restoration dataset: source #{si} degraded with {mode} at QP {qp_base}");
        for (slot, p) in out.iter_mut().zip(&plan).filter(|(_, p)| p.source == si) {
            let peak = src.frames()[p.frame].peak();
            *slot = Some(PatchPair {
                degraded: patch(degraded.frames()[p.frame].y(), p, cfg.patch_size, peak),
                target: patch(src.frames()[p.frame].y(), p, cfg.patch_size, peak),
            });
        }
    }
    Ok(out.into_iter().map(|p| p.expect("every planned patch filled")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::ToyCodec;
    use crate::synth;

    fn cfg(patches: usize, patch_size: usize, seed: u64) -> RestorationDatasetConfig {
        RestorationDatasetConfig { patches, patch_size, seed }
    }

    #[test]
    fn plan_is_reproducible_and_in_bounds() {
        let dims = [SourceDims { width: 200, height: 120, frames: 10 }];
        let a = plan_patches(&dims, &cfg(64, 96, 7)).unwrap();
        assert_eq!(a, plan_patches(&dims, &cfg(64, 96, 7)).unwrap());
        assert_ne!(a, plan_patches(&dims, &cfg(64, 96, 8)).unwrap());
        assert_eq!(a.len(), 64);
        assert!(a.iter().all(|p| p.x + 96 <= 200 && p.y + 96 <= 120 && p.frame < 10 && p.transform < 8));
        assert!(a.iter().map(|p| p.transform).collect::<std::collections::BTreeSet<_>>().len() == 8);
        let small = [SourceDims { width: 95, height: 200, frames: 3 }];
        assert!(matches!(plan_patches(&small, &cfg(1, 96, 0)), Err(Error::SourceTooSmall(_))));
    }

    #[test]
    fn transforms_permute_the_patch() {
        let plane = Plane::new(4, 4, (0..16).collect()).unwrap();
        let base = PatchPlan { source: 0, frame: 0, x: 0, y: 0, transform: 0 };
        let ident = patch(&plane, &base, 4, 1.0);
        assert_eq!(ident.data()[..4], [0.0, 1.0, 2.0, 3.0]);
        let mut seen = std::collections::BTreeSet::new();
        for t in 0..8 {
            let p = patch(&plane, &PatchPlan { transform: t, ..base }, 4, 1.0);
            let mut sorted: Vec<u32> = p.data().iter().map(|&v| v as u32).collect();
            seen.insert(sorted.clone());
            sorted.sort();
            assert_eq!(sorted, (0..16).collect::<Vec<_>>());
        }
        assert_eq!(seen.len(), 8);
    }

    #[test]
    fn generates_requested_count() {
        let seq = synth::textured_noise_sequence(48, 32, 3, 25, 1);
        let codec = ToyCodec;
        let pairs =
            generate_restoration_dataset(std::slice::from_ref(&seq), &codec, AdaptationMode::M1, QpValue::new(32).unwrap(), &cfg(10, 16, 2))
                .unwrap();
        assert_eq!(pairs.len(), 10);
        for p in &pairs {
            assert_eq!(p.degraded.shape(), &[1, 1, 16, 16]);
            assert!(p.target.data().iter().all(|v| (0.0..=1.0).contains(v)));
            assert_ne!(p.degraded, p.target);
        }
        assert!(matches!(
            generate_restoration_dataset(&[seq], &codec, AdaptationMode::M0, QpValue::new(32).unwrap(), &cfg(1, 16, 0)),
            Err(Error::NoModelForM0)
        ));
    }
}
