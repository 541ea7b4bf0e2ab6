//! Oracle-labelled training data: random spatio-temporal crops, labelled per
//! base QP, then split into 5-frame clips.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::oracle::{build_anchor_curve, oracle_select_mode};
use super::CLIP_FRAMES;
use crate::adapt::AdaptationMode;
use crate::codec::{standard_qps, HostCodec, QpValue};
use crate::error::{Error, Result};
use crate::frames::{VideoFrame, VideoSequence};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QmoDatasetConfig {
    pub crops_per_source: usize,
    /// Square crop side in luma samples.
    pub crop_size: usize,
    pub crop_frames: usize,
    pub qps: Vec<QpValue>,
    pub clips_per_qp: usize,
    pub min_source_frames: usize,
    pub seed: u64,
}

impl Default for QmoDatasetConfig {
    fn default() -> Self {
        QmoDatasetConfig {
            crops_per_source: 64,
            crop_size: 256,
            crop_frames: 32,
            qps: standard_qps().to_vec(),
            clips_per_qp: 10,
            min_source_frames: 64,
            seed: 0,
        }
    }
}

impl QmoDatasetConfig {
    pub fn samples_per_source(&self) -> usize {
        self.crops_per_source * self.qps.len() * self.clips_per_qp
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourceDims {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
}

impl SourceDims {
    pub fn of(seq: &VideoSequence) -> Self {
        SourceDims { width: seq.width(), height: seq.height(), frames: seq.len() }
    }
}

/// Where a 5-frame clip lives in its source.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClipRef {
    pub source: usize,
    pub frame_offset: usize,
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl ClipRef {
    pub fn frames(&self, sources: &[VideoSequence]) -> Result<Vec<VideoFrame>> {
        let src = sources
            .get(self.source)
            .ok_or_else(|| Error::SourceTooSmall(format!("no source #{}", self.source)))?;
        let end = self.frame_offset + CLIP_FRAMES;
        if end > src.len() {
            return Err(Error::SourceTooSmall(format!("clip frames {}..{end} outside source #{}", self.frame_offset, self.source)));
        }
        src.frames()[self.frame_offset..end].iter().map(|f| f.crop(self.x, self.y, self.width, self.height)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QmoSample {
    pub clip: ClipRef,
    pub qp_base: QpValue,
    pub label: AdaptationMode,
}

/// A crop to be labelled, with its clip offsets for every QP.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlannedCrop {
    pub source: usize,
    pub frame_offset: usize,
    pub x: usize,
    pub y: usize,
    /// `clip_offsets[q][j]`: start of clip `j` for `qps[q]`, relative to the crop.
    pub clip_offsets: Vec<Vec<usize>>,
}

fn check(dims: &SourceDims, i: usize, cfg: &QmoDatasetConfig) -> Result<()> {
    let min_frames = cfg.min_source_frames.max(cfg.crop_frames);
    if dims.frames < min_frames || dims.width < cfg.crop_size || dims.height < cfg.crop_size {
        return Err(Error::SourceTooSmall(format!(
            "source #{i} is {}x{} with {} frames; need {s}x{s} and {min_frames} frames",
            dims.width,
            dims.height,
            dims.frames,
            s = cfg.crop_size
        )));
    }
    Ok(())
}

/// Draws every crop position without encoding anything.
pub fn plan_qmo_dataset(sources: &[SourceDims], cfg: &QmoDatasetConfig) -> Result<Vec<PlannedCrop>> {
    if cfg.crop_frames < CLIP_FRAMES || cfg.crop_size < 2 || !cfg.crop_size.is_multiple_of(2) {
        return Err(Error::Config(format!("crop {}x{}x{} is not usable", cfg.crop_size, cfg.crop_size, cfg.crop_frames)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut plan = Vec::with_capacity(sources.len() * cfg.crops_per_source);
    for (s, dims) in sources.iter().enumerate() {
        check(dims, s, cfg)?;
        for _ in 0..cfg.crops_per_source {
            let frame_offset = rng.random_range(0..=dims.frames - cfg.crop_frames);
            let x = 2 * rng.random_range(0..=(dims.width - cfg.crop_size) / 2);
            let y = 2 * rng.random_range(0..=(dims.height - cfg.crop_size) / 2);
            let clip_offsets = cfg
                .qps
                .iter()
                .map(|_| (0..cfg.clips_per_qp).map(|_| rng.random_range(0..=cfg.crop_frames - CLIP_FRAMES)).collect())
                .collect();
            plan.push(PlannedCrop { source: s, frame_offset, x, y, clip_offsets });
        }
    }
    Ok(plan)
}

/// Total samples a plan yields.
pub fn planned_sample_count(plan: &[PlannedCrop]) -> usize {
    plan.iter().map(|c| c.clip_offsets.iter().map(Vec::len).sum::<usize>()).sum()
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct QmoDataset {
    /// Source identifiers (typically paths), indexed by [`ClipRef::source`].
    pub sources: Vec<String>,
    pub samples: Vec<QmoSample>,
}

#[derive(Serialize, Deserialize)]
struct IndexRow {
    source: String,
    frame_offset: usize,
    x: usize,
    y: usize,
    width: usize,
    height: usize,
    qp_base: u8,
    label: u8,
}

impl QmoDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Per-class sample counts, indexed by mode.
    pub fn label_histogram(&self) -> [usize; 5] {
        let mut h = [0; 5];
        for s in &self.samples {
            h[s.label.index()] += 1;
        }
        h
    }

    /// Writes the sample index as CSV.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        for s in &self.samples {
            let c = s.clip;
            w.serialize(IndexRow {
                source: self.sources.get(c.source).cloned().unwrap_or_else(|| c.source.to_string()),
                frame_offset: c.frame_offset,
                x: c.x,
                y: c.y,
                width: c.width,
                height: c.height,
                qp_base: s.qp_base.get(),
                label: s.label.flag(),
            })
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        let mut ds = QmoDataset::default();
        for (i, row) in r.deserialize::<IndexRow>().enumerate() {
            let row = row.map_err(|e| Error::MalformedRow { row: i + 1, msg: e.to_string() })?;
            let source = match ds.sources.iter().position(|s| *s == row.source) {
                Some(k) => k,
                None => {
                    ds.sources.push(row.source.clone());
                    ds.sources.len() - 1
                }
            };
            let bad = |msg: String| Error::MalformedRow { row: i + 1, msg };
            ds.samples.push(QmoSample {
                clip: ClipRef { source, frame_offset: row.frame_offset, x: row.x, y: row.y, width: row.width, height: row.height },
                qp_base: QpValue::new(i32::from(row.qp_base)).map_err(|e| bad(e.to_string()))?,
                label: AdaptationMode::from_flag(row.label).map_err(|e| bad(e.to_string()))?,
            });
        }
        Ok(ds)
    }
}

/// Oracle-labels every planned crop. Crops are labelled in parallel; the
/// result does not depend on the thread count.
pub fn generate_qmo_dataset(
    sources: &[VideoSequence],
    source_names: &[String],
    codec: &dyn HostCodec,
    cfg: &QmoDatasetConfig,
) -> Result<QmoDataset> {
    let dims: Vec<_> = sources.iter().map(SourceDims::of).collect();
    let plan = plan_qmo_dataset(&dims, cfg)?;
    let size = cfg.crop_size;
    let per_crop: Vec<Vec<QmoSample>> = plan
        .par_iter()
        .map(|c| {
            let frames = sources[c.source].frames()[c.frame_offset..c.frame_offset + cfg.crop_frames]
                .iter()
                .map(|f| f.crop(c.x, c.y, size, size))
                .collect::<Result<Vec<_>>>()?;
            let crop = VideoSequence::new(frames, sources[c.source].frame_rate())?;
            let anchor = build_anchor_curve(&crop, codec, None)?;
            let mut out = Vec::with_capacity(cfg.qps.len() * cfg.clips_per_qp);
            for (q, &qp) in cfg.qps.iter().enumerate() {
                let label = oracle_select_mode(&crop, qp, codec, &anchor)?.mode;
                log::debug!("source {} crop @{}+{}+{}: qp {qp} -> {label}", c.source, c.frame_offset, c.x, c.y);
                for &off in &c.clip_offsets[q] {
                    let clip = ClipRef { source: c.source, frame_offset: c.frame_offset + off, x: c.x, y: c.y, width: size, height: size };
                    out.push(QmoSample { clip, qp_base: qp, label });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let names = if source_names.len() == sources.len() {
        source_names.to_vec()
    } else {
        (0..sources.len()).map(|i| format!("source{i}")).collect()
    };
    Ok(QmoDataset { sources: names, samples: per_crop.into_iter().flatten().collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::ToyCodec;
    use crate::synth;

    #[test]
    fn full_scale_counts() {
        let cfg = QmoDatasetConfig::default();
        let hd = SourceDims { width: 1920, height: 1080, frames: 64 };
        assert_eq!(planned_sample_count(&plan_qmo_dataset(&[hd], &cfg).unwrap()), 2560);
        assert_eq!(planned_sample_count(&plan_qmo_dataset(&vec![hd; 200], &cfg).unwrap()), 512_000);
        let desk = QmoDatasetConfig { crops_per_source: 4, ..cfg.clone() };
        assert_eq!(planned_sample_count(&plan_qmo_dataset(&[hd, hd], &desk).unwrap()), 320);
        assert_eq!(cfg.samples_per_source(), 2560);
    }

    #[test]
    fn rejects_small_sources() {
        let cfg = QmoDatasetConfig::default();
        let short = SourceDims { width: 1920, height: 1080, frames: 63 };
        assert!(matches!(plan_qmo_dataset(&[short], &cfg), Err(Error::SourceTooSmall(_))));
        let narrow = SourceDims { width: 255, height: 1080, frames: 64 };
        assert!(plan_qmo_dataset(&[narrow], &cfg).is_err());
    }

    #[test]
    fn plan_is_deterministic_and_in_bounds() {
        let cfg = QmoDatasetConfig { seed: 42, ..Default::default() };
        let d = SourceDims { width: 300, height: 260, frames: 70 };
        let a = plan_qmo_dataset(&[d], &cfg).unwrap();
        assert_eq!(a, plan_qmo_dataset(&[d], &cfg).unwrap());
        for c in &a {
            assert!(c.frame_offset + 32 <= 70 && c.x + 256 <= 300 && c.y + 256 <= 260);
            assert!(c.x % 2 == 0 && c.y % 2 == 0);
            assert!(c.clip_offsets.iter().flatten().all(|&o| o + 5 <= 32));
        }
        let other = QmoDatasetConfig { seed: 43, ..cfg };
        assert_ne!(a, plan_qmo_dataset(&[d], &other).unwrap());
    }

    #[test]
    fn desk_generation_and_index_roundtrip() {
        let sources = vec![synth::gradient_sequence(48, 48, 12, 30), synth::textured_noise_sequence(48, 48, 12, 30, 5)];
        let cfg = QmoDatasetConfig {
            crops_per_source: 2,
            crop_size: 32,
            crop_frames: 8,
            clips_per_qp: 3,
            min_source_frames: 8,
            seed: 7,
            ..Default::default()
        };
        let names = vec!["a.y4m".to_string(), "b.y4m".to_string()];
        let ds = generate_qmo_dataset(&sources, &names, &ToyCodec, &cfg).unwrap();
        assert_eq!(ds.len(), 2 * 2 * 4 * 3);
        assert_eq!(ds, generate_qmo_dataset(&sources, &names, &ToyCodec, &cfg).unwrap());
        let clip = ds.samples[0].clip.frames(&sources).unwrap();
        assert_eq!(clip.len(), 5);
        assert_eq!(clip[0].width(), 32);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("index.csv");
        ds.save(&p).unwrap();
        assert_eq!(QmoDataset::load(&p).unwrap(), ds);
    }
}
