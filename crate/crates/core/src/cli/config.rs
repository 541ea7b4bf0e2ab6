use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::adapt::AdaptationMode;
use crate::codec::{standard_qps, CommandTemplate, ExternalCodec, HostCodec, IoFormat, QpValue, ToyCodec};
use crate::error::{Error, Result};
use crate::pipeline::ModeSource;
use crate::qmo::{QmoDatasetConfig, QmoNet, QmoTrainConfig};
use crate::restore::{ModelRegistry, RestorationDatasetConfig, RestorationTrainConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CodecKind {
    #[default]
    Toy,
    External,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecConfig {
    pub kind: CodecKind,
    /// Argv template for the external encoder.
    pub encode: Option<String>,
    pub decode: Option<String>,
    pub io_format: IoFormat,
    pub timeout_seconds: u64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        CodecConfig { kind: CodecKind::Toy, encode: None, decode: None, io_format: IoFormat::Y4m, timeout_seconds: 3600 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum QmoSourceKind {
    #[default]
    Oracle,
    Model,
    Fixed,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QmoConfig {
    pub source: QmoSourceKind,
    pub checkpoint: Option<PathBuf>,
    /// Mode used when `source = "fixed"`, e.g. "M2".
    pub mode: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestoreConfig {
    pub registry: Option<PathBuf>,
    /// Use the non-learned inverse for every segment.
    pub baseline: bool,
}

/// Everything a command needs, read from one TOML file and then overridden
/// by command-line flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub work_dir: PathBuf,
    pub qps: Vec<QpValue>,
    /// Worker threads; 0 lets the runtime decide.
    pub jobs: usize,
    pub codec: CodecConfig,
    pub qmo: QmoConfig,
    pub restore: RestoreConfig,
    pub label: QmoDatasetConfig,
    pub train_qmo: QmoTrainConfig,
    pub restore_dataset: RestorationDatasetConfig,
    pub train_restore: RestorationTrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            work_dir: PathBuf::from("work"),
            qps: standard_qps().to_vec(),
            jobs: 0,
            codec: CodecConfig::default(),
            qmo: QmoConfig::default(),
            restore: RestoreConfig::default(),
            label: QmoDatasetConfig::default(),
            train_qmo: QmoTrainConfig::default(),
            restore_dataset: RestorationDatasetConfig::default(),
            train_restore: RestorationTrainConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Propagates the top-level seed into every sub-configuration.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.label.seed = seed;
        self.train_qmo.seed = seed;
        self.restore_dataset.seed = seed;
        self.train_restore.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        if self.qps.is_empty() {
            return Err(Error::Config("qp list is empty".into()));
        }
        match self.qmo.source {
            QmoSourceKind::Model => {
                let p = self.qmo.checkpoint.as_ref().ok_or_else(|| Error::Config("qmo.source = model needs qmo.checkpoint".into()))?;
                if !p.exists() {
                    return Err(Error::Config(format!("mode-prediction checkpoint {} does not exist", p.display())));
                }
            }
            QmoSourceKind::Fixed => {
                self.fixed_mode()?;
            }
            QmoSourceKind::Oracle => {}
        }
        if self.codec.kind == CodecKind::External && (self.codec.encode.is_none() || self.codec.decode.is_none()) {
            return Err(Error::Config("external codec needs codec.encode and codec.decode templates".into()));
        }
        Ok(())
    }

    fn fixed_mode(&self) -> Result<AdaptationMode> {
        self.qmo.mode.as_deref().ok_or_else(|| Error::Config("qmo.source = fixed needs qmo.mode".into()))?.parse()
    }

    pub fn codec(&self) -> Result<Box<dyn HostCodec>> {
        match self.codec.kind {
            CodecKind::Toy => Ok(Box::new(ToyCodec)),
            CodecKind::External => {
                let enc = CommandTemplate::parse(self.codec.encode.as_deref().unwrap_or_default())?;
                let dec = CommandTemplate::parse(self.codec.decode.as_deref().unwrap_or_default())?;
                Ok(Box::new(
                    ExternalCodec::new(enc, dec, &self.work_dir)
                        .with_timeout(Duration::from_secs(self.codec.timeout_seconds))
                        .with_io_format(self.codec.io_format),
                ))
            }
        }
    }

    pub fn mode_source(&self) -> Result<ModeSource> {
        Ok(match self.qmo.source {
            QmoSourceKind::Oracle => ModeSource::Oracle,
            QmoSourceKind::Fixed => ModeSource::Fixed(self.fixed_mode()?),
            QmoSourceKind::Model => {
                let p = self.qmo.checkpoint.as_ref().ok_or_else(|| Error::Config("qmo.checkpoint not set".into()))?;
                ModeSource::Model(Box::new(QmoNet::load(p)?))
            }
        })
    }

    /// Existing registry for learned restoration, or `None` when decoding
    /// with the baseline inverse.
    pub fn registry(&self) -> Result<Option<ModelRegistry>> {
        if self.restore.baseline {
            return Ok(None);
        }
        match &self.restore.registry {
            Some(dir) if !dir.is_dir() => {
                Err(Error::Config(format!("restoration registry {} is not a directory", dir.display())))
            }
            Some(dir) => ModelRegistry::open(dir).map(Some),
            None => Err(Error::Config("no restoration registry configured (set restore.registry or pass --baseline-restore)".into())),
        }
    }

    /// Label for rate-quality curves produced with this configuration.
    pub fn pipeline_label(&self) -> String {
        let qmo = match self.qmo.source {
            QmoSourceKind::Oracle => "oracle".to_string(),
            QmoSourceKind::Model => "qmo".to_string(),
            QmoSourceKind::Fixed => self.qmo.mode.clone().unwrap_or_default(),
        };
        let restore = if self.restore.baseline { "baseline" } else { "learned" };
        let codec = match self.codec.kind {
            CodecKind::Toy => "toy",
            CodecKind::External => "external",
        };
        format!("{codec}-{qmo}-{restore}")
    }
}
