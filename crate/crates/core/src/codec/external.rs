//! External encoder/decoder executables driven through argv templates.
//!
//! Templates are split on whitespace and never passed through a shell. The
//! placeholders `{input}`, `{output}`, `{qp}`, `{width}`, `{height}`, `{fps}`
//! and `{bitdepth}` are substituted per argument. Each call gets its own
//! temporary directory under the configured work directory.

use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{EncodedStream, HostCodec, QpValue, StreamInfo};
use crate::error::{Error, Result};
use crate::frames::{self, RawVideoInfo, VideoSequence};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandTemplate {
    args: Vec<String>,
}

impl CommandTemplate {
    pub fn new(args: Vec<String>) -> Result<Self> {
        if args.first().is_none_or(|p| p.is_empty()) {
            return Err(Error::InvalidTemplate("empty command".into()));
        }
        Ok(CommandTemplate { args })
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::new(s.split_whitespace().map(str::to_string).collect())
    }

    pub fn program(&self) -> &str {
        &self.args[0]
    }

    pub fn args(&self) -> &[String] {
        &self.args
    }

    fn render(&self, vars: &[(&str, String)]) -> Vec<String> {
        self.args
            .iter()
            .map(|a| {
                vars.iter().fold(a.clone(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v))
            })
            .collect()
    }
}

/// File format handed to and read back from the external tools.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IoFormat {
    #[default]
    Y4m,
    Raw,
}

#[derive(Clone, Debug)]
pub struct ExternalCodec {
    pub name: String,
    pub encode: CommandTemplate,
    pub decode: CommandTemplate,
    pub work_dir: PathBuf,
    pub timeout: Duration,
    pub io_format: IoFormat,
}

impl ExternalCodec {
    pub fn new(encode: CommandTemplate, decode: CommandTemplate, work_dir: impl Into<PathBuf>) -> Self {
        ExternalCodec {
            name: encode.program().rsplit('/').next().unwrap_or("external").to_string(),
            encode,
            decode,
            work_dir: work_dir.into(),
            timeout: Duration::from_secs(3600),
            io_format: IoFormat::Y4m,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_io_format(mut self, fmt: IoFormat) -> Self {
        self.io_format = fmt;
        self
    }

    fn scratch(&self) -> Result<tempfile::TempDir> {
        std::fs::create_dir_all(&self.work_dir).map_err(|e| Error::io(&self.work_dir, e))?;
        tempfile::Builder::new().prefix("extcodec-").tempdir_in(&self.work_dir).map_err(|e| Error::io(&self.work_dir, e))
    }

    fn video_ext(&self) -> &'static str {
        match self.io_format {
            IoFormat::Y4m => "y4m",
            IoFormat::Raw => "yuv",
        }
    }

    fn run(&self, template: &CommandTemplate, vars: &[(&str, String)], output: &Path) -> Result<Vec<u8>> {
        let argv = template.render(vars);
        let program = argv[0].clone();
        let log_path = output.with_extension("log");
        let log = std::fs::File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
        let mut child = Command::new(&program)
            .args(&argv[1..])
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(log)
            .spawn()
            .map_err(|source| Error::SpawnFailure { program: program.clone(), source })?;
        let start = Instant::now();
        let status = loop {
            match child.try_wait().map_err(|e| Error::io(&program, e))? {
                Some(status) => break status,
                None if start.elapsed() >= self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(Error::Timeout { program, seconds: self.timeout.as_secs() });
                }
                None => std::thread::sleep(Duration::from_millis(5)),
            }
        };
        if !status.success() {
            let stderr = std::fs::read_to_string(&log_path).unwrap_or_default();
            log::warn!("{program} failed: {}", stderr.trim());
            return Err(Error::ExternalStatus { program, status: status.to_string() });
        }
        std::fs::read(output).map_err(|_| Error::MissingOutput { program, path: output.to_path_buf() })
    }

    /// Runs the encode template and returns the produced file verbatim.
    pub fn external_encode(&self, seq: &VideoSequence, qp: QpValue) -> Result<EncodedStream> {
        let info = RawVideoInfo::of(seq)?;
        let dir = self.scratch()?;
        let input = dir.path().join(format!("input.{}", self.video_ext()));
        let output = dir.path().join("output.bin");
        match self.io_format {
            IoFormat::Y4m => frames::write_y4m(seq, &input)?,
            IoFormat::Raw => frames::write_raw(seq, &input, None)?,
        }
        let vars = vars(&input, &output, Some(qp), &info);
        let payload = self.run(&self.encode, &vars, &output)?;
        let bits = payload.len() as u64 * 8;
        Ok(EncodedStream { payload, bits })
    }

    /// Runs the decode template on `payload` and reads the reconstruction.
    pub fn external_decode(&self, payload: &[u8], info: &StreamInfo) -> Result<VideoSequence> {
        let dir = self.scratch()?;
        let input = dir.path().join("input.bin");
        let output = dir.path().join(format!("output.{}", self.video_ext()));
        std::fs::write(&input, payload).map_err(|e| Error::io(&input, e))?;
        let raw = RawVideoInfo {
            width: info.width,
            height: info.height,
            frame_rate: info.frame_rate,
            bit_depth: info.container_bit_depth,
            effective_bit_depth: info.container_bit_depth,
        };
        let vars = vars(&input, &output, None, &raw);
        self.run(&self.decode, &vars, &output)?;
        let seq = match self.io_format {
            IoFormat::Y4m => frames::read_y4m(&output)?,
            IoFormat::Raw => frames::read_raw(&output, &raw)?,
        };
        if seq.len() != info.frame_count || seq.width() != info.width || seq.height() != info.height {
            return Err(Error::GeometryMismatch(format!(
                "external decoder produced {} frames of {}x{}, expected {} of {}x{}",
                seq.len(),
                seq.width(),
                seq.height(),
                info.frame_count,
                info.width,
                info.height
            )));
        }
        // Real decoders do not know about effective bit depth; clip back into it.
        let ebd = info.effective_bit_depth;
        seq.try_map(|f| f.clone().with_effective_bit_depth(ebd))
    }
}

fn vars(input: &Path, output: &Path, qp: Option<QpValue>, info: &RawVideoInfo) -> Vec<(&'static str, String)> {
    let mut v = vec![
        ("input", input.display().to_string()),
        ("output", output.display().to_string()),
        ("width", info.width.to_string()),
        ("height", info.height.to_string()),
        ("fps", format!("{}", info.frame_rate.as_f64())),
        ("bitdepth", info.bit_depth.to_string()),
    ];
    if let Some(qp) = qp {
        v.push(("qp", qp.to_string()));
    }
    v
}

impl HostCodec for ExternalCodec {
    fn name(&self) -> &str {
        &self.name
    }

    fn encode(&self, seq: &VideoSequence, qp: QpValue) -> Result<EncodedStream> {
        self.external_encode(seq, qp)
    }

    fn decode(&self, payload: &[u8], info: &StreamInfo) -> Result<VideoSequence> {
        self.external_decode(payload, info)
    }
}
