//! Command-line front end: argument parsing, configuration merging and the
//! seven subcommands. The binary only calls [`run`].

mod config;

pub use config::{CodecConfig, CodecKind, PipelineConfig, QmoConfig, QmoSourceKind, RestoreConfig};

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::adapt::AdaptationMode;
use crate::codec::QpValue;
use crate::container::Container;
use crate::error::{Error, Result};
use crate::frames::{read_y4m, write_y4m, VideoSequence};
use crate::metrics::{bd_report, load_rd_csv, write_rd_csv};
use crate::pipeline::{self, EncodeOutput, Restoration};
use crate::qmo::{clip_tensor, generate_qmo_dataset, train_qmo_with, QmoDataset};
use crate::restore::{generate_restoration_dataset, train_restoration, ModelRegistry, RestorationModelKey};

#[derive(Debug, Parser)]
#[command(name = "paracodec", version, about = "Content-adaptive format adaptation around a host video codec")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base QPs, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub qp: Vec<i32>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub codec: Option<CodecKind>,
    /// External encoder argv template.
    #[arg(long, global = true)]
    pub encoder: Option<String>,
    /// External decoder argv template.
    #[arg(long, global = true)]
    pub decoder: Option<String>,
    #[arg(long, global = true)]
    pub work_dir: Option<PathBuf>,
    /// How modes are chosen.
    #[arg(long, global = true)]
    pub mode_source: Option<QmoSourceKind>,
    /// Mode for `--mode-source fixed`.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Mode-prediction checkpoint for `--mode-source model`.
    #[arg(long, global = true)]
    pub qmo_checkpoint: Option<PathBuf>,
    /// Restoration model directory.
    #[arg(long, global = true)]
    pub registry: Option<PathBuf>,
    /// Decode with the non-learned inverse only.
    #[arg(long, global = true)]
    pub baseline_restore: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a Y4M file into a container.
    Encode {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Per-segment statistics CSV.
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Decode a container back to Y4M.
    Decode {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Encode and decode at every configured QP and write a rate-quality CSV.
    Sweep {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Sequence name in the CSV (default: file stem).
        #[arg(long)]
        sequence: Option<String>,
        /// Codec column in the CSV (default: derived from the configuration).
        #[arg(long)]
        label: Option<String>,
    },
    /// Bjøntegaard deltas of a test CSV against an anchor CSV.
    Bd {
        test: PathBuf,
        anchor: PathBuf,
        /// Also write the report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Oracle-label clips of the given sources into a dataset index.
    Label {
        #[arg(required = true)]
        sources: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        crops_per_source: Option<usize>,
        #[arg(long)]
        clips_per_qp: Option<usize>,
        #[arg(long)]
        crop_size: Option<usize>,
        #[arg(long)]
        crop_frames: Option<usize>,
        #[arg(long)]
        min_source_frames: Option<usize>,
    },
    /// Train the mode-prediction network on a labelled index.
    TrainQmo {
        index: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Train one restoration network and add it to the registry.
    TrainRestore {
        #[arg(required = true)]
        sources: Vec<PathBuf>,
        #[arg(long)]
        mode: String,
        #[arg(long = "for-qp")]
        for_qp: i32,
        #[arg(long)]
        patches: Option<usize>,
        #[arg(long)]
        patch_size: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Start from the identity network.
        #[arg(long)]
        zero_init_final: bool,
    },
}

/// Merges config file and flags.
pub fn resolve_config(g: &GlobalArgs) -> Result<PipelineConfig> {
    let mut cfg = match &g.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if !g.qp.is_empty() {
        cfg.qps = g.qp.iter().map(|&q| QpValue::new(q)).collect::<Result<_>>()?;
        cfg.label.qps = cfg.qps.clone();
    }
    if let Some(s) = g.seed {
        cfg.set_seed(s);
    }
    if let Some(j) = g.jobs {
        cfg.jobs = j;
    }
    if let Some(c) = g.codec {
        cfg.codec.kind = c;
    }
    if g.encoder.is_some() {
        cfg.codec.encode = g.encoder.clone();
    }
    if g.decoder.is_some() {
        cfg.codec.decode = g.decoder.clone();
    }
    if let Some(w) = &g.work_dir {
        cfg.work_dir = w.clone();
    }
    if let Some(m) = g.mode_source {
        cfg.qmo.source = m;
    }
    if g.mode.is_some() {
        cfg.qmo.mode = g.mode.clone();
    }
    if g.qmo_checkpoint.is_some() {
        cfg.qmo.checkpoint = g.qmo_checkpoint.clone();
    }
    if g.registry.is_some() {
        cfg.restore.registry = g.registry.clone();
    }
    if g.baseline_restore {
        cfg.restore.baseline = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "sequence".into())
}

fn write_stats(path: &Path, out: &EncodeOutput) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| Error::Config(format!("{}: {e}", path.display()));
    w.write_record(["segment", "start_frame", "end_frame", "mode", "qp_base", "qp_effective", "bits"]).map_err(csv_err)?;
    for (i, (d, s)) in out.segments.iter().zip(out.container.segments()).enumerate() {
        w.write_record([
            i.to_string(),
            d.frames.start.to_string(),
            d.frames.end.to_string(),
            d.mode.to_string(),
            d.qp_base.to_string(),
            d.qp_effective.to_string(),
            (s.payload.len() as u64 * 8).to_string(),
        ])
        .map_err(csv_err)?;
    }
    let n = out.container.header().frame_count;
    let qp = out.segments[0].qp_base.to_string();
    w.write_record(["total", "0", &n.to_string(), "", &qp, "", &out.total_bits().to_string()]).map_err(csv_err)?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn cmd_encode(cfg: &PipelineConfig, input: &Path, output: &Path, stats: Option<&Path>) -> Result<()> {
    let source = cfg.mode_source()?;
    let codec = cfg.codec()?;
    let seq = read_y4m(input)?;
    if cfg.qps.len() > 1 {
        log::warn!("encode uses only the first configured QP ({})", cfg.qps[0]);
    }
    let out = pipeline::encode_sequence(&seq, cfg.qps[0], codec.as_ref(), &source)?;
    fs::write(output, out.container.to_bytes()).map_err(|e| Error::io(output, e))?;
    if let Some(p) = stats {
        write_stats(p, &out)?;
    }
    let modes: Vec<String> = out.segments.iter().map(|s| format!("{}[{}..{})", s.mode, s.frames.start, s.frames.end)).collect();
    println!(
        "{}: {} frames, {} segments {}, {} bits ({:.1} bit/s)",
        output.display(),
        seq.len(),
        out.segments.len(),
        modes.join(" "),
        out.total_bits(),
        out.total_bits() as f64 / seq.duration()
    );
    Ok(())
}

fn decode_with(cfg: &PipelineConfig, container: &Container) -> Result<VideoSequence> {
    let codec = cfg.codec()?;
    let registry: Option<ModelRegistry> = if container.segments().iter().any(|s| s.mode.has_restoration()) {
        cfg.registry()?
    } else {
        None
    };
    let restoration = registry.as_ref().map_or(Restoration::Baseline, Restoration::Learned);
    pipeline::decode_container(container, codec.as_ref(), restoration)
}

fn cmd_decode(cfg: &PipelineConfig, input: &Path, output: &Path) -> Result<()> {
    let bytes = fs::read(input).map_err(|e| Error::io(input, e))?;
    let container = Container::parse(&bytes)?;
    let seq = decode_with(cfg, &container)?;
    write_y4m(&seq, output)?;
    println!("{}: {} frames {}x{}", output.display(), seq.len(), seq.width(), seq.height());
    Ok(())
}

fn cmd_sweep(cfg: &PipelineConfig, input: &Path, output: &Path, sequence: Option<&str>, label: Option<&str>) -> Result<()> {
    let source = cfg.mode_source()?;
    let codec = cfg.codec()?;
    let registry = cfg.registry()?;
    let restoration = registry.as_ref().map_or(Restoration::Baseline, Restoration::Learned);
    let seq = read_y4m(input)?;
    let points = pipeline::sweep(&seq, &cfg.qps, codec.as_ref(), &source, restoration)?;
    for p in &points {
        println!("QP {:>2}: {:>12.1} bit/s  {:.4} dB", p.qp_base, p.rate_bps, p.psnr_yuv);
    }
    let name = sequence.map_or_else(|| stem(input), str::to_string);
    let label = label.map_or_else(|| cfg.pipeline_label(), str::to_string);
    write_rd_csv(output, &[pipeline::sweep_curve(&label, &name, &points)?])
}

fn cmd_bd(test: &Path, anchor: &Path, csv_out: Option<&Path>) -> Result<()> {
    let report = bd_report(&load_rd_csv(test)?, &load_rd_csv(anchor)?)?;
    print!("{}", report.to_text());
    if let Some(p) = csv_out {
        fs::write(p, report.to_csv()).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

fn read_sources(paths: &[PathBuf]) -> Result<Vec<VideoSequence>> {
    paths.iter().map(read_y4m).collect()
}

fn cmd_label(cfg: &PipelineConfig, sources: &[PathBuf], output: &Path) -> Result<()> {
    let codec = cfg.codec()?;
    let seqs = read_sources(sources)?;
    // Absolute paths keep the index usable from any working directory.
    let names = sources
        .iter()
        .map(|p| fs::canonicalize(p).map(|a| a.to_string_lossy().into_owned()).map_err(|e| Error::io(p, e)))
        .collect::<Result<Vec<_>>>()?;
    let ds = generate_qmo_dataset(&seqs, &names, codec.as_ref(), &cfg.label)?;
    ds.save(output)?;
    let h = ds.label_histogram();
    println!("{}: {} samples; labels M0..M4 = {h:?}", output.display(), ds.len());
    Ok(())
}

fn cmd_train_qmo(cfg: &PipelineConfig, index: &Path, output: &Path) -> Result<()> {
    let ds = QmoDataset::load(index)?;
    // Relative source paths are taken relative to the index file.
    let base = index.parent().unwrap_or(Path::new("."));
    let paths: Vec<PathBuf> = ds.sources.iter().map(|s| base.join(s)).collect();
    let seqs = read_sources(&paths)?;
    let fetch = |i: usize| {
        let s = &ds.samples[i];
        Ok((clip_tensor(&s.clip.frames(&seqs)?, s.qp_base)?, s.label.index()))
    };
    let (net, report) = train_qmo_with(ds.len(), fetch, &cfg.train_qmo)?;
    net.save(output)?;
    println!(
        "{}: {} epochs, loss {:.4} -> {:.4}, training accuracy {:.1}%",
        output.display(),
        report.epoch_losses.len(),
        report.initial_loss,
        report.epoch_losses.last().copied().unwrap_or(report.initial_loss),
        100.0 * report.train_accuracy
    );
    Ok(())
}

fn cmd_train_restore(cfg: &PipelineConfig, sources: &[PathBuf], mode: &str, qp: i32) -> Result<()> {
    let mode: AdaptationMode = mode.parse()?;
    let key = RestorationModelKey::new(mode, QpValue::new(qp)?)?;
    let dir = cfg.restore.registry.clone().ok_or_else(|| Error::Config("train-restore needs --registry".into()))?;
    let codec = cfg.codec()?;
    let seqs = read_sources(sources)?;
    let pairs = generate_restoration_dataset(&seqs, codec.as_ref(), mode, key.qp_base(), &cfg.restore_dataset)?;
    let (model, report) = train_restoration(&pairs, key, &cfg.train_restore)?;
    for (e, (lr, loss)) in report.learning_rates.iter().zip(&report.epoch_losses).enumerate() {
        println!("epoch {:>3}  lr {lr:e}  loss {loss:.6}", e + 1);
    }
    let mut reg = ModelRegistry::open(&dir)?;
    let path = reg.insert(&model)?;
    println!("{key}: initial loss {:.6}, checkpoint {}", report.initial_loss, path.display());
    Ok(())
}

fn set_opt<T: Copy>(dst: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *dst = v;
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut cfg = resolve_config(&cli.global)?;
    if cfg.jobs > 0 {
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build_global();
    }
    match cli.command {
        Command::Encode { input, output, stats } => cmd_encode(&cfg, &input, &output, stats.as_deref()),
        Command::Decode { input, output } => cmd_decode(&cfg, &input, &output),
        Command::Sweep { input, output, sequence, label } => {
            cmd_sweep(&cfg, &input, &output, sequence.as_deref(), label.as_deref())
        }
        Command::Bd { test, anchor, csv } => cmd_bd(&test, &anchor, csv.as_deref()),
        Command::Label { sources, output, crops_per_source, clips_per_qp, crop_size, crop_frames, min_source_frames } => {
            set_opt(&mut cfg.label.crops_per_source, crops_per_source);
            set_opt(&mut cfg.label.clips_per_qp, clips_per_qp);
            set_opt(&mut cfg.label.crop_size, crop_size);
            set_opt(&mut cfg.label.crop_frames, crop_frames);
            set_opt(&mut cfg.label.min_source_frames, min_source_frames);
            cmd_label(&cfg, &sources, &output)
        }
        Command::TrainQmo { index, output, epochs, lr, batch_size } => {
            set_opt(&mut cfg.train_qmo.epochs, epochs);
            set_opt(&mut cfg.train_qmo.lr, lr);
            set_opt(&mut cfg.train_qmo.batch_size, batch_size);
            cmd_train_qmo(&cfg, &index, &output)
        }
        Command::TrainRestore { sources, mode, for_qp, patches, patch_size, epochs, lr, batch_size, zero_init_final } => {
            set_opt(&mut cfg.restore_dataset.patches, patches);
            set_opt(&mut cfg.restore_dataset.patch_size, patch_size);
            set_opt(&mut cfg.train_restore.epochs, epochs);
            set_opt(&mut cfg.train_restore.lr, lr);
            set_opt(&mut cfg.train_restore.batch_size, batch_size);
            cfg.train_restore.zero_init_final |= zero_init_final;
            cmd_train_restore(&cfg, &sources, &mode, for_qp)
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code. Errors
/// are printed as `error[<code>]: <message>`.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {}", e.code(), e);
            1
        }
    }
}
