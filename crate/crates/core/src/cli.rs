//! Command-line front end: `evigrid <subcommand>`.
//!
//! Exit status 0 on success, 2 on usage or content errors, 3 on I/O errors.
//! Diagnostics go to standard error; `--json` puts machine output on
//! standard output.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::components::Connectivity;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvalSample};
use crate::format::{read_grid, GridPayload};
use crate::grid::{DynamicMask, GridConfig};
use crate::pipeline::{
    eval_sample, predict_sequence, represent_dataset, segment_all, suite_iou, training_set, PredictMode, Segmenter,
};
use crate::prediction::{PredictorConfig, SequenceSpec};
use crate::render::{render_eogm, render_mask, render_ogm, render_rgm, render_sgm};
use crate::representation::RepresentationConfig;
use crate::segmentation::{read_model, train_with_log, write_model, HeuristicParams, SegTrainConfig};
use crate::sim::{read_dataset, standard_suite_with, write_dataset, Dataset, WorldSpec};
use crate::store;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Parser)]
#[command(name = "evigrid", version, about = "Evidential occupancy grids from simulated lidar")]
pub struct Cli {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "EVIGRID_THREADS")]
    pub threads: Option<usize>,
    /// Square grid side in cells.
    #[arg(long, global = true)]
    pub grid_size: Option<u32>,
    /// Cell size in meters.
    #[arg(long, global = true)]
    pub resolution: Option<f32>,
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Print machine-readable output on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a dataset from a world spec or the standard suite.
    Gen(GenArgs),
    /// Build SGMs, RGMs and eOGMs for every frame of a dataset.
    Repr(ReprArgs),
    /// Write dynamic masks for every frame.
    Segment(SegmentArgs),
    /// Train the per-cell segmentation classifier.
    TrainSeg(TrainArgs),
    /// Predict future OGMs from the first frames of each sequence.
    Predict(PredictArgs),
    /// Score predictions against a dataset.
    Eval(EvalArgs),
    /// Render EGRD grids to PPM images.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["spec", "standard_suite"])))]
pub struct GenArgs {
    /// World spec JSON file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub standard_suite: bool,
    /// Frames to simulate from a spec.
    #[arg(long, default_value_t = 20)]
    pub frames: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReprArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub rgm_offset: Option<usize>,
    #[arg(long)]
    pub temporal_discount: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SegMode {
    Heuristic,
    Learned,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub repr: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SegMode::Heuristic)]
    pub mode: SegMode,
    /// ESEG model, required by the learned mode.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 2)]
    pub dilation_radius: usize,
    #[arg(long, default_value_t = 2)]
    pub min_component_size: usize,
    #[arg(long, default_value_t = 8)]
    pub connectivity: u32,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub repr: PathBuf,
    /// Output ESEG model path.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 60)]
    pub epochs: usize,
    #[arg(long)]
    pub pos_weight: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub half_width: usize,
    #[arg(long, default_value_t = 0.97)]
    pub lr_decay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Persistence,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub repr: PathBuf,
    /// Mask directory written by `segment`.
    #[arg(long, conflicts_with = "gt_masks")]
    pub masks: Option<PathBuf>,
    /// Use the ground-truth footprint masks stored with the representations.
    #[arg(long)]
    pub gt_masks: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    #[arg(long, default_value_t = 5)]
    pub past_frames: usize,
    #[arg(long, default_value_t = 15)]
    pub horizon: usize,
    #[arg(long)]
    pub gate_radius: Option<f64>,
    #[arg(long)]
    pub static_discount: Option<f64>,
    #[arg(long)]
    pub track_offset: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Prediction directory written by `predict`.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Optional mask directory scored against the dataset's point masks.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// Directory for report.json and report.txt.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Palette {
    /// Chosen from the payload kind.
    Auto,
    Sgm,
    Ogm,
    Mask,
    Rgm,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Palette::Auto)]
    pub palette: Palette,
}

struct Ctx {
    seed: Option<u64>,
    grid_size: Option<u32>,
    resolution: Option<f32>,
    quiet: bool,
    json: bool,
}

impl Ctx {
    fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn emit_json(&self, value: &serde_json::Value) {
        if self.json {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", serde_json::to_string_pretty(value).expect("json"));
        }
    }

    fn apply_grid(&self, grid: &mut GridConfig) -> Result<()> {
        if let Some(n) = self.grid_size {
            grid.width = n;
            grid.height = n;
        }
        if let Some(r) = self.resolution {
            grid.resolution = r;
        }
        grid.validate()
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } => 3,
        _ => 2,
    }
}

/// Parses `std::env::args` and runs; returns the process exit status.
pub fn main() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let ctx =
        Ctx { seed: cli.seed, grid_size: cli.grid_size, resolution: cli.resolution, quiet: cli.quiet, json: cli.json };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidConfig("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Gen(a) => cmd_gen(&ctx, &a),
        Command::Repr(a) => cmd_repr(&ctx, &a),
        Command::Segment(a) => cmd_segment(&ctx, &a),
        Command::TrainSeg(a) => cmd_train_seg(&ctx, &a),
        Command::Predict(a) => cmd_predict(&ctx, &a),
        Command::Eval(a) => cmd_eval(&ctx, &a),
        Command::Render(a) => cmd_render(&ctx, &a),
    })
}

fn read_spec(path: &Path) -> Result<WorldSpec> {
    let bytes = crate::format::read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json { file: path.display().to_string(), source })
}

fn cmd_gen(ctx: &Ctx, a: &GenArgs) -> Result<()> {
    let mut config = RepresentationConfig::default();
    ctx.apply_grid(&mut config.grid)?;
    let dataset = match &a.spec {
        Some(path) => {
            let mut spec = read_spec(path)?;
            if let Some(seed) = ctx.seed {
                spec.seed = seed;
            }
            if a.frames < 1 {
                return Err(Error::InvalidConfig("--frames must be at least 1".into()));
            }
            Dataset::from_spec(&spec, a.frames, &config)?
        }
        None => standard_suite_with(ctx.seed.unwrap_or(DEFAULT_SEED), &config)?,
    };
    write_dataset(&dataset, &a.out)?;
    let frames: usize = dataset.sequences.iter().map(|s| s.frames.len()).sum();
    ctx.note(format!("wrote {} sequences, {frames} frames to {}", dataset.sequences.len(), a.out.display()));
    ctx.emit_json(&serde_json::json!({
        "sequences": dataset.sequences.len(),
        "frames": frames,
        "world_hash": dataset.world_hash,
    }));
    Ok(())
}

fn cmd_repr(ctx: &Ctx, a: &ReprArgs) -> Result<()> {
    let dataset = read_dataset(&a.dataset)?;
    let mut config = dataset.config;
    ctx.apply_grid(&mut config.grid)?;
    if let Some(o) = a.rgm_offset {
        config.rgm_offset = o;
    }
    if let Some(d) = a.temporal_discount {
        config.temporal_discount = d;
    }
    config.validate()?;
    let mut seqs = represent_dataset(&dataset, &config)?;
    if config.grid != dataset.config.grid {
        ctx.note("grid differs from the dataset grid; labels are dropped");
        for s in &mut seqs {
            for m in s.gt_masks.iter_mut().chain(s.point_masks.iter_mut()) {
                *m = DynamicMask::empty(config.grid);
            }
        }
    }
    store::write_repr(&a.out, &config, &seqs)?;
    let frames: usize = seqs.iter().map(|s| s.frames.len()).sum();
    let flagged: usize = seqs.iter().map(|s| s.frames.iter().filter(|f| f.rgm_flagged(&config)).count()).sum();
    ctx.note(format!(
        "wrote {frames} SGM/RGM/eOGM triples for {} sequences ({flagged} short-offset RGMs flagged)",
        seqs.len()
    ));
    ctx.emit_json(&serde_json::json!({
        "sequences": seqs.len(),
        "frames": frames,
        "flagged_rgms": flagged,
    }));
    Ok(())
}

fn cmd_segment(ctx: &Ctx, a: &SegmentArgs) -> Result<()> {
    let connectivity = Connectivity::from_count(a.connectivity)
        .ok_or_else(|| Error::InvalidConfig("--connectivity must be 4 or 8".into()))?;
    if a.min_component_size < 1 {
        return Err(Error::InvalidConfig("--min-component-size must be at least 1".into()));
    }
    let model = match (a.mode, &a.model) {
        (SegMode::Learned, None) => return Err(Error::InvalidConfig("learned segmentation needs --model".into())),
        (SegMode::Learned, Some(p)) => Some(read_model(p)?),
        (SegMode::Heuristic, _) => None,
    };
    let (config, seqs) = store::read_repr(&a.repr)?;
    let segmenter = match &model {
        Some(m) => {
            if !(a.threshold > 0.0 && a.threshold < 1.0) {
                return Err(Error::InvalidConfig("--threshold must lie in (0, 1)".into()));
            }
            Segmenter::Learned { model: m, threshold: a.threshold }
        }
        None => Segmenter::Heuristic(HeuristicParams {
            dilation_radius: a.dilation_radius,
            min_component_size: a.min_component_size,
            connectivity,
        }),
    };
    let masks = segment_all(&seqs, &segmenter)?;
    store::write_masks(&a.out, segmenter.name(), &seqs, &masks)?;
    ctx.note(format!("wrote masks for {} sequences with the {} segmenter", seqs.len(), segmenter.name()));
    let (per, avg) = suite_iou(&seqs, &masks, &config)?;
    let mut table = format!("{:<10} {:>10} {:>11} {:>8}\n", "sequence", "static_iou", "dynamic_iou", "mean_iou");
    for (s, iou) in seqs.iter().zip(&per) {
        table += &format!("{:<10} {:>10.4} {:>11.4} {:>8.4}\n", s.name, iou.static_iou, iou.dynamic_iou, iou.mean_iou);
    }
    table += &format!("{:<10} {:>10.4} {:>11.4} {:>8.4}", "average", avg.static_iou, avg.dynamic_iou, avg.mean_iou);
    ctx.note(table);
    ctx.emit_json(&serde_json::json!({
        "segmenter": segmenter.name(),
        "sequences": seqs.iter().zip(&per).map(|(s, i)| serde_json::json!({
            "name": s.name,
            "static_iou": i.static_iou,
            "dynamic_iou": i.dynamic_iou,
            "mean_iou": i.mean_iou,
        })).collect::<Vec<_>>(),
        "static_iou": avg.static_iou,
        "dynamic_iou": avg.dynamic_iou,
        "mean_iou": avg.mean_iou,
    }));
    Ok(())
}

fn cmd_train_seg(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let (config, seqs) = store::read_repr(&a.repr)?;
    let data = training_set(&seqs, &config);
    let cfg = SegTrainConfig {
        learning_rate: a.lr,
        epochs: a.epochs,
        positive_class_weight: a.pos_weight,
        half_width: a.half_width,
        lr_decay: a.lr_decay,
        seed: ctx.seed.unwrap_or(DEFAULT_SEED),
        ..SegTrainConfig::default()
    };
    let (model, log) = train_with_log(&data, &cfg)?;
    for (epoch, loss) in log.held_out_loss.iter().enumerate() {
        ctx.note(format!("epoch {:>3}  held-out loss {loss:.6}", epoch + 1));
    }
    ctx.note(format!(
        "best epoch {} of {}; {} training and {} held-out samples; positive weight {:.4}",
        log.best_epoch + 1,
        cfg.epochs,
        log.train_samples,
        log.held_out_samples,
        log.positive_class_weight
    ));
    write_model(&a.out, &model)?;
    ctx.emit_json(&serde_json::json!({
        "held_out_loss": log.held_out_loss,
        "best_epoch": log.best_epoch + 1,
        "train_samples": log.train_samples,
        "held_out_samples": log.held_out_samples,
        "positive_class_weight": log.positive_class_weight,
    }));
    Ok(())
}

fn predictor_config(a: &PredictArgs, frame_dt: f64) -> Result<PredictorConfig> {
    let mut cfg = PredictorConfig {
        sequence: SequenceSpec { past_frames: a.past_frames, horizon: a.horizon, frame_dt },
        ..PredictorConfig::default()
    };
    if let Some(g) = a.gate_radius {
        cfg.gate_radius = g;
    }
    if let Some(d) = a.static_discount {
        cfg.static_discount = d;
    }
    if let Some(o) = a.track_offset {
        cfg.track_offset = o;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_predict(ctx: &Ctx, a: &PredictArgs) -> Result<()> {
    let (config, seqs) = store::read_repr(&a.repr)?;
    let cfg = predictor_config(a, config.frame_dt)?;
    let mode = match a.baseline {
        Some(Baseline::Persistence) => PredictMode::Persistence,
        None => PredictMode::DoubleProng,
    };
    let (masks, mask_source) = match (&a.masks, a.gt_masks) {
        (Some(dir), _) => (store::align_masks(&seqs, store::read_masks(dir)?)?, "predicted"),
        (None, true) => (seqs.iter().map(|s| s.gt_masks.clone()).collect(), "ground_truth"),
        (None, false) if mode == PredictMode::Persistence => (
            seqs.iter().map(|s| s.frames.iter().map(|f| DynamicMask::empty(*f.sgm.config())).collect()).collect(),
            "none",
        ),
        (None, false) => return Err(Error::InvalidConfig("predict needs --masks or --gt-masks".into())),
    };
    let timed = seqs
        .par_iter()
        .zip(&masks)
        .map(|(s, m)| {
            let start = Instant::now();
            let p = predict_sequence(s, m, &cfg, mode)?;
            Ok((p, start.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;
    let per_frame_ms = timed.iter().map(|t| t.1).sum::<f64>() * 1e3 / timed.len().max(1) as f64;
    let preds: Vec<_> = timed.into_iter().map(|t| t.0).collect();
    let info = store::PredInfo {
        predictor: match mode {
            PredictMode::DoubleProng => "double_prong".into(),
            PredictMode::Persistence => "persistence".into(),
        },
        masks: mask_source.into(),
        past_frames: cfg.sequence.past_frames,
        horizon: cfg.sequence.horizon,
    };
    store::write_predictions(&a.out, &info, &seqs, &preds)?;
    ctx.note(format!("wrote {} x {} predicted grids ({})", seqs.len(), cfg.sequence.horizon, info.predictor));
    ctx.note(format!("latency: {per_frame_ms:.3} ms per frame"));
    ctx.emit_json(&serde_json::json!({
        "sequences": seqs.len(),
        "horizon": cfg.sequence.horizon,
        "predictor": info.predictor,
        "latency_ms": per_frame_ms,
    }));
    Ok(())
}

fn cmd_eval(ctx: &Ctx, a: &EvalArgs) -> Result<()> {
    let (info, preds) = store::read_predictions(&a.pred)?;
    let dataset = read_dataset(&a.dataset)?;
    let seqs = represent_dataset(&dataset, &dataset.config)?;
    if preds.len() != seqs.len() {
        return Err(Error::Alignment(format!(
            "{} predicted sequences for {} dataset sequences",
            preds.len(),
            seqs.len()
        )));
    }
    let cfg = PredictorConfig {
        sequence: SequenceSpec {
            past_frames: info.past_frames,
            horizon: info.horizon,
            frame_dt: dataset.config.frame_dt,
        },
        ..PredictorConfig::default()
    };
    let samples: Vec<EvalSample> = preds
        .into_iter()
        .map(|p| {
            let seq = seqs
                .iter()
                .find(|s| s.name == p.name)
                .ok_or_else(|| Error::Alignment(format!("dataset has no sequence {}", p.name)))?;
            if p.first_frame != info.past_frames || p.ogms.len() != info.horizon {
                return Err(Error::Alignment(format!(
                    "{}: expected {} steps from frame {}",
                    p.name, info.horizon, info.past_frames
                )));
            }
            for o in &p.ogms {
                o.config().ensure_same(seq.frames[0].sgm.config())?;
            }
            eval_sample(seq, p.ogms, &cfg)
        })
        .collect::<Result<_>>()?;
    let mask_pairs = match &a.masks {
        None => Vec::new(),
        Some(dir) => {
            let masks = store::align_masks(&seqs, store::read_masks(dir)?)?;
            let mut pairs = Vec::new();
            for (s, ms) in seqs.iter().zip(&masks) {
                for ((f, m), t) in s.frames.iter().zip(ms).zip(&s.point_masks) {
                    if !f.rgm_flagged(&dataset.config) {
                        pairs.push((m.clone(), t.clone()));
                    }
                }
            }
            pairs
        }
    };
    let report = evaluate(&samples, &mask_pairs)?;
    crate::format::create_dir(&a.out)?;
    let mut json = report.to_json();
    json.push('\n');
    crate::format::write_bytes(&a.out.join("report.json"), json.as_bytes())?;
    let table = report.to_table();
    crate::format::write_bytes(&a.out.join("report.txt"), table.as_bytes())?;
    ctx.note(&table);
    if ctx.json {
        let _ = writeln!(std::io::stdout().lock(), "{}", report.to_json());
    }
    Ok(())
}

fn cmd_render(ctx: &Ctx, a: &RenderArgs) -> Result<()> {
    crate::format::create_dir(&a.out)?;
    for path in &a.files {
        let file = read_grid(path)?;
        let meta = file.meta;
        let kind = file.payload.kind();
        let palette = match a.palette {
            Palette::Auto => match &file.payload {
                GridPayload::Classes(_) => Palette::Sgm,
                GridPayload::Binary(_) => Palette::Mask,
                GridPayload::Mass(_) | GridPayload::Probability(_) => Palette::Ogm,
            },
            p => p,
        };
        let image = match (palette, &file.payload) {
            (Palette::Sgm, GridPayload::Classes(_)) => render_sgm(&file.into_sgm()?),
            (Palette::Ogm, GridPayload::Mass(_)) => render_eogm(&file.into_eogm()?),
            (Palette::Ogm, GridPayload::Probability(_)) => render_ogm(&file.into_ogm()?),
            (Palette::Mask, GridPayload::Binary(_)) => render_mask(&file.into_mask()?),
            (Palette::Rgm, GridPayload::Binary(_)) => render_rgm(&file.into_rgm()?),
            (p, _) => {
                return Err(Error::InvalidConfig(format!(
                    "{}: palette {p:?} does not fit payload kind {kind:?}",
                    path.display()
                )))
            }
        };
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "grid".into());
        let out = a.out.join(format!("{stem}.ppm"));
        image.write_ppm(&out)?;
        ctx.note(format!(
            "{} -> {} ({}x{}, t={:.3})",
            path.display(),
            out.display(),
            image.width,
            image.height,
            meta.timestamp
        ));
    }
    Ok(())
}
