//! On-disk layouts for representations, masks and predictions: a
//! `manifest.json` plus one directory of EGRD files per sequence.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{create_dir, read_grid, write_bytes, write_grid, GridFile};
use crate::grid::{DynamicMask, Ogm, Pose2};
use crate::pipeline::ReprSequence;
use crate::representation::{FrameRepr, RepresentationConfig};

pub const MANIFEST: &str = "manifest.json";
const VERSION: u32 = 1;

fn existing(dir: &Path, rel: &str) -> Result<PathBuf> {
    let path = dir.join(rel);
    if !path.is_file() {
        return Err(Error::format(path.display().to_string(), 0, "file listed in manifest is missing"));
    }
    Ok(path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value).expect("manifest serializes");
    json.push('\n');
    write_bytes(path, json.as_bytes())
}

fn read_json<T: DeserializeOwned>(dir: &Path) -> Result<T> {
    let path = dir.join(MANIFEST);
    let bytes = crate::format::read_bytes(&path)?;
    serde_json::from_slice(&bytes).map_err(|source| Error::Json { file: path.display().to_string(), source })
}

fn check_version(dir: &Path, version: u32) -> Result<()> {
    if version != VERSION {
        return Err(Error::format(
            dir.join(MANIFEST).display().to_string(),
            0,
            format!("unsupported manifest version {version}"),
        ));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ReprFrameEntry {
    timestamp: f64,
    pose: Pose2,
    sgm: String,
    rgm: String,
    eogm: String,
    gt_mask: String,
    point_mask: String,
    /// Frame the RGM was compared against.
    rgm_past_frame: usize,
    /// Set when the RGM spans fewer frames than configured.
    rgm_flagged: bool,
}

#[derive(Serialize, Deserialize)]
struct ReprSequenceEntry {
    name: String,
    frames: Vec<ReprFrameEntry>,
}

#[derive(Serialize, Deserialize)]
struct ReprManifest {
    version: u32,
    config: RepresentationConfig,
    sequences: Vec<ReprSequenceEntry>,
}

pub fn write_repr(dir: &Path, config: &RepresentationConfig, seqs: &[ReprSequence]) -> Result<()> {
    create_dir(dir)?;
    let mut sequences = Vec::with_capacity(seqs.len());
    for seq in seqs {
        create_dir(&dir.join(&seq.name))?;
        let mut frames = Vec::with_capacity(seq.frames.len());
        for (k, f) in seq.frames.iter().enumerate() {
            let stem = format!("{}/frame{k:03}", seq.name);
            let (ts, pose) = (f.sgm.timestamp, f.sgm.pose);
            let e = ReprFrameEntry {
                timestamp: ts,
                pose,
                sgm: format!("{stem}_sgm.egrd"),
                rgm: format!("{stem}_rgm.egrd"),
                eogm: format!("{stem}_eogm.egrd"),
                gt_mask: format!("{stem}_gtmask.egrd"),
                point_mask: format!("{stem}_ptmask.egrd"),
                rgm_past_frame: k - f.rgm_offset,
                rgm_flagged: f.rgm_flagged(config),
            };
            write_grid(&dir.join(&e.sgm), &GridFile::from_sgm(&f.sgm))?;
            write_grid(&dir.join(&e.rgm), &GridFile::from_binary(&f.rgm.grid, ts, pose))?;
            write_grid(&dir.join(&e.eogm), &GridFile::from_eogm(&f.eogm))?;
            write_grid(&dir.join(&e.gt_mask), &GridFile::from_binary(&seq.gt_masks[k].grid, ts, pose))?;
            write_grid(&dir.join(&e.point_mask), &GridFile::from_binary(&seq.point_masks[k].grid, ts, pose))?;
            frames.push(e);
        }
        sequences.push(ReprSequenceEntry { name: seq.name.clone(), frames });
    }
    write_json(&dir.join(MANIFEST), &ReprManifest { version: VERSION, config: *config, sequences })
}

pub fn read_repr(dir: &Path) -> Result<(RepresentationConfig, Vec<ReprSequence>)> {
    let m: ReprManifest = read_json(dir)?;
    check_version(dir, m.version)?;
    m.config.validate()?;
    let mut out = Vec::with_capacity(m.sequences.len());
    for seq in m.sequences {
        let mut r = ReprSequence {
            name: seq.name,
            frames: Vec::with_capacity(seq.frames.len()),
            gt_masks: Vec::new(),
            point_masks: Vec::new(),
        };
        for (k, e) in seq.frames.into_iter().enumerate() {
            if e.rgm_past_frame > k {
                return Err(Error::format(
                    dir.join(MANIFEST).display().to_string(),
                    0,
                    format!("{}: frame {k} compares against later frame {}", r.name, e.rgm_past_frame),
                ));
            }
            let sgm = read_grid(&existing(dir, &e.sgm)?)?.into_sgm()?;
            let rgm = read_grid(&existing(dir, &e.rgm)?)?.into_rgm()?;
            let eogm = read_grid(&existing(dir, &e.eogm)?)?.into_eogm()?;
            let gt = read_grid(&existing(dir, &e.gt_mask)?)?.into_mask()?;
            let pt = read_grid(&existing(dir, &e.point_mask)?)?.into_mask()?;
            for (name, cfg) in [
                (&e.sgm, sgm.config()),
                (&e.rgm, &rgm.grid.config),
                (&e.eogm, eogm.config()),
                (&e.gt_mask, gt.config()),
                (&e.point_mask, pt.config()),
            ] {
                if *cfg != m.config.grid {
                    return Err(Error::format(name.clone(), 6, "grid does not match the manifest"));
                }
            }
            r.frames.push(FrameRepr { sgm, rgm, eogm, rgm_offset: k - e.rgm_past_frame });
            r.gt_masks.push(gt);
            r.point_masks.push(pt);
        }
        out.push(r);
    }
    Ok((m.config, out))
}

#[derive(Serialize, Deserialize)]
struct MaskSequenceEntry {
    name: String,
    masks: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct MaskManifest {
    version: u32,
    segmenter: String,
    sequences: Vec<MaskSequenceEntry>,
}

/// Masks of one sequence, named like the representation it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSequence {
    pub name: String,
    pub masks: Vec<DynamicMask>,
}

pub fn write_masks(dir: &Path, segmenter: &str, seqs: &[ReprSequence], masks: &[Vec<DynamicMask>]) -> Result<()> {
    create_dir(dir)?;
    let mut sequences = Vec::with_capacity(seqs.len());
    for (seq, ms) in seqs.iter().zip(masks) {
        create_dir(&dir.join(&seq.name))?;
        let mut files = Vec::with_capacity(ms.len());
        for (k, (m, f)) in ms.iter().zip(&seq.frames).enumerate() {
            let file = format!("{}/frame{k:03}_mask.egrd", seq.name);
            write_grid(&dir.join(&file), &GridFile::from_binary(&m.grid, f.sgm.timestamp, f.sgm.pose))?;
            files.push(file);
        }
        sequences.push(MaskSequenceEntry { name: seq.name.clone(), masks: files });
    }
    write_json(&dir.join(MANIFEST), &MaskManifest { version: VERSION, segmenter: segmenter.to_string(), sequences })
}

pub fn read_masks(dir: &Path) -> Result<Vec<MaskSequence>> {
    let m: MaskManifest = read_json(dir)?;
    check_version(dir, m.version)?;
    m.sequences
        .into_iter()
        .map(|s| {
            let masks =
                s.masks.iter().map(|f| read_grid(&existing(dir, f)?)?.into_mask()).collect::<Result<Vec<_>>>()?;
            Ok(MaskSequence { name: s.name, masks })
        })
        .collect()
}

/// Orders loaded masks like `seqs`, failing on any missing or extra sequence.
pub fn align_masks(seqs: &[ReprSequence], masks: Vec<MaskSequence>) -> Result<Vec<Vec<DynamicMask>>> {
    if masks.len() != seqs.len() {
        return Err(Error::Alignment(format!(
            "{} mask sequences for {} representation sequences",
            masks.len(),
            seqs.len()
        )));
    }
    let mut by_name: std::collections::BTreeMap<String, Vec<DynamicMask>> =
        masks.into_iter().map(|m| (m.name, m.masks)).collect();
    seqs.iter()
        .map(|s| {
            let m =
                by_name.remove(&s.name).ok_or_else(|| Error::Alignment(format!("no masks for sequence {}", s.name)))?;
            if m.len() != s.frames.len() {
                return Err(Error::Alignment(format!("{}: {} masks for {} frames", s.name, m.len(), s.frames.len())));
            }
            for (mask, f) in m.iter().zip(&s.frames) {
                mask.config().ensure_same(f.sgm.config())?;
            }
            Ok(m)
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StepEntry {
    step: usize,
    frame: usize,
    timestamp: f64,
    pose: Pose2,
    file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PredSequenceEntry {
    name: String,
    steps: Vec<StepEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PredManifest {
    version: u32,
    predictor: String,
    masks: String,
    past_frames: usize,
    horizon: usize,
    sequences: Vec<PredSequenceEntry>,
}

/// Predicted OGMs of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PredSequence {
    pub name: String,
    /// Index of the frame the first step predicts.
    pub first_frame: usize,
    pub ogms: Vec<Ogm>,
}

/// What produced a prediction directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredInfo {
    pub predictor: String,
    pub masks: String,
    pub past_frames: usize,
    pub horizon: usize,
}

pub fn write_predictions(dir: &Path, info: &PredInfo, seqs: &[ReprSequence], preds: &[Vec<Ogm>]) -> Result<()> {
    create_dir(dir)?;
    let mut sequences = Vec::with_capacity(preds.len());
    for (seq, ogms) in seqs.iter().zip(preds) {
        create_dir(&dir.join(&seq.name))?;
        let mut steps = Vec::with_capacity(ogms.len());
        for (i, ogm) in ogms.iter().enumerate() {
            let frame = info.past_frames + i;
            let target = seq
                .frames
                .get(frame)
                .ok_or_else(|| Error::Alignment(format!("{}: no frame {frame} for step {}", seq.name, i + 1)))?;
            let e = StepEntry {
                step: i + 1,
                frame,
                timestamp: target.sgm.timestamp,
                pose: target.sgm.pose,
                file: format!("{}/step{:02}.egrd", seq.name, i + 1),
            };
            write_grid(&dir.join(&e.file), &GridFile::from_ogm(ogm, e.timestamp, e.pose))?;
            steps.push(e);
        }
        sequences.push(PredSequenceEntry { name: seq.name.clone(), steps });
    }
    write_json(
        &dir.join(MANIFEST),
        &PredManifest {
            version: VERSION,
            predictor: info.predictor.clone(),
            masks: info.masks.clone(),
            past_frames: info.past_frames,
            horizon: info.horizon,
            sequences,
        },
    )
}

pub fn read_predictions(dir: &Path) -> Result<(PredInfo, Vec<PredSequence>)> {
    let m: PredManifest = read_json(dir)?;
    check_version(dir, m.version)?;
    let mut out = Vec::with_capacity(m.sequences.len());
    for s in m.sequences {
        let first_frame = s.steps.first().map_or(m.past_frames, |e| e.frame);
        for (i, e) in s.steps.iter().enumerate() {
            if e.frame != first_frame + i {
                return Err(Error::Alignment(format!("{}: steps are not consecutive frames", s.name)));
            }
        }
        let ogms =
            s.steps.iter().map(|e| read_grid(&existing(dir, &e.file)?)?.into_ogm()).collect::<Result<Vec<_>>>()?;
        out.push(PredSequence { name: s.name, first_frame, ogms });
    }
    Ok((PredInfo { predictor: m.predictor, masks: m.masks, past_frames: m.past_frames, horizon: m.horizon }, out))
}
