use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::world::WorldSpec;
use super::Frame;
use crate::error::{Error, Result};
use crate::format::{create_dir, read_cloud, read_grid, write_cloud, write_grid, GridFile};
use crate::grid::{GridConfig, Pose2};
use crate::representation::RepresentationConfig;

pub const MANIFEST: &str = "manifest.json";
const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub name: String,
    pub frames: Vec<Frame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub seed: u64,
    pub config: RepresentationConfig,
    /// Hex SHA-256 of the world specs that produced the data.
    pub world_hash: String,
    pub sequences: Vec<Sequence>,
}

impl Dataset {
    pub fn hash_specs(specs: &[WorldSpec]) -> String {
        let mut h = Sha256::new();
        for s in specs {
            h.update(serde_json::to_vec(s).expect("world spec serializes"));
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_spec(spec: &WorldSpec, frames: usize, config: &RepresentationConfig) -> Result<Self> {
        Ok(Self {
            seed: spec.seed,
            config: *config,
            world_hash: Self::hash_specs(std::slice::from_ref(spec)),
            sequences: vec![Sequence { name: "seq000".into(), frames: super::simulate(spec, frames, config)? }],
        })
    }
}

#[derive(Serialize, Deserialize)]
struct FrameEntry {
    timestamp: f64,
    pose: Pose2,
    cloud: String,
    gt_mask: String,
    point_mask: String,
    gt_sgm: String,
}

#[derive(Serialize, Deserialize)]
struct SequenceEntry {
    name: String,
    frames: Vec<FrameEntry>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    seed: u64,
    grid: GridConfig,
    frame_dt: f64,
    config: RepresentationConfig,
    world_hash: String,
    sequences: Vec<SequenceEntry>,
}

/// Writes `manifest.json` plus one directory of EPCD/EGRD files per sequence.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let mut sequences = Vec::with_capacity(dataset.sequences.len());
    for seq in &dataset.sequences {
        create_dir(&dir.join(&seq.name))?;
        let mut frames = Vec::with_capacity(seq.frames.len());
        for (k, f) in seq.frames.iter().enumerate() {
            let stem = format!("{}/frame{k:03}", seq.name);
            let entry = FrameEntry {
                timestamp: f.timestamp,
                pose: f.ego_pose,
                cloud: format!("{stem}.epcd"),
                gt_mask: format!("{stem}_gtmask.egrd"),
                point_mask: format!("{stem}_ptmask.egrd"),
                gt_sgm: format!("{stem}_gtsgm.egrd"),
            };
            write_cloud(&dir.join(&entry.cloud), &f.cloud)?;
            write_grid(&dir.join(&entry.gt_mask), &GridFile::from_binary(&f.gt_mask.grid, f.timestamp, f.ego_pose))?;
            write_grid(
                &dir.join(&entry.point_mask),
                &GridFile::from_binary(&f.point_mask.grid, f.timestamp, f.ego_pose),
            )?;
            write_grid(&dir.join(&entry.gt_sgm), &GridFile::from_sgm(&f.gt_sgm))?;
            frames.push(entry);
        }
        sequences.push(SequenceEntry { name: seq.name.clone(), frames });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed: dataset.seed,
        grid: dataset.config.grid,
        frame_dt: dataset.config.frame_dt,
        config: dataset.config,
        world_hash: dataset.world_hash.clone(),
        sequences,
    };
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    crate::format::write_bytes(&dir.join(MANIFEST), json.as_bytes())
}

fn existing(dir: &Path, rel: &str) -> Result<std::path::PathBuf> {
    let path = dir.join(rel);
    if !path.is_file() {
        return Err(Error::format(path.display().to_string(), 0, "file listed in manifest is missing"));
    }
    Ok(path)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_path = dir.join(MANIFEST);
    let text = crate::format::read_bytes(&manifest_path)?;
    let manifest: Manifest = serde_json::from_slice(&text)
        .map_err(|source| Error::Json { file: manifest_path.display().to_string(), source })?;
    let file = manifest_path.display().to_string();
    if manifest.version != MANIFEST_VERSION {
        return Err(Error::format(file, 0, format!("unsupported manifest version {}", manifest.version)));
    }
    manifest.config.validate()?;
    if manifest.grid != manifest.config.grid {
        return Err(Error::format(file, 0, "grid and config.grid disagree"));
    }
    let grid = manifest.config.grid;
    let mut sequences = Vec::with_capacity(manifest.sequences.len());
    for seq in manifest.sequences {
        let mut frames = Vec::with_capacity(seq.frames.len());
        for e in seq.frames {
            let cloud = read_cloud(&existing(dir, &e.cloud)?)?;
            let gt_mask = read_grid(&existing(dir, &e.gt_mask)?)?.into_mask()?;
            let point_mask = read_grid(&existing(dir, &e.point_mask)?)?.into_mask()?;
            let gt_sgm = read_grid(&existing(dir, &e.gt_sgm)?)?.into_sgm()?;
            for (name, cfg) in
                [(&e.gt_mask, gt_mask.config()), (&e.point_mask, point_mask.config()), (&e.gt_sgm, gt_sgm.config())]
            {
                if *cfg != grid {
                    return Err(Error::format(name.clone(), 6, "grid does not match the manifest"));
                }
            }
            frames.push(Frame { timestamp: e.timestamp, ego_pose: e.pose, cloud, gt_mask, point_mask, gt_sgm });
        }
        sequences.push(Sequence { name: seq.name, frames });
    }
    Ok(Dataset { seed: manifest.seed, config: manifest.config, world_hash: manifest.world_hash, sequences })
}
