//! Double-prong future occupancy prediction.
//!
//! The static prong warps the static part of the current eOGM through the
//! future ego poses and lets its evidence decay; the dynamic prong tracks the
//! masked moving components and translates them at constant velocity. The two
//! are fused per cell with Dempster's rule and read out as pignistic OGMs.

use serde::{Deserialize, Serialize};

use crate::components::{label_components, Connectivity};
use crate::error::{Error, Result};
use crate::evidence::{combine_masses, discount_mass};
use crate::grid::{cell_center, world_to_cell, Cell, DynamicMask, Eogm, Grid, GridConfig, Ogm, Pose2};
use crate::representation::split_by_mask;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceSpec {
    pub past_frames: usize,
    pub horizon: usize,
    pub frame_dt: f64,
}

impl Default for SequenceSpec {
    fn default() -> Self {
        Self { past_frames: 5, horizon: 15, frame_dt: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub sequence: SequenceSpec,
    /// Largest centroid displacement (meters) accepted as the same object.
    pub gate_radius: f64,
    /// Per-step evidence decay of the static prong.
    pub static_discount: f64,
    /// Frames between the two masks used for velocity.
    pub track_offset: usize,
    pub connectivity: Connectivity,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            sequence: SequenceSpec::default(),
            gate_radius: 5.0,
            static_discount: 0.98,
            track_offset: 5,
            connectivity: Connectivity::Eight,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.sequence;
        if s.past_frames < 2 || s.horizon < 1 || !(s.frame_dt > 0.0) {
            return Err(Error::InvalidConfig("sequence needs past_frames >= 2, horizon >= 1 and frame_dt > 0".into()));
        }
        if !(self.gate_radius > 0.0) {
            return Err(Error::InvalidConfig("gate_radius must be positive".into()));
        }
        if !(self.static_discount > 0.0 && self.static_discount <= 1.0) {
            return Err(Error::InvalidConfig("static_discount must lie in (0, 1]".into()));
        }
        if self.track_offset < 1 {
            return Err(Error::InvalidConfig("track_offset must be at least 1".into()));
        }
        Ok(())
    }
}

/// A moving component with its estimated planar velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: usize,
    pub cells: Vec<Cell>,
    /// Mean (row, col) of the member cells.
    pub centroid: (f64, f64),
    /// Velocity along (+x, +y) of the current ego frame, m/s.
    pub velocity: (f64, f64),
}

pub fn connected_components(mask: &DynamicMask, connectivity: Connectivity) -> Vec<Vec<Cell>> {
    label_components(&mask.grid, connectivity)
}

fn centroid(cells: &[Cell]) -> (f64, f64) {
    let n = cells.len() as f64;
    let (r, c) = cells.iter().fold((0.0, 0.0), |(r, c), cell| (r + cell.row as f64, c + cell.col as f64));
    (r / n, c / n)
}

/// Greedy nearest-centroid association, closest pairs first. Pairs further
/// apart than the gate are rejected and unmatched current components get zero
/// velocity. Components must already share the current ego frame.
pub fn match_tracks(prev: &[Vec<Cell>], curr: &[Vec<Cell>], grid: &GridConfig, cfg: &PredictorConfig) -> Vec<Track> {
    let res = grid.res();
    let prev: Vec<&Vec<Cell>> = prev.iter().filter(|c| !c.is_empty()).collect();
    let prev_c: Vec<_> = prev.iter().map(|c| centroid(c)).collect();
    let prev_key: Vec<Cell> = prev.iter().map(|c| *c.iter().min().expect("non-empty")).collect();
    let curr_c: Vec<_> = curr.iter().map(|c| centroid(c)).collect();

    let mut pairs = Vec::new();
    for (i, a) in curr_c.iter().enumerate() {
        for (j, b) in prev_c.iter().enumerate() {
            let d = ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt() * res;
            if d <= cfg.gate_radius {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(prev_key[x.2].cmp(&prev_key[y.2])));

    let mut matched: Vec<Option<usize>> = vec![None; curr.len()];
    let mut used = vec![false; prev_c.len()];
    for (_, i, j) in pairs {
        if matched[i].is_none() && !used[j] {
            matched[i] = Some(j);
            used[j] = true;
        }
    }

    let span = cfg.track_offset as f64 * cfg.sequence.frame_dt;
    curr.iter()
        .zip(curr_c)
        .enumerate()
        .map(|(id, (cells, c))| {
            let velocity = match matched[id] {
                Some(j) => {
                    let p = prev_c[j];
                    ((c.1 - p.1) * res / span, (c.0 - p.0) * res / span)
                }
                None => (0.0, 0.0),
            };
            Track { id, cells: cells.clone(), centroid: c, velocity }
        })
        .collect()
}

/// Warps the static eOGM into each future ego frame; step `i` is discounted
/// by `gamma^(i+1)` and cells entering the window are vacuous.
pub fn static_prong(static_eogm: &Eogm, future_poses: &[Pose2], gamma: f64, horizon: usize) -> Result<Vec<Eogm>> {
    if future_poses.len() != horizon {
        return Err(Error::LengthMismatch { expected: horizon, actual: future_poses.len() });
    }
    Ok(future_poses
        .iter()
        .enumerate()
        .map(|(i, pose)| {
            let mut out = static_eogm.warp_to(pose);
            if gamma < 1.0 {
                let g = gamma.powi(i as i32 + 1);
                for m in &mut out.grid.cells {
                    *m = discount_mass(*m, g);
                }
            }
            out
        })
        .collect())
}

/// Translates each track's masses at its constant velocity and re-expresses
/// them in each future ego frame. Everything else is vacuous.
pub fn dynamic_prong(
    dynamic_eogm: &Eogm,
    tracks: &[Track],
    future_poses: &[Pose2],
    cfg: &PredictorConfig,
) -> Vec<Eogm> {
    let grid = dynamic_eogm.grid.config;
    let res = grid.res();
    let origin = dynamic_eogm.pose;
    future_poses
        .iter()
        .enumerate()
        .map(|(i, pose)| {
            let mut out = Eogm::vacuous(grid, *pose, dynamic_eogm.timestamp);
            let t = (i + 1) as f64 * cfg.sequence.frame_dt;
            for track in tracks {
                let dc = (track.velocity.0 * t / res).round();
                let dr = (track.velocity.1 * t / res).round();
                for &cell in &track.cells {
                    let mass = dynamic_eogm.grid.get(cell);
                    let (x, y) = cell_center(cell, &grid);
                    let (wx, wy) = origin.to_world(x + dc * res, y + dr * res);
                    let (fx, fy) = pose.from_world(wx, wy);
                    let Some(dst) = world_to_cell(fx, fy, &grid) else {
                        continue;
                    };
                    let here = out.grid.get(dst);
                    let merged = if here.is_vacuous() { mass } else { combine_masses(here, mass).unwrap_or(here) };
                    out.grid.set(dst, merged);
                }
            }
            out
        })
        .collect()
}

/// Cellwise Dempster fusion of the two prongs. Total conflict resolves to
/// the dynamic prong.
pub fn fuse_prongs(static_seq: &[Eogm], dynamic_seq: &[Eogm]) -> Result<Vec<Eogm>> {
    if static_seq.len() != dynamic_seq.len() {
        return Err(Error::LengthMismatch { expected: static_seq.len(), actual: dynamic_seq.len() });
    }
    static_seq
        .iter()
        .zip(dynamic_seq)
        .map(|(s, d)| {
            s.config().ensure_same(d.config())?;
            let cells =
                s.grid.cells.iter().zip(&d.grid.cells).map(|(&a, &b)| combine_masses(a, b).unwrap_or(b)).collect();
            Ok(Eogm { grid: Grid { config: s.grid.config, cells }, pose: s.pose, timestamp: s.timestamp })
        })
        .collect()
}

/// One past frame as seen by the predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryFrame {
    pub eogm: Eogm,
    pub mask: DynamicMask,
}

/// Constant-velocity continuation of the last two poses.
pub fn extrapolate_poses(history: &[Pose2], horizon: usize) -> Result<Vec<Pose2>> {
    let [.., prev, last] = history else {
        return Err(Error::LengthMismatch { expected: 2, actual: history.len() });
    };
    // step expressed in the previous pose's frame
    let (dx, dy) = prev.from_world(last.x, last.y);
    let dh = last.heading - prev.heading;
    let mut out = Vec::with_capacity(horizon);
    let mut pose = *last;
    for _ in 0..horizon {
        let (x, y) = pose.to_world(dx, dy);
        pose = Pose2::new(x, y, pose.heading + dh);
        out.push(pose);
    }
    Ok(out)
}

fn check_history(history: &[HistoryFrame], cfg: &PredictorConfig) -> Result<()> {
    cfg.validate()?;
    if history.len() != cfg.sequence.past_frames {
        return Err(Error::LengthMismatch { expected: cfg.sequence.past_frames, actual: history.len() });
    }
    let grid = history[0].eogm.grid.config;
    for f in history {
        grid.ensure_same(f.eogm.config())?;
        grid.ensure_same(f.mask.config())?;
    }
    Ok(())
}

fn resolve_poses(history: &[HistoryFrame], future_poses: Option<&[Pose2]>, horizon: usize) -> Result<Vec<Pose2>> {
    match future_poses {
        Some(p) if p.len() != horizon => Err(Error::LengthMismatch { expected: horizon, actual: p.len() }),
        Some(p) => Ok(p.to_vec()),
        None => {
            let poses: Vec<Pose2> = history.iter().map(|f| f.eogm.pose).collect();
            extrapolate_poses(&poses, horizon)
        }
    }
}

/// Tracks of the masked components at the last history frame.
///
/// Velocities compare against the mask `track_offset` frames earlier,
/// clamped to the history. When that mask is empty the nearest later
/// non-empty mask is used and the frame gap shrinks accordingly.
pub fn build_tracks(history: &[HistoryFrame], cfg: &PredictorConfig) -> Vec<Track> {
    let Some(current) = history.last() else {
        return Vec::new();
    };
    let grid = current.eogm.grid.config;
    let curr = connected_components(&current.mask, cfg.connectivity);
    if curr.is_empty() {
        return Vec::new();
    }
    let t = history.len() - 1;
    let max_offset = cfg.track_offset.min(t);
    for offset in (1..=max_offset).rev() {
        let past = &history[t - offset];
        if past.mask.is_empty() {
            continue;
        }
        let aligned = past.mask.grid.warp(&past.eogm.pose, &current.eogm.pose, false);
        let prev = label_components(&aligned, cfg.connectivity);
        if prev.is_empty() {
            continue;
        }
        let used = PredictorConfig { track_offset: offset, ..*cfg };
        return match_tracks(&prev, &curr, &grid, &used);
    }
    match_tracks(&[], &curr, &grid, cfg)
}

/// Fused evidential predictions, one per horizon step.
pub fn predict_eogms(
    history: &[HistoryFrame],
    future_poses: Option<&[Pose2]>,
    cfg: &PredictorConfig,
) -> Result<Vec<Eogm>> {
    check_history(history, cfg)?;
    let horizon = cfg.sequence.horizon;
    let poses = resolve_poses(history, future_poses, horizon)?;
    let current = history.last().expect("history checked non-empty");
    let (stat, dynamic) = split_by_mask(&current.eogm, &current.mask)?;
    let tracks = build_tracks(history, cfg);
    let static_seq = static_prong(&stat, &poses, cfg.static_discount, horizon)?;
    let dynamic_seq = dynamic_prong(&dynamic, &tracks, &poses, cfg);
    fuse_prongs(&static_seq, &dynamic_seq)
}

pub fn predict(history: &[HistoryFrame], future_poses: Option<&[Pose2]>, cfg: &PredictorConfig) -> Result<Vec<Ogm>> {
    Ok(predict_eogms(history, future_poses, cfg)?.iter().map(Eogm::to_ogm).collect())
}

/// Warps the whole current eOGM forward with the static decay and no
/// dynamic handling.
pub fn persistence_baseline(
    history: &[HistoryFrame],
    future_poses: Option<&[Pose2]>,
    cfg: &PredictorConfig,
) -> Result<Vec<Ogm>> {
    check_history(history, cfg)?;
    let horizon = cfg.sequence.horizon;
    let poses = resolve_poses(history, future_poses, horizon)?;
    let current = history.last().expect("history checked non-empty");
    Ok(static_prong(&current.eogm, &poses, cfg.static_discount, horizon)?.iter().map(Eogm::to_ogm).collect())
}
