//! Point clouds to sensor grid maps, residual grid maps and evidential
//! occupancy grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::{combine_masses, discount_mass, BeliefMass};
use crate::grid::{
    transform_grid, world_to_cell, Cell, CellClass, DynamicMask, Eogm, Grid, GridConfig, Pose2, Rgm, Sgm,
};

/// Ego-frame point cloud with its capture time and world pose.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<[f32; 3]>,
    pub timestamp: f64,
    pub ego_pose: Pose2,
}

/// Inverse sensor model: mass committed by one observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementModel {
    pub alpha_occ: f64,
    pub alpha_free: f64,
}

impl Default for MeasurementModel {
    fn default() -> Self {
        Self { alpha_occ: 0.9, alpha_free: 0.7 }
    }
}

impl MeasurementModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha_occ", self.alpha_occ), ("alpha_free", self.alpha_free)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepresentationConfig {
    pub grid: GridConfig,
    /// Frames between the two SGMs compared by the RGM.
    pub rgm_offset: usize,
    /// Seconds per frame.
    pub frame_dt: f64,
    /// Points at or below this height are treated as ground.
    pub ground_z_threshold: f64,
    pub measurement: MeasurementModel,
    /// Discount applied to the warped prior eOGM before each update.
    pub temporal_discount: f64,
}

impl Default for RepresentationConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            rgm_offset: 5,
            frame_dt: 0.1,
            ground_z_threshold: 0.2,
            measurement: MeasurementModel::default(),
            temporal_discount: 0.5,
        }
    }
}

impl RepresentationConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.measurement.validate()?;
        if self.rgm_offset < 1 {
            return Err(Error::InvalidConfig("rgm_offset must be at least 1".into()));
        }
        if !(self.frame_dt > 0.0) {
            return Err(Error::InvalidConfig("frame_dt must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.temporal_discount) {
            return Err(Error::InvalidConfig("temporal_discount must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

pub fn remove_ground(cloud: &PointCloud, z_threshold: f64) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().copied().filter(|p| p[2] > z_threshold as f32).collect(),
        timestamp: cloud.timestamp,
        ego_pose: cloud.ego_pose,
    }
}

/// Bresenham line between two cells, both endpoints excluded, in traversal
/// order from `origin`.
pub fn raytrace_cells(origin: Cell, target: Cell, config: &GridConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    walk_line(origin, target, config, |c| {
        out.push(c);
        true
    });
    out
}

/// Visits the interior cells of the Bresenham line until `visit` returns false.
fn walk_line(origin: Cell, target: Cell, config: &GridConfig, mut visit: impl FnMut(Cell) -> bool) {
    let (x0, y0) = (origin.col as i64, origin.row as i64);
    let (x1, y1) = (target.col as i64, target.row as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let (mut x, mut y) = (x0, y0);
    loop {
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
        if x == x1 && y == y1 {
            break;
        }
        debug_assert!(config.contains(y, x));
        if !visit(Cell::new(y as usize, x as usize)) {
            break;
        }
    }
}

/// Last in-grid cell on the segment from the ego origin towards a point
/// outside the grid.
fn boundary_cell(x: f64, y: f64, config: &GridConfig) -> Option<Cell> {
    // shrink by a hair so the clipped point lands inside the last cell
    let hx = config.half_extent_x() * (1.0 - 1e-9);
    let hy = config.half_extent_y() * (1.0 - 1e-9);
    let mut t: f64 = 1.0;
    if x.abs() > hx {
        t = t.min(hx / x.abs());
    }
    if y.abs() > hy {
        t = t.min(hy / y.abs());
    }
    world_to_cell(x * t, y * t, config)
}

/// Ray-traces one (ground-filtered) cloud into a sensor grid map.
///
/// All cells start occluded. Every in-grid return marks its cell occupied;
/// the cells between the ego cell and each return then become free, stopping
/// at the first occupied cell on the way. Returns beyond the grid clear the
/// in-grid part of their beam, boundary cell included.
pub fn build_sgm(cloud: &PointCloud, config: &RepresentationConfig) -> Sgm {
    let cfg = config.grid;
    let mut sgm = Sgm::occluded(cfg, cloud.ego_pose, cloud.timestamp);
    let origin = cfg.ego_cell();

    let mut hits = Vec::with_capacity(cloud.points.len());
    let mut beyond = Vec::new();
    for p in &cloud.points {
        let (x, y) = (p[0] as f64, p[1] as f64);
        match world_to_cell(x, y, &cfg) {
            Some(cell) => {
                sgm.grid.set(cell, CellClass::Occupied);
                hits.push(cell);
            }
            None => {
                if let Some(cell) = boundary_cell(x, y, &cfg) {
                    beyond.push(cell);
                }
            }
        }
    }

    let grid = &mut sgm.grid;
    let mut clear = |target: Cell, include_target: bool| {
        let mut blocked = false;
        walk_line(origin, target, &cfg, |c| {
            if grid.get(c) == CellClass::Occupied {
                blocked = true;
                return false;
            }
            grid.set(c, CellClass::Free);
            true
        });
        if include_target && !blocked && target != origin && grid.get(target) != CellClass::Occupied {
            grid.set(target, CellClass::Free);
        }
    };
    for &cell in &hits {
        clear(cell, false);
    }
    for &cell in &beyond {
        clear(cell, true);
    }
    sgm
}

/// Marks cells whose class switched between free and occupied. Pairs that
/// involve an occluded cell never count.
pub fn build_rgm(current: &Sgm, past: &Sgm) -> Result<Rgm> {
    current.config().ensure_same(past.config())?;
    let cells = current
        .grid
        .cells
        .iter()
        .zip(&past.grid.cells)
        .map(|(a, b)| matches!((a, b), (CellClass::Free, CellClass::Occupied) | (CellClass::Occupied, CellClass::Free)))
        .collect();
    Ok(Rgm { grid: Grid { config: current.grid.config, cells } })
}

pub fn sgm_to_measurement(sgm: &Sgm, model: &MeasurementModel) -> Eogm {
    let occ = BeliefMass { m_o: model.alpha_occ, m_f: 0.0, m_u: 1.0 - model.alpha_occ };
    let free = BeliefMass { m_o: 0.0, m_f: model.alpha_free, m_u: 1.0 - model.alpha_free };
    Eogm {
        grid: sgm.grid.map(|c| match c {
            CellClass::Occupied => occ,
            CellClass::Free => free,
            CellClass::Occluded => BeliefMass::VACUOUS,
        }),
        pose: sgm.pose,
        timestamp: sgm.timestamp,
    }
}

/// Cellwise Dempster update. A totally conflicting cell keeps the
/// measurement.
pub fn update_eogm(prior: &Eogm, measurement: &Eogm) -> Result<Eogm> {
    prior.config().ensure_same(measurement.config())?;
    let cells = prior
        .grid
        .cells
        .iter()
        .zip(&measurement.grid.cells)
        .map(|(&p, &m)| combine_masses(p, m).unwrap_or(m))
        .collect();
    Ok(Eogm {
        grid: Grid { config: measurement.grid.config, cells },
        pose: measurement.pose,
        timestamp: measurement.timestamp,
    })
}

/// Splits a grid into its static (mask 0) and dynamic (mask 1) parts; the
/// other side of each cell is vacuous.
pub fn split_by_mask(grid: &Eogm, mask: &DynamicMask) -> Result<(Eogm, Eogm)> {
    grid.config().ensure_same(mask.config())?;
    let mut stat = grid.clone();
    let mut dynamic = grid.clone();
    for ((s, d), &m) in stat.grid.cells.iter_mut().zip(dynamic.grid.cells.iter_mut()).zip(&mask.grid.cells) {
        if m {
            *s = BeliefMass::VACUOUS;
        } else {
            *d = BeliefMass::VACUOUS;
        }
    }
    Ok((stat, dynamic))
}

/// Representations of one frame within a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRepr {
    pub sgm: Sgm,
    pub rgm: Rgm,
    pub eogm: Eogm,
    /// Frames between the two SGMs behind `rgm`.
    pub rgm_offset: usize,
}

impl FrameRepr {
    /// True when the RGM had to use a shorter offset than configured.
    pub fn rgm_flagged(&self, config: &RepresentationConfig) -> bool {
        self.rgm_offset < config.rgm_offset
    }
}

/// Builds SGMs, RGMs and temporally fused eOGMs for an ordered sequence of
/// clouds. Early frames compare against the first frame.
pub fn build_sequence(clouds: &[PointCloud], config: &RepresentationConfig) -> Result<Vec<FrameRepr>> {
    config.validate()?;
    let sgms: Vec<Sgm> =
        clouds.iter().map(|c| build_sgm(&remove_ground(c, config.ground_z_threshold), config)).collect();
    let mut out: Vec<FrameRepr> = Vec::with_capacity(sgms.len());
    for (t, sgm) in sgms.iter().enumerate() {
        let past_idx = t.saturating_sub(config.rgm_offset);
        let past = &sgms[past_idx];
        let aligned = transform_grid(past, &past.pose, &sgm.pose);
        let rgm = build_rgm(sgm, &aligned)?;
        let measurement = sgm_to_measurement(sgm, &config.measurement);
        let eogm = match out.last() {
            None => measurement,
            Some(prev) => {
                let mut prior = prev.eogm.warp_to(&sgm.pose);
                if config.temporal_discount < 1.0 {
                    for m in &mut prior.grid.cells {
                        *m = discount_mass(*m, config.temporal_discount);
                    }
                }
                update_eogm(&prior, &measurement)?
            }
        };
        out.push(FrameRepr { sgm: sgm.clone(), rgm, eogm, rgm_offset: t - past_idx });
    }
    Ok(out)
}
