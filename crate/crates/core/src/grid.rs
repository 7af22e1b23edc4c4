//! Ego-centred grid containers and the SE(2) frame changes between them.
//!
//! Axis convention: row 0 holds the most negative `y`, column 0 the most
//! negative `x`, the ego sits in cell `(height / 2, width / 2)` and heading 0
//! points along `+x`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::BeliefMass;

/// Size and resolution of an ego-centred grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub width: u32,
    pub height: u32,
    /// Cell edge in meters. Kept as `f32` so the value survives the on-disk
    /// header bit-exactly.
    pub resolution: f32,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { width: 128, height: 128, resolution: 0.33 }
    }
}

impl GridConfig {
    pub fn new(width: u32, height: u32, resolution: f32) -> Result<Self> {
        let cfg = Self { width, height, resolution };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidConfig(format!("grid must be at least 1x1, got {}x{}", self.width, self.height)));
        }
        if !(self.resolution > 0.0) || !self.resolution.is_finite() {
            return Err(Error::InvalidConfig(format!("resolution must be positive, got {}", self.resolution)));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn res(&self) -> f64 {
        self.resolution as f64
    }

    pub fn half_extent_x(&self) -> f64 {
        self.width as f64 * self.res() / 2.0
    }

    pub fn half_extent_y(&self) -> f64 {
        self.height as f64 * self.res() / 2.0
    }

    /// Cell holding the ego origin.
    pub fn ego_cell(&self) -> Cell {
        Cell::new(self.height as usize / 2, self.width as usize / 2)
    }

    pub fn contains(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && row < self.height as i64 && col < self.width as i64
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width as usize + cell.col
    }

    pub fn cell_of(&self, index: usize) -> Cell {
        Cell::new(index / self.width as usize, index % self.width as usize)
    }

    pub fn describe(&self) -> String {
        format!("{}x{}@{}", self.width, self.height, self.resolution)
    }

    pub(crate) fn ensure_same(&self, other: &GridConfig) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { left: self.describe(), right: other.describe() })
        }
    }
}

/// A (row, col) grid index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Cell containing an ego-frame point, or `None` outside the grid extent.
pub fn world_to_cell(x: f64, y: f64, config: &GridConfig) -> Option<Cell> {
    let res = config.res();
    let col = ((x + config.half_extent_x()) / res).floor();
    let row = ((y + config.half_extent_y()) / res).floor();
    if !col.is_finite() || !row.is_finite() {
        return None;
    }
    let (row, col) = (row as i64, col as i64);
    config.contains(row, col).then(|| Cell::new(row as usize, col as usize))
}

/// Ego-frame coordinates of a cell centre.
pub fn cell_center(cell: Cell, config: &GridConfig) -> (f64, f64) {
    let res = config.res();
    ((cell.col as f64 + 0.5) * res - config.half_extent_x(), (cell.row as f64 + 0.5) * res - config.half_extent_y())
}

/// Observed occupancy class of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellClass {
    Free,
    Occupied,
    Occluded,
}

impl CellClass {
    /// Code used by the EGRD payload.
    pub fn code(self) -> u8 {
        match self {
            CellClass::Free => 0,
            CellClass::Occupied => 1,
            CellClass::Occluded => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(CellClass::Free),
            1 => Some(CellClass::Occupied),
            2 => Some(CellClass::Occluded),
            _ => None,
        }
    }

    pub const ALL: [CellClass; 3] = [CellClass::Free, CellClass::Occupied, CellClass::Occluded];
}

/// Planar pose in the world frame. Heading is kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

pub fn normalize_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a - 2.0 * PI
    } else {
        a
    }
}

impl Pose2 {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading: normalize_angle(heading) }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.heading.is_finite()
    }

    /// Maps a point expressed in this pose's frame into the world frame.
    pub fn to_world(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.heading.sin_cos();
        (self.x + c * x - s * y, self.y + s * x + c * y)
    }

    /// Maps a world point into this pose's frame.
    pub fn from_world(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.heading.sin_cos();
        let (dx, dy) = (x - self.x, y - self.y);
        (c * dx + s * dy, -s * dx + c * dy)
    }
}

/// Row-major `width x height` array of cell values.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub config: GridConfig,
    pub cells: Vec<T>,
}

impl<T: Copy> Grid<T> {
    pub fn filled(config: GridConfig, value: T) -> Self {
        Self { config, cells: vec![value; config.cell_count()] }
    }

    pub fn from_cells(config: GridConfig, cells: Vec<T>) -> Result<Self> {
        config.validate()?;
        if cells.len() != config.cell_count() {
            return Err(Error::LengthMismatch { expected: config.cell_count(), actual: cells.len() });
        }
        Ok(Self { config, cells })
    }

    pub fn get(&self, cell: Cell) -> T {
        self.cells[self.config.index(cell)]
    }

    pub fn set(&mut self, cell: Cell, value: T) {
        let i = self.config.index(cell);
        self.cells[i] = value;
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Grid<U> {
        Grid { config: self.config, cells: self.cells.iter().map(|&v| f(v)).collect() }
    }

    /// Resamples a grid captured at `from` into the frame of `to` by
    /// nearest-neighbour lookup of each destination cell centre. Cells whose
    /// centre falls outside the source extent take `fill`.
    pub fn warp(&self, from: &Pose2, to: &Pose2, fill: T) -> Grid<T> {
        if from == to {
            return self.clone();
        }
        let cfg = self.config;
        // destination frame -> source frame, composed once
        let dh = to.heading - from.heading;
        let (s, c) = dh.sin_cos();
        let (tx, ty) = from.from_world(to.x, to.y);
        let mut cells = Vec::with_capacity(cfg.cell_count());
        for row in 0..cfg.height as usize {
            for col in 0..cfg.width as usize {
                let (x, y) = cell_center(Cell::new(row, col), &cfg);
                let sx = c * x - s * y + tx;
                let sy = s * x + c * y + ty;
                cells.push(match world_to_cell(sx, sy, &cfg) {
                    Some(src) => self.get(src),
                    None => fill,
                });
            }
        }
        Grid { config: cfg, cells }
    }
}

impl Grid<bool> {
    pub fn count_ones(&self) -> usize {
        self.cells.iter().filter(|&&v| v).count()
    }
}

/// Sensor grid map: one scan's discrete occupancy classes.
#[derive(Debug, Clone, PartialEq)]
pub struct Sgm {
    pub grid: Grid<CellClass>,
    pub pose: Pose2,
    pub timestamp: f64,
}

impl Sgm {
    pub fn occluded(config: GridConfig, pose: Pose2, timestamp: f64) -> Self {
        Self { grid: Grid::filled(config, CellClass::Occluded), pose, timestamp }
    }

    pub fn config(&self) -> &GridConfig {
        &self.grid.config
    }
}

/// Re-expresses `src`, captured at `from_pose`, in the frame of `to_pose`.
/// Cells that fall outside the source window become occluded.
pub fn transform_grid(src: &Sgm, from_pose: &Pose2, to_pose: &Pose2) -> Sgm {
    Sgm { grid: src.grid.warp(from_pose, to_pose, CellClass::Occluded), pose: *to_pose, timestamp: src.timestamp }
}

/// Residual grid map: known-class changes between two aligned SGMs.
#[derive(Debug, Clone, PartialEq)]
pub struct Rgm {
    pub grid: Grid<bool>,
}

/// Binary moving-object membership per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicMask {
    pub grid: Grid<bool>,
}

impl DynamicMask {
    pub fn empty(config: GridConfig) -> Self {
        Self { grid: Grid::filled(config, false) }
    }

    pub fn config(&self) -> &GridConfig {
        &self.grid.config
    }

    pub fn is_empty(&self) -> bool {
        !self.grid.cells.iter().any(|&v| v)
    }
}

/// Evidential occupancy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Eogm {
    pub grid: Grid<BeliefMass>,
    pub pose: Pose2,
    pub timestamp: f64,
}

impl Eogm {
    pub fn vacuous(config: GridConfig, pose: Pose2, timestamp: f64) -> Self {
        Self { grid: Grid::filled(config, BeliefMass::VACUOUS), pose, timestamp }
    }

    pub fn config(&self) -> &GridConfig {
        &self.grid.config
    }

    /// Re-expresses the grid in the frame of `to`; cells leaving the window
    /// become vacuous.
    pub fn warp_to(&self, to: &Pose2) -> Eogm {
        Eogm { grid: self.grid.warp(&self.pose, to, BeliefMass::VACUOUS), pose: *to, timestamp: self.timestamp }
    }

    /// Pignistic occupancy probabilities.
    pub fn to_ogm(&self) -> Ogm {
        Ogm { grid: self.grid.map(crate::evidence::pignistic) }
    }
}

/// Occupancy probability per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Ogm {
    pub grid: Grid<f64>,
}

impl Ogm {
    pub fn config(&self) -> &GridConfig {
        &self.grid.config
    }
}
