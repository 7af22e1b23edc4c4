use serde::{Deserialize, Serialize};

use crate::components::{label_components, Connectivity};
use crate::error::{Error, Result};
use crate::grid::{CellClass, DynamicMask, Grid, Rgm, Sgm};

/// Dilate-and-cluster rule parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicParams {
    /// Chebyshev radius around RGM hits in which occupied cells become
    /// candidates.
    pub dilation_radius: usize,
    pub min_component_size: usize,
    pub connectivity: Connectivity,
}

impl Default for HeuristicParams {
    fn default() -> Self {
        Self { dilation_radius: 2, min_component_size: 2, connectivity: Connectivity::Eight }
    }
}

/// Square max-filter of radius `r`, applied separably.
fn dilate(grid: &Grid<bool>, r: usize) -> Grid<bool> {
    if r == 0 {
        return grid.clone();
    }
    let w = grid.config.width as usize;
    let h = grid.config.height as usize;
    let mut horiz = vec![false; w * h];
    for row in 0..h {
        let line = &grid.cells[row * w..(row + 1) * w];
        for col in 0..w {
            let lo = col.saturating_sub(r);
            let hi = (col + r).min(w - 1);
            horiz[row * w + col] = line[lo..=hi].iter().any(|&v| v);
        }
    }
    let mut cells = vec![false; w * h];
    for col in 0..w {
        for row in 0..h {
            let lo = row.saturating_sub(r);
            let hi = (row + r).min(h - 1);
            cells[row * w + col] = (lo..=hi).any(|rr| horiz[rr * w + col]);
        }
    }
    Grid { config: grid.config, cells }
}

/// Marks occupied clusters that touch residual evidence as dynamic.
///
/// Candidates are occupied cells within `dilation_radius` of an RGM hit. A
/// connected candidate cluster is kept when it has at least
/// `min_component_size` cells and contains at least one hit.
pub fn segment_heuristic(sgm: &Sgm, rgm: &Rgm, params: &HeuristicParams) -> Result<DynamicMask> {
    sgm.config().ensure_same(&rgm.grid.config)?;
    if params.min_component_size < 1 {
        return Err(Error::InvalidConfig("min_component_size must be at least 1".into()));
    }
    let near_hit = dilate(&rgm.grid, params.dilation_radius);
    let candidates = Grid {
        config: sgm.grid.config,
        cells: sgm.grid.cells.iter().zip(&near_hit.cells).map(|(&c, &n)| n && c == CellClass::Occupied).collect(),
    };
    let mut mask = DynamicMask::empty(sgm.grid.config);
    for comp in label_components(&candidates, params.connectivity) {
        if comp.len() >= params.min_component_size && comp.iter().any(|&c| rgm.grid.get(c)) {
            for c in comp {
                mask.grid.set(c, true);
            }
        }
    }
    Ok(mask)
}
