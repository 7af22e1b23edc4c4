//! Connected-component labelling on binary grids.

use serde::{Deserialize, Serialize};

use crate::grid::{Cell, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Option<Self> {
        match n {
            4 => Some(Connectivity::Four),
            8 => Some(Connectivity::Eight),
            _ => None,
        }
    }

    fn offsets(self) -> &'static [(i64, i64)] {
        const FOUR: [(i64, i64); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const EIGHT: [(i64, i64); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// Maximal connected sets of `true` cells. Components come out ordered by
/// their smallest (row, col) member and each component's cells are sorted.
pub fn label_components(grid: &Grid<bool>, connectivity: Connectivity) -> Vec<Vec<Cell>> {
    let cfg = grid.config;
    let mut seen = vec![false; grid.cells.len()];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    // row-major scan: the seed of each component is its smallest member
    for start in 0..grid.cells.len() {
        if !grid.cells[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut members = Vec::new();
        while let Some(i) = stack.pop() {
            let cell = cfg.cell_of(i);
            members.push(cell);
            for &(dr, dc) in connectivity.offsets() {
                let (r, c) = (cell.row as i64 + dr, cell.col as i64 + dc);
                if !cfg.contains(r, c) {
                    continue;
                }
                let j = cfg.index(Cell::new(r as usize, c as usize));
                if grid.cells[j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}
