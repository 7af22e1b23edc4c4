#![allow(dead_code)]

use evigrid::{BeliefMass, CellClass, DynamicMask, Eogm, Grid, GridConfig, Pose2, Sgm};
use proptest::prelude::*;

pub fn small_grid(w: u32, h: u32) -> GridConfig {
    GridConfig::new(w, h, 0.5).unwrap()
}

/// Valid masses, including categorical and vacuous corners.
pub fn mass() -> impl Strategy<Value = BeliefMass> {
    prop_oneof![
        1 => Just(BeliefMass::VACUOUS),
        1 => (0.0..=1.0f64).prop_map(|o| BeliefMass::new(o, 0.0, 1.0 - o).unwrap()),
        1 => (0.0..=1.0f64).prop_map(|f| BeliefMass::new(0.0, f, 1.0 - f).unwrap()),
        6 => (0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(a, b)| {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            BeliefMass { m_o: lo, m_f: hi - lo, m_u: 1.0 - hi }
        }),
    ]
}

pub fn class() -> impl Strategy<Value = CellClass> {
    prop_oneof![Just(CellClass::Free), Just(CellClass::Occupied), Just(CellClass::Occluded)]
}

pub fn class_grid(cfg: GridConfig) -> impl Strategy<Value = Grid<CellClass>> {
    prop::collection::vec(class(), cfg.cell_count()).prop_map(move |cells| Grid::from_cells(cfg, cells).unwrap())
}

pub fn sgm(cfg: GridConfig) -> impl Strategy<Value = Sgm> {
    class_grid(cfg).prop_map(|grid| Sgm { grid, pose: Pose2::default(), timestamp: 0.0 })
}

pub fn mask(cfg: GridConfig) -> impl Strategy<Value = DynamicMask> {
    prop::collection::vec(any::<bool>(), cfg.cell_count())
        .prop_map(move |cells| DynamicMask { grid: Grid::from_cells(cfg, cells).unwrap() })
}

pub fn eogm(cfg: GridConfig) -> impl Strategy<Value = Eogm> {
    prop::collection::vec(mass(), cfg.cell_count()).prop_map(move |cells| Eogm {
        grid: Grid::from_cells(cfg, cells).unwrap(),
        pose: Pose2::default(),
        timestamp: 0.0,
    })
}

pub fn closure_error(m: BeliefMass) -> f64 {
    (m.m_o + m.m_f + m.m_u - 1.0).abs()
}

pub fn in_bounds(m: BeliefMass) -> bool {
    [m.m_o, m.m_f, m.m_u].iter().all(|&v| (-1e-12..=1.0 + 1e-12).contains(&v))
}

/// Cells touched by sampling the segment between two cell centres every
/// `step` cells, both end cells excluded.
pub fn supersampled_line(
    from: evigrid::Cell,
    to: evigrid::Cell,
    step: f64,
) -> std::collections::BTreeSet<evigrid::Cell> {
    let (x0, y0) = (from.col as f64 + 0.5, from.row as f64 + 0.5);
    let (x1, y1) = (to.col as f64 + 0.5, to.row as f64 + 0.5);
    let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
    let n = (len / step).ceil() as usize;
    let mut out = std::collections::BTreeSet::new();
    for i in 0..=n {
        let t = i as f64 / n.max(1) as f64;
        let c = evigrid::Cell::new((y0 + t * (y1 - y0)).floor() as usize, (x0 + t * (x1 - x0)).floor() as usize);
        if c != from && c != to {
            out.insert(c);
        }
    }
    out
}

/// Image similarity by exhaustive pairwise search.
pub fn brute_force_is(a: &Grid<CellClass>, b: &Grid<CellClass>) -> f64 {
    let w = a.config.width as usize;
    let directed = |p: &Grid<CellClass>, q: &Grid<CellClass>, class: CellClass| -> f64 {
        let ps: Vec<usize> = (0..p.cells.len()).filter(|&i| p.cells[i] == class).collect();
        if ps.is_empty() {
            return 0.0;
        }
        let qs: Vec<usize> = (0..q.cells.len()).filter(|&i| q.cells[i] == class).collect();
        if qs.is_empty() {
            return (p.config.width + p.config.height) as f64;
        }
        let total: u64 = ps
            .iter()
            .map(|&i| qs.iter().map(|&j| ((i / w).abs_diff(j / w) + (i % w).abs_diff(j % w)) as u64).min().unwrap())
            .sum();
        total as f64 / ps.len() as f64
    };
    [CellClass::Free, CellClass::Occupied, CellClass::Occluded]
        .iter()
        .map(|&c| directed(a, b, c) + directed(b, a, c))
        .sum()
}
