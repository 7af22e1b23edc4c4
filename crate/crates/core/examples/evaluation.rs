//! The grid metrics on small hand-made grids.

use evigrid::{dynamic_mse, image_similarity, mask_iou, mse, CellClass, DynamicMask, Grid, GridConfig, Ogm};

fn main() -> evigrid::Result<()> {
    let cfg = GridConfig::new(8, 8, 0.5)?;
    let mut truth = Grid::filled(cfg, 0.1);
    let mut pred = Grid::filled(cfg, 0.1);
    for c in 2..5 {
        truth.cells[3 * 8 + c] = 0.9;
        pred.cells[4 * 8 + c] = 0.9;
    }
    let truth = Ogm { grid: truth };
    let pred = Ogm { grid: pred };
    let mut mask = DynamicMask::empty(cfg);
    for c in 2..5 {
        mask.grid.cells[3 * 8 + c] = true;
    }

    println!("mse          {:.4}", mse(&pred, &truth)?);
    println!("dynamic mse  {:.4}", dynamic_mse(&pred, &truth, &mask)?);

    let classes = |o: &Ogm| o.grid.map(|p| if p > 0.5 { CellClass::Occupied } else { CellClass::Free });
    println!("image sim.   {:.4}", image_similarity(&classes(&pred), &classes(&truth))?);

    let mut shifted = DynamicMask::empty(cfg);
    for c in 3..6 {
        shifted.grid.cells[3 * 8 + c] = true;
    }
    let iou = mask_iou(&shifted, &mask)?;
    println!("mask IoU     static {:.4}  dynamic {:.4}", iou.static_iou, iou.dynamic_iou);
    Ok(())
}
