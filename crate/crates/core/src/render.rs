//! Binary PPM (P6) images of grids. The top image row is the most positive
//! y, so the ego heading points right.

use std::path::Path;

use crate::error::Result;
use crate::evaluation::ogm_classes;
use crate::evidence::classify_mass;
use crate::grid::{Cell, CellClass, DynamicMask, Eogm, Grid, Ogm, Rgm, Sgm};

pub type Rgb = [u8; 3];

pub const SGM_OCCUPIED: Rgb = [0, 255, 255];
pub const SGM_FREE: Rgb = [255, 255, 0];
pub const SGM_OCCLUDED: Rgb = [0, 0, 255];
pub const EGO: Rgb = [128, 0, 0];
pub const OGM_OCCUPIED: Rgb = [255, 0, 0];
pub const OGM_FREE: Rgb = [0, 0, 255];
pub const OGM_OCCLUDED: Rgb = [0, 255, 0];
pub const MASK_ON: Rgb = [255, 0, 0];
pub const MASK_OFF: Rgb = [255, 255, 0];
pub const RGM_ON: Rgb = [0, 200, 0];
pub const RGM_OFF: Rgb = [128, 0, 128];

/// Raw RGB image, row-major from the top.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl Image {
    pub fn from_grid<T: Copy>(grid: &Grid<T>, color: impl Fn(T) -> Rgb) -> Self {
        let (w, h) = (grid.config.width as usize, grid.config.height as usize);
        let mut pixels = Vec::with_capacity(w * h);
        for img_row in 0..h {
            let row = h - 1 - img_row;
            for col in 0..w {
                pixels.push(color(grid.get(Cell::new(row, col))));
            }
        }
        Self { width: w, height: h, pixels }
    }

    pub fn set_cell(&mut self, cell: Cell, rgb: Rgb) {
        let img_row = self.height - 1 - cell.row;
        self.pixels[img_row * self.width + cell.col] = rgb;
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.reserve(self.pixels.len() * 3);
        for p in &self.pixels {
            out.extend_from_slice(p);
        }
        out
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        crate::format::write_bytes(path, &self.to_ppm())
    }
}

fn class_color(class: CellClass, occ: Rgb, free: Rgb, occl: Rgb) -> Rgb {
    match class {
        CellClass::Occupied => occ,
        CellClass::Free => free,
        CellClass::Occluded => occl,
    }
}

pub fn render_sgm(sgm: &Sgm) -> Image {
    let mut img = Image::from_grid(&sgm.grid, |c| class_color(c, SGM_OCCUPIED, SGM_FREE, SGM_OCCLUDED));
    img.set_cell(sgm.config().ego_cell(), EGO);
    img
}

/// Probabilities classified with the evaluation thresholds.
pub fn render_ogm(ogm: &Ogm) -> Image {
    Image::from_grid(&ogm_classes(ogm), |c| class_color(c, OGM_OCCUPIED, OGM_FREE, OGM_OCCLUDED))
}

pub fn render_eogm(eogm: &Eogm) -> Image {
    Image::from_grid(&eogm.grid, |m| class_color(classify_mass(m), OGM_OCCUPIED, OGM_FREE, OGM_OCCLUDED))
}

pub fn render_mask(mask: &DynamicMask) -> Image {
    Image::from_grid(&mask.grid, |b| if b { MASK_ON } else { MASK_OFF })
}

pub fn render_rgm(rgm: &Rgm) -> Image {
    Image::from_grid(&rgm.grid, |b| if b { RGM_ON } else { RGM_OFF })
}
