//! Renders one frame of the standard suite in every palette.
//!
//! `cargo run --release --example render -- /tmp/frames`

use std::path::PathBuf;

use evigrid::pipeline::{represent_dataset, segment_all, Segmenter};
use evigrid::render::{render_eogm, render_mask, render_rgm, render_sgm};
use evigrid::sim::standard_suite;
use evigrid::HeuristicParams;

fn main() -> evigrid::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "frames".into()));
    std::fs::create_dir_all(&out).expect("output directory");

    let dataset = standard_suite(7)?;
    let seqs = represent_dataset(&dataset, &dataset.config)?;
    let masks = segment_all(&seqs[..1], &Segmenter::Heuristic(HeuristicParams::default()))?;
    let frame = &seqs[0].frames[10];

    let images = [
        ("sgm", render_sgm(&frame.sgm)),
        ("rgm", render_rgm(&frame.rgm)),
        ("eogm", render_eogm(&frame.eogm)),
        ("mask", render_mask(&masks[0][10])),
        ("truth", render_mask(&seqs[0].point_masks[10])),
    ];
    for (name, image) in images {
        let path = out.join(format!("{name}.ppm"));
        image.write_ppm(&path)?;
        println!("{}", path.display());
    }
    Ok(())
}
