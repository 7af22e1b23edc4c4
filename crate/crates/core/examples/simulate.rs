//! Generates the standard suite and writes it to a dataset directory.
//!
//! `cargo run --release --example simulate -- /tmp/suite [seed]`

use std::path::PathBuf;

use evigrid::sim::{standard_suite, write_dataset};

fn main() -> evigrid::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "suite".into()));
    let seed = args.next().map(|s| s.parse().expect("seed must be an integer")).unwrap_or(7);

    let dataset = standard_suite(seed)?;
    for seq in dataset.sequences.iter().take(5) {
        let points: usize = seq.frames.iter().map(|f| f.cloud.points.len()).sum();
        let movers: usize = seq.frames.iter().map(|f| f.gt_mask.grid.count_ones()).sum();
        println!("{}: {} frames, {points} returns, {movers} moving footprint cells", seq.name, seq.frames.len());
    }
    write_dataset(&dataset, &out)?;
    println!(
        "wrote {} sequences to {} (world hash {})",
        dataset.sequences.len(),
        out.display(),
        &dataset.world_hash[..16]
    );
    Ok(())
}
