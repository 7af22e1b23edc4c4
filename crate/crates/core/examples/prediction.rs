//! Double-prong occupancy prediction against the persistence baseline on the
//! standard suite.

use evigrid::pipeline::{gt_masks, prediction_samples, represent_dataset, segment_all, PredictMode, Segmenter};
use evigrid::sim::standard_suite;
use evigrid::{evaluate, HeuristicParams, PredictorConfig};

fn main() -> evigrid::Result<()> {
    let dataset = standard_suite(7)?;
    let seqs = represent_dataset(&dataset, &dataset.config)?;
    let masks = segment_all(&seqs, &Segmenter::Heuristic(HeuristicParams::default()))?;
    let cfg = PredictorConfig::default();

    let runs = [
        ("persistence", prediction_samples(&seqs, &masks, &cfg, PredictMode::Persistence)?),
        ("double-prong", prediction_samples(&seqs, &masks, &cfg, PredictMode::DoubleProng)?),
        ("double-prong, true masks", prediction_samples(&seqs, &gt_masks(&seqs), &cfg, PredictMode::DoubleProng)?),
    ];
    println!("{:<26} {:>10} {:>10} {:>8}", "predictor", "mse", "dyn mse", "is");
    for (name, samples) in &runs {
        let r = evaluate(samples, &[])?;
        println!("{name:<26} {:>10.6} {:>10.6} {:>8.3}", r.mse_avg, r.dynamic_mse_avg, r.is_avg);
    }
    Ok(())
}
