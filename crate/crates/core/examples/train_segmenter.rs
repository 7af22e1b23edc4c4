//! Trains the per-cell logistic segmenter on part of the standard suite and
//! compares it with the heuristic on the remaining sequences.

use evigrid::pipeline::{represent_dataset, segment_all, suite_iou, training_set, Segmenter};
use evigrid::segmentation::train_with_log;
use evigrid::sim::standard_suite;
use evigrid::{HeuristicParams, SegTrainConfig};

fn main() -> evigrid::Result<()> {
    let dataset = standard_suite(7)?;
    let cfg = dataset.config;
    let seqs = represent_dataset(&dataset, &cfg)?;
    let (train, test) = seqs.split_at(20);

    let train_cfg = SegTrainConfig { epochs: 20, ..SegTrainConfig::default() };
    let (model, log) = train_with_log(&training_set(train, &cfg), &train_cfg)?;
    for (epoch, loss) in log.held_out_loss.iter().enumerate().step_by(5) {
        println!("epoch {:>2}  held-out loss {loss:.5}", epoch + 1);
    }
    println!("kept epoch {} ({} samples)", log.best_epoch + 1, log.train_samples);

    let learned = Segmenter::Learned { model: &model, threshold: 0.5 };
    let heuristic = Segmenter::Heuristic(HeuristicParams::default());
    for seg in [heuristic, learned] {
        let masks = segment_all(test, &seg)?;
        let (_, iou) = suite_iou(test, &masks, &cfg)?;
        println!("{:<10} static {:.4}  dynamic {:.4}", seg.name(), iou.static_iou, iou.dynamic_iou);
    }
    Ok(())
}
