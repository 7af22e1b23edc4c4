//! Heuristic static/dynamic segmentation on a simulated sequence, scored
//! against the simulator's point labels.

use evigrid::pipeline::{represent_dataset, segment_all, suite_iou, Segmenter};
use evigrid::sim::{Agent, Dataset, SensorSpec, StaticShape, Trajectory, WorldSpec};
use evigrid::{HeuristicParams, RepresentationConfig};

fn main() -> evigrid::Result<()> {
    let spec = WorldSpec {
        static_shapes: vec![
            StaticShape::Wall { from: [-60.0, 8.745], to: [60.0, 8.745] },
            StaticShape::Wall { from: [-60.0, -8.745], to: [60.0, -8.745] },
        ],
        agents: vec![
            Agent { length: 4.62, width: 1.98, trajectory: Trajectory::straight([22.0, 3.135], [-60.0, 3.135], 9.0) },
            Agent { length: 0.66, width: 0.66, trajectory: Trajectory::straight([8.415, -6.0], [8.415, 6.0], 1.5) },
        ],
        ego: Trajectory::straight([0.0, 0.0], [100.0, 0.0], 3.3),
        sensor: SensorSpec { beams: 1440, ..SensorSpec::default() },
        seed: 3,
        ground_points: false,
    };
    let cfg = RepresentationConfig::default();
    let dataset = Dataset::from_spec(&spec, 20, &cfg)?;
    let seqs = represent_dataset(&dataset, &cfg)?;

    let segmenter = Segmenter::Heuristic(HeuristicParams::default());
    let masks = segment_all(&seqs, &segmenter)?;
    for (k, (frame, mask)) in seqs[0].frames.iter().zip(&masks[0]).enumerate() {
        let truth = seqs[0].point_masks[k].grid.count_ones();
        let flag = if frame.rgm_flagged(&cfg) { " (short offset)" } else { "" };
        println!(
            "frame {k:>2}: {:>3} residual cells, {:>3} flagged dynamic, {:>3} labelled{flag}",
            frame.rgm.grid.count_ones(),
            mask.grid.count_ones(),
            truth
        );
    }
    let (_, iou) = suite_iou(&seqs, &masks, &cfg)?;
    println!("static IoU {:.4}  dynamic IoU {:.4}  mean {:.4}", iou.static_iou, iou.dynamic_iou, iou.mean_iou);
    Ok(())
}
