//! End-to-end helpers tying the simulator, representation, segmentation,
//! prediction and evaluation stages together.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluation::{EvalSample, IouCounts, IouScores};
use crate::grid::{DynamicMask, Ogm, Pose2, Rgm, Sgm};
use crate::prediction::{persistence_baseline, predict, HistoryFrame, PredictorConfig};
use crate::representation::{build_sequence, FrameRepr, RepresentationConfig};
use crate::segmentation::{segment_heuristic, segment_learned, HeuristicParams, SegModel};
use crate::sim::{Dataset, Sequence};

/// Representations of one sequence next to its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ReprSequence {
    pub name: String,
    pub frames: Vec<FrameRepr>,
    /// Footprint masks of moving agents, one per frame.
    pub gt_masks: Vec<DynamicMask>,
    /// Cells with returns from moving agents, one per frame.
    pub point_masks: Vec<DynamicMask>,
}

impl ReprSequence {
    pub fn poses(&self) -> Vec<Pose2> {
        self.frames.iter().map(|f| f.sgm.pose).collect()
    }
}

pub fn represent_sequence(seq: &Sequence, config: &RepresentationConfig) -> Result<ReprSequence> {
    let clouds: Vec<_> = seq.frames.iter().map(|f| f.cloud.clone()).collect();
    Ok(ReprSequence {
        name: seq.name.clone(),
        frames: build_sequence(&clouds, config)?,
        gt_masks: seq.frames.iter().map(|f| f.gt_mask.clone()).collect(),
        point_masks: seq.frames.iter().map(|f| f.point_mask.clone()).collect(),
    })
}

/// Representations of every sequence, built in parallel.
pub fn represent_dataset(dataset: &Dataset, config: &RepresentationConfig) -> Result<Vec<ReprSequence>> {
    dataset.sequences.par_iter().map(|s| represent_sequence(s, config)).collect()
}

#[derive(Debug, Clone, Copy)]
pub enum Segmenter<'a> {
    Heuristic(HeuristicParams),
    Learned { model: &'a SegModel, threshold: f64 },
}

impl Segmenter<'_> {
    pub fn segment(&self, sgm: &Sgm, rgm: &Rgm) -> Result<DynamicMask> {
        match self {
            Segmenter::Heuristic(p) => segment_heuristic(sgm, rgm, p),
            Segmenter::Learned { model, threshold } => segment_learned(model, sgm, rgm, *threshold),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Segmenter::Heuristic(_) => "heuristic",
            Segmenter::Learned { .. } => "learned",
        }
    }
}

pub fn segment_sequence(seq: &ReprSequence, segmenter: &Segmenter) -> Result<Vec<DynamicMask>> {
    seq.frames.iter().map(|f| segmenter.segment(&f.sgm, &f.rgm)).collect()
}

pub fn segment_all(seqs: &[ReprSequence], segmenter: &Segmenter) -> Result<Vec<Vec<DynamicMask>>> {
    seqs.par_iter().map(|s| segment_sequence(s, segmenter)).collect()
}

/// Pooled IoU of one sequence against its point masks over frames whose RGM
/// spans the full configured offset.
pub fn sequence_iou(seq: &ReprSequence, masks: &[DynamicMask], config: &RepresentationConfig) -> Result<IouScores> {
    if masks.len() != seq.frames.len() {
        return Err(Error::Alignment(format!("{}: {} masks for {} frames", seq.name, masks.len(), seq.frames.len())));
    }
    let mut counts = IouCounts::default();
    for ((f, pred), truth) in seq.frames.iter().zip(masks).zip(&seq.point_masks) {
        if !f.rgm_flagged(config) {
            counts.add(&IouCounts::of(pred, truth)?);
        }
    }
    Ok(counts.scores())
}

/// Per-sequence IoU and its average over sequences.
pub fn suite_iou(
    seqs: &[ReprSequence],
    masks: &[Vec<DynamicMask>],
    config: &RepresentationConfig,
) -> Result<(Vec<IouScores>, IouScores)> {
    if seqs.len() != masks.len() {
        return Err(Error::Alignment(format!("{} mask sequences for {} sequences", masks.len(), seqs.len())));
    }
    let per: Vec<IouScores> = seqs.iter().zip(masks).map(|(s, m)| sequence_iou(s, m, config)).collect::<Result<_>>()?;
    let n = per.len().max(1) as f64;
    let static_iou = per.iter().map(|s| s.static_iou).sum::<f64>() / n;
    let dynamic_iou = per.iter().map(|s| s.dynamic_iou).sum::<f64>() / n;
    Ok((per, IouScores { static_iou, dynamic_iou, mean_iou: (static_iou + dynamic_iou) / 2.0 }))
}

/// Segmenter training triples from frames with full-offset RGMs, labelled by
/// point masks.
pub fn training_set(seqs: &[ReprSequence], config: &RepresentationConfig) -> Vec<(Sgm, Rgm, DynamicMask)> {
    seqs.iter()
        .flat_map(|s| {
            s.frames
                .iter()
                .zip(&s.point_masks)
                .filter(|(f, _)| !f.rgm_flagged(config))
                .map(|(f, m)| (f.sgm.clone(), f.rgm.clone(), m.clone()))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictMode {
    DoubleProng,
    Persistence,
}

/// Predicts the frames after the first `past_frames` of a sequence using the
/// recorded future ego poses.
pub fn predict_sequence(
    seq: &ReprSequence,
    masks: &[DynamicMask],
    cfg: &PredictorConfig,
    mode: PredictMode,
) -> Result<Vec<Ogm>> {
    let past = cfg.sequence.past_frames;
    let horizon = cfg.sequence.horizon;
    if seq.frames.len() < past + horizon || masks.len() < past {
        return Err(Error::Alignment(format!(
            "{}: need {} frames and {past} masks, have {} and {}",
            seq.name,
            past + horizon,
            seq.frames.len(),
            masks.len()
        )));
    }
    let history: Vec<HistoryFrame> = seq.frames[..past]
        .iter()
        .zip(masks)
        .map(|(f, m)| HistoryFrame { eogm: f.eogm.clone(), mask: m.clone() })
        .collect();
    let future: Vec<Pose2> = seq.frames[past..past + horizon].iter().map(|f| f.sgm.pose).collect();
    match mode {
        PredictMode::DoubleProng => predict(&history, Some(&future), cfg),
        PredictMode::Persistence => persistence_baseline(&history, Some(&future), cfg),
    }
}

/// Ground truth for a prediction: fused eOGMs and footprint masks at the
/// predicted frames.
pub fn eval_sample(seq: &ReprSequence, predicted: Vec<Ogm>, cfg: &PredictorConfig) -> Result<EvalSample> {
    let past = cfg.sequence.past_frames;
    let end = past + predicted.len();
    if seq.frames.len() < end {
        return Err(Error::Alignment(format!(
            "{}: {} predictions need {end} frames, have {}",
            seq.name,
            predicted.len(),
            seq.frames.len()
        )));
    }
    Ok(EvalSample {
        predicted,
        truth: seq.frames[past..end].iter().map(|f| f.eogm.clone()).collect(),
        truth_masks: seq.gt_masks[past..end].to_vec(),
    })
}

/// Predictions for every sequence, evaluated against its ground truth.
pub fn prediction_samples(
    seqs: &[ReprSequence],
    masks: &[Vec<DynamicMask>],
    cfg: &PredictorConfig,
    mode: PredictMode,
) -> Result<Vec<EvalSample>> {
    if seqs.len() != masks.len() {
        return Err(Error::Alignment(format!("{} mask sequences for {} sequences", masks.len(), seqs.len())));
    }
    seqs.par_iter().zip(masks).map(|(s, m)| eval_sample(s, predict_sequence(s, m, cfg, mode)?, cfg)).collect()
}

/// The footprint masks of every sequence.
pub fn gt_masks(seqs: &[ReprSequence]) -> Vec<Vec<DynamicMask>> {
    seqs.iter().map(|s| s.gt_masks.clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{Agent, SensorSpec, StaticShape, Trajectory, WorldSpec};

    fn scene() -> Dataset {
        let spec = WorldSpec {
            static_shapes: vec![StaticShape::Wall { from: [-50.0, 6.105], to: [50.0, 6.105] }],
            agents: vec![Agent {
                length: 4.5,
                width: 1.98,
                trajectory: Trajectory::straight([20.0, 3.465], [-100.0, 3.465], 8.0),
            }],
            ego: Trajectory::stationary(0.0, 0.0, 0.0),
            sensor: SensorSpec::default(),
            seed: 11,
            ground_points: false,
        };
        Dataset::from_spec(&spec, 20, &RepresentationConfig::default()).unwrap()
    }

    #[test]
    fn moving_car_is_segmented_and_predicted() {
        let cfg = RepresentationConfig::default();
        let seqs = represent_dataset(&scene(), &cfg).unwrap();
        let masks = segment_all(&seqs, &Segmenter::Heuristic(HeuristicParams::default())).unwrap();
        let (_, avg) = suite_iou(&seqs, &masks, &cfg).unwrap();
        assert!(avg.dynamic_iou > 0.5, "{avg:?}");
        let pcfg = PredictorConfig::default();
        let dp = prediction_samples(&seqs, &masks, &pcfg, PredictMode::DoubleProng).unwrap();
        let pb = prediction_samples(&seqs, &masks, &pcfg, PredictMode::Persistence).unwrap();
        let a = crate::evaluation::evaluate(&dp, &[]).unwrap();
        let b = crate::evaluation::evaluate(&pb, &[]).unwrap();
        assert_eq!(a.mse_per_step.len(), 15);
        assert!(a.mse_avg < b.mse_avg, "{} vs {}", a.mse_avg, b.mse_avg);
    }

    #[test]
    fn short_sequence_is_misaligned() {
        let cfg = RepresentationConfig::default();
        let mut seqs = represent_dataset(&scene(), &cfg).unwrap();
        seqs[0].frames.truncate(10);
        let masks = gt_masks(&seqs);
        let err = predict_sequence(&seqs[0], &masks[0], &PredictorConfig::default(), PredictMode::DoubleProng);
        assert!(matches!(err, Err(Error::Alignment(_))));
    }
}
