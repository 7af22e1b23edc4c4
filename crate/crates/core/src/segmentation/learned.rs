use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{self, SegModelFile};
use crate::grid::{Cell, CellClass, DynamicMask, GridConfig, Rgm, Sgm};

/// Logistic unit over a `(2k+1)^2` patch of four channels: one-hot
/// free/occupied/occluded followed by the RGM bit. The bias is stored last.
#[derive(Debug, Clone, PartialEq)]
pub struct SegModel {
    pub half_width: usize,
    pub weights: Vec<f64>,
    pub trained_epochs: usize,
}

pub fn feature_len(half_width: usize) -> usize {
    let side = 2 * half_width + 1;
    side * side * 4
}

impl SegModel {
    pub fn zeros(half_width: usize) -> Self {
        Self { half_width, weights: vec![0.0; feature_len(half_width) + 1], trained_epochs: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let want = feature_len(self.half_width) + 1;
        if self.weights.len() != want {
            return Err(Error::LengthMismatch { expected: want, actual: self.weights.len() });
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig("model weights must be finite".into()));
        }
        Ok(())
    }

    fn bias(&self) -> f64 {
        *self.weights.last().unwrap_or(&0.0)
    }

    fn score(&self, features: &[f64]) -> f64 {
        let n = features.len();
        self.weights[..n].iter().zip(features).map(|(w, x)| w * x).sum::<f64>() + self.bias()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegTrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Weight on the dynamic class in the loss. `None` uses the ratio of
    /// sampled static to dynamic training cells.
    pub positive_class_weight: Option<f64>,
    pub threshold: f64,
    pub half_width: usize,
    /// Multiplicative step decay per epoch.
    pub lr_decay: f64,
    pub seed: u64,
}

impl Default for SegTrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 60,
            positive_class_weight: None,
            threshold: 0.5,
            half_width: 5,
            lr_decay: 0.97,
            seed: 0,
        }
    }
}

impl SegTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be positive".into()));
        }
        if self.epochs < 1 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig("threshold must lie in (0, 1)".into()));
        }
        if let Some(w) = self.positive_class_weight {
            if !(w > 0.0) {
                return Err(Error::InvalidConfig("positive_class_weight must be positive".into()));
            }
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidConfig("lr_decay must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Patch features around `cell`. Positions outside the grid read as
/// occluded with no residual.
pub fn extract_features(sgm: &Sgm, rgm: &Rgm, cell: Cell, half_width: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(feature_len(half_width));
    push_features(sgm, rgm, cell, half_width, &mut out);
    out
}

fn push_features(sgm: &Sgm, rgm: &Rgm, cell: Cell, k: usize, out: &mut Vec<f64>) {
    let cfg = sgm.grid.config;
    let k = k as i64;
    for dr in -k..=k {
        for dc in -k..=k {
            let (r, c) = (cell.row as i64 + dr, cell.col as i64 + dc);
            let (class, hit) = if cfg.contains(r, c) {
                let p = Cell::new(r as usize, c as usize);
                (sgm.grid.get(p), rgm.grid.get(p))
            } else {
                (CellClass::Occluded, false)
            };
            out.push((class == CellClass::Free) as u8 as f64);
            out.push((class == CellClass::Occupied) as u8 as f64);
            out.push((class == CellClass::Occluded) as u8 as f64);
            out.push(hit as u8 as f64);
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Probability that the patch centre is dynamic.
pub fn forward(model: &SegModel, features: &[f64]) -> Result<f64> {
    let want = feature_len(model.half_width);
    if features.len() != want || model.weights.len() != want + 1 {
        return Err(Error::LengthMismatch { expected: want, actual: features.len() });
    }
    Ok(sigmoid(model.score(features)))
}

/// Class-weighted binary cross-entropy of one sample.
pub fn weighted_loss(model: &SegModel, features: &[f64], label: bool, pos_weight: f64) -> f64 {
    let z = model.score(features);
    if label {
        pos_weight * softplus(-z)
    } else {
        softplus(z)
    }
}

/// d loss / d score.
fn score_gradient(z: f64, label: bool, pos_weight: f64) -> f64 {
    let p = sigmoid(z);
    if label {
        pos_weight * (p - 1.0)
    } else {
        p
    }
}

/// Largest relative disagreement between the analytic loss gradient and
/// central differences with step `epsilon`.
pub fn gradient_check(model: &SegModel, features: &[f64], label: bool, pos_weight: f64, epsilon: f64) -> f64 {
    let g = score_gradient(model.score(features), label, pos_weight);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    for i in 0..model.weights.len() {
        let analytic = if i < features.len() { g * features[i] } else { g };
        let w = probe.weights[i];
        probe.weights[i] = w + epsilon;
        let up = weighted_loss(&probe, features, label, pos_weight);
        probe.weights[i] = w - epsilon;
        let down = weighted_loss(&probe, features, label, pos_weight);
        probe.weights[i] = w;
        let numeric = (up - down) / (2.0 * epsilon);
        let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-12);
        worst = worst.max(rel);
    }
    worst
}

struct Sample {
    features: Vec<f64>,
    label: bool,
}

/// Every dynamic occupied cell of a frame plus an equal number of uniformly
/// drawn static occupied cells (at least `MIN_STATIC`, when available).
fn sample_frame(sgm: &Sgm, rgm: &Rgm, labels: &DynamicMask, k: usize, rng: &mut ChaCha8Rng, out: &mut Vec<Sample>) {
    const MIN_STATIC: usize = 4;
    let cfg = sgm.grid.config;
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for i in 0..cfg.cell_count() {
        if sgm.grid.cells[i] != CellClass::Occupied {
            continue;
        }
        if labels.grid.cells[i] {
            positives.push(cfg.cell_of(i));
        } else {
            negatives.push(cfg.cell_of(i));
        }
    }
    let n_neg = positives.len().max(MIN_STATIC).min(negatives.len());
    negatives.shuffle(rng);
    negatives.truncate(n_neg);
    negatives.sort_unstable();
    for (cells, label) in [(positives, true), (negatives, false)] {
        for cell in cells {
            out.push(Sample { features: extract_features(sgm, rgm, cell, k), label });
        }
    }
}

/// Held-out losses recorded during training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub held_out_loss: Vec<f64>,
    pub best_epoch: usize,
    pub positive_class_weight: f64,
    pub train_samples: usize,
    pub held_out_samples: usize,
}

pub fn train(dataset: &[(Sgm, Rgm, DynamicMask)], cfg: &SegTrainConfig) -> Result<SegModel> {
    train_with_log(dataset, cfg).map(|(m, _)| m)
}

/// Per-sample SGD on the class-weighted cross-entropy. One frame in ten is
/// held out (none for single-frame datasets, which then monitor the training
/// loss); the model with the lowest held-out loss is returned.
pub fn train_with_log(dataset: &[(Sgm, Rgm, DynamicMask)], cfg: &SegTrainConfig) -> Result<(SegModel, TrainLog)> {
    cfg.validate()?;
    let first = dataset.first().ok_or(Error::EmptyDataset)?;
    let grid: GridConfig = first.0.grid.config;
    for (sgm, rgm, mask) in dataset {
        grid.ensure_same(sgm.config())?;
        grid.ensure_same(&rgm.grid.config)?;
        grid.ensure_same(mask.config())?;
    }
    let k = cfg.half_width;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut rng);
    let n_held = if dataset.len() >= 2 { dataset.len().div_ceil(10) } else { 0 };
    let (held_idx, train_idx) = order.split_at(n_held);
    let mut held_idx = held_idx.to_vec();
    let mut train_idx = train_idx.to_vec();
    held_idx.sort_unstable();
    train_idx.sort_unstable();

    let mut train_set = Vec::new();
    for &i in &train_idx {
        let (sgm, rgm, mask) = &dataset[i];
        sample_frame(sgm, rgm, mask, k, &mut rng, &mut train_set);
    }
    let mut held_set = Vec::new();
    for &i in &held_idx {
        let (sgm, rgm, mask) = &dataset[i];
        sample_frame(sgm, rgm, mask, k, &mut rng, &mut held_set);
    }

    let n_pos = train_set.iter().filter(|s| s.label).count();
    let n_neg = train_set.len() - n_pos;
    let pos_weight =
        cfg.positive_class_weight.unwrap_or(if n_pos > 0 && n_neg > 0 { n_neg as f64 / n_pos as f64 } else { 1.0 });

    let monitor: &[Sample] = if held_set.is_empty() { &train_set } else { &held_set };
    let mean_loss = |model: &SegModel| -> f64 {
        if monitor.is_empty() {
            return 0.0;
        }
        monitor.iter().map(|s| weighted_loss(model, &s.features, s.label, pos_weight)).sum::<f64>()
            / monitor.len() as f64
    };

    let mut model = SegModel::zeros(k);
    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut visit: Vec<usize> = (0..train_set.len()).collect();
    let bias_idx = model.weights.len() - 1;
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate * cfg.lr_decay.powi(epoch as i32);
        visit.shuffle(&mut rng);
        for &i in &visit {
            let s = &train_set[i];
            let g = score_gradient(model.score(&s.features), s.label, pos_weight);
            let step = lr * g;
            for (w, x) in model.weights[..bias_idx].iter_mut().zip(&s.features) {
                if *x != 0.0 {
                    *w -= step * x;
                }
            }
            model.weights[bias_idx] -= step;
        }
        model.trained_epochs = epoch + 1;
        let loss = mean_loss(&model);
        losses.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best = model.clone();
            best_epoch = epoch;
        }
    }
    Ok((
        best,
        TrainLog {
            held_out_loss: losses,
            best_epoch,
            positive_class_weight: pos_weight,
            train_samples: train_set.len(),
            held_out_samples: held_set.len(),
        },
    ))
}

/// Thresholds per-cell probabilities; cells that are not occupied stay 0.
pub fn segment_learned(model: &SegModel, sgm: &Sgm, rgm: &Rgm, threshold: f64) -> Result<DynamicMask> {
    sgm.config().ensure_same(&rgm.grid.config)?;
    model.validate()?;
    let cfg = sgm.grid.config;
    let mut mask = DynamicMask::empty(cfg);
    let mut feats = Vec::with_capacity(feature_len(model.half_width));
    for i in 0..cfg.cell_count() {
        if sgm.grid.cells[i] != CellClass::Occupied {
            continue;
        }
        feats.clear();
        push_features(sgm, rgm, cfg.cell_of(i), model.half_width, &mut feats);
        if sigmoid(model.score(&feats)) >= threshold {
            mask.grid.cells[i] = true;
        }
    }
    Ok(mask)
}

pub fn write_model(path: &Path, model: &SegModel) -> Result<()> {
    model.validate()?;
    format::write_bytes(
        path,
        &format::encode_seg_model(&SegModelFile {
            half_width: model.half_width as u32,
            weights: model.weights.clone(),
        }),
    )
}

pub fn read_model(path: &Path) -> Result<SegModel> {
    let raw = format::decode_seg_model(&format::read_bytes(path)?, &path.display().to_string())?;
    Ok(SegModel { half_width: raw.half_width as usize, weights: raw.weights, trained_epochs: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, Pose2};
    use rand::Rng;

    #[test]
    fn single_cell_features() {
        let cfg = GridConfig::new(3, 3, 0.33).unwrap();
        let mut sgm = Sgm::occluded(cfg, Pose2::default(), 0.0);
        let mut rgm = Rgm { grid: Grid::filled(cfg, false) };
        sgm.grid.set(Cell::new(1, 1), CellClass::Occupied);
        rgm.grid.set(Cell::new(1, 1), true);
        assert_eq!(extract_features(&sgm, &rgm, Cell::new(1, 1), 0), vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(extract_features(&sgm, &rgm, Cell::new(0, 0), 0), vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn corner_patch_pads_with_occluded() {
        let cfg = GridConfig::new(4, 4, 0.33).unwrap();
        let mut sgm = Sgm::occluded(cfg, Pose2::default(), 0.0);
        sgm.grid.cells.iter_mut().for_each(|c| *c = CellClass::Free);
        let rgm = Rgm { grid: Grid::filled(cfg, true) };
        let f = extract_features(&sgm, &rgm, Cell::new(0, 0), 1);
        assert_eq!(f.len(), 36);
        let outside = f.chunks(4).filter(|ch| ch == &[0.0, 0.0, 1.0, 0.0]).count();
        assert_eq!(outside, 5);
        let inside = f.chunks(4).filter(|ch| ch == &[1.0, 0.0, 0.0, 1.0]).count();
        assert_eq!(inside, 4);
    }

    #[test]
    fn forward_examples() {
        let m = SegModel::zeros(0);
        assert_eq!(forward(&m, &[0.0; 4]).unwrap(), 0.5);
        let mut sat = SegModel::zeros(0);
        sat.weights[4] = 30.0;
        assert!(forward(&sat, &[0.0; 4]).unwrap() > 1.0 - 1e-9);
        assert!(matches!(forward(&m, &[0.0; 5]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn forward_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let mut m = SegModel::zeros(1);
            m.weights.iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
            let x: Vec<f64> = (0..36).map(|_| rng.random_range(0.0..1.0)).collect();
            let z = m.weights[36] + m.weights.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>();
            let expected = 1.0 / (1.0 + (-z).exp());
            assert!((forward(&m, &x).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_features_only_move_bias() {
        let mut m = SegModel::zeros(1);
        m.weights.iter_mut().enumerate().for_each(|(i, w)| *w = 0.01 * i as f64);
        let x = vec![0.0; 36];
        let g = score_gradient(m.score(&x), true, 2.0);
        assert!(g != 0.0);
        assert!(gradient_check(&m, &x, true, 2.0, 1e-5) < 1e-4);
        assert!(gradient_check(&m, &x, false, 2.0, 1e-5) < 1e-4);
    }

    #[test]
    fn zero_epochs_rejected() {
        let cfg = SegTrainConfig { epochs: 0, ..Default::default() };
        assert!(cfg.validate().is_err());
        let g = GridConfig::new(4, 4, 0.33).unwrap();
        let frame =
            (Sgm::occluded(g, Pose2::default(), 0.0), Rgm { grid: Grid::filled(g, false) }, DynamicMask::empty(g));
        assert!(train(&[frame], &cfg).is_err());
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(matches!(train(&[], &SegTrainConfig::default()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn threshold_one_gives_empty_mask() {
        let g = GridConfig::new(6, 6, 0.33).unwrap();
        let mut sgm = Sgm::occluded(g, Pose2::default(), 0.0);
        sgm.grid.cells.iter_mut().for_each(|c| *c = CellClass::Occupied);
        let rgm = Rgm { grid: Grid::filled(g, true) };
        let mut m = SegModel::zeros(1);
        *m.weights.last_mut().unwrap() = 20.0;
        assert!(segment_learned(&m, &sgm, &rgm, 1.0).unwrap().is_empty());
        assert_eq!(segment_learned(&m, &sgm, &rgm, 0.5).unwrap().grid.count_ones(), 36);
        let occluded = Sgm::occluded(g, Pose2::default(), 0.0);
        assert!(segment_learned(&m, &occluded, &rgm, 0.5).unwrap().is_empty());
    }
}
