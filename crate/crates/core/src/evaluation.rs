//! Occupancy prediction metrics: MSE, dynamic MSE, image similarity (IS)
//! and static/dynamic IoU, plus per-horizon aggregation.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evidence::classify_mass;
use crate::grid::{CellClass, DynamicMask, Eogm, Grid, Ogm};

/// Probability at or above which a predicted cell counts as occupied.
pub const OCCUPIED_THRESHOLD: f64 = 0.6;
/// Probability at or below which a predicted cell counts as free.
pub const FREE_THRESHOLD: f64 = 0.4;

pub fn mse(pred: &Ogm, target: &Ogm) -> Result<f64> {
    pred.config().ensure_same(target.config())?;
    let n = pred.grid.cells.len() as f64;
    Ok(pred.grid.cells.iter().zip(&target.grid.cells).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n)
}

/// MSE restricted to masked cells; 0 for an empty mask.
pub fn dynamic_mse(pred: &Ogm, target: &Ogm, mask: &DynamicMask) -> Result<f64> {
    pred.config().ensure_same(target.config())?;
    pred.config().ensure_same(mask.config())?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for ((p, t), &m) in pred.grid.cells.iter().zip(&target.grid.cells).zip(&mask.grid.cells) {
        if m {
            sum += (p - t) * (p - t);
            n += 1;
        }
    }
    Ok(if n == 0 { 0.0 } else { sum / n as f64 })
}

/// Discretizes predicted probabilities into occupied / free / unknown.
pub fn ogm_classes(ogm: &Ogm) -> Grid<CellClass> {
    ogm.grid.map(|p| {
        if p >= OCCUPIED_THRESHOLD {
            CellClass::Occupied
        } else if p <= FREE_THRESHOLD {
            CellClass::Free
        } else {
            CellClass::Occluded
        }
    })
}

pub fn eogm_classes(eogm: &Eogm) -> Grid<CellClass> {
    eogm.grid.map(classify_mass)
}

/// Manhattan distance from every cell to the nearest cell of `class`, by
/// multi-source breadth-first search. `None` when the class is absent.
fn distance_field(grid: &Grid<CellClass>, class: CellClass) -> Option<Vec<u32>> {
    let cfg = grid.config;
    let (w, h) = (cfg.width as usize, cfg.height as usize);
    let mut dist = vec![u32::MAX; grid.cells.len()];
    let mut queue = VecDeque::new();
    for (i, &c) in grid.cells.iter().enumerate() {
        if c == class {
            dist[i] = 0;
            queue.push_back(i);
        }
    }
    if queue.is_empty() {
        return None;
    }
    while let Some(i) = queue.pop_front() {
        let d = dist[i] + 1;
        let (r, c) = (i / w, i % w);
        let mut relax = |j: usize| {
            if dist[j] > d {
                dist[j] = d;
                queue.push_back(j);
            }
        };
        if r > 0 {
            relax(i - w);
        }
        if r + 1 < h {
            relax(i + w);
        }
        if c > 0 {
            relax(i - 1);
        }
        if c + 1 < w {
            relax(i + 1);
        }
    }
    Some(dist)
}

/// Mean over `a`'s cells of class `class` of the distance to the nearest
/// same-class cell of `b`.
fn directed_class_distance(a: &Grid<CellClass>, b: &Grid<CellClass>, class: CellClass) -> f64 {
    let members: Vec<usize> = (0..a.cells.len()).filter(|&i| a.cells[i] == class).collect();
    if members.is_empty() {
        return 0.0;
    }
    match distance_field(b, class) {
        None => (a.config.width + a.config.height) as f64,
        Some(dist) => {
            let total: u64 = members.iter().map(|&i| dist[i] as u64).sum();
            total as f64 / members.len() as f64
        }
    }
}

/// Symmetrized mean nearest same-class Manhattan distance, summed over the
/// three classes. Lower is better; identical grids score 0.
pub fn image_similarity(pred: &Grid<CellClass>, target: &Grid<CellClass>) -> Result<f64> {
    pred.config.ensure_same(&target.config)?;
    Ok(CellClass::ALL
        .iter()
        .map(|&c| directed_class_distance(pred, target, c) + directed_class_distance(target, pred, c))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IouScores {
    pub static_iou: f64,
    pub dynamic_iou: f64,
    pub mean_iou: f64,
}

/// Intersection and union counts for both mask classes.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IouCounts {
    pub dyn_inter: u64,
    pub dyn_union: u64,
    pub stat_inter: u64,
    pub stat_union: u64,
}

impl IouCounts {
    pub fn of(pred: &DynamicMask, truth: &DynamicMask) -> Result<Self> {
        pred.config().ensure_same(truth.config())?;
        let mut c = IouCounts::default();
        for (&p, &t) in pred.grid.cells.iter().zip(&truth.grid.cells) {
            c.dyn_inter += (p && t) as u64;
            c.dyn_union += (p || t) as u64;
            c.stat_inter += (!p && !t) as u64;
            c.stat_union += (!p || !t) as u64;
        }
        Ok(c)
    }

    pub fn add(&mut self, other: &IouCounts) {
        self.dyn_inter += other.dyn_inter;
        self.dyn_union += other.dyn_union;
        self.stat_inter += other.stat_inter;
        self.stat_union += other.stat_union;
    }

    pub fn scores(&self) -> IouScores {
        let ratio = |i: u64, u: u64| if u == 0 { 1.0 } else { i as f64 / u as f64 };
        let static_iou = ratio(self.stat_inter, self.stat_union);
        let dynamic_iou = ratio(self.dyn_inter, self.dyn_union);
        IouScores { static_iou, dynamic_iou, mean_iou: (static_iou + dynamic_iou) / 2.0 }
    }
}

/// IoU of the dynamic cells and of the static cells; an empty union scores 1.
pub fn mask_iou(pred: &DynamicMask, truth: &DynamicMask) -> Result<IouScores> {
    Ok(IouCounts::of(pred, truth)?.scores())
}

/// One predicted sequence with its ground truth.
#[derive(Debug, Clone)]
pub struct EvalSample {
    pub predicted: Vec<Ogm>,
    pub truth: Vec<Eogm>,
    /// Ground-truth dynamic masks at the target times.
    pub truth_masks: Vec<DynamicMask>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mse_per_step: Vec<f64>,
    pub dynamic_mse_per_step: Vec<f64>,
    pub is_per_step: Vec<f64>,
    pub mse_avg: f64,
    pub dynamic_mse_avg: f64,
    pub is_avg: f64,
    /// Standard error over samples of each sample's horizon-averaged metric.
    pub mse_stderr: f64,
    pub dynamic_mse_stderr: f64,
    pub is_stderr: f64,
    pub iou_static: Option<f64>,
    pub iou_dynamic: Option<f64>,
    pub iou_mean: Option<f64>,
    pub samples: usize,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn stderr(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
    (var / v.len() as f64).sqrt()
}

struct SampleMetrics {
    mse: Vec<f64>,
    dyn_mse: Vec<f64>,
    is: Vec<f64>,
}

fn sample_metrics(s: &EvalSample, horizon: usize) -> Result<SampleMetrics> {
    if s.predicted.len() != horizon || s.truth.len() != horizon || s.truth_masks.len() != horizon {
        return Err(Error::Alignment(format!(
            "sample has {} predictions, {} targets and {} masks for horizon {horizon}",
            s.predicted.len(),
            s.truth.len(),
            s.truth_masks.len()
        )));
    }
    let mut out = SampleMetrics {
        mse: Vec::with_capacity(horizon),
        dyn_mse: Vec::with_capacity(horizon),
        is: Vec::with_capacity(horizon),
    };
    for ((pred, truth), mask) in s.predicted.iter().zip(&s.truth).zip(&s.truth_masks) {
        let target = truth.to_ogm();
        out.mse.push(mse(pred, &target)?);
        out.dyn_mse.push(dynamic_mse(pred, &target, mask)?);
        out.is.push(image_similarity(&ogm_classes(pred), &eogm_classes(truth))?);
    }
    Ok(out)
}

/// Per-step metrics averaged over samples, then over steps. `mask_pairs`
/// holds (predicted, ground-truth) segmentation masks; their counts are
/// pooled into one IoU.
pub fn evaluate(samples: &[EvalSample], mask_pairs: &[(DynamicMask, DynamicMask)]) -> Result<MetricReport> {
    let horizon =
        samples.first().map(|s| s.predicted.len()).ok_or_else(|| Error::Alignment("no samples to evaluate".into()))?;
    if horizon == 0 {
        return Err(Error::Alignment("empty prediction horizon".into()));
    }
    let per_sample = samples.iter().map(|s| sample_metrics(s, horizon)).collect::<Result<Vec<_>>>()?;

    let n = per_sample.len() as f64;
    let step_mean = |f: &dyn Fn(&SampleMetrics) -> &Vec<f64>| -> Vec<f64> {
        (0..horizon).map(|k| per_sample.iter().map(|m| f(m)[k]).sum::<f64>() / n).collect()
    };
    let mse_per_step = step_mean(&|m| &m.mse);
    let dynamic_mse_per_step = step_mean(&|m| &m.dyn_mse);
    let is_per_step = step_mean(&|m| &m.is);

    let sample_avgs =
        |f: &dyn Fn(&SampleMetrics) -> &Vec<f64>| -> Vec<f64> { per_sample.iter().map(|m| mean(f(m))).collect() };

    let iou = if mask_pairs.is_empty() {
        None
    } else {
        let mut counts = IouCounts::default();
        for (p, t) in mask_pairs {
            counts.add(&IouCounts::of(p, t)?);
        }
        Some(counts.scores())
    };

    Ok(MetricReport {
        mse_avg: mean(&mse_per_step),
        dynamic_mse_avg: mean(&dynamic_mse_per_step),
        is_avg: mean(&is_per_step),
        mse_stderr: stderr(&sample_avgs(&|m| &m.mse)),
        dynamic_mse_stderr: stderr(&sample_avgs(&|m| &m.dyn_mse)),
        is_stderr: stderr(&sample_avgs(&|m| &m.is)),
        mse_per_step,
        dynamic_mse_per_step,
        is_per_step,
        iou_static: iou.map(|s| s.static_iou),
        iou_dynamic: iou.map(|s| s.dynamic_iou),
        iou_mean: iou.map(|s| s.mean_iou),
        samples: samples.len(),
    })
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text table: one row per step, then the averages.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>5}  {:>12}  {:>12}  {:>10}", "step", "mse", "dyn_mse", "is");
        for k in 0..self.mse_per_step.len() {
            let _ = writeln!(
                s,
                "{:>5}  {:>12.6}  {:>12.6}  {:>10.4}",
                k + 1,
                self.mse_per_step[k],
                self.dynamic_mse_per_step[k],
                self.is_per_step[k]
            );
        }
        let _ =
            writeln!(s, "{:>5}  {:>12.6}  {:>12.6}  {:>10.4}", "avg", self.mse_avg, self.dynamic_mse_avg, self.is_avg);
        let _ = writeln!(
            s,
            "{:>5}  {:>12.6}  {:>12.6}  {:>10.4}",
            "se", self.mse_stderr, self.dynamic_mse_stderr, self.is_stderr
        );
        match (self.iou_static, self.iou_dynamic, self.iou_mean) {
            (Some(st), Some(dy), Some(me)) => {
                let _ = writeln!(s, "iou static {st:.4}  dynamic {dy:.4}  mean {me:.4}");
            }
            _ => {
                let _ = writeln!(s, "iou n/a");
            }
        }
        let _ = writeln!(s, "samples {}", self.samples);
        s
    }
}
